//! Prompt scripts: the rule and strategy texts, per-request templates, and the
//! narration that carries game progress from one request to the next.
//!
//! Script texts live in data files under `scripts/` and are used exactly as
//! shipped, typos included. Narration sentences are fixed by the archived log
//! format and must stay byte-exact for replay.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::game_core::{GameOutcome, Location, OutcomeCause, PlayerId, RevealDecision, TurnRecord};

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("cannot read script {name}: {reason}")]
    Load { name: String, reason: String },
    #[error("script {name} is incomplete: {reason}")]
    Incomplete { name: String, reason: String },
    #[error("template error: {0}")]
    Template(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RequestKind {
    AskQuestion,
    AnswerQuestion,
    AccusationPoll,
    HangVote,
    RevealWindow,
    FinalVote,
}

impl RequestKind {
    pub const ALL: [RequestKind; 6] = [
        RequestKind::AskQuestion,
        RequestKind::AnswerQuestion,
        RequestKind::AccusationPoll,
        RequestKind::HangVote,
        RequestKind::RevealWindow,
        RequestKind::FinalVote,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            RequestKind::AskQuestion => "requests/ask_question.txt",
            RequestKind::AnswerQuestion => "requests/answer_question.txt",
            RequestKind::AccusationPoll => "requests/accusation_poll.txt",
            RequestKind::HangVote => "requests/hang_vote.txt",
            RequestKind::RevealWindow => "requests/reveal_window.txt",
            RequestKind::FinalVote => "requests/final_vote.txt",
        }
    }

    /// The answer-format instruction every rendering of this request carries.
    pub fn instruction(self) -> &'static str {
        match self {
            RequestKind::AskQuestion => "Please write your response in the form (n_player,\"question\")",
            RequestKind::AnswerQuestion => "Please write your answer to this question inside the \"\" mark.",
            RequestKind::AccusationPoll => "Please only write numbers or Xs in your response.",
            RequestKind::HangVote => "please enter 0. If not, please enter X.",
            RequestKind::RevealWindow => "Please only answer with a place name or X.",
            RequestKind::FinalVote => "Write the number of the player you want to vote out",
        }
    }

    fn placeholders(self) -> &'static [&'static str] {
        match self {
            RequestKind::AnswerQuestion => &["turn", "asker", "question"],
            RequestKind::HangVote => &["accuser", "accused"],
            RequestKind::FinalVote => &["max_turns", "round"],
            _ => &[],
        }
    }
}

impl fmt::Display for RequestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

pub const RULE_FILE: &str = "rule.txt";
pub const STRATEGY_FILE: &str = "strategy.txt";
pub const SPY_PREAMBLE_FILE: &str = "preamble/spy.txt";
pub const NON_SPY_PREAMBLE_FILE: &str = "preamble/non_spy.txt";

/// Anything scripts can be read from.
pub trait ScriptSource {
    fn read(&self, name: &str) -> Result<String, ScriptError>;
}

/// A `scripts/` directory on disk.
#[derive(Debug, Clone)]
pub struct DirSource {
    root: PathBuf,
}

impl DirSource {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DirSource { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }
}

impl ScriptSource for DirSource {
    fn read(&self, name: &str) -> Result<String, ScriptError> {
        let path = self.root.join(name);
        std::fs::read_to_string(&path).map_err(|e| ScriptError::Load {
            name: path.display().to_string(),
            reason: e.to_string(),
        })
    }
}

/// The script files compiled into the binary.
#[derive(Debug, Clone, Copy, Default)]
pub struct BundledSource;

macro_rules! bundled {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../../../scripts/", $name)))),*]
    };
}

const BUNDLED: &[(&str, &str)] = bundled!(
    "rule.txt",
    "strategy.txt",
    "preamble/spy.txt",
    "preamble/non_spy.txt",
    "requests/ask_question.txt",
    "requests/answer_question.txt",
    "requests/accusation_poll.txt",
    "requests/hang_vote.txt",
    "requests/reveal_window.txt",
    "requests/final_vote.txt",
    "parser/boilerplate.txt",
);

impl ScriptSource for BundledSource {
    fn read(&self, name: &str) -> Result<String, ScriptError> {
        BUNDLED
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, text)| text.to_string())
            .ok_or_else(|| ScriptError::Load {
                name: name.to_string(),
                reason: "not bundled".into(),
            })
    }
}

/// In-memory source, mostly for tests.
impl ScriptSource for BTreeMap<String, String> {
    fn read(&self, name: &str) -> Result<String, ScriptError> {
        self.get(name).cloned().ok_or_else(|| ScriptError::Load {
            name: name.to_string(),
            reason: "not found".into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptSet {
    pub rule_text: String,
    pub strategy_text: String,
    pub request_templates: BTreeMap<RequestKind, String>,
    pub spy_preamble: String,
    pub non_spy_preamble: String,
    /// SHA-256 hex digest of every loaded file, keyed by file name.
    pub checksums: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn trimmed(text: &str) -> &str {
    text.trim_end_matches(['\n', '\r'])
}

pub fn load_scripts(source: &dyn ScriptSource) -> Result<ScriptSet, ScriptError> {
    let mut checksums = BTreeMap::new();
    let mut read = |name: &str| -> Result<String, ScriptError> {
        let text = source.read(name)?;
        if text.trim().is_empty() {
            return Err(ScriptError::Incomplete {
                name: name.into(),
                reason: "file is empty".into(),
            });
        }
        checksums.insert(name.to_string(), sha256_hex(text.as_bytes()));
        Ok(text)
    };
    let rule_text = read(RULE_FILE)?;
    let strategy_text = read(STRATEGY_FILE)?;
    let spy_preamble = read(SPY_PREAMBLE_FILE)?;
    let non_spy_preamble = read(NON_SPY_PREAMBLE_FILE)?;
    let mut request_templates = BTreeMap::new();
    for kind in RequestKind::ALL {
        let text = read(kind.file_name())?;
        if !text.contains(kind.instruction()) {
            return Err(ScriptError::Incomplete {
                name: kind.file_name().into(),
                reason: format!("missing instruction {:?}", kind.instruction()),
            });
        }
        for ph in kind.placeholders() {
            if !text.contains(&format!("{{{ph}}}")) {
                return Err(ScriptError::Incomplete {
                    name: kind.file_name().into(),
                    reason: format!("missing placeholder {{{ph}}}"),
                });
            }
        }
        request_templates.insert(kind, text);
    }
    for (name, text, ph) in [
        (SPY_PREAMBLE_FILE, &spy_preamble, "{player}"),
        (NON_SPY_PREAMBLE_FILE, &non_spy_preamble, "{location}"),
    ] {
        if !text.contains(ph) {
            return Err(ScriptError::Incomplete {
                name: name.into(),
                reason: format!("missing placeholder {ph}"),
            });
        }
    }
    Ok(ScriptSet {
        rule_text,
        strategy_text,
        request_templates,
        spy_preamble,
        non_spy_preamble,
        checksums,
    })
}

impl ScriptSet {
    pub fn bundled() -> Self {
        load_scripts(&BundledSource).expect("bundled scripts are complete")
    }

    pub fn from_dir(dir: impl Into<PathBuf>) -> Result<Self, ScriptError> {
        load_scripts(&DirSource::new(dir))
    }

    pub fn template(&self, kind: RequestKind) -> &str {
        &self.request_templates[&kind]
    }
}

/// Substitutes `{name}` placeholders. Unknown names are an error; values are
/// inserted verbatim and never rescanned.
pub fn fill_template(template: &str, values: &[(&str, String)]) -> Result<String, ScriptError> {
    let mut out = String::with_capacity(template.len() + 64);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let name_len = after
            .find(|c: char| !(c.is_ascii_lowercase() || c == '_'))
            .unwrap_or(after.len());
        if name_len > 0 && after[name_len..].starts_with('}') {
            let name = &after[..name_len];
            let value = values
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| v)
                .ok_or_else(|| ScriptError::Template(format!("no value for placeholder {{{name}}}")))?;
            out.push_str(value);
            rest = &after[name_len + 1..];
        } else {
            out.push('{');
            rest = after;
        }
    }
    out.push_str(rest);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RolePreamble {
    player: PlayerId,
    is_spy: bool,
    location: Option<Location>,
}

impl RolePreamble {
    pub fn new(player: PlayerId, is_spy: bool, location: Option<Location>) -> Result<Self, ScriptError> {
        if is_spy == location.is_some() {
            return Err(ScriptError::Template(
                "a preamble carries the location exactly when the player is not the spy".into(),
            ));
        }
        Ok(RolePreamble {
            player,
            is_spy,
            location,
        })
    }

    pub fn spy(player: PlayerId) -> Self {
        RolePreamble {
            player,
            is_spy: true,
            location: None,
        }
    }

    pub fn non_spy(player: PlayerId, location: Location) -> Self {
        RolePreamble {
            player,
            is_spy: false,
            location: Some(location),
        }
    }

    pub fn player(&self) -> PlayerId {
        self.player
    }

    pub fn is_spy(&self) -> bool {
        self.is_spy
    }
}

pub fn render_preamble(scripts: &ScriptSet, preamble: &RolePreamble) -> String {
    let player = ("player", preamble.player.to_string());
    let filled = match preamble.location {
        Some(loc) => fill_template(
            trimmed(&scripts.non_spy_preamble),
            &[player, ("location", loc.name().to_string())],
        ),
        None => fill_template(trimmed(&scripts.spy_preamble), &[player]),
    };
    filled.expect("preamble placeholders checked at load")
}

/// Phase-specific fields for a request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RequestContext {
    AskQuestion,
    AnswerQuestion {
        turn: u32,
        asker: PlayerId,
        question: String,
    },
    AccusationPoll,
    HangVote {
        accuser: PlayerId,
        accused: PlayerId,
    },
    RevealWindow,
    FinalVote {
        max_turns: u32,
        round: u32,
    },
}

impl RequestContext {
    pub fn kind(&self) -> RequestKind {
        match self {
            RequestContext::AskQuestion => RequestKind::AskQuestion,
            RequestContext::AnswerQuestion { .. } => RequestKind::AnswerQuestion,
            RequestContext::AccusationPoll => RequestKind::AccusationPoll,
            RequestContext::HangVote { .. } => RequestKind::HangVote,
            RequestContext::RevealWindow => RequestKind::RevealWindow,
            RequestContext::FinalVote { .. } => RequestKind::FinalVote,
        }
    }
}

pub fn render_request(scripts: &ScriptSet, kind: RequestKind, ctx: &RequestContext) -> Result<String, ScriptError> {
    if ctx.kind() != kind {
        return Err(ScriptError::Template(format!(
            "{kind} request given {} context",
            ctx.kind()
        )));
    }
    let values: Vec<(&str, String)> = match ctx {
        RequestContext::AnswerQuestion { turn, asker, question } => vec![
            ("turn", turn.to_string()),
            ("asker", asker.to_string()),
            ("question", question.clone()),
        ],
        RequestContext::HangVote { accuser, accused } => {
            vec![("accuser", accuser.to_string()), ("accused", accused.to_string())]
        }
        RequestContext::FinalVote { max_turns, round } => {
            vec![("max_turns", max_turns.to_string()), ("round", round.to_string())]
        }
        _ => Vec::new(),
    };
    fill_template(trimmed(scripts.template(kind)), &values)
}

/// Joins the prompt parts with one blank line, skipping empty parts.
pub fn assemble_prompt(scripts: &ScriptSet, preamble: &str, progress: &str, request: &str) -> String {
    [
        trimmed(&scripts.rule_text),
        trimmed(&scripts.strategy_text),
        preamble,
        progress,
        request,
    ]
    .iter()
    .filter(|part| !part.is_empty())
    .copied()
    .collect::<Vec<_>>()
    .join("\n\n")
}

/// Narration of every event recorded so far. Turns are concatenated with no
/// separator; sentences inside a turn are separated by one space.
pub fn render_progress(transcript: &[TurnRecord]) -> String {
    let mut out = String::new();
    for (i, record) in transcript.iter().enumerate() {
        debug_assert_eq!(record.turn_no as usize, i + 1, "turns are consecutive from 1");
        render_turn(record, &mut out);
    }
    out
}

fn render_turn(record: &TurnRecord, out: &mut String) {
    let Some(answer) = &record.answer else { return };
    out.push_str(&format!(
        "In the {n}th question, player {a} asked player {t} the following.{q} To this question, player {t} responded with the following.\"{ans}\"",
        n = record.turn_no,
        a = record.asker,
        t = record.target,
        q = record.question,
        ans = answer,
    ));
    if record.accusations.is_none() {
        return;
    }
    match record.accusation {
        None => out.push_str(" At the end of this question, no one accused anyone else of being a spy."),
        Some((accuser, accused)) => out.push_str(&format!(
            " At the end of this question, player {accuser} accused player {accused} of being a spy."
        )),
    }
    if let Some(vote) = &record.hang_vote {
        if vote.result == crate::game_core::HangResult::NotHanged {
            out.push_str(&format!(
                " A vote was held on player {}, but the player was not hanged.",
                vote.accused
            ));
        }
    }
    if record.reveal == Some(RevealDecision::Pass) {
        out.push_str(" The spy did not reveal their identity.");
    }
}

/// The closing sentence of a finished game, appended to the narration with
/// no separator.
pub fn terminal_sentence(outcome: &GameOutcome) -> String {
    let s = outcome.subject;
    match outcome.cause {
        OutcomeCause::CorrectGuess => {
            format!("Player {s} reveals that they are the spy, and they guessed the location. The spy wins.")
        }
        OutcomeCause::WrongGuess => format!(
            "Player {s} reveals that they are the spy, but they guessed the wrong location. The spy loses."
        ),
        OutcomeCause::HangedSpy => format!(
            "A vote was held on player {s}, and the player was hanged. Player {s} was the spy. The non-spy players win."
        ),
        OutcomeCause::HangedNonSpy => format!(
            "A vote was held on player {s}, and the player was hanged. Player {s} was not the spy. The spy wins."
        ),
        OutcomeCause::FinalVoteCorrect => format!(
            "In the final vote, player {s} received a majority of the votes. Player {s} was the spy. The non-spy players win."
        ),
        OutcomeCause::FinalVoteWrong => format!(
            "In the final vote, player {s} received a majority of the votes. Player {s} was not the spy. The spy wins."
        ),
    }
}

/// Recovers the cause and subject from a closing sentence.
pub fn parse_terminal_sentence(narration: &str) -> Option<(OutcomeCause, PlayerId)> {
    OutcomeCause::ALL.iter().find_map(|&cause| {
        (1..=crate::game_core::MAX_PLAYERS).find_map(|i| {
            let subject = PlayerId::new(i).ok()?;
            let sentence = terminal_sentence(&GameOutcome::new(cause, subject));
            narration.ends_with(&sentence).then_some((cause, subject))
        })
    })
}

/// Final-vote narration shown to later voters; never archived in the log.
pub fn final_vote_sentence(round: u32, voter: PlayerId, vote: PlayerId, statement: Option<&str>) -> String {
    let mut s = format!(" In the {round}th final vote, player {voter} voted for player {vote}.");
    if let Some(st) = statement {
        s.push_str(&format!(" Their statement was the following.\"{st}\""));
    }
    s
}
