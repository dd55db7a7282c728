//! Archived game records: JSON serialization with a fixed key order, a
//! reader for the older Python-literal dumps, and replay verification.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{Agent, FixedClock, ReplayAgent, RetryPolicy};
use crate::game_core::{
    Accusation, Ballot, GameConfig, GameOutcome, HangResult, Location, OutcomeCause, PlayerId, RevealDecision,
    TurnRecord, Winner, MAX_PLAYERS,
};
use crate::orchestrator::{run_game, GameDriverConfig};
use crate::scripts::{parse_terminal_sentence, render_progress, terminal_sentence, ScriptSet};

#[derive(Debug, Error)]
pub enum GameLogError {
    #[error("malformed log document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid log field '{field}': {reason}")]
    Invariant { field: String, reason: String },
    #[error("legacy log parse error at byte {offset}: {reason}")]
    Legacy { offset: usize, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn invariant<T>(field: impl Into<String>, reason: impl Into<String>) -> Result<T, GameLogError> {
    Err(GameLogError::Invariant {
        field: field.into(),
        reason: reason.into(),
    })
}

mod iso_micros {
    use chrono::{DateTime, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub const FORMAT: &str = "%Y-%m-%dT%H:%M:%S%.6fZ";

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.format(FORMAT).to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let text = String::deserialize(d)?;
        DateTime::parse_from_rfc3339(&text)
            .map(|t| t.with_timezone(&Utc))
            .map_err(serde::de::Error::custom)
    }
}

/// One hang vote. Ballots are the raw tokens: "0" to hang, "X" not to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub turn: u32,
    pub accuser: PlayerId,
    pub accused: PlayerId,
    pub ballots: BTreeMap<PlayerId, String>,
    pub hanged: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalVoteRound {
    pub round: u32,
    pub ballots: BTreeMap<PlayerId, PlayerId>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub statements: BTreeMap<PlayerId, String>,
}

/// Field order matches the archived dumps; the trailing fields are
/// additions that older logs lack.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameLog {
    pub gamecode: String,
    pub spy: PlayerId,
    pub location: Location,
    pub spywin: bool,
    #[serde(with = "iso_micros")]
    pub game_start: DateTime<Utc>,
    #[serde(with = "iso_micros")]
    pub game_end: DateTime<Utc>,
    pub gamelog: String,
    pub votelog: Vec<VoteRecord>,
    pub total_turn: u32,
    pub questions: Vec<(PlayerId, String)>,
    pub answers: Vec<String>,
    pub accuselog: BTreeMap<u32, BTreeMap<PlayerId, String>>,
    #[serde(default)]
    pub aborted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abort_reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reveal_guess: Option<Location>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub finalvotelog: Vec<FinalVoteRound>,
}

fn is_accuse_token(t: &str) -> bool {
    t == "X" || matches!(t.as_bytes(), [b'1'..=b'5'])
}

impl GameLog {
    pub fn validate(&self) -> Result<(), GameLogError> {
        if self.gamecode.is_empty() {
            return invariant("gamecode", "empty");
        }
        if self.game_start > self.game_end {
            return invariant("game_end", "earlier than game_start");
        }
        if self.questions.len() != self.answers.len() && !self.aborted {
            return invariant("answers", "length differs from questions");
        }
        if !self.aborted {
            if self.questions.len() != self.total_turn as usize {
                return invariant(
                    "questions",
                    format!("{} entries for total_turn {}", self.questions.len(), self.total_turn),
                );
            }
            let keys: Vec<u32> = self.accuselog.keys().copied().collect();
            if keys != (1..=self.total_turn).collect::<Vec<_>>() {
                return invariant(
                    "accuselog",
                    format!("turn keys {keys:?} do not cover 1..={}", self.total_turn),
                );
            }
            for (turn, poll) in &self.accuselog {
                if poll.len() != MAX_PLAYERS as usize {
                    return invariant(
                        format!("accuselog.{turn}"),
                        format!("{} entries, expected 5", poll.len()),
                    );
                }
            }
        }
        for (turn, poll) in &self.accuselog {
            if let Some((p, t)) = poll.iter().find(|(_, t)| !is_accuse_token(t)) {
                return invariant(format!("accuselog.{turn}.{p}"), format!("bad token {t:?}"));
            }
        }
        for (i, v) in self.votelog.iter().enumerate() {
            if let Some((p, b)) = v.ballots.iter().find(|(_, b)| *b != "0" && *b != "X") {
                return invariant(format!("votelog.{i}.ballots.{p}"), format!("bad ballot {b:?}"));
            }
            if v.ballots.contains_key(&v.accused) {
                return invariant(format!("votelog.{i}.ballots"), "accused player has a ballot");
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, GameLogError> {
        self.validate()?;
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, GameLogError> {
        let log: GameLog = serde_json::from_str(text)?;
        log.validate()?;
        Ok(log)
    }

    pub fn load(path: &Path) -> Result<Self, GameLogError> {
        let text = fs::read_to_string(path).map_err(|source| GameLogError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Cause and subject, read back from the narration's closing sentence.
    pub fn outcome(&self) -> Option<GameOutcome> {
        parse_terminal_sentence(&self.gamelog).map(|(cause, subject)| GameOutcome::new(cause, subject))
    }

    /// Rebuilds the turn records implied by the logged fields.
    pub fn turn_records(&self) -> Vec<TurnRecord> {
        let outcome = self.outcome();
        let mut asker = PlayerId::new(1).expect("seat 1");
        let mut out = Vec::new();
        for (i, (target, question)) in self.questions.iter().enumerate() {
            let turn_no = i as u32 + 1;
            let accusations: Option<BTreeMap<PlayerId, Accusation>> = self.accuselog.get(&turn_no).map(|poll| {
                poll.iter()
                    .map(|(&p, t)| {
                        let acc = t
                            .parse::<u8>()
                            .ok()
                            .and_then(|d| PlayerId::new(d).ok())
                            .map_or(Accusation::NoAccusation, Accusation::Named);
                        (p, acc)
                    })
                    .collect()
            });
            let vote = self.votelog.iter().find(|v| v.turn == turn_no);
            let hang_vote = vote.map(|v| crate::game_core::HangVote {
                accuser: v.accuser,
                accused: v.accused,
                ballots: v
                    .ballots
                    .iter()
                    .map(|(&p, b)| (p, if b == "0" { Ballot::Hang } else { Ballot::NoHang }))
                    .collect(),
                result: if v.hanged {
                    HangResult::Hanged
                } else {
                    HangResult::NotHanged
                },
            });
            let last = turn_no == self.total_turn;
            let reveal = match outcome.map(|o| o.cause) {
                _ if !last => Some(RevealDecision::Pass),
                Some(OutcomeCause::CorrectGuess) => Some(RevealDecision::Guess(self.location)),
                Some(OutcomeCause::WrongGuess) => self.reveal_guess.map(RevealDecision::Guess),
                Some(OutcomeCause::HangedSpy | OutcomeCause::HangedNonSpy) => None,
                Some(OutcomeCause::FinalVoteCorrect | OutcomeCause::FinalVoteWrong) => Some(RevealDecision::Pass),
                None => None,
            };
            out.push(TurnRecord {
                turn_no,
                asker,
                target: *target,
                question: question.clone(),
                answer: self.answers.get(i).cloned(),
                accusations,
                accusation: vote.map(|v| (v.accuser, v.accused)),
                hang_vote,
                reveal,
            });
            asker = *target;
        }
        out
    }

    /// Narration implied by the logged turns and the recorded outcome.
    pub fn reconstruct_narration(&self) -> String {
        let mut text = render_progress(&self.turn_records());
        if let Some(o) = self.outcome() {
            text.push_str(&terminal_sentence(&o));
        }
        text
    }

    /// Per-player response queues that drive a replay of this game in the
    /// orchestrator's request order.
    pub fn replay_agents(&self) -> BTreeMap<PlayerId, ReplayAgent> {
        let mut queues: BTreeMap<PlayerId, Vec<String>> = PlayerId::all(MAX_PLAYERS).map(|p| (p, Vec::new())).collect();
        let mut push = |p: PlayerId, s: String| queues.entry(p).or_default().push(s);
        let records = self.turn_records();
        for r in &records {
            push(r.asker, format!("({}, \"{}\")", r.target, r.question));
            if let Some(a) = &r.answer {
                push(r.target, format!("\"{a}\""));
            }
            if let Some(poll) = self.accuselog.get(&r.turn_no) {
                for (&p, token) in poll {
                    push(p, token.clone());
                }
            }
            for v in self.votelog.iter().filter(|v| v.turn == r.turn_no) {
                for (&p, b) in &v.ballots {
                    push(p, b.clone());
                }
            }
            match r.reveal {
                Some(RevealDecision::Pass) => push(self.spy, "X".into()),
                Some(RevealDecision::Guess(loc)) => push(self.spy, loc.name().into()),
                None => {}
            }
        }
        for round in &self.finalvotelog {
            for (&p, vote) in &round.ballots {
                let raw = round.statements.get(&p).cloned().unwrap_or_else(|| vote.to_string());
                push(p, raw);
            }
        }
        queues.into_iter().map(|(p, q)| (p, ReplayAgent::new(q))).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatch {
    pub field: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub gamecode: String,
    pub mismatches: Vec<Mismatch>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Byte offset of the first difference, if any.
pub fn first_difference(a: &str, b: &str) -> Option<usize> {
    let common = a.bytes().zip(b.bytes()).take_while(|(x, y)| x == y).count();
    (common < a.len().max(b.len()) || a.len() != b.len()).then_some(common)
}

/// The turn whose narration contains byte `offset`, 0 for none.
fn turn_at(narration: &str, offset: usize) -> u32 {
    let mut turn = 0;
    while narration
        .find(&format!("In the {}th question,", turn + 1))
        .is_some_and(|pos| pos <= offset)
    {
        turn += 1;
    }
    turn
}

/// Replays `log` through the orchestrator and compares the result field by
/// field.
pub fn verify_replay(log: &GameLog, scripts: &ScriptSet) -> VerifyReport {
    let mut report = VerifyReport {
        gamecode: log.gamecode.clone(),
        mismatches: Vec::new(),
    };
    let mut miss = |field: &str, detail: String| {
        report.mismatches.push(Mismatch {
            field: field.into(),
            detail,
        })
    };
    let bindings = log
        .replay_agents()
        .into_iter()
        .map(|(p, a)| (p, Box::new(a) as Box<dyn Agent>))
        .collect();
    let cfg = GameDriverConfig {
        game: GameConfig::new(log.location, log.spy),
        bindings,
        retry: RetryPolicy {
            max_retries: 0,
            ..RetryPolicy::default()
        },
        gamecode: log.gamecode.clone(),
        clock: Box::new(FixedClock(log.game_start)),
    };
    let run = match run_game(cfg, scripts) {
        Ok(run) => run,
        Err(e) => {
            miss("run", e.to_string());
            return report;
        }
    };
    let got = &run.log;
    if got.aborted {
        miss(
            "aborted",
            format!("replay aborted: {}", got.abort_reason.as_deref().unwrap_or("unknown")),
        );
    }
    if got.spywin != log.spywin {
        miss("spywin", format!("archived {}, replayed {}", log.spywin, got.spywin));
    }
    if got.total_turn != log.total_turn {
        miss(
            "total_turn",
            format!("archived {}, replayed {}", log.total_turn, got.total_turn),
        );
    }
    let (want_cause, got_cause) = (log.outcome().map(|o| o.cause), run.outcome.map(|o| o.cause));
    if want_cause != got_cause {
        miss("cause", format!("archived {want_cause:?}, replayed {got_cause:?}"));
    }
    if let Some(offset) = first_difference(&log.gamelog, &got.gamelog) {
        miss(
            "gamelog",
            format!(
                "first difference at byte {offset} (turn {})",
                turn_at(&log.gamelog, offset)
            ),
        );
    }
    if got.votelog != log.votelog {
        miss(
            "votelog",
            format!("archived {} records, replayed {}", log.votelog.len(), got.votelog.len()),
        );
    }
    report
}

/// Winner recorded in the log, `None` for aborted games.
pub fn winner(log: &GameLog) -> Option<Winner> {
    match (log.aborted, log.spywin) {
        (true, _) => None,
        (false, true) => Some(Winner::Spy),
        (false, false) => Some(Winner::NonSpies),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    #[serde(with = "iso_micros")]
    pub created: DateTime<Utc>,
    pub seed: Option<u64>,
    pub config: BTreeMap<String, String>,
    pub script_checksums: BTreeMap<String, String>,
    pub versions: BTreeMap<String, String>,
    pub games: Vec<String>,
}

/// Writes `<dir>/<gamecode>.json` per log plus `<dir>/manifest.json`.
pub fn write_run_dir(dir: &Path, manifest: &RunManifest, logs: &[GameLog]) -> Result<(), GameLogError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| GameLogError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    for log in logs {
        let path = dir.join(format!("{}.json", log.gamecode));
        fs::write(&path, log.to_json()? + "\n").map_err(io(&path))?;
    }
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(manifest)? + "\n").map_err(io(&path))?;
    Ok(())
}

/// Loads every `*.json` log in `dir` except the manifest, sorted by file name.
pub fn load_dir(dir: &Path) -> Result<Vec<GameLog>, GameLogError> {
    let io = |source| GameLogError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json") && p.file_name().is_some_and(|n| n != "manifest.json"))
        .collect();
    paths.sort();
    paths.iter().map(|p| GameLog::load(p)).collect()
}

// Python-literal reader for the older dumps.

#[derive(Debug, Clone, PartialEq)]
enum PyValue {
    Dict(Vec<(PyValue, PyValue)>),
    List(Vec<PyValue>),
    Str(String),
    Int(i64),
    Bool(bool),
    None,
    DateTime(String),
}

struct PyParser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> PyParser<'a> {
    fn fail<T>(&self, reason: impl Into<String>) -> Result<T, GameLogError> {
        Err(GameLogError::Legacy {
            offset: self.pos,
            reason: reason.into(),
        })
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn eat(&mut self, token: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, token: &str) -> Result<(), GameLogError> {
        if self.eat(token) {
            Ok(())
        } else {
            self.fail(format!("expected '{token}'"))
        }
    }

    /// Comma-separated items up to `close`, trailing comma allowed.
    fn items<T>(
        &mut self,
        close: &str,
        mut item: impl FnMut(&mut Self) -> Result<T, GameLogError>,
    ) -> Result<Vec<T>, GameLogError> {
        let mut out = Vec::new();
        loop {
            if self.eat(close) {
                return Ok(out);
            }
            out.push(item(self)?);
            if !self.eat(",") {
                self.expect(close)?;
                return Ok(out);
            }
        }
    }

    fn value(&mut self) -> Result<PyValue, GameLogError> {
        self.skip_ws();
        let rest = self.rest();
        if self.eat("{") {
            let pairs = self.items("}", |p| {
                let k = p.value()?;
                p.expect(":")?;
                Ok((k, p.value()?))
            })?;
            return Ok(PyValue::Dict(pairs));
        }
        if self.eat("[") {
            return self.items("]", Self::value).map(PyValue::List);
        }
        if self.eat("(") {
            return self.items(")", Self::value).map(PyValue::List);
        }
        if rest.starts_with('\'') || rest.starts_with('"') {
            return self.string().map(PyValue::Str);
        }
        for (word, v) in [
            ("True", PyValue::Bool(true)),
            ("False", PyValue::Bool(false)),
            ("None", PyValue::None),
        ] {
            if self.eat(word) {
                return Ok(v);
            }
        }
        if self.eat("datetime.datetime(") {
            return self.datetime();
        }
        let digits = rest
            .char_indices()
            .take_while(|&(i, c)| c.is_ascii_digit() || (i == 0 && c == '-'))
            .count();
        if digits > 0 {
            let n = rest[..digits].parse().or_else(|_| self.fail("bad integer"))?;
            self.pos += digits;
            return Ok(PyValue::Int(n));
        }
        self.fail("unexpected input")
    }

    fn string(&mut self) -> Result<String, GameLogError> {
        let quote = self.rest().chars().next().expect("caller checked");
        self.pos += 1;
        let mut out = String::new();
        let mut chars = self.rest().char_indices();
        while let Some((i, c)) = chars.next() {
            match c {
                c if c == quote => {
                    self.pos += i + 1;
                    return Ok(out);
                }
                '\\' => {
                    let Some((_, e)) = chars.next() else { break };
                    match e {
                        'n' => out.push('\n'),
                        't' => out.push('\t'),
                        'r' => out.push('\r'),
                        '\\' | '\'' | '"' => out.push(e),
                        'x' | 'u' => {
                            let len = if e == 'x' { 2 } else { 4 };
                            let hex: String = chars.by_ref().take(len).map(|(_, h)| h).collect();
                            match u32::from_str_radix(&hex, 16).ok().and_then(char::from_u32) {
                                Some(ch) => out.push(ch),
                                None => return self.fail(format!("bad escape \\{e}{hex}")),
                            }
                        }
                        other => {
                            out.push('\\');
                            out.push(other);
                        }
                    }
                }
                c => out.push(c),
            }
        }
        self.fail("unterminated string")
    }

    fn datetime(&mut self) -> Result<PyValue, GameLogError> {
        let start = self.pos;
        let args = self.items(")", |p| {
            p.skip_ws();
            if p.rest().starts_with("tzinfo") {
                while !p.rest().is_empty() && !p.rest().starts_with(')') {
                    p.pos += p.rest().chars().next().map_or(1, char::len_utf8);
                }
                return Ok(None);
            }
            match p.value()? {
                PyValue::Int(n) => Ok(Some(n)),
                _ => p.fail("datetime arguments must be integers"),
            }
        })?;
        let a: Vec<i64> = args.into_iter().flatten().collect();
        let get = |i: usize| a.get(i).copied().unwrap_or(0);
        let t = u32::try_from(get(1)).ok().and_then(|m| {
            NaiveDate::from_ymd_opt(i32::try_from(get(0)).ok()?, m, u32::try_from(get(2)).ok()?)?.and_hms_micro_opt(
                u32::try_from(get(3)).ok()?,
                u32::try_from(get(4)).ok()?,
                u32::try_from(get(5)).ok()?,
                u32::try_from(get(6)).ok()?,
            )
        });
        match (a.len() >= 3, t) {
            (true, Some(t)) => Ok(PyValue::DateTime(t.and_utc().format(iso_micros::FORMAT).to_string())),
            _ => {
                self.pos = start;
                self.fail("invalid datetime")
            }
        }
    }
}

fn to_json(v: PyValue) -> serde_json::Value {
    use serde_json::Value;
    match v {
        PyValue::Dict(pairs) => Value::Object(
            pairs
                .into_iter()
                .map(|(k, v)| {
                    let key = match k {
                        PyValue::Str(s) | PyValue::DateTime(s) => s,
                        PyValue::Int(n) => n.to_string(),
                        other => format!("{other:?}"),
                    };
                    (key, to_json(v))
                })
                .collect(),
        ),
        PyValue::List(items) => Value::Array(items.into_iter().map(to_json).collect()),
        PyValue::Str(s) | PyValue::DateTime(s) => Value::String(s),
        PyValue::Int(n) => Value::from(n),
        PyValue::Bool(b) => Value::Bool(b),
        PyValue::None => Value::Null,
    }
}

/// Reads logs written as Python literals: a single game dict, a dict of
/// games keyed by gamecode, or a bare `'code': {...}` entry (as printed in
/// excerpts), optionally with a trailing comma.
pub fn read_legacy(text: &str) -> Result<Vec<GameLog>, GameLogError> {
    let trimmed = text.trim().trim_end_matches(',');
    let wrapped;
    let src = if trimmed.starts_with('{') {
        trimmed
    } else {
        wrapped = format!("{{{trimmed}}}");
        &wrapped
    };
    let mut parser = PyParser { src, pos: 0 };
    let value = parser.value()?;
    parser.skip_ws();
    if !parser.rest().is_empty() {
        return parser.fail("trailing input");
    }
    let PyValue::Dict(pairs) = value else {
        return parser.fail("top level must be a dict");
    };
    let is_game = pairs.iter().any(|(k, _)| *k == PyValue::Str("gamecode".into()));
    let games: Vec<PyValue> = if is_game {
        vec![PyValue::Dict(pairs)]
    } else {
        pairs.into_iter().map(|(_, v)| v).collect()
    };
    games
        .into_iter()
        .map(|g| {
            let log: GameLog = serde_json::from_value(to_json(g))?;
            log.validate()?;
            Ok(log)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIGURE2: &str = include_str!("../../../fixtures/legacy/ena5005.txt");
    fn figure2() -> GameLog {
        read_legacy(FIGURE2).unwrap().remove(0)
    }

    #[test]
    fn legacy_reader_normalizes_datetimes() {
        let log = figure2();
        assert_eq!(log.gamecode, "ena5005");
        assert_eq!(
            log.game_start.format(iso_micros::FORMAT).to_string(),
            "2023-06-07T12:26:12.493510Z"
        );
        assert!(log.spywin);
        assert_eq!(log.total_turn, 3);
        assert_eq!(log.answers[0], "It's definitely more on the exciting side.");
    }

    #[test]
    fn json_round_trip_keeps_key_order() {
        let log = figure2();
        let text = log.to_json().unwrap();
        let keys: Vec<&str> = text
            .lines()
            .filter_map(|l| l.strip_prefix("  \""))
            .map(|l| l.split('"').next().unwrap())
            .collect();
        assert_eq!(
            keys,
            [
                "gamecode",
                "spy",
                "location",
                "spywin",
                "game_start",
                "game_end",
                "gamelog",
                "votelog",
                "total_turn",
                "questions",
                "answers",
                "accuselog",
                "aborted"
            ]
        );
        assert!(text.contains("\"spywin\": true"));
        assert!(text.contains("\"total_turn\": 3"));
        assert_eq!(GameLog::from_json(&text).unwrap(), log);
    }

    #[test]
    fn invariants_are_enforced() {
        let mut log = figure2();
        log.questions.pop();
        log.answers.pop();
        assert!(matches!(log.to_json(), Err(GameLogError::Invariant { field, .. }) if field == "questions"));

        let mut v: serde_json::Value = serde_json::from_str(&figure2().to_json().unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("accuselog");
        let err = GameLog::from_json(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("accuselog"), "{err}");

        v = serde_json::from_str(&figure2().to_json().unwrap()).unwrap();
        v["spy"] = 9.into();
        assert!(GameLog::from_json(&v.to_string()).is_err());

        let mut log = figure2();
        log.game_end = log.game_start - chrono::Duration::seconds(1);
        assert!(log.validate().is_err());
    }

    #[test]
    fn narration_is_reconstructed_from_fields() {
        let log = figure2();
        assert_eq!(log.reconstruct_narration(), log.gamelog);
        assert_eq!(log.outcome().unwrap().cause, OutcomeCause::CorrectGuess);
    }

    #[test]
    fn replay_matches_and_detects_faults() {
        let scripts = ScriptSet::bundled();
        let log = figure2();
        let report = verify_replay(&log, &scripts);
        assert!(report.ok(), "{:?}", report.mismatches);

        let mut flipped = log.clone();
        flipped.spywin = false;
        let report = verify_replay(&flipped, &scripts);
        assert_eq!(report.mismatches.len(), 1);
        assert_eq!(report.mismatches[0].field, "spywin");

        let mut altered = log.clone();
        altered.answers[1] = "Mostly hot dogs.".into();
        let report = verify_replay(&altered, &scripts);
        let m = report.mismatches.iter().find(|m| m.field == "gamelog").unwrap();
        assert!(m.detail.ends_with("(turn 2)"), "{}", m.detail);
    }

    #[test]
    fn legacy_errors_carry_offsets() {
        assert!(matches!(
            read_legacy("{'gamecode': 'x', 'spy': }"),
            Err(GameLogError::Legacy { offset: 25, .. })
        ));
        assert!(read_legacy("{'a': 'unterminated}").is_err());
    }

    #[test]
    fn first_difference_offsets() {
        assert_eq!(first_difference("abc", "abc"), None);
        assert_eq!(first_difference("abc", "abd"), Some(2));
        assert_eq!(first_difference("ab", "abc"), Some(2));
    }
}
