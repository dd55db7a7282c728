//! Classification and repair of raw model responses.
//!
//! Question responses are sorted into the three-level taxonomy (successful,
//! usable after post-processing, unusable) and, when usable, repaired into a
//! `(target, question)` pair. The per-phase parsers for accusations, hang
//! votes, reveals and final votes are strict: anything off-alphabet is
//! `Unparseable` and the caller decides whether to re-request.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::game_core::{Accusation, Ballot, Location, PlayerId, RevealDecision, MAX_PLAYERS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tier {
    SuccessfulWellFormed,
    SuccessfulOffContext,
    UsableInvalidFormat,
    UsableSuperfluous,
    UsableMultipleAnswers,
    UnusableRefusal,
    UnusableEcho,
}

impl Tier {
    pub const ALL: [Tier; 7] = [
        Tier::SuccessfulWellFormed,
        Tier::SuccessfulOffContext,
        Tier::UsableInvalidFormat,
        Tier::UsableSuperfluous,
        Tier::UsableMultipleAnswers,
        Tier::UnusableRefusal,
        Tier::UnusableEcho,
    ];

    pub fn is_usable(self) -> bool {
        !matches!(self, Tier::UnusableRefusal | Tier::UnusableEcho)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Flag {
    KeywordLeak,
    /// Set only from manual annotation files.
    NotGameRelated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseClass {
    pub tier: Tier,
    pub flags: BTreeSet<Flag>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedQuestion {
    pub target: PlayerId,
    pub text: String,
}

impl ParsedQuestion {
    /// The canonical `(n, "question")` form.
    pub fn to_tuple(&self) -> String {
        format!("({}, \"{}\")", self.target, self.text)
    }
}

/// Mechanical features observed while parsing, used for the error-frequency
/// report.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseFeatures {
    pub boilerplate: bool,
    pub strict_tuple: bool,
    pub question_segments: usize,
    pub answer_segments: usize,
    pub explicit_target: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseOutcome {
    pub class: ResponseClass,
    pub action: Option<ParsedQuestion>,
    pub raw: String,
    pub features: ResponseFeatures,
}

/// Marker for a response outside the expected alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Unparseable;

/// Inputs beyond the raw text that question extraction may use.
#[derive(Debug, Clone, Copy)]
pub struct ExtractContext<'a> {
    pub asker: PlayerId,
    pub player_count: u8,
    /// The prompt that produced the response, for echo detection.
    pub prompt: Option<&'a str>,
}

impl Default for ExtractContext<'_> {
    fn default() -> Self {
        ExtractContext {
            asker: PlayerId::new(1).expect("seat 1"),
            player_count: MAX_PLAYERS,
            prompt: None,
        }
    }
}

pub const ECHO_MIN_RUN: usize = 40;
pub const ECHO_FRACTION: f64 = 0.5;

const REFUSAL_MARKERS: [&str; 7] = [
    "not capable",
    "not a valid question",
    "invalid",
    "violation",
    "cannot",
    "can't",
    "unable",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum SegmentKind {
    StrictTuple,
    LooseTuple,
    Addressed,
    TrailingTarget,
    BareTuple,
    Speaker,
}

struct Pattern {
    kind: SegmentKind,
    regex: Regex,
    target_group: usize,
    text_group: usize,
}

fn pattern(kind: SegmentKind, re: &str, target_group: usize, text_group: usize) -> Pattern {
    Pattern {
        kind,
        regex: Regex::new(re).expect("static pattern"),
        target_group,
        text_group,
    }
}

// Earlier entries win when two matches start at the same offset.
static PATTERNS: LazyLock<Vec<Pattern>> = LazyLock::new(|| {
    use SegmentKind::*;
    vec![
        pattern(StrictTuple, r#"\(\s*(\d+)\s*,\s*"([^"]*)"\s*\)"#, 1, 2),
        pattern(LooseTuple, r#"(?i)\(\s*player\s*(\d+)\s*,\s*"([^"]*)"\s*\)"#, 1, 2),
        pattern(Addressed, r#"(?i)\bto\s+player\s*(\d+)\s*:\s*"([^"]+)""#, 1, 2),
        pattern(Addressed, r#"(?is)\bto\s+player\s*(\d+)\s*:\s*([^"\s].*)$"#, 1, 2),
        pattern(
            Addressed,
            r#"(?i)\bplayer\s*\d+\s+asks\s+player\s*(\d+)\s*[,:]?\s*"([^"]+)""#,
            1,
            2,
        ),
        pattern(TrailingTarget, r#"(?i)"([^"]+)"\s*to\s+player\s*(\d+)"#, 2, 1),
        pattern(Addressed, r#"(?i)\(?\bplayer\s*(\d+)\)?\s*,\s*([^"?]*?\?)"#, 1, 2),
        pattern(BareTuple, r#"^\s*(\d+)\s*,\s*"([^"]+)""#, 1, 2),
        pattern(Speaker, r#"(?i)\bplayer\s*(\d+)\s*:\s*"([^"]+)""#, 1, 2),
    ]
});

static EXACT_TUPLE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"^\(\s*(\d+)\s*,\s*"([^"]*)"\s*\)$"#).expect("static pattern"));

static QUOTED_QUESTION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#""([^"]*\?)""#).expect("static pattern"));

struct Segment {
    start: usize,
    end: usize,
    kind: SegmentKind,
    target: PlayerId,
    text: String,
}

impl Segment {
    fn is_question(&self) -> bool {
        self.kind != SegmentKind::Speaker
    }
}

/// Maps typographic quotes to their ASCII forms.
pub fn normalize_quotes(raw: &str) -> String {
    raw.chars()
        .map(|c| match c {
            '\u{201C}' | '\u{201D}' | '\u{201E}' | '\u{201F}' | '\u{2033}' => '"',
            '\u{2018}' | '\u{2019}' | '\u{201B}' => '\'',
            other => other,
        })
        .collect()
}

fn clean_question_text(text: &str) -> String {
    text.trim().replace('"', "'")
}

fn find_segments(text: &str, player_count: u8) -> Vec<Segment> {
    let mut found = Vec::new();
    for (priority, pat) in PATTERNS.iter().enumerate() {
        for caps in pat.regex.captures_iter(text) {
            let whole = caps.get(0).expect("group 0");
            let target = caps[pat.target_group]
                .parse::<u8>()
                .ok()
                .filter(|t| (1..=player_count).contains(t))
                .and_then(|t| PlayerId::new(t).ok());
            let body = clean_question_text(&caps[pat.text_group]);
            if let (Some(target), false) = (target, body.is_empty()) {
                found.push((
                    priority,
                    Segment {
                        start: whole.start(),
                        end: whole.end(),
                        kind: pat.kind,
                        target,
                        text: body,
                    },
                ));
            }
        }
    }
    found.sort_by_key(|(priority, s)| (s.start, *priority));
    let mut accepted: Vec<Segment> = Vec::new();
    for (_, seg) in found {
        if accepted.iter().all(|a| seg.end <= a.start || seg.start >= a.end) {
            accepted.push(seg);
        }
    }
    accepted.sort_by_key(|s| s.start);
    accepted
}

/// Fraction of `raw` (in chars) covered by verbatim runs of at least
/// [`ECHO_MIN_RUN`] chars that also occur in `prompt`.
pub fn echo_fraction(raw: &str, prompt: &str) -> f64 {
    let bounds: Vec<usize> = raw
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(raw.len()))
        .collect();
    let n = bounds.len() - 1;
    if n == 0 {
        return 0.0;
    }
    let mut covered = 0;
    let mut i = 0;
    while i + ECHO_MIN_RUN <= n {
        if prompt.contains(&raw[bounds[i]..bounds[i + ECHO_MIN_RUN]]) {
            let mut j = i + ECHO_MIN_RUN;
            while j < n && prompt.contains(&raw[bounds[i]..bounds[j + 1]]) {
                j += 1;
            }
            covered += j - i;
            i = j;
        } else {
            i += 1;
        }
    }
    covered as f64 / n as f64
}

/// Ordered boilerplate phrases, matched case-insensitively.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuestionParser {
    boilerplate: Vec<String>,
}

impl Default for QuestionParser {
    fn default() -> Self {
        QuestionParser::from_patterns(include_str!("../../../scripts/parser/boilerplate.txt"))
    }
}

impl QuestionParser {
    /// One pattern per line; blank lines and `#` comments are skipped.
    pub fn from_patterns(text: &str) -> Self {
        let boilerplate = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        QuestionParser { boilerplate }
    }

    pub fn patterns(&self) -> &[String] {
        &self.boilerplate
    }

    fn has_boilerplate(&self, lowered: &str) -> bool {
        self.boilerplate.iter().any(|p| lowered.contains(p.as_str()))
    }

    pub fn extract(&self, raw: &str, ctx: &ExtractContext<'_>) -> ParseOutcome {
        let text = normalize_quotes(raw);
        let segments = find_segments(&text, ctx.player_count);
        let questions: Vec<&Segment> = segments.iter().filter(|s| s.is_question()).collect();

        let mut outside = String::with_capacity(text.len());
        let mut cursor = 0;
        for s in &segments {
            outside.push_str(&text[cursor..s.start]);
            outside.push(' ');
            cursor = s.end;
        }
        outside.push_str(&text[cursor..]);

        let mut features = ResponseFeatures {
            boilerplate: self.has_boilerplate(&text.to_lowercase()),
            strict_tuple: segments.iter().any(|s| s.kind == SegmentKind::StrictTuple),
            question_segments: questions.len(),
            answer_segments: segments.len() - questions.len(),
            explicit_target: false,
        };

        let done = |tier: Tier, action: Option<ParsedQuestion>, features: ResponseFeatures| ParseOutcome {
            class: ResponseClass {
                tier,
                flags: BTreeSet::new(),
            },
            action,
            raw: raw.to_string(),
            features,
        };

        if let Some(first) = questions.first() {
            features.explicit_target = true;
            let action = ParsedQuestion {
                target: first.target,
                text: first.text.clone(),
            };
            let exact =
                segments.len() == 1 && first.kind == SegmentKind::StrictTuple && EXACT_TUPLE.is_match(text.trim());
            let tier = if exact {
                Tier::SuccessfulWellFormed
            } else if segments.len() > 1 {
                Tier::UsableMultipleAnswers
            } else if self.has_boilerplate(&outside.to_lowercase()) {
                Tier::UsableSuperfluous
            } else {
                Tier::UsableInvalidFormat
            };
            return done(tier, Some(action), features);
        }

        if let Some(prompt) = ctx.prompt {
            if echo_fraction(raw, prompt) >= ECHO_FRACTION {
                return done(Tier::UnusableEcho, None, features);
            }
        }

        if let Some(q) = untargeted_question(&text) {
            let target = default_target(ctx);
            let tier = if features.boilerplate {
                Tier::UsableSuperfluous
            } else {
                Tier::UsableInvalidFormat
            };
            return done(tier, Some(ParsedQuestion { target, text: q }), features);
        }

        done(Tier::UnusableRefusal, None, features)
    }

    /// Extraction plus flags: the keyword-leak check against `location` and
    /// any manually annotated flags. A well-formed response carrying a flag
    /// is reported as off-context.
    pub fn classify(
        &self,
        raw: &str,
        location: Option<Location>,
        annotated: &BTreeSet<Flag>,
        ctx: &ExtractContext<'_>,
    ) -> ParseOutcome {
        let mut outcome = self.extract(raw, ctx);
        let mut flags = annotated.clone();
        flags.remove(&Flag::KeywordLeak);
        if let Some(loc) = location {
            let probe = outcome.action.as_ref().map(|a| a.text.as_str()).unwrap_or(raw);
            if detect_keyword_leak(probe, loc) {
                flags.insert(Flag::KeywordLeak);
            }
        }
        if outcome.class.tier == Tier::SuccessfulWellFormed && !flags.is_empty() {
            outcome.class.tier = Tier::SuccessfulOffContext;
        }
        outcome.class.flags = flags;
        outcome
    }
}

/// A question with no addressee: either a quoted span ending in `?`, or a
/// response that is itself a single question sentence.
fn untargeted_question(text: &str) -> Option<String> {
    if let Some(c) = QUOTED_QUESTION.captures(text) {
        let q = clean_question_text(&c[1]);
        if q.len() > 1 {
            return Some(q);
        }
    }
    let bare = text.trim().trim_matches('"').trim();
    let single_sentence =
        bare.ends_with('?') && !bare[..bare.len() - 1].contains(['?', '!']) && !bare[..bare.len() - 1].contains(". ");
    (single_sentence && bare.len() > 1).then(|| clean_question_text(bare))
}

fn default_target(ctx: &ExtractContext<'_>) -> PlayerId {
    PlayerId::all(ctx.player_count)
        .find(|&p| p != ctx.asker)
        .unwrap_or(ctx.asker)
}

/// [`QuestionParser::extract`] with the bundled boilerplate list and the
/// default context (asker 1, five players, no prompt).
pub fn extract_question(raw: &str) -> ParseOutcome {
    static PARSER: LazyLock<QuestionParser> = LazyLock::new(QuestionParser::default);
    PARSER.extract(raw, &ExtractContext::default())
}

pub fn is_refusal(raw: &str) -> bool {
    let lowered = normalize_quotes(raw).to_lowercase();
    REFUSAL_MARKERS.iter().any(|m| lowered.contains(m))
}

/// Whole-phrase, case-insensitive search for the location name.
pub fn detect_keyword_leak(question: &str, location: Location) -> bool {
    let phrase = location
        .name()
        .split_whitespace()
        .map(regex::escape)
        .collect::<Vec<_>>()
        .join(r"\s+");
    Regex::new(&format!(r"(?i)\b{phrase}\b"))
        .expect("escaped location")
        .is_match(question)
}

fn is_x(token: &str) -> bool {
    token == "X" || token == "x"
}

pub fn parse_accusation(raw: &str) -> Result<Accusation, Unparseable> {
    let t = raw.trim();
    if is_x(t) {
        return Ok(Accusation::NoAccusation);
    }
    match t.as_bytes() {
        [d @ b'1'..=b'5'] => Ok(Accusation::Named(PlayerId::new(d - b'0').map_err(|_| Unparseable)?)),
        _ => Err(Unparseable),
    }
}

pub fn parse_hang_vote(raw: &str) -> Result<Ballot, Unparseable> {
    match raw.trim() {
        "0" => Ok(Ballot::Hang),
        t if is_x(t) => Ok(Ballot::NoHang),
        _ => Err(Unparseable),
    }
}

pub fn parse_reveal(raw: &str) -> Result<RevealDecision, Unparseable> {
    let t = raw.trim();
    if is_x(t) {
        return Ok(RevealDecision::Pass);
    }
    Location::parse(t).map(RevealDecision::Guess).map_err(|_| Unparseable)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalVoteResponse {
    pub vote: PlayerId,
    pub statement: Option<String>,
}

static STANDALONE_SEAT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?:^|[^0-9A-Za-z])([1-5])(?:$|[^0-9A-Za-z])").expect("static pattern"));

static SENTENCE_END: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[.!?](?:\s|$)").expect("static pattern"));

/// The first standalone digit 1-5 is the vote. Any other text is kept as the
/// statement, cut after its third sentence.
pub fn parse_final_vote(raw: &str) -> Result<FinalVoteResponse, Unparseable> {
    let t = raw.trim();
    let caps = STANDALONE_SEAT.captures(t).ok_or(Unparseable)?;
    let digit = caps[1].parse::<u8>().map_err(|_| Unparseable)?;
    let vote = PlayerId::new(digit).map_err(|_| Unparseable)?;
    let statement = (t.len() > 1).then(|| {
        let cut = SENTENCE_END
            .find_iter(t)
            .nth(2)
            .map(|m| m.start() + 1)
            .unwrap_or(t.len());
        t[..cut].trim().to_string()
    });
    Ok(FinalVoteResponse { vote, statement })
}

/// Content of the first balanced double-quoted span, else the trimmed text.
pub fn sanitize_answer(raw: &str) -> String {
    let text = normalize_quotes(raw);
    if let Some(open) = text.find('"') {
        if let Some(len) = text[open + 1..].find('"') {
            let inner = text[open + 1..open + 1 + len].trim();
            if !inner.is_empty() {
                return inner.to_string();
            }
        }
    }
    text.trim().to_string()
}

/// Manual annotations: response id to flags.
pub type Annotations = BTreeMap<String, BTreeSet<Flag>>;

pub fn parse_annotations(json: &str) -> Result<Annotations, serde_json::Error> {
    serde_json::from_str(json)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn loc(name: &str) -> Location {
        Location::parse(name).unwrap()
    }

    fn p(i: u8) -> PlayerId {
        PlayerId::new(i).unwrap()
    }

    #[track_caller]
    fn check(raw: &str, tier: Tier, target: u8, text: &str) {
        let o = extract_question(raw);
        assert_eq!(o.class.tier, tier, "{raw}");
        let a = o.action.expect("usable");
        assert_eq!((a.target, a.text.as_str()), (p(target), text), "{raw}");
    }

    #[test]
    fn well_formed_tuple() {
        check(
            r#"(2, "Do you need a ticket to be here?")"#,
            Tier::SuccessfulWellFormed,
            2,
            "Do you need a ticket to be here?",
        );
        check("(3,\u{201C}Curly?\u{201D})", Tier::SuccessfulWellFormed, 3, "Curly?");
    }

    #[test]
    fn addressed_forms_are_invalid_format() {
        check(
            r#"To player 2: "What is your favorite thing about this place?""#,
            Tier::UsableInvalidFormat,
            2,
            "What is your favorite thing about this place?",
        );
        check(
            "Player 2, what's your favorite animal in the zoo?",
            Tier::UsableInvalidFormat,
            2,
            "what's your favorite animal in the zoo?",
        );
        check(
            r#""What do you like most about this location?" to player 2."#,
            Tier::UsableInvalidFormat,
            2,
            "What do you like most about this location?",
        );
        check(
            r#"(Player 2, "What's your favorite thing about train travel?")"#,
            Tier::UsableInvalidFormat,
            2,
            "What's your favorite thing about train travel?",
        );
    }

    #[test]
    fn boilerplate_is_superfluous() {
        check(
            r#"Sorry, as an AI language model, I don't have a player identity. However, here's an example question as you asked: (2, "What's your favorite thing to eat at a corporate party?")"#,
            Tier::UsableSuperfluous,
            2,
            "What's your favorite thing to eat at a corporate party?",
        );
    }

    #[test]
    fn addressed_question_before_tuple_wins() {
        check(
            r#"To player 2: "What's your favorite item on the menu here?" (2, "My favorite dish is the pasta with clams. What about you, player 3?")"#,
            Tier::UsableMultipleAnswers,
            2,
            "What's your favorite item on the menu here?",
        );
    }

    #[test]
    fn refusal_without_question() {
        let o = extract_question(
            "Sorry, as an AI language model, I am not capable of playing a game that requires multiple players. Can I assist you with anything else?",
        );
        assert_eq!(o.class.tier, Tier::UnusableRefusal);
        assert!(o.action.is_none());
        assert!(is_refusal(&o.raw));
    }

    #[test]
    fn untargeted_question_defaults_to_first_other_seat() {
        let ctx = ExtractContext {
            asker: p(2),
            ..Default::default()
        };
        let o = QuestionParser::default().extract(r#""What type of vehicle do you use to get to work?""#, &ctx);
        assert_eq!(o.class.tier, Tier::UsableInvalidFormat);
        assert_eq!(o.action.unwrap().target, p(1));
        assert!(!o.features.explicit_target);
    }

    #[test]
    fn echo_needs_long_verbatim_runs() {
        let prompt = "The game is played over a total of 10 turns, each turn consisting of several requests to every player at the table.";
        let echo = &prompt[..80];
        let ctx = ExtractContext {
            prompt: Some(prompt),
            ..Default::default()
        };
        let parser = QuestionParser::default();
        assert_eq!(parser.extract(echo, &ctx).class.tier, Tier::UnusableEcho);
        assert!(echo_fraction("The game is played", prompt) == 0.0);
        assert!(echo_fraction(echo, prompt) > 0.99);
    }

    #[test]
    fn keyword_leaks() {
        assert!(detect_keyword_leak(
            "What is your favorite thing to do at the beach?",
            loc("beach")
        ));
        assert!(!detect_keyword_leak(
            "Do you need a ticket to be here?",
            loc("airplane")
        ));
        assert!(detect_keyword_leak(
            "What's your favorite thing to eat at a corporate party?",
            loc("corporate party")
        ));
        assert!(detect_keyword_leak("Nice CORPORATE  PARTY", loc("corporate party")));
        assert!(!detect_keyword_leak("beaches are nice", loc("beach")));
    }

    #[test]
    fn classify_marks_leaks_off_context() {
        let parser = QuestionParser::default();
        let ctx = ExtractContext::default();
        let o = parser.classify(
            r#"(2, "What is your favorite thing to do at the beach?")"#,
            Some(loc("beach")),
            &BTreeSet::new(),
            &ctx,
        );
        assert_eq!(o.class.tier, Tier::SuccessfulOffContext);
        assert!(o.class.flags.contains(&Flag::KeywordLeak));

        let war = r#"(2, "What is your favorite war movie?")"#;
        let plain = parser.classify(war, Some(loc("theater")), &BTreeSet::new(), &ctx);
        assert_eq!(plain.class.tier, Tier::SuccessfulWellFormed);
        let annotated: BTreeSet<_> = [Flag::NotGameRelated].into();
        let flagged = parser.classify(war, Some(loc("theater")), &annotated, &ctx);
        assert_eq!(flagged.class.tier, Tier::SuccessfulOffContext);
    }

    #[test]
    fn accusation_parser_is_strict() {
        assert_eq!(parse_accusation("X"), Ok(Accusation::NoAccusation));
        assert_eq!(parse_accusation(" x\n"), Ok(Accusation::NoAccusation));
        assert_eq!(parse_accusation("3"), Ok(Accusation::Named(p(3))));
        assert_eq!(parse_accusation("I accuse player 3"), Err(Unparseable));
        assert_eq!(parse_accusation("7"), Err(Unparseable));
        assert_eq!(parse_accusation("0"), Err(Unparseable));
    }

    #[test]
    fn hang_vote_parser() {
        assert_eq!(parse_hang_vote("0"), Ok(Ballot::Hang));
        assert_eq!(parse_hang_vote("X"), Ok(Ballot::NoHang));
        assert_eq!(parse_hang_vote("yes"), Err(Unparseable));
    }

    #[test]
    fn reveal_parser() {
        assert_eq!(parse_reveal("carnival"), Ok(RevealDecision::Guess(loc("carnival"))));
        assert_eq!(parse_reveal("Carnival"), Ok(RevealDecision::Guess(loc("carnival"))));
        assert_eq!(parse_reveal("X"), Ok(RevealDecision::Pass));
        assert_eq!(parse_reveal("moon base"), Err(Unparseable));
    }

    #[test]
    fn final_vote_parser() {
        assert_eq!(
            parse_final_vote("2"),
            Ok(FinalVoteResponse {
                vote: p(2),
                statement: None
            })
        );
        let v = parse_final_vote(
            "I vote for player 4. Their answers were vague. They dodged the food question. Also this.",
        )
        .unwrap();
        assert_eq!(v.vote, p(4));
        assert_eq!(
            v.statement.as_deref(),
            Some("I vote for player 4. Their answers were vague. They dodged the food question.")
        );
        assert_eq!(parse_final_vote("Everyone seems fine."), Err(Unparseable));
        assert_eq!(parse_final_vote("player 42"), Err(Unparseable));
    }

    #[test]
    fn answers_are_unquoted() {
        assert_eq!(
            sanitize_answer(r#""It's definitely more on the exciting side.""#),
            "It's definitely more on the exciting side."
        );
        assert_eq!(
            sanitize_answer("  We mostly eat preserved foods.  "),
            "We mostly eat preserved foods."
        );
        assert_eq!(
            sanitize_answer(r#"Sure! "massage, facial treatments, and sauna.""#),
            "massage, facial treatments, and sauna."
        );
    }

    #[test]
    fn annotations_parse() {
        let a = parse_annotations(r#"{"r12": ["NotGameRelated"]}"#).unwrap();
        assert!(a["r12"].contains(&Flag::NotGameRelated));
    }
}
