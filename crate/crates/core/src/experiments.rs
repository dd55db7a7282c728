//! First-turn response comparison, batch games with win statistics, and the
//! chance baseline for perfectly ambiguous play.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{request_action, Agent, AgentError, AgentRequest, AuditEntry, Clock, RetryPolicy};
use crate::game_core::{majority_choice, GameConfig, Location, OutcomeCause, PlayerId, LOCATIONS};
use crate::gamelog::{verify_replay, GameLog, VerifyReport};
use crate::orchestrator::{run_game, GameDriverConfig, OrchestratorError};
use crate::response_parser::{
    Annotations, ExtractContext, Flag, ParseOutcome, ParsedQuestion, QuestionParser, ResponseClass, Tier,
};
use crate::scripts::{
    assemble_prompt, render_preamble, render_request, RequestContext, RequestKind, RolePreamble, ScriptSet,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("cannot read corpus {path}: {reason}")]
    Corpus { path: String, reason: String },
    #[error("invalid experiment setup: {0}")]
    Config(String),
    #[error(transparent)]
    Orchestrator(#[from] OrchestratorError),
}

/// One raw response in a corpus file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub location: Option<Location>,
    pub text: String,
    /// Hand-assigned tier, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Tier>,
}

pub fn parse_corpus(json: &str) -> Result<Vec<CorpusRecord>, serde_json::Error> {
    serde_json::from_str(json)
}

pub fn load_corpus(path: &Path) -> Result<Vec<CorpusRecord>, ExperimentError> {
    let fail = |reason: String| ExperimentError::Corpus {
        path: path.display().to_string(),
        reason,
    };
    let text = std::fs::read_to_string(path).map_err(|e| fail(e.to_string()))?;
    parse_corpus(&text).map_err(|e| fail(e.to_string()))
}

pub fn load_annotations(path: &Path) -> Result<Annotations, ExperimentError> {
    let fail = |reason: String| ExperimentError::Corpus {
        path: path.display().to_string(),
        reason,
    };
    let text = std::fs::read_to_string(path).map_err(|e| fail(e.to_string()))?;
    crate::response_parser::parse_annotations(&text).map_err(|e| fail(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifiedRecord {
    pub id: String,
    pub location: Option<Location>,
    pub outcome: ParseOutcome,
    pub label: Option<Tier>,
}

/// Error-frequency counters in the shape of the published table. A response
/// may count under several rows.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorCounts {
    pub no_target: usize,
    pub keyword_leaks: usize,
    pub not_game_related: usize,
    pub rejection_messages: usize,
    pub non_tuple: usize,
    pub interactions: usize,
    pub multiple_questions: usize,
    pub rules_echo: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocationRow {
    pub responses: usize,
    pub final_tier: Tier,
    pub final_action: Option<ParsedQuestion>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exp1Report {
    pub total_responses: usize,
    pub tiers: BTreeMap<Tier, usize>,
    pub flags: BTreeMap<Flag, usize>,
    pub errors: ErrorCounts,
    pub per_location: BTreeMap<String, LocationRow>,
    pub records: Vec<ClassifiedRecord>,
    pub failed_locations: Vec<String>,
}

impl Exp1Report {
    fn from_records(records: Vec<ClassifiedRecord>) -> Self {
        let mut tiers: BTreeMap<Tier, usize> = Tier::ALL.iter().map(|&t| (t, 0)).collect();
        let mut flags: BTreeMap<Flag, usize> = [(Flag::KeywordLeak, 0), (Flag::NotGameRelated, 0)].into();
        let mut e = ErrorCounts::default();
        let mut per_location: BTreeMap<String, LocationRow> = BTreeMap::new();
        for r in &records {
            let o = &r.outcome;
            *tiers.entry(o.class.tier).or_default() += 1;
            for f in &o.class.flags {
                *flags.entry(*f).or_default() += 1;
            }
            let f = &o.features;
            e.no_target += usize::from(!f.explicit_target);
            e.keyword_leaks += usize::from(o.class.flags.contains(&Flag::KeywordLeak));
            e.not_game_related += usize::from(o.class.flags.contains(&Flag::NotGameRelated));
            e.rejection_messages += usize::from(f.boilerplate || o.class.tier == Tier::UnusableRefusal);
            e.non_tuple += usize::from(!f.strict_tuple);
            e.interactions += usize::from(f.answer_segments > 0);
            e.multiple_questions += usize::from(f.question_segments > 1);
            e.rules_echo += usize::from(o.class.tier == Tier::UnusableEcho);
            if let Some(loc) = r.location {
                let row = per_location.entry(loc.name().to_string()).or_insert(LocationRow {
                    responses: 0,
                    final_tier: o.class.tier,
                    final_action: None,
                });
                row.responses += 1;
                row.final_tier = o.class.tier;
                row.final_action = o.action.clone();
            }
        }
        Exp1Report {
            total_responses: records.len(),
            tiers,
            flags,
            errors: e,
            per_location,
            records,
            failed_locations: Vec::new(),
        }
    }

    /// Records whose computed tier differs from their hand label.
    pub fn label_mismatches(&self) -> Vec<(String, Tier, Tier)> {
        self.records
            .iter()
            .filter_map(|r| {
                r.label
                    .filter(|&l| l != r.outcome.class.tier)
                    .map(|l| (r.id.clone(), l, r.outcome.class.tier))
            })
            .collect()
    }

    /// Aligned plain-text table.
    pub fn render_table(&self) -> String {
        let e = &self.errors;
        let mut rows: Vec<(String, usize)> = vec![("Total responses".into(), self.total_responses)];
        rows.extend(self.tiers.iter().map(|(t, n)| (format!("  {t:?}"), *n)));
        rows.extend([
            ("No target player".into(), e.no_target),
            ("Location keyword stated directly".into(), e.keyword_leaks),
            ("Not game-related (annotated)".into(), e.not_game_related),
            ("Includes rejecting message".into(), e.rejection_messages),
            ("No (n, \"question\") tuple".into(), e.non_tuple),
            ("Interaction within a response".into(), e.interactions),
            ("Multiple questions in one response".into(), e.multiple_questions),
            ("Just describing game rules".into(), e.rules_echo),
        ]);
        let width = rows.iter().map(|(d, _)| d.len()).max().unwrap_or(0);
        let mut out = format!("{:<width$}  Count\n", "Description");
        for (d, n) in rows {
            let _ = writeln!(out, "{d:<width$}  {n:>5}");
        }
        out
    }
}

/// Classifies a corpus offline. No remote calls.
pub fn classify_corpus(records: &[CorpusRecord], parser: &QuestionParser, annotations: &Annotations) -> Exp1Report {
    let ctx = ExtractContext::default();
    let empty = BTreeSet::new();
    let classified = records
        .iter()
        .map(|r| ClassifiedRecord {
            id: r.id.clone(),
            location: r.location,
            outcome: parser.classify(&r.text, r.location, annotations.get(&r.id).unwrap_or(&empty), &ctx),
            label: r.label,
        })
        .collect();
    Exp1Report::from_records(classified)
}

/// First-turn prompt: player 1, not the spy, no prior turns.
pub fn exp1_prompt(scripts: &ScriptSet, location: Location) -> String {
    let player = PlayerId::new(1).expect("seat 1");
    let preamble = render_preamble(scripts, &RolePreamble::non_spy(player, location));
    let request = render_request(scripts, RequestKind::AskQuestion, &RequestContext::AskQuestion)
        .expect("bundled template renders");
    assemble_prompt(scripts, &preamble, "", &request)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp1Record {
    pub location: Location,
    pub attempts: Vec<String>,
    pub class: Option<ResponseClass>,
    pub action: Option<ParsedQuestion>,
    pub model: String,
}

/// Requests a first-turn question per location, re-requesting unusable
/// replies up to the retry budget, and classifies every attempt.
pub fn run_exp1(
    locations: &[Location],
    agent: &mut dyn Agent,
    policy: &RetryPolicy,
    scripts: &ScriptSet,
    clock: &dyn Clock,
) -> Result<(Exp1Report, Vec<Exp1Record>, Vec<AuditEntry>), ExperimentError> {
    if locations.is_empty() {
        return Err(ExperimentError::Config("no locations given".into()));
    }
    let parser = QuestionParser::default();
    let player = PlayerId::new(1).expect("seat 1");
    let mut classified = Vec::new();
    let mut records = Vec::new();
    let mut failed = Vec::new();
    let mut audit = Vec::new();
    for &loc in locations {
        let prompt = exp1_prompt(scripts, loc);
        let ctx = ExtractContext {
            asker: player,
            prompt: Some(&prompt),
            ..ExtractContext::default()
        };
        let request = AgentRequest {
            player,
            kind: RequestKind::AskQuestion,
            prompt: &prompt,
        };
        let attempts_before = audit.len();
        let result = request_action(
            agent,
            &request,
            |raw| {
                let o = parser.extract(raw, &ctx);
                if o.class.tier.is_usable() {
                    Ok(())
                } else {
                    Err(format!("{:?}", o.class.tier))
                }
            },
            None,
            policy,
            clock,
            &mut audit,
        );
        if let Err(AgentError::Transport { .. } | AgentError::Credential(_)) = &result {
            failed.push(loc.name().to_string());
        }
        let attempts: Vec<String> = audit[attempts_before..]
            .iter()
            .filter_map(|e| e.response.clone())
            .collect();
        let mut last = None;
        for (i, raw) in attempts.iter().enumerate() {
            let outcome = parser.classify(raw, Some(loc), &BTreeSet::new(), &ctx);
            last = Some(outcome.clone());
            classified.push(ClassifiedRecord {
                id: format!("{}-{}", loc.name().replace(' ', "-"), i + 1),
                location: Some(loc),
                outcome,
                label: None,
            });
        }
        records.push(Exp1Record {
            location: loc,
            attempts,
            class: last.as_ref().map(|o| o.class.clone()),
            action: last.and_then(|o| o.action),
            model: agent.label(),
        });
    }
    let mut report = Exp1Report::from_records(classified);
    report.failed_locations = failed;
    Ok((report, records, audit))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Exp2Summary {
    pub games: usize,
    pub spy_wins: usize,
    pub non_spy_wins: usize,
    pub aborted: usize,
    /// Mean `total_turn` over games that finished.
    pub mean_turns: f64,
    pub causes: BTreeMap<OutcomeCause, usize>,
}

impl Exp2Summary {
    pub fn from_logs(logs: &[GameLog]) -> Self {
        let mut s = Exp2Summary {
            games: logs.len(),
            ..Default::default()
        };
        let mut turns = 0u64;
        for log in logs {
            if log.aborted {
                s.aborted += 1;
                continue;
            }
            turns += u64::from(log.total_turn);
            if log.spywin {
                s.spy_wins += 1;
            } else {
                s.non_spy_wins += 1;
            }
            if let Some(o) = log.outcome() {
                *s.causes.entry(o.cause).or_default() += 1;
            }
        }
        let finished = s.games - s.aborted;
        if finished > 0 {
            s.mean_turns = turns as f64 / finished as f64;
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp2Config {
    pub n_games: usize,
    pub gamecode_prefix: String,
    pub script_version: u32,
    /// Index into the alphabetical location list for the first game.
    pub first_location: usize,
    pub seed: u64,
    pub retry: RetryPolicy,
}

impl Default for Exp2Config {
    fn default() -> Self {
        Exp2Config {
            n_games: 8,
            gamecode_prefix: "ena".into(),
            script_version: 5,
            first_location: 0,
            seed: 0,
            retry: RetryPolicy::default(),
        }
    }
}

pub fn gamecode(prefix: &str, version: u32, seq: usize) -> String {
    format!("{prefix}{version}{seq:03}")
}

/// Gamecodes and setups for a batch: locations in list order, spies drawn
/// uniformly from the seeded generator.
pub fn exp2_schedule(cfg: &Exp2Config) -> Vec<(String, GameConfig)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.n_games)
        .map(|i| {
            let loc = Location::from_index((cfg.first_location + i) % LOCATIONS.len()).expect("index in range");
            let spy = PlayerId::new(rng.random_range(1..=5)).expect("seat in range");
            (
                gamecode(&cfg.gamecode_prefix, cfg.script_version, i + 1),
                GameConfig::new(loc, spy),
            )
        })
        .collect()
}

pub type Bindings = BTreeMap<PlayerId, Box<dyn Agent>>;

/// Runs a batch concurrently. Aborted games are kept and counted apart.
pub fn run_exp2<B, C>(
    cfg: &Exp2Config,
    scripts: &ScriptSet,
    make_bindings: B,
    make_clock: C,
) -> Result<(Exp2Summary, Vec<GameLog>), ExperimentError>
where
    B: Fn(&str, &GameConfig) -> Result<Bindings, OrchestratorError> + Sync,
    C: Fn() -> Box<dyn Clock + Send> + Sync,
{
    if cfg.n_games == 0 {
        return Err(ExperimentError::Config("n_games must be at least 1".into()));
    }
    let logs = exp2_schedule(cfg)
        .into_par_iter()
        .map(|(code, game)| {
            let bindings = make_bindings(&code, &game)?;
            let run = run_game(
                GameDriverConfig {
                    game,
                    bindings,
                    retry: cfg.retry,
                    gamecode: code,
                    clock: make_clock(),
                },
                scripts,
            )?;
            Ok(run.log)
        })
        .collect::<Result<Vec<_>, OrchestratorError>>()?;
    Ok((Exp2Summary::from_logs(&logs), logs))
}

/// Replays archived logs and summarizes the replayed outcomes.
pub fn replay_batch(logs: &[GameLog], scripts: &ScriptSet) -> (Exp2Summary, Vec<VerifyReport>) {
    let reports: Vec<VerifyReport> = logs.par_iter().map(|l| verify_replay(l, scripts)).collect();
    // Replays that match reproduce the archived fields, so the archived logs
    // stand in for the replayed ones.
    let matched: Vec<GameLog> = logs
        .iter()
        .zip(&reports)
        .map(|(l, r)| {
            let mut l = l.clone();
            if !r.ok() {
                l.aborted = true;
            }
            l
        })
        .collect();
    (Exp2Summary::from_logs(&matched), reports)
}

pub const BASELINE_MAX_ROUNDS: u32 = 50;
const BASELINE_CHUNK: usize = 4096;

fn baseline_game(rng: &mut ChaCha8Rng, players: u8) -> bool {
    loop {
        let spy = rng.random_range(1..=players);
        for _ in 0..BASELINE_MAX_ROUNDS {
            let ballots = (1..=players).map(|voter| {
                let pick = rng.random_range(1..players);
                PlayerId::new(if pick >= voter { pick + 1 } else { pick }).expect("seat in range")
            });
            if let Some(chosen) = majority_choice(ballots, players) {
                return chosen.get() == spy;
            }
        }
    }
}

/// Fraction of simulated games in which the final vote names the spy, with
/// no accusations, no reveal, and uniform random votes for another player.
pub fn run_baseline(n_sims: usize, seed: u64, players: u8) -> f64 {
    assert!(n_sims > 0, "n_sims must be positive");
    assert!((3..=5).contains(&players), "player count must be 3 to 5");
    let hits: usize = (0..n_sims.div_ceil(BASELINE_CHUNK))
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let len = BASELINE_CHUNK.min(n_sims - chunk * BASELINE_CHUNK);
            (0..len).filter(|_| baseline_game(&mut rng, players)).count()
        })
        .sum();
    hits as f64 / n_sims as f64
}

/// Exact spy-identification probability by enumerating every ballot vector
/// of one round (votes for anyone but oneself) with the spy in seat 1.
/// Rounds without a majority are redrawn, so only decided vectors count.
pub fn baseline_oracle(players: u8) -> f64 {
    let n = players as usize;
    let total = (n - 1).pow(n as u32);
    let (mut decided, mut spy_chosen) = (0u64, 0u64);
    for code in 0..total {
        let mut rest = code;
        let ballots: Vec<PlayerId> = (1..=players)
            .map(|voter| {
                let pick = (rest % (n - 1)) as u8 + 1;
                rest /= n - 1;
                PlayerId::new(if pick >= voter { pick + 1 } else { pick }).expect("seat in range")
            })
            .collect();
        if let Some(chosen) = majority_choice(ballots, players) {
            decided += 1;
            spy_chosen += u64::from(chosen.get() == 1);
        }
    }
    spy_chosen as f64 / decided as f64
}
