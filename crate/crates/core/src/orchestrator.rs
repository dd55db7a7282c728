//! Drives one game: builds each prompt, collects actions through the retry
//! loop, feeds them to the state machine and emits the archived log.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{request_action, Agent, AgentError, AgentRequest, AuditEntry, Clock, RetryPolicy};
use crate::game_core::{
    Accusation, Ballot, GameConfig, GameError, GameOutcome, GameState, Phase, PlayerId, RevealDecision, Winner,
};
use crate::gamelog::{FinalVoteRound, GameLog, VoteRecord};
use crate::response_parser::{
    parse_accusation, parse_final_vote, parse_hang_vote, parse_reveal, sanitize_answer, ExtractContext, ParsedQuestion,
    QuestionParser, Tier,
};
use crate::scripts::{
    assemble_prompt, final_vote_sentence, render_preamble, render_progress, render_request, terminal_sentence,
    RequestContext, RequestKind, RolePreamble, ScriptError, ScriptSet,
};

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("invalid game setup: {0}")]
    Config(String),
    #[error(transparent)]
    Script(#[from] ScriptError),
    #[error("credential error: {0}")]
    Credential(String),
}

pub struct GameDriverConfig {
    pub game: GameConfig,
    pub bindings: BTreeMap<PlayerId, Box<dyn Agent>>,
    pub retry: RetryPolicy,
    pub gamecode: String,
    pub clock: Box<dyn Clock + Send>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub turn: u32,
    pub player: PlayerId,
    pub kind: RequestKind,
    /// Narration embedded in the prompt.
    pub progress: String,
    pub prompt: String,
}

#[derive(Debug, Clone)]
pub struct GameRun {
    pub log: GameLog,
    pub outcome: Option<GameOutcome>,
    pub audit: Vec<AuditEntry>,
    pub prompts: Vec<PromptRecord>,
    /// Taxonomy tier of every accepted question, in turn order.
    pub question_tiers: Vec<Tier>,
}

/// Why a game stopped early.
enum Stop {
    Abort(String),
    Fatal(OrchestratorError),
}

impl From<AgentError> for Stop {
    fn from(e: AgentError) -> Self {
        match e {
            AgentError::Credential(msg) => Stop::Fatal(OrchestratorError::Credential(msg)),
            other => Stop::Abort(other.to_string()),
        }
    }
}

impl From<GameError> for Stop {
    fn from(e: GameError) -> Self {
        Stop::Abort(e.to_string())
    }
}

impl From<ScriptError> for Stop {
    fn from(e: ScriptError) -> Self {
        Stop::Fatal(e.into())
    }
}

struct Driver<'a> {
    scripts: &'a ScriptSet,
    parser: QuestionParser,
    state: GameState,
    bindings: BTreeMap<PlayerId, Box<dyn Agent>>,
    retry: RetryPolicy,
    clock: Box<dyn Clock + Send>,
    audit: Vec<AuditEntry>,
    prompts: Vec<PromptRecord>,
    question_tiers: Vec<Tier>,
    /// Final-vote statements, per round.
    statements: Vec<BTreeMap<PlayerId, String>>,
    final_vote_narration: String,
}

impl Driver<'_> {
    fn preamble(&self, player: PlayerId) -> String {
        let cfg = &self.state.config;
        let role = if player == cfg.spy {
            RolePreamble::spy(player)
        } else {
            RolePreamble::non_spy(player, cfg.location)
        };
        render_preamble(self.scripts, &role)
    }

    fn prompt(&mut self, player: PlayerId, ctx: RequestContext) -> Result<String, ScriptError> {
        let kind = ctx.kind();
        let request = render_request(self.scripts, kind, &ctx)?;
        let progress = render_progress(&self.state.transcript) + &self.final_vote_narration;
        let prompt = assemble_prompt(self.scripts, &self.preamble(player), &progress, &request);
        self.prompts.push(PromptRecord {
            turn: self.state.current_turn,
            player,
            kind,
            progress,
            prompt: prompt.clone(),
        });
        Ok(prompt)
    }

    fn ask<T>(
        &mut self,
        player: PlayerId,
        ctx: RequestContext,
        parse: impl Fn(&str, &str) -> Result<T, String>,
        no_op: Option<(T, &str)>,
    ) -> Result<(T, String), Stop> {
        let prompt = self.prompt(player, ctx.clone())?;
        let request = AgentRequest {
            player,
            kind: ctx.kind(),
            prompt: &prompt,
        };
        let agent = self
            .bindings
            .get_mut(&player)
            .expect("bindings checked before the game starts");
        let action = request_action(
            agent.as_mut(),
            &request,
            |raw| parse(raw, &prompt),
            no_op,
            &self.retry,
            self.clock.as_ref(),
            &mut self.audit,
        )?;
        Ok((action.value, action.raw))
    }

    fn question(&mut self) -> Result<(), Stop> {
        let asker = self.state.next_asker;
        let player_count = self.state.config.player_count;
        let parser = self.parser.clone();
        let parse = |raw: &str, prompt: &str| {
            let ctx = ExtractContext {
                asker,
                player_count,
                prompt: Some(prompt),
            };
            let outcome = parser.extract(raw, &ctx);
            match outcome.action {
                Some(q) if q.target == asker => Err("question addressed to the asker".to_string()),
                Some(q) if outcome.class.tier.is_usable() => Ok((q, outcome.class.tier)),
                _ => Err(format!("unusable question: {:?}", outcome.class.tier)),
            }
        };
        let ((ParsedQuestion { target, text }, tier), _) = self.ask(asker, RequestContext::AskQuestion, parse, None)?;
        self.question_tiers.push(tier);
        self.state.apply_question(asker, target, &text)?;
        Ok(())
    }

    fn answer(&mut self) -> Result<(), Stop> {
        let record = self.state.current_record().expect("a question is pending");
        let (target, ctx) = (
            record.target,
            RequestContext::AnswerQuestion {
                turn: record.turn_no,
                asker: record.asker,
                question: record.question.clone(),
            },
        );
        let parse = |raw: &str, _: &str| {
            let a = sanitize_answer(raw).replace('"', "'");
            if a.is_empty() {
                Err("empty answer".to_string())
            } else {
                Ok(a)
            }
        };
        let (answer, _) = self.ask(target, ctx, parse, None)?;
        self.state.apply_answer(&answer)?;
        Ok(())
    }

    fn poll(&mut self) -> Result<(), Stop> {
        let mut responses = BTreeMap::new();
        let players: Vec<PlayerId> = self.state.config.players().collect();
        let player_count = self.state.config.player_count;
        for p in players {
            let parse = |raw: &str, _: &str| match parse_accusation(raw) {
                Ok(Accusation::Named(q)) if q == p => Err("self-accusation".to_string()),
                Ok(Accusation::Named(q)) if q.get() > player_count => Err(format!("no player {q}")),
                Ok(acc) => Ok(acc),
                Err(_) => Err(format!("unparseable accusation {raw:?}")),
            };
            let (mut acc, _) = self.ask(
                p,
                RequestContext::AccusationPoll,
                parse,
                Some((Accusation::NoAccusation, "X")),
            )?;
            if matches!(acc, Accusation::Named(_)) && !self.state.has_accusation_right(p) {
                acc = Accusation::NoAccusation;
            }
            responses.insert(p, acc);
        }
        self.state.record_accusation_poll(&responses)?;
        Ok(())
    }

    fn hang_vote(&mut self) -> Result<(), Stop> {
        let (accuser, accused) = self
            .state
            .current_record()
            .and_then(|r| r.accusation)
            .expect("hang voting follows an accusation");
        let mut ballots = BTreeMap::new();
        for p in self.state.hang_voters() {
            let parse = |raw: &str, _: &str| parse_hang_vote(raw).map_err(|_| format!("unparseable ballot {raw:?}"));
            let ctx = RequestContext::HangVote { accuser, accused };
            let (b, _) = self.ask(p, ctx, parse, Some((Ballot::NoHang, "X")))?;
            ballots.insert(p, b);
        }
        self.state.tally_hang_vote(&ballots)?;
        Ok(())
    }

    fn reveal(&mut self) -> Result<(), Stop> {
        let spy = self.state.config.spy;
        let parse = |raw: &str, _: &str| parse_reveal(raw).map_err(|_| format!("unparseable reveal {raw:?}"));
        let (d, _) = self.ask(
            spy,
            RequestContext::RevealWindow,
            parse,
            Some((RevealDecision::Pass, "X")),
        )?;
        self.state.apply_reveal(d)?;
        Ok(())
    }

    fn final_vote(&mut self) -> Result<(), Stop> {
        let round = self.state.final_vote_round;
        let max_turns = self.state.config.max_turns;
        let player_count = self.state.config.player_count;
        let mut ballots = BTreeMap::new();
        let mut statements = BTreeMap::new();
        let players: Vec<PlayerId> = self.state.config.players().collect();
        for p in players {
            let parse = |raw: &str, _: &str| match parse_final_vote(raw) {
                Ok(v) if v.vote == p => Err("vote for self".to_string()),
                Ok(v) if v.vote.get() > player_count => Err(format!("no player {}", v.vote)),
                Ok(v) => Ok(v),
                Err(_) => Err(format!("unparseable final vote {raw:?}")),
            };
            let (v, _) = self.ask(p, RequestContext::FinalVote { max_turns, round }, parse, None)?;
            self.final_vote_narration
                .push_str(&final_vote_sentence(round, p, v.vote, v.statement.as_deref()));
            ballots.insert(p, v.vote);
            if let Some(s) = v.statement {
                statements.insert(p, s);
            }
        }
        self.statements.push(statements);
        self.state.tally_final_vote(&ballots)?;
        Ok(())
    }

    fn step(&mut self) -> Result<(), Stop> {
        match self.state.phase {
            Phase::AwaitQuestion => self.question(),
            Phase::AwaitAnswer => self.answer(),
            Phase::AccusationPoll => self.poll(),
            Phase::HangVoting => self.hang_vote(),
            Phase::RevealWindow => self.reveal(),
            Phase::FinalVote => self.final_vote(),
            Phase::Finished => Ok(()),
        }
    }
}

fn accuse_token(a: &Accusation) -> String {
    match a {
        Accusation::Named(q) => q.to_string(),
        Accusation::NoAccusation => "X".into(),
    }
}

fn build_log(
    driver: &Driver<'_>,
    gamecode: String,
    game_start: chrono::DateTime<chrono::Utc>,
    abort: Option<String>,
) -> GameLog {
    let state = &driver.state;
    let outcome = state.outcome().ok();
    let answered: Vec<_> = state.transcript.iter().filter(|r| r.answer.is_some()).collect();
    let mut gamelog = render_progress(&state.transcript);
    if let Some(o) = &outcome {
        gamelog.push_str(&terminal_sentence(o));
    }
    GameLog {
        gamecode,
        spy: state.config.spy,
        location: state.config.location,
        spywin: outcome.is_some_and(|o| o.winner == Winner::Spy),
        game_start,
        game_end: driver.clock.now().max(game_start),
        gamelog,
        votelog: state
            .transcript
            .iter()
            .filter_map(|r| {
                r.hang_vote.as_ref().map(|v| VoteRecord {
                    turn: r.turn_no,
                    accuser: v.accuser,
                    accused: v.accused,
                    ballots: v
                        .ballots
                        .iter()
                        .map(|(&p, b)| (p, if *b == Ballot::Hang { "0" } else { "X" }.to_string()))
                        .collect(),
                    hanged: v.result == crate::game_core::HangResult::Hanged,
                })
            })
            .collect(),
        total_turn: state.transcript.len() as u32,
        questions: answered.iter().map(|r| (r.target, r.question.clone())).collect(),
        answers: answered.iter().filter_map(|r| r.answer.clone()).collect(),
        accuselog: state
            .transcript
            .iter()
            .filter_map(|r| {
                r.accusations
                    .as_ref()
                    .map(|acc| (r.turn_no, acc.iter().map(|(&p, a)| (p, accuse_token(a))).collect()))
            })
            .collect(),
        aborted: abort.is_some(),
        abort_reason: abort,
        reveal_guess: state.transcript.last().and_then(|r| match r.reveal {
            Some(RevealDecision::Guess(loc)) => Some(loc),
            _ => None,
        }),
        finalvotelog: state
            .final_votes
            .iter()
            .zip(&driver.statements)
            .enumerate()
            .map(|(i, (ballots, statements))| FinalVoteRound {
                round: i as u32 + 1,
                ballots: ballots.clone(),
                statements: statements.clone(),
            })
            .collect(),
    }
}

/// Plays one game to completion. Retry exhaustion, transport failure and an
/// unresolved final vote produce a log marked `aborted`; only credential and
/// script errors are returned as `Err`.
pub fn run_game(cfg: GameDriverConfig, scripts: &ScriptSet) -> Result<GameRun, OrchestratorError> {
    let state = GameState::new_game(cfg.game.clone()).map_err(|e| OrchestratorError::Config(e.to_string()))?;
    for p in cfg.game.players() {
        if !cfg.bindings.contains_key(&p) {
            return Err(OrchestratorError::Config(format!("no agent bound to player {p}")));
        }
    }
    if cfg.gamecode.is_empty() {
        return Err(OrchestratorError::Config("empty gamecode".into()));
    }
    let mut driver = Driver {
        scripts,
        parser: QuestionParser::default(),
        state,
        bindings: cfg.bindings,
        retry: cfg.retry,
        clock: cfg.clock,
        audit: Vec::new(),
        prompts: Vec::new(),
        question_tiers: Vec::new(),
        statements: Vec::new(),
        final_vote_narration: String::new(),
    };
    let game_start = driver.clock.now();
    let mut abort = None;
    while !driver.state.is_finished() {
        match driver.step() {
            Ok(()) => {}
            Err(Stop::Abort(reason)) => {
                abort = Some(reason);
                break;
            }
            Err(Stop::Fatal(e)) => return Err(e),
        }
    }
    let log = build_log(&driver, cfg.gamecode, game_start, abort);
    Ok(GameRun {
        outcome: driver.state.outcome().ok(),
        log,
        audit: driver.audit,
        prompts: driver.prompts,
        question_tiers: driver.question_tiers,
    })
}
