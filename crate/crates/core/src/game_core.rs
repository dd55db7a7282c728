//! Rules engine for the five-player Spyfall variant.
//!
//! [`GameState`] is a pure state machine: every event is validated against the
//! current phase before anything is mutated, so a rejected event leaves the
//! state untouched. No I/O, clocks or agents live here.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_PLAYERS: u8 = 5;
pub const DEFAULT_MAX_TURNS: u32 = 10;
pub const DEFAULT_HANG_THRESHOLD: u8 = 4;
pub const DEFAULT_MAX_REVOTES: u32 = 10;

/// The canonical location list, alphabetical, lowercase.
pub const LOCATIONS: [&str; 30] = [
    "airplane",
    "amusement park",
    "bank",
    "beach",
    "carnival",
    "casino",
    "circus tent",
    "corporate party",
    "crusader army",
    "day spa",
    "embassy",
    "hospital",
    "hotel",
    "military base",
    "movie studio",
    "nightclub",
    "ocean liner",
    "passenger train",
    "pirate ship",
    "polar station",
    "police station",
    "restaurant",
    "school",
    "service station",
    "space station",
    "submarine",
    "supermarket",
    "theater",
    "university",
    "zoo",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GameError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("game is not finished")]
    NotFinished,
    #[error("final vote unresolved after {rounds} rounds")]
    UnresolvedVote { rounds: u32 },
}

fn protocol<T>(msg: impl Into<String>) -> Result<T, GameError> {
    Err(GameError::Protocol(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct PlayerId(u8);

impl PlayerId {
    pub fn new(index: u8) -> Result<Self, GameError> {
        if (1..=MAX_PLAYERS).contains(&index) {
            Ok(PlayerId(index))
        } else {
            Err(GameError::Config(format!(
                "player {index} is outside 1..={MAX_PLAYERS}"
            )))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// Players `1..=count` in seat order.
    pub fn all(count: u8) -> impl Iterator<Item = PlayerId> {
        (1..=count.min(MAX_PLAYERS)).map(PlayerId)
    }
}

impl TryFrom<u8> for PlayerId {
    type Error = GameError;
    fn try_from(value: u8) -> Result<Self, Self::Error> {
        PlayerId::new(value)
    }
}

impl From<PlayerId> for u8 {
    fn from(p: PlayerId) -> u8 {
        p.0
    }
}

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One of the 30 canonical locations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Location(u8);

impl Location {
    /// Accepts any capitalization and surrounding whitespace; stores lowercase.
    pub fn parse(name: &str) -> Result<Self, GameError> {
        let wanted = name.trim().to_lowercase();
        LOCATIONS
            .iter()
            .position(|l| *l == wanted)
            .map(|i| Location(i as u8))
            .ok_or_else(|| GameError::Config(format!("unknown location {name:?}")))
    }

    pub fn name(self) -> &'static str {
        LOCATIONS[self.0 as usize]
    }

    /// Position in the alphabetical list.
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        (index < LOCATIONS.len()).then_some(Location(index as u8))
    }

    pub fn all() -> impl Iterator<Item = Location> {
        (0..LOCATIONS.len()).map(|i| Location(i as u8))
    }
}

impl TryFrom<String> for Location {
    type Error = GameError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Location::parse(&value)
    }
}

impl From<Location> for String {
    fn from(l: Location) -> String {
        l.name().to_string()
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameConfig {
    pub location: Location,
    pub spy: PlayerId,
    pub max_turns: u32,
    pub hang_threshold: u8,
    pub player_count: u8,
    /// Final-vote rounds allowed before the vote is declared unresolved.
    pub max_revotes: u32,
}

impl GameConfig {
    pub fn new(location: Location, spy: PlayerId) -> Self {
        GameConfig {
            location,
            spy,
            max_turns: DEFAULT_MAX_TURNS,
            hang_threshold: DEFAULT_HANG_THRESHOLD,
            player_count: MAX_PLAYERS,
            max_revotes: DEFAULT_MAX_REVOTES,
        }
    }

    pub fn validate(&self) -> Result<(), GameError> {
        if self.max_turns < 1 {
            return Err(GameError::Config("max_turns must be at least 1".into()));
        }
        if !(2..=MAX_PLAYERS).contains(&self.player_count) {
            return Err(GameError::Config(format!(
                "player_count {} is outside 2..={MAX_PLAYERS}",
                self.player_count
            )));
        }
        if self.hang_threshold < 1 || self.hang_threshold > self.player_count {
            return Err(GameError::Config(format!(
                "hang_threshold {} is outside 1..={}",
                self.hang_threshold, self.player_count
            )));
        }
        if self.spy.get() > self.player_count {
            return Err(GameError::Config(format!(
                "spy {} is outside 1..={}",
                self.spy, self.player_count
            )));
        }
        if self.max_revotes < 1 {
            return Err(GameError::Config("max_revotes must be at least 1".into()));
        }
        Ok(())
    }

    pub fn players(&self) -> impl Iterator<Item = PlayerId> {
        PlayerId::all(self.player_count)
    }

    fn contains(&self, p: PlayerId) -> bool {
        p.get() <= self.player_count
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Accusation {
    Named(PlayerId),
    NoAccusation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Ballot {
    Hang,
    NoHang,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HangResult {
    Hanged,
    NotHanged,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HangVote {
    pub accuser: PlayerId,
    pub accused: PlayerId,
    pub ballots: BTreeMap<PlayerId, Ballot>,
    pub result: HangResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RevealDecision {
    Pass,
    Guess(Location),
}

/// One turn, filled in as its events arrive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub turn_no: u32,
    pub asker: PlayerId,
    pub target: PlayerId,
    pub question: String,
    pub answer: Option<String>,
    /// Poll responses as submitted, one per player.
    pub accusations: Option<BTreeMap<PlayerId, Accusation>>,
    /// The accusation that triggered this turn's vote: (accuser, accused).
    pub accusation: Option<(PlayerId, PlayerId)>,
    pub hang_vote: Option<HangVote>,
    pub reveal: Option<RevealDecision>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    AwaitQuestion,
    AwaitAnswer,
    AccusationPoll,
    HangVoting,
    RevealWindow,
    FinalVote,
    Finished,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Winner {
    Spy,
    NonSpies,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OutcomeCause {
    HangedSpy,
    HangedNonSpy,
    CorrectGuess,
    WrongGuess,
    FinalVoteCorrect,
    FinalVoteWrong,
}

impl OutcomeCause {
    pub const ALL: [OutcomeCause; 6] = [
        OutcomeCause::HangedSpy,
        OutcomeCause::HangedNonSpy,
        OutcomeCause::CorrectGuess,
        OutcomeCause::WrongGuess,
        OutcomeCause::FinalVoteCorrect,
        OutcomeCause::FinalVoteWrong,
    ];

    pub fn winner(self) -> Winner {
        match self {
            OutcomeCause::HangedSpy | OutcomeCause::WrongGuess | OutcomeCause::FinalVoteCorrect => Winner::NonSpies,
            OutcomeCause::HangedNonSpy | OutcomeCause::CorrectGuess | OutcomeCause::FinalVoteWrong => Winner::Spy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameOutcome {
    pub winner: Winner,
    pub cause: OutcomeCause,
    /// The hanged player, the player chosen by the final vote, or the
    /// revealing spy, depending on the cause.
    pub subject: PlayerId,
}

impl GameOutcome {
    pub fn new(cause: OutcomeCause, subject: PlayerId) -> Self {
        GameOutcome {
            winner: cause.winner(),
            cause,
            subject,
        }
    }
}

/// Result of one final-vote round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FinalVoteTally {
    Decided(GameOutcome),
    RevoteRequired { next_round: u32 },
}

/// The player holding a strict majority of `ballots`, if any.
pub fn majority_choice(ballots: impl IntoIterator<Item = PlayerId>, player_count: u8) -> Option<PlayerId> {
    let mut counts = [0u32; MAX_PLAYERS as usize + 1];
    for b in ballots {
        counts[b.get() as usize] += 1;
    }
    let needed = player_count as u32 / 2 + 1;
    counts.iter().position(|&c| c >= needed).map(|i| PlayerId(i as u8))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameState {
    pub config: GameConfig,
    pub phase: Phase,
    pub current_turn: u32,
    pub next_asker: PlayerId,
    pub transcript: Vec<TurnRecord>,
    pub accusation_rights: BTreeMap<PlayerId, bool>,
    pub final_vote_round: u32,
    pub final_votes: Vec<BTreeMap<PlayerId, PlayerId>>,
    pub outcome: Option<GameOutcome>,
}

impl GameState {
    pub fn new_game(config: GameConfig) -> Result<Self, GameError> {
        config.validate()?;
        let accusation_rights = config.players().map(|p| (p, true)).collect();
        Ok(GameState {
            config,
            phase: Phase::AwaitQuestion,
            current_turn: 1,
            next_asker: PlayerId(1),
            transcript: Vec::new(),
            accusation_rights,
            final_vote_round: 0,
            final_votes: Vec::new(),
            outcome: None,
        })
    }

    fn expect_phase(&self, phase: Phase) -> Result<(), GameError> {
        if self.phase == phase {
            Ok(())
        } else {
            protocol(format!("expected phase {:?}, game is in {:?}", phase, self.phase))
        }
    }

    fn check_player(&self, p: PlayerId, role: &str) -> Result<(), GameError> {
        if self.config.contains(p) {
            Ok(())
        } else {
            protocol(format!("{role} {p} is not seated in this game"))
        }
    }

    fn open_turn(&mut self) -> &mut TurnRecord {
        self.transcript.last_mut().expect("turn opened by apply_question")
    }

    pub fn current_record(&self) -> Option<&TurnRecord> {
        self.transcript.last()
    }

    pub fn has_accusation_right(&self, p: PlayerId) -> bool {
        self.accusation_rights.get(&p).copied().unwrap_or(false)
    }

    pub fn apply_question(&mut self, asker: PlayerId, target: PlayerId, question: &str) -> Result<(), GameError> {
        self.expect_phase(Phase::AwaitQuestion)?;
        if asker != self.next_asker {
            return protocol(format!(
                "player {asker} asked out of turn; expected player {}",
                self.next_asker
            ));
        }
        self.check_player(target, "target")?;
        if target == asker {
            return protocol(format!("player {asker} cannot question themself"));
        }
        self.transcript.push(TurnRecord {
            turn_no: self.current_turn,
            asker,
            target,
            question: question.to_string(),
            answer: None,
            accusations: None,
            accusation: None,
            hang_vote: None,
            reveal: None,
        });
        self.phase = Phase::AwaitAnswer;
        Ok(())
    }

    pub fn apply_answer(&mut self, answer: &str) -> Result<(), GameError> {
        self.expect_phase(Phase::AwaitAnswer)?;
        let record = self.open_turn();
        record.answer = Some(answer.to_string());
        let target = record.target;
        self.next_asker = target;
        self.phase = Phase::AccusationPoll;
        Ok(())
    }

    /// Records one accusation poll. The first named accusation in seat order
    /// opens a hang vote and spends that accuser's right; later ones in the
    /// same poll are discarded and keep their right.
    pub fn record_accusation_poll(&mut self, responses: &BTreeMap<PlayerId, Accusation>) -> Result<(), GameError> {
        self.expect_phase(Phase::AccusationPoll)?;
        for p in self.config.players() {
            if !responses.contains_key(&p) {
                return protocol(format!("missing poll response from player {p}"));
            }
        }
        if responses.len() != self.config.player_count as usize {
            return protocol("poll responses from players not seated in this game");
        }
        for (&p, acc) in responses {
            if let Accusation::Named(q) = *acc {
                if q == p {
                    return protocol(format!("player {p} cannot accuse themself"));
                }
                self.check_player(q, "accused player")?;
                if !self.has_accusation_right(p) {
                    return protocol(format!("player {p} has already used their accusation"));
                }
            }
        }
        let first = responses.iter().find_map(|(&p, acc)| match *acc {
            Accusation::Named(q) => Some((p, q)),
            Accusation::NoAccusation => None,
        });
        let record = self.open_turn();
        record.accusations = Some(responses.clone());
        record.accusation = first;
        match first {
            Some((accuser, _)) => {
                self.accusation_rights.insert(accuser, false);
                self.phase = Phase::HangVoting;
            }
            None => self.phase = Phase::RevealWindow,
        }
        Ok(())
    }

    /// The players entitled to a ballot in the pending hang vote.
    pub fn hang_voters(&self) -> Vec<PlayerId> {
        match self.current_record().and_then(|r| r.accusation) {
            Some((_, accused)) => self.config.players().filter(|&p| p != accused).collect(),
            None => Vec::new(),
        }
    }

    pub fn tally_hang_vote(&mut self, ballots: &BTreeMap<PlayerId, Ballot>) -> Result<HangResult, GameError> {
        self.expect_phase(Phase::HangVoting)?;
        let (accuser, accused) = self
            .current_record()
            .and_then(|r| r.accusation)
            .expect("hang voting always follows an accusation");
        if ballots.contains_key(&accused) {
            return protocol(format!("accused player {accused} cannot vote on their own hanging"));
        }
        for p in self.config.players().filter(|&p| p != accused) {
            if !ballots.contains_key(&p) {
                return protocol(format!("missing hang ballot from player {p}"));
            }
        }
        if ballots.len() != self.config.player_count as usize - 1 {
            return protocol("hang ballots from players not seated in this game");
        }
        let hangs = ballots.values().filter(|b| **b == Ballot::Hang).count();
        let result = if hangs >= self.config.hang_threshold as usize {
            HangResult::Hanged
        } else {
            HangResult::NotHanged
        };
        let spy = self.config.spy;
        self.open_turn().hang_vote = Some(HangVote {
            accuser,
            accused,
            ballots: ballots.clone(),
            result,
        });
        match result {
            HangResult::Hanged => {
                let cause = if accused == spy {
                    OutcomeCause::HangedSpy
                } else {
                    OutcomeCause::HangedNonSpy
                };
                self.finish(GameOutcome::new(cause, accused));
            }
            HangResult::NotHanged => self.phase = Phase::RevealWindow,
        }
        Ok(result)
    }

    pub fn apply_reveal(&mut self, decision: RevealDecision) -> Result<(), GameError> {
        self.expect_phase(Phase::RevealWindow)?;
        self.open_turn().reveal = Some(decision);
        match decision {
            RevealDecision::Pass => {
                if self.current_turn < self.config.max_turns {
                    self.current_turn += 1;
                    self.phase = Phase::AwaitQuestion;
                } else {
                    self.final_vote_round = 1;
                    self.phase = Phase::FinalVote;
                }
            }
            RevealDecision::Guess(loc) => {
                let cause = if loc == self.config.location {
                    OutcomeCause::CorrectGuess
                } else {
                    OutcomeCause::WrongGuess
                };
                self.finish(GameOutcome::new(cause, self.config.spy));
            }
        }
        Ok(())
    }

    /// Tallies one final-vote round. A strict majority ends the game; anything
    /// else requires another round, up to `max_revotes` rounds in total.
    pub fn tally_final_vote(&mut self, ballots: &BTreeMap<PlayerId, PlayerId>) -> Result<FinalVoteTally, GameError> {
        self.expect_phase(Phase::FinalVote)?;
        for p in self.config.players() {
            match ballots.get(&p) {
                None => return protocol(format!("missing final-vote ballot from player {p}")),
                Some(&q) if q == p => return protocol(format!("player {p} cannot vote for themself")),
                Some(&q) => self.check_player(q, "voted-for player")?,
            }
        }
        if ballots.len() != self.config.player_count as usize {
            return protocol("final-vote ballots from players not seated in this game");
        }
        let choice = majority_choice(ballots.values().copied(), self.config.player_count);
        if choice.is_none() && self.final_vote_round >= self.config.max_revotes {
            return Err(GameError::UnresolvedVote {
                rounds: self.final_vote_round,
            });
        }
        self.final_votes.push(ballots.clone());
        match choice {
            Some(chosen) => {
                let cause = if chosen == self.config.spy {
                    OutcomeCause::FinalVoteCorrect
                } else {
                    OutcomeCause::FinalVoteWrong
                };
                let outcome = GameOutcome::new(cause, chosen);
                self.finish(outcome);
                Ok(FinalVoteTally::Decided(outcome))
            }
            None => {
                self.final_vote_round += 1;
                Ok(FinalVoteTally::RevoteRequired {
                    next_round: self.final_vote_round,
                })
            }
        }
    }

    fn finish(&mut self, outcome: GameOutcome) {
        self.outcome = Some(outcome);
        self.phase = Phase::Finished;
    }

    pub fn outcome(&self) -> Result<GameOutcome, GameError> {
        match (self.phase, self.outcome) {
            (Phase::Finished, Some(o)) => Ok(o),
            _ => Err(GameError::NotFinished),
        }
    }

    pub fn is_finished(&self) -> bool {
        self.phase == Phase::Finished
    }
}
