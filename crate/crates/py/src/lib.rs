//! Python bindings: the game state machine, log replay, response parser and
//! baseline estimator.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use spyfall_core::experiments;
use spyfall_core::game_core::{
    Accusation, Ballot, FinalVoteTally, GameConfig, GameOutcome, GameState, HangResult, Location, PlayerId,
    RevealDecision, Winner, LOCATIONS,
};
use spyfall_core::gamelog;
use spyfall_core::response_parser::{self, ExtractContext, QuestionParser};
use spyfall_core::scripts::ScriptSet;

create_exception!(spyfall, SpyfallError, PyException);

fn err(e: impl std::fmt::Display) -> PyErr {
    SpyfallError::new_err(e.to_string())
}

fn seat(i: u8) -> PyResult<PlayerId> {
    PlayerId::new(i).map_err(err)
}

fn location(name: &str) -> PyResult<Location> {
    Location::parse(name).map_err(err)
}

fn outcome_tuple(o: GameOutcome) -> (String, String, u8) {
    let winner = match o.winner {
        Winner::Spy => "spy",
        Winner::NonSpies => "non-spies",
    };
    (winner.into(), format!("{:?}", o.cause), o.subject.get())
}

/// A five-player game driven one event at a time.
#[pyclass(module = "spyfall")]
struct Game {
    state: GameState,
}

#[pymethods]
impl Game {
    #[new]
    fn new(location_name: &str, spy: u8) -> PyResult<Self> {
        let state = GameState::new_game(GameConfig::new(location(location_name)?, seat(spy)?)).map_err(err)?;
        Ok(Game { state })
    }

    #[getter]
    fn phase(&self) -> String {
        format!("{:?}", self.state.phase)
    }

    #[getter]
    fn current_turn(&self) -> u32 {
        self.state.current_turn
    }

    #[getter]
    fn next_asker(&self) -> u8 {
        self.state.next_asker.get()
    }

    fn has_accusation_right(&self, player: u8) -> PyResult<bool> {
        Ok(self.state.has_accusation_right(seat(player)?))
    }

    fn hang_voters(&self) -> Vec<u8> {
        self.state.hang_voters().into_iter().map(PlayerId::get).collect()
    }

    fn ask(&mut self, asker: u8, target: u8, question: &str) -> PyResult<()> {
        self.state
            .apply_question(seat(asker)?, seat(target)?, question)
            .map_err(err)
    }

    fn answer(&mut self, text: &str) -> PyResult<()> {
        self.state.apply_answer(text).map_err(err)
    }

    /// `responses` maps each seat to the accused seat, or None for no accusation.
    fn poll(&mut self, responses: BTreeMap<u8, Option<u8>>) -> PyResult<()> {
        let mut poll = BTreeMap::new();
        for (p, a) in responses {
            let a = match a {
                Some(t) => Accusation::Named(seat(t)?),
                None => Accusation::NoAccusation,
            };
            poll.insert(seat(p)?, a);
        }
        self.state.record_accusation_poll(&poll).map_err(err)
    }

    /// Returns True if the accused was hanged.
    fn hang_vote(&mut self, ballots: BTreeMap<u8, bool>) -> PyResult<bool> {
        let mut b = BTreeMap::new();
        for (p, hang) in ballots {
            b.insert(seat(p)?, if hang { Ballot::Hang } else { Ballot::NoHang });
        }
        Ok(self.state.tally_hang_vote(&b).map_err(err)? == HangResult::Hanged)
    }

    #[pyo3(signature = (guess=None))]
    fn reveal(&mut self, guess: Option<&str>) -> PyResult<()> {
        let d = match guess {
            Some(g) => RevealDecision::Guess(location(g)?),
            None => RevealDecision::Pass,
        };
        self.state.apply_reveal(d).map_err(err)
    }

    /// Returns the outcome if decided, None if a revote is required.
    fn final_vote(&mut self, ballots: BTreeMap<u8, u8>) -> PyResult<Option<(String, String, u8)>> {
        let mut b = BTreeMap::new();
        for (p, v) in ballots {
            b.insert(seat(p)?, seat(v)?);
        }
        Ok(match self.state.tally_final_vote(&b).map_err(err)? {
            FinalVoteTally::Decided(o) => Some(outcome_tuple(o)),
            FinalVoteTally::RevoteRequired { .. } => None,
        })
    }

    /// `(winner, cause, subject)` once the game is over.
    #[getter]
    fn outcome(&self) -> Option<(String, String, u8)> {
        self.state.outcome.map(outcome_tuple)
    }

    fn is_finished(&self) -> bool {
        self.state.is_finished()
    }
}

/// An archived game.
#[pyclass(module = "spyfall")]
struct GameLog {
    log: gamelog::GameLog,
}

#[pymethods]
impl GameLog {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        gamelog::GameLog::from_json(text)
            .map(|log| GameLog { log })
            .map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        gamelog::GameLog::load(&path).map(|log| GameLog { log }).map_err(err)
    }

    /// Parses a legacy Python-literal dump, which may hold several games.
    #[staticmethod]
    fn read_legacy(text: &str) -> PyResult<Vec<GameLog>> {
        let logs = gamelog::read_legacy(text).map_err(err)?;
        Ok(logs.into_iter().map(|log| GameLog { log }).collect())
    }

    fn to_json(&self) -> PyResult<String> {
        self.log.to_json().map_err(err)
    }

    #[getter]
    fn gamecode(&self) -> &str {
        &self.log.gamecode
    }

    #[getter]
    fn spy(&self) -> u8 {
        self.log.spy.get()
    }

    #[getter]
    fn location(&self) -> &'static str {
        self.log.location.name()
    }

    #[getter]
    fn spywin(&self) -> bool {
        self.log.spywin
    }

    #[getter]
    fn total_turn(&self) -> u32 {
        self.log.total_turn
    }

    #[getter]
    fn narration(&self) -> &str {
        &self.log.gamelog
    }

    /// Replays the game with the bundled scripts and returns `(field, detail)`
    /// for every field that differs; empty when the replay reproduces the log.
    fn verify(&self) -> Vec<(String, String)> {
        gamelog::verify_replay(&self.log, &ScriptSet::bundled())
            .mismatches
            .into_iter()
            .map(|m| (m.field, m.detail))
            .collect()
    }
}

/// Classifies one raw question response. Returns a dict with `tier`, `flags`,
/// and `target`/`text` when a question was recovered.
#[pyfunction]
#[pyo3(signature = (raw, location_name=None, asker=1))]
fn classify<'py>(
    py: Python<'py>,
    raw: &str,
    location_name: Option<&str>,
    asker: u8,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let loc = location_name.map(location).transpose()?;
    let ctx = ExtractContext {
        asker: seat(asker)?,
        ..ExtractContext::default()
    };
    let out = QuestionParser::default().classify(raw, loc, &BTreeSet::new(), &ctx);
    let d = pyo3::types::PyDict::new(py);
    d.set_item("tier", format!("{:?}", out.class.tier))?;
    let flags: Vec<String> = out.class.flags.iter().map(|f| format!("{f:?}")).collect();
    d.set_item("flags", flags)?;
    if let Some(q) = out.action {
        d.set_item("target", q.target.get())?;
        d.set_item("text", q.text)?;
    }
    Ok(d)
}

#[pyfunction]
fn detect_keyword_leak(question: &str, location_name: &str) -> PyResult<bool> {
    Ok(response_parser::detect_keyword_leak(question, location(location_name)?))
}

#[pyfunction]
#[pyo3(signature = (n_sims, seed, players=5))]
fn run_baseline(py: Python<'_>, n_sims: usize, seed: u64, players: u8) -> PyResult<f64> {
    if n_sims == 0 || !(3..=5).contains(&players) {
        return Err(err("n_sims must be positive and players 3 to 5"));
    }
    Ok(py.detach(|| experiments::run_baseline(n_sims, seed, players)))
}

#[pyfunction]
#[pyo3(signature = (players=5))]
fn baseline_oracle(players: u8) -> PyResult<f64> {
    if !(3..=5).contains(&players) {
        return Err(err("players must be 3 to 5"));
    }
    Ok(experiments::baseline_oracle(players))
}

/// The first-turn question prompt player 1 receives at `location_name`.
#[pyfunction]
fn exp1_prompt(location_name: &str) -> PyResult<String> {
    Ok(experiments::exp1_prompt(
        &ScriptSet::bundled(),
        location(location_name)?,
    ))
}

#[pymodule]
fn spyfall(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SpyfallError", m.py().get_type::<SpyfallError>())?;
    m.add("LOCATIONS", LOCATIONS.to_vec())?;
    m.add_class::<Game>()?;
    m.add_class::<GameLog>()?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(detect_keyword_leak, m)?)?;
    m.add_function(wrap_pyfunction!(run_baseline, m)?)?;
    m.add_function(wrap_pyfunction!(baseline_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(exp1_prompt, m)?)?;
    Ok(())
}
