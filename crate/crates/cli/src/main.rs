//! `spyfall` command-line entry point.
//!
//! Exit codes: 0 success, 1 other failure, 2 config error, 3 credential
//! error, 4 aborted game, 5 replay divergence.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use chrono::Utc;
use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use spyfall_core::agents::{
    Agent, AgentError, BaselineAgent, ChatClient, ChatConfig, Clock, FixedClock, OnExhaustion, RemoteAgent,
    RetryPolicy, SystemClock,
};
use spyfall_core::experiments::{
    classify_corpus, load_annotations, load_corpus, run_baseline, run_exp1, run_exp2, Bindings, Exp2Config,
    ExperimentError,
};
use spyfall_core::game_core::{GameConfig, Location, PlayerId, LOCATIONS};
use spyfall_core::gamelog::{load_dir, read_legacy, verify_replay, write_run_dir, GameLog, GameLogError, RunManifest};
use spyfall_core::orchestrator::{run_game, GameDriverConfig, OrchestratorError};
use spyfall_core::response_parser::{Annotations, QuestionParser};
use spyfall_core::scripts::ScriptSet;

#[derive(Debug, Error)]
enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("credential error: {0}")]
    Credential(String),
    #[error("{0} game(s) aborted")]
    Aborted(usize),
    #[error("{0} game(s) diverged from their archived logs")]
    Diverged(usize),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Other(_) => 1,
            CliError::Config(_) => 2,
            CliError::Credential(_) => 3,
            CliError::Aborted(_) => 4,
            CliError::Diverged(_) => 5,
        }
    }
}

impl From<OrchestratorError> for CliError {
    fn from(e: OrchestratorError) -> Self {
        match e {
            OrchestratorError::Credential(m) => CliError::Credential(m),
            OrchestratorError::Config(m) => CliError::Config(m),
            other => CliError::Other(other.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Orchestrator(o) => o.into(),
            ExperimentError::Config(m) => CliError::Config(m),
            other => CliError::Other(other.to_string()),
        }
    }
}

impl From<GameLogError> for CliError {
    fn from(e: GameLogError) -> Self {
        CliError::Other(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "spyfall", version, about = "Spyfall games played by language-model agents")]
struct Cli {
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output run directory (overrides the `out` config key).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Play one game, or re-run an archived one with --fixtures.
    Run {
        #[arg(long)]
        location: Option<String>,
        #[arg(long)]
        spy: Option<u8>,
        /// Archived game log (JSON or legacy literal) whose responses drive the players.
        #[arg(long)]
        fixtures: Option<PathBuf>,
    },
    /// Play a batch of games.
    Batch {
        #[arg(long, default_value_t = 8)]
        n: usize,
    },
    /// Ask every location's first question and report the response taxonomy.
    Exp1 {
        #[arg(long)]
        location: Option<String>,
    },
    /// Classify a corpus of saved responses without calling any model.
    Classify {
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Replay archived logs and check they reproduce byte for byte.
    Replay {
        #[arg(long)]
        fixtures: PathBuf,
    },
    /// Estimate the random-vote spy identification rate.
    Baseline {
        #[arg(long, default_value_t = 100_000)]
        n: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum AgentKind {
    Remote,
    Baseline,
}

#[derive(Debug, Clone)]
struct RunConfig {
    scripts: Option<PathBuf>,
    chat: ChatConfig,
    retry: RetryPolicy,
    agent: AgentKind,
    out: PathBuf,
    seed: Option<u64>,
    concurrency: Option<usize>,
    gamecode_prefix: String,
    script_version: u32,
    players: u8,
    annotations: Option<PathBuf>,
    raw: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scripts: None,
            chat: ChatConfig::default(),
            retry: RetryPolicy::default(),
            agent: AgentKind::Remote,
            out: PathBuf::from("runs"),
            seed: None,
            concurrency: None,
            gamecode_prefix: "ena".into(),
            script_version: 5,
            players: 5,
            annotations: None,
            raw: BTreeMap::new(),
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("invalid value {value:?} for {key}")))
}

impl RunConfig {
    fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split(" #").next().unwrap_or_default().trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "scripts" => cfg.scripts = Some(value.into()),
                "base_url" => cfg.chat.base_url = value.into(),
                "model" => cfg.chat.model = value.into(),
                "api_key_env" => cfg.chat.api_key_env = value.into(),
                "temperature" => cfg.chat.temperature = Some(parse_value(key, value)?),
                "timeout_secs" => cfg.chat.timeout_secs = parse_value(key, value)?,
                "max_retries" => cfg.retry.max_retries = parse_value(key, value)?,
                "transport_retries" => cfg.retry.transport_retries = parse_value(key, value)?,
                "backoff_ms" => cfg.retry.backoff_base = Duration::from_millis(parse_value(key, value)?),
                "on_exhaustion" => {
                    cfg.retry.on_exhaustion = match value {
                        "abort" => OnExhaustion::AbortGame,
                        "noop" => OnExhaustion::SubstituteNoOp,
                        _ => {
                            return Err(CliError::Config(format!(
                                "on_exhaustion must be abort or noop, got {value:?}"
                            )))
                        }
                    }
                }
                "agent" => {
                    cfg.agent = match value {
                        "remote" => AgentKind::Remote,
                        "baseline" => AgentKind::Baseline,
                        _ => {
                            return Err(CliError::Config(format!(
                                "agent must be remote or baseline, got {value:?}"
                            )))
                        }
                    }
                }
                "out" => cfg.out = value.into(),
                "seed" => cfg.seed = Some(parse_value(key, value)?),
                "concurrency" => cfg.concurrency = Some(parse_value(key, value)?),
                "gamecode_prefix" => cfg.gamecode_prefix = value.into(),
                "script_version" => cfg.script_version = parse_value(key, value)?,
                "players" => cfg.players = parse_value(key, value)?,
                "annotations" => cfg.annotations = Some(value.into()),
                "api_key" => return Err(CliError::Config("API keys are read from the environment only".into())),
                _ => return Err(CliError::Config(format!("line {}: unknown key {key:?}", n + 1))),
            }
            cfg.raw.insert(key.into(), value.into());
        }
        Ok(cfg)
    }

    fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text =
                    fs::read_to_string(p).map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                Self::parse(&text)
            }
        }
    }

    fn scripts(&self) -> Result<ScriptSet, CliError> {
        match &self.scripts {
            None => Ok(ScriptSet::bundled()),
            Some(dir) => ScriptSet::from_dir(dir).map_err(|e| CliError::Config(e.to_string())),
        }
    }

    fn client(&self) -> Result<Arc<ChatClient>, CliError> {
        ChatClient::from_env(self.chat.clone())
            .map(Arc::new)
            .map_err(|e| match e {
                AgentError::Credential(m) => CliError::Credential(m),
                other => CliError::Other(other.to_string()),
            })
    }

    /// One agent per seat; baseline agents get distinct seeds per seat.
    fn bindings(&self, client: Option<&Arc<ChatClient>>, seed: u64) -> Bindings {
        (1..=self.players)
            .map(|i| {
                let agent: Box<dyn Agent> = match (self.agent, client) {
                    (AgentKind::Remote, Some(c)) => Box::new(RemoteAgent::new(c.clone())),
                    _ => Box::new(BaselineAgent::new(
                        seed.wrapping_mul(31).wrapping_add(u64::from(i)),
                        self.players,
                    )),
                };
                (PlayerId::new(i).expect("seat in range"), agent)
            })
            .collect()
    }

    fn manifest(&self, seed: u64, scripts: &ScriptSet, games: &[GameLog]) -> RunManifest {
        let mut versions = BTreeMap::from([("spyfall".to_string(), env!("CARGO_PKG_VERSION").to_string())]);
        if self.agent == AgentKind::Remote {
            versions.insert("model".into(), self.chat.model.clone());
        }
        RunManifest {
            run_id: format!("{}-{seed}", Utc::now().format("%Y%m%dT%H%M%S")),
            created: Utc::now(),
            seed: Some(seed),
            config: self.raw.clone(),
            script_checksums: scripts.checksums.clone(),
            versions,
            games: games.iter().map(|g| g.gamecode.clone()).collect(),
        }
    }
}

fn location_arg(name: &str) -> Result<Location, CliError> {
    Location::parse(name).map_err(|_| CliError::Config(format!("unknown location {name:?}")))
}

fn load_logs(path: &Path) -> Result<Vec<GameLog>, CliError> {
    if path.is_dir() {
        return Ok(load_dir(path)?);
    }
    let text = fs::read_to_string(path).map_err(|e| CliError::Other(format!("cannot read {}: {e}", path.display())))?;
    if text.trim_start().starts_with("{\"") || path.extension().is_some_and(|e| e == "json") {
        Ok(vec![GameLog::from_json(&text)?])
    } else {
        Ok(read_legacy(&text)?)
    }
}

fn summary_line(log: &GameLog) -> String {
    if log.aborted {
        return format!(
            "aborted after {} turns: {}",
            log.total_turn,
            log.abort_reason.as_deref().unwrap_or("unknown reason")
        );
    }
    let who = if log.spywin { "spy wins" } else { "non-spies win" };
    format!("{who}, {} turns", log.total_turn)
}

fn cmd_run(
    cfg: &RunConfig,
    out: Option<&Path>,
    seed: u64,
    location: Option<String>,
    spy: Option<u8>,
    fixture: Option<PathBuf>,
) -> Result<(), CliError> {
    let scripts = cfg.scripts()?;
    let driver = match fixture {
        Some(path) => {
            let mut logs = load_logs(&path)?;
            if logs.len() != 1 {
                return Err(CliError::Config(format!(
                    "{} holds {} games, expected one",
                    path.display(),
                    logs.len()
                )));
            }
            let log = logs.remove(0);
            GameDriverConfig {
                game: GameConfig::new(log.location, log.spy),
                bindings: log
                    .replay_agents()
                    .into_iter()
                    .map(|(p, a)| (p, Box::new(a) as Box<dyn Agent>))
                    .collect(),
                retry: RetryPolicy {
                    max_retries: 0,
                    ..cfg.retry
                },
                gamecode: log.gamecode.clone(),
                clock: Box::new(FixedClock(log.game_start)),
            }
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let location = match location {
                Some(name) => location_arg(&name)?,
                None => Location::from_index(rng.random_range(0..LOCATIONS.len())).expect("index in range"),
            };
            let spy = match spy {
                Some(s) => PlayerId::new(s).map_err(|e| CliError::Config(e.to_string()))?,
                None => PlayerId::new(rng.random_range(1..=cfg.players)).expect("seat in range"),
            };
            let client = match cfg.agent {
                AgentKind::Remote => Some(cfg.client()?),
                AgentKind::Baseline => None,
            };
            let game = GameConfig {
                player_count: cfg.players,
                ..GameConfig::new(location, spy)
            };
            GameDriverConfig {
                game,
                bindings: cfg.bindings(client.as_ref(), seed),
                retry: cfg.retry,
                gamecode: spyfall_core::experiments::gamecode(&cfg.gamecode_prefix, cfg.script_version, 1),
                clock: Box::new(SystemClock),
            }
        }
    };
    let run = run_game(driver, &scripts)?;
    println!("{}", summary_line(&run.log));
    if let Some(dir) = out {
        let logs = [run.log.clone()];
        write_run_dir(dir, &cfg.manifest(seed, &scripts, &logs), &logs)?;
    }
    if run.log.aborted {
        return Err(CliError::Aborted(1));
    }
    Ok(())
}

fn cmd_batch(cfg: &RunConfig, out: &Path, seed: u64, n: usize) -> Result<(), CliError> {
    let scripts = cfg.scripts()?;
    let client = match cfg.agent {
        AgentKind::Remote => Some(cfg.client()?),
        AgentKind::Baseline => None,
    };
    let exp = Exp2Config {
        n_games: n,
        gamecode_prefix: cfg.gamecode_prefix.clone(),
        script_version: cfg.script_version,
        seed,
        retry: cfg.retry,
        ..Exp2Config::default()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.concurrency.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let (summary, logs) = pool.install(|| {
        run_exp2(
            &exp,
            &scripts,
            |code, _| {
                let game_seed = seed ^ code[code.len() - 3..].parse::<u64>().unwrap_or(0);
                Ok(cfg.bindings(client.as_ref(), game_seed))
            },
            || Box::new(SystemClock) as Box<dyn Clock + Send>,
        )
    })?;
    for log in &logs {
        println!("{}: {}", log.gamecode, summary_line(log));
    }
    println!(
        "spy:non-spy = {}:{}, aborted {}, mean turns {:.2}",
        summary.spy_wins, summary.non_spy_wins, summary.aborted, summary.mean_turns
    );
    write_run_dir(out, &cfg.manifest(seed, &scripts, &logs), &logs)?;
    if summary.aborted > 0 {
        return Err(CliError::Aborted(summary.aborted));
    }
    Ok(())
}

fn cmd_exp1(cfg: &RunConfig, out: &Path, location: Option<String>) -> Result<(), CliError> {
    let scripts = cfg.scripts()?;
    let locations = match location {
        Some(name) => vec![location_arg(&name)?],
        None => Location::all().collect(),
    };
    let mut agent = RemoteAgent::new(cfg.client()?);
    let (report, records, audit) = run_exp1(&locations, &mut agent, &cfg.retry, &scripts, &SystemClock)?;
    print!("{}", report.render_table());
    fs::create_dir_all(out).map_err(|e| CliError::Other(format!("cannot create {}: {e}", out.display())))?;
    let body = serde_json::json!({ "report": report, "records": records, "audit": audit });
    let path = out.join("exp1.json");
    let text = serde_json::to_string_pretty(&body).map_err(|e| CliError::Other(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| CliError::Other(format!("cannot write {}: {e}", path.display())))?;
    if !report.failed_locations.is_empty() {
        return Err(CliError::Other(format!(
            "no response for {}",
            report.failed_locations.join(", ")
        )));
    }
    Ok(())
}

fn cmd_classify(cfg: &RunConfig, corpus: &Path) -> Result<(), CliError> {
    let records = load_corpus(corpus)?;
    let annotations = match &cfg.annotations {
        Some(p) => load_annotations(p)?,
        None => Annotations::new(),
    };
    let report = classify_corpus(&records, &QuestionParser::default(), &annotations);
    for r in &report.records {
        let flags: Vec<String> = r.outcome.class.flags.iter().map(|f| format!("{f:?}")).collect();
        let action = r
            .outcome
            .action
            .as_ref()
            .map(|q| q.to_tuple())
            .unwrap_or_else(|| "-".into());
        println!(
            "{}\t{:?}\t[{}]\t{}",
            r.id,
            r.outcome.class.tier,
            flags.join(","),
            action
        );
    }
    print!("{}", report.render_table());
    Ok(())
}

fn cmd_replay(cfg: &RunConfig, fixtures: &Path) -> Result<(), CliError> {
    let scripts = cfg.scripts()?;
    let logs = load_logs(fixtures)?;
    let mut diverged = 0;
    for log in &logs {
        let report = verify_replay(log, &scripts);
        if report.ok() {
            println!("{}: ok ({})", log.gamecode, summary_line(log));
        } else {
            diverged += 1;
            for m in &report.mismatches {
                println!("{}: {} differs: {}", log.gamecode, m.field, m.detail);
            }
        }
    }
    println!("{} of {} games reproduced", logs.len() - diverged, logs.len());
    if diverged > 0 {
        return Err(CliError::Diverged(diverged));
    }
    Ok(())
}

fn cmd_baseline(cfg: &RunConfig, seed: u64, n: usize) -> Result<(), CliError> {
    if n == 0 || !(3..=5).contains(&cfg.players) {
        return Err(CliError::Config("baseline needs n >= 1 and 3 to 5 players".into()));
    }
    let est = run_baseline(n, seed, cfg.players);
    println!(
        "{est:.4} ({n} simulated {}-player games, expected {:.4})",
        cfg.players,
        1.0 / f64::from(cfg.players)
    );
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = RunConfig::load(cli.config.as_deref())?;
    let seed = cli.seed.or(cfg.seed).unwrap_or_else(|| rand::rng().random());
    let out = cli.out.clone().unwrap_or_else(|| cfg.out.clone());
    match cli.command {
        Command::Run {
            location,
            spy,
            fixtures,
        } => {
            let out = (cli.out.is_some() || cfg.raw.contains_key("out") || fixtures.is_none()).then_some(out);
            cmd_run(&cfg, out.as_deref(), seed, location, spy, fixtures)
        }
        Command::Batch { n } => cmd_batch(&cfg, &out, seed, n),
        Command::Exp1 { location } => cmd_exp1(&cfg, &out, location),
        Command::Classify { corpus } => cmd_classify(&cfg, &corpus),
        Command::Replay { fixtures } => cmd_replay(&cfg, &fixtures),
        Command::Baseline { n } => cmd_baseline(&cfg, seed, n),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spyfall: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
