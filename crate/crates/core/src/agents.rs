//! Player backends and the request/retry loop.
//!
//! An [`Agent`] turns a prompt into raw text. [`request_action`] wraps one
//! request with transport retries (network faults) and taxonomy retries
//! (unparseable replies) and records every attempt in the audit log.

use std::collections::VecDeque;
use std::thread;
use std::time::Duration;

use chrono::{DateTime, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game_core::PlayerId;
use crate::scripts::RequestKind;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgentError {
    #[error("transport error for player {player}: {message}")]
    Transport {
        player: PlayerId,
        message: String,
        retryable: bool,
    },
    #[error("credential error: {0}")]
    Credential(String),
    #[error("replay fixture for player {player} has no response left for {kind}")]
    FixtureExhausted { player: PlayerId, kind: RequestKind },
    #[error("player {player} gave no usable {kind} response after {attempts} attempts")]
    RetriesExhausted {
        player: PlayerId,
        kind: RequestKind,
        attempts: u32,
    },
}

pub trait Clock {
    fn now(&self) -> DateTime<Utc>;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Always reports the same instant. Used for replay and tests.
pub struct FixedClock(pub DateTime<Utc>);

impl Clock for FixedClock {
    fn now(&self) -> DateTime<Utc> {
        self.0
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AgentRequest<'a> {
    pub player: PlayerId,
    pub kind: RequestKind,
    pub prompt: &'a str,
}

pub trait Agent: Send {
    fn respond(&mut self, request: &AgentRequest<'_>) -> Result<String, AgentError>;

    /// Short description for run manifests.
    fn label(&self) -> String;
}

/// Pops pre-recorded responses in request order.
#[derive(Debug, Clone, Default)]
pub struct ReplayAgent {
    queue: VecDeque<String>,
}

impl ReplayAgent {
    pub fn new(responses: impl IntoIterator<Item = String>) -> Self {
        ReplayAgent {
            queue: responses.into_iter().collect(),
        }
    }

    pub fn remaining(&self) -> usize {
        self.queue.len()
    }
}

impl Agent for ReplayAgent {
    fn respond(&mut self, request: &AgentRequest<'_>) -> Result<String, AgentError> {
        self.queue.pop_front().ok_or(AgentError::FixtureExhausted {
            player: request.player,
            kind: request.kind,
        })
    }

    fn label(&self) -> String {
        "replay".into()
    }
}

/// Wraps a closure. Handy for tests and foreign-language callers.
pub struct FnAgent<F>(pub F);

impl<F> Agent for FnAgent<F>
where
    F: FnMut(&AgentRequest<'_>) -> String + Send,
{
    fn respond(&mut self, request: &AgentRequest<'_>) -> Result<String, AgentError> {
        Ok((self.0)(request))
    }

    fn label(&self) -> String {
        "scripted".into()
    }
}

/// Random player for the chance baseline: passive in every phase except the
/// final vote, where it picks uniformly among the other seats.
#[derive(Debug, Clone)]
pub struct BaselineAgent {
    rng: ChaCha8Rng,
    player_count: u8,
}

impl BaselineAgent {
    pub fn new(seed: u64, player_count: u8) -> Self {
        BaselineAgent {
            rng: ChaCha8Rng::seed_from_u64(seed),
            player_count,
        }
    }

    fn other_seat(&mut self, me: PlayerId) -> u8 {
        let pick = self.rng.random_range(1..self.player_count);
        if pick >= me.get() {
            pick + 1
        } else {
            pick
        }
    }
}

impl Agent for BaselineAgent {
    fn respond(&mut self, request: &AgentRequest<'_>) -> Result<String, AgentError> {
        Ok(match request.kind {
            RequestKind::AskQuestion => {
                let target = self.other_seat(request.player);
                format!("({target}, \"What do you usually do here?\")")
            }
            RequestKind::AnswerQuestion => "\"The usual things.\"".into(),
            RequestKind::AccusationPoll | RequestKind::HangVote | RequestKind::RevealWindow => "X".into(),
            RequestKind::FinalVote => self.other_seat(request.player).to_string(),
        })
    }

    fn label(&self) -> String {
        "baseline".into()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatConfig {
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub temperature: Option<f64>,
    pub timeout_secs: u64,
}

impl Default for ChatConfig {
    fn default() -> Self {
        ChatConfig {
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-4".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            temperature: None,
            timeout_secs: 120,
        }
    }
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatBody<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
    #[serde(skip_serializing_if = "Option::is_none")]
    temperature: Option<f64>,
}

#[derive(Deserialize)]
struct ChatReply {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatReplyMessage,
}

#[derive(Deserialize)]
struct ChatReplyMessage {
    content: Option<String>,
}

/// Blocking chat-completions client. Each prompt goes out as a single user
/// message with no system message.
pub struct ChatClient {
    config: ChatConfig,
    api_key: String,
    http: reqwest::blocking::Client,
}

impl ChatClient {
    pub fn from_env(config: ChatConfig) -> Result<Self, AgentError> {
        let api_key = std::env::var(&config.api_key_env)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| AgentError::Credential(format!("environment variable {} is not set", config.api_key_env)))?;
        Self::with_key(config, api_key)
    }

    pub fn with_key(config: ChatConfig, api_key: String) -> Result<Self, AgentError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| AgentError::Credential(format!("cannot build HTTP client: {e}")))?;
        Ok(ChatClient { config, api_key, http })
    }

    pub fn config(&self) -> &ChatConfig {
        &self.config
    }

    pub fn complete(&self, player: PlayerId, prompt: &str) -> Result<String, AgentError> {
        let fail = |message: String, retryable: bool| AgentError::Transport {
            player,
            message,
            retryable,
        };
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let body = ChatBody {
            model: &self.config.model,
            messages: [ChatMessage {
                role: "user",
                content: prompt,
            }],
            temperature: self.config.temperature,
        };
        let resp = self
            .http
            .post(url)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| fail(e.to_string(), e.is_timeout() || e.is_connect() || e.is_request()))?;
        let status = resp.status();
        if status == reqwest::StatusCode::UNAUTHORIZED || status == reqwest::StatusCode::FORBIDDEN {
            return Err(AgentError::Credential(format!(
                "server rejected the API key ({status})"
            )));
        }
        if !status.is_success() {
            let retryable = status.is_server_error() || status == reqwest::StatusCode::TOO_MANY_REQUESTS;
            return Err(fail(format!("HTTP {status}"), retryable));
        }
        let reply: ChatReply = resp.json().map_err(|e| fail(format!("malformed reply: {e}"), false))?;
        reply
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| fail("reply has no message content".into(), false))
    }
}

pub struct RemoteAgent {
    client: std::sync::Arc<ChatClient>,
}

impl RemoteAgent {
    pub fn new(client: std::sync::Arc<ChatClient>) -> Self {
        RemoteAgent { client }
    }
}

impl Agent for RemoteAgent {
    fn respond(&mut self, request: &AgentRequest<'_>) -> Result<String, AgentError> {
        self.client.complete(request.player, request.prompt)
    }

    fn label(&self) -> String {
        format!("remote:{}", self.client.config().model)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OnExhaustion {
    AbortGame,
    /// Use the phase's no-op (X) where one exists. Question and answer
    /// requests have none and still abort.
    SubstituteNoOp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub on_exhaustion: OnExhaustion,
    pub transport_retries: u32,
    pub backoff_base: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            on_exhaustion: OnExhaustion::AbortGame,
            transport_retries: 2,
            backoff_base: Duration::from_secs(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub player: PlayerId,
    pub kind: RequestKind,
    /// Taxonomy attempt, starting at 0.
    pub attempt: u32,
    /// Transport attempt within this taxonomy attempt, starting at 0.
    pub transport_attempt: u32,
    pub at: DateTime<Utc>,
    pub response: Option<String>,
    pub error: Option<String>,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Action<T> {
    pub value: T,
    pub raw: String,
    pub substituted: bool,
}

/// Requests one action from `agent`, re-sending the same prompt until
/// `parse` accepts the reply or the retry budget is spent.
#[allow(clippy::too_many_arguments)]
pub fn request_action<T>(
    agent: &mut dyn Agent,
    request: &AgentRequest<'_>,
    parse: impl Fn(&str) -> Result<T, String>,
    no_op: Option<(T, &str)>,
    policy: &RetryPolicy,
    clock: &dyn Clock,
    audit: &mut Vec<AuditEntry>,
) -> Result<Action<T>, AgentError> {
    let entry = |attempt, transport_attempt, response: Option<&str>, error: Option<String>, accepted| AuditEntry {
        player: request.player,
        kind: request.kind,
        attempt,
        transport_attempt,
        at: clock.now(),
        response: response.map(str::to_string),
        error,
        accepted,
    };
    for attempt in 0..=policy.max_retries {
        let mut transport_attempt = 0;
        let raw = loop {
            match agent.respond(request) {
                Ok(raw) => break raw,
                Err(e) => {
                    audit.push(entry(attempt, transport_attempt, None, Some(e.to_string()), false));
                    let retryable = matches!(e, AgentError::Transport { retryable: true, .. });
                    if !retryable || transport_attempt >= policy.transport_retries {
                        return Err(e);
                    }
                    thread::sleep(policy.backoff_base * 2u32.pow(transport_attempt));
                    transport_attempt += 1;
                }
            }
        };
        match parse(&raw) {
            Ok(value) => {
                audit.push(entry(attempt, transport_attempt, Some(&raw), None, true));
                return Ok(Action {
                    value,
                    raw,
                    substituted: false,
                });
            }
            Err(why) => audit.push(entry(attempt, transport_attempt, Some(&raw), Some(why), false)),
        }
    }
    match (policy.on_exhaustion, no_op) {
        (OnExhaustion::SubstituteNoOp, Some((value, token))) => Ok(Action {
            value,
            raw: token.to_string(),
            substituted: true,
        }),
        _ => Err(AgentError::RetriesExhausted {
            player: request.player,
            kind: request.kind,
            attempts: policy.max_retries + 1,
        }),
    }
}
