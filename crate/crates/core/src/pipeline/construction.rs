//! Generation / rectification loop against an abstract chat endpoint.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::prompts::{build_generation_prompt, build_rectification_prompt, with_feedback, ChatPrompt};
use super::Sample;
use crate::parsing::parse_indices;

pub const DEFAULT_MAX_ROUNDS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system: String,
    pub user: String,
    /// Image to attach, if the endpoint should see the page.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
}

impl ChatRequest {
    fn new(prompt: ChatPrompt, image: Option<String>) -> Self {
        Self {
            system: prompt.system,
            user: prompt.user,
            image,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message}")]
pub struct ChatError {
    pub message: String,
    /// Worth retrying (timeouts, 429, 5xx).
    pub retryable: bool,
}

impl ChatError {
    pub fn fatal(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            retryable: false,
        }
    }

    pub fn transient(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            retryable: true,
        }
    }
}

pub trait ChatClient {
    fn complete(&mut self, request: &ChatRequest) -> Result<String, ChatError>;
}

/// Replays canned replies in order and records every request it saw.
#[derive(Debug, Clone, Default)]
pub struct ScriptedClient {
    replies: VecDeque<Result<String, ChatError>>,
    pub requests: Vec<ChatRequest>,
}

impl ScriptedClient {
    pub fn new<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            replies: replies.into_iter().map(|r| Ok(r.into())).collect(),
            requests: Vec::new(),
        }
    }

    pub fn push_error(&mut self, err: ChatError) {
        self.replies.push_back(Err(err));
    }

    pub fn remaining(&self) -> usize {
        self.replies.len()
    }
}

impl ChatClient for ScriptedClient {
    fn complete(&mut self, request: &ChatRequest) -> Result<String, ChatError> {
        self.requests.push(request.clone());
        self.replies
            .pop_front()
            .unwrap_or_else(|| Err(ChatError::fatal("script exhausted")))
    }
}

/// Always answers with the same text.
#[derive(Debug, Clone)]
pub struct FixedClient(pub String);

impl ChatClient for FixedClient {
    fn complete(&mut self, _: &ChatRequest) -> Result<String, ChatError> {
        Ok(self.0.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub multiplier: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            initial_backoff_ms: 500,
            multiplier: 2.0,
        }
    }
}

impl RetryPolicy {
    pub fn backoff(&self, attempt: u32) -> Duration {
        let ms = self.initial_backoff_ms as f64 * self.multiplier.powi(attempt as i32);
        Duration::from_millis(ms.min(60_000.0) as u64)
    }
}

/// Wraps a client, retrying transient errors with exponential backoff.
pub struct Retrying<C> {
    inner: C,
    policy: RetryPolicy,
    sleep: fn(Duration),
}

impl<C> Retrying<C> {
    pub fn new(inner: C, policy: RetryPolicy) -> Self {
        Self {
            inner,
            policy,
            sleep: std::thread::sleep,
        }
    }

    pub fn with_sleep(mut self, sleep: fn(Duration)) -> Self {
        self.sleep = sleep;
        self
    }

    pub fn into_inner(self) -> C {
        self.inner
    }
}

impl<C: ChatClient> ChatClient for Retrying<C> {
    fn complete(&mut self, request: &ChatRequest) -> Result<String, ChatError> {
        let mut attempt = 0;
        loop {
            match self.inner.complete(request) {
                Err(e) if e.retryable && attempt < self.policy.max_retries => {
                    (self.sleep)(self.policy.backoff(attempt));
                    attempt += 1;
                }
                Err(e) if e.retryable => {
                    return Err(ChatError::fatal(format!(
                        "{} (gave up after {} retries)",
                        e.message, attempt
                    )))
                }
                other => return other,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Generation,
    Rectification,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    pub round: usize,
    pub stage: Stage,
    pub system: String,
    pub prompt: String,
    pub response: String,
    /// The prompt carries the previous rejection's reasoning.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub feedback: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub sample_id: String,
    pub accepted: bool,
    pub rounds_used: usize,
    /// Accepted indices; empty when the sample was discarded.
    pub final_indices: Vec<usize>,
    pub transcript: Vec<Exchange>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopConfig {
    pub max_rounds: usize,
    pub image_for_generation: bool,
    pub image_for_rectification: bool,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            max_rounds: DEFAULT_MAX_ROUNDS,
            image_for_generation: true,
            image_for_rectification: false,
        }
    }
}

impl LoopConfig {
    pub fn rounds(max_rounds: usize) -> Self {
        Self {
            max_rounds,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConstructionError {
    #[error("max_rounds must be at least 1")]
    NoRounds,
    #[error("sample `{sample_id}` has no OCR boxes")]
    NoOcr { sample_id: String },
    #[error("endpoint failed in round {round} of `{sample_id}`: {source}")]
    Endpoint {
        sample_id: String,
        round: usize,
        source: ChatError,
        transcript: Vec<Exchange>,
    },
}

/// Reads the judge's first non-blank line; anything but a YES prefix is a NO.
pub fn parse_verdict(reply: &str) -> (bool, String) {
    let mut lines = reply.lines().skip_while(|l| l.trim().is_empty());
    let first = lines.next().unwrap_or("");
    let word = first.trim_start_matches(|c: char| !c.is_alphanumeric());
    let yes = word.get(..3).is_some_and(|w| w.eq_ignore_ascii_case("yes"));
    let reason = lines.collect::<Vec<_>>().join("\n").trim().to_string();
    (yes, reason)
}

pub fn run_construction_loop<C: ChatClient + ?Sized>(
    client: &mut C,
    sample: &Sample,
    cfg: &LoopConfig,
) -> Result<Verdict, ConstructionError> {
    if cfg.max_rounds == 0 {
        return Err(ConstructionError::NoRounds);
    }
    if sample.ocr.is_empty() {
        return Err(ConstructionError::NoOcr {
            sample_id: sample.id.clone(),
        });
    }
    let image = |on: bool| on.then(|| sample.image.path.clone());
    let mut transcript = Vec::new();
    let mut feedback: Option<(Vec<usize>, String)> = None;

    for round in 1..=cfg.max_rounds {
        let mut call = |prompt: ChatPrompt, stage, with_image: bool, fb: bool, transcript: &mut Vec<Exchange>| {
            let req = ChatRequest::new(prompt, image(with_image));
            match client.complete(&req) {
                Ok(response) => {
                    transcript.push(Exchange {
                        round,
                        stage,
                        system: req.system,
                        prompt: req.user,
                        response: response.clone(),
                        feedback: fb,
                    });
                    Ok(response)
                }
                Err(source) => Err(ConstructionError::Endpoint {
                    sample_id: sample.id.clone(),
                    round,
                    source,
                    transcript: transcript.clone(),
                }),
            }
        };

        let mut prompt = build_generation_prompt(sample);
        let carried = feedback.is_some();
        if let Some((rejected, reason)) = feedback.take() {
            prompt = with_feedback(prompt, &rejected, &reason);
        }
        let reply = call(
            prompt,
            Stage::Generation,
            cfg.image_for_generation,
            carried,
            &mut transcript,
        )?;
        let candidates = parse_indices(&reply, sample.max_index())
            .indices()
            .unwrap_or_default()
            .to_vec();
        if candidates.is_empty() {
            continue;
        }
        let prompt = build_rectification_prompt(sample, &candidates).expect("candidates nonempty");
        let reply = call(
            prompt,
            Stage::Rectification,
            cfg.image_for_rectification,
            false,
            &mut transcript,
        )?;
        let (yes, reason) = parse_verdict(&reply);
        if yes {
            return Ok(Verdict {
                sample_id: sample.id.clone(),
                accepted: true,
                rounds_used: round,
                final_indices: candidates,
                transcript,
            });
        }
        if !reason.is_empty() {
            feedback = Some((candidates, reason));
        }
    }
    Ok(Verdict {
        sample_id: sample.id.clone(),
        accepted: false,
        rounds_used: cfg.max_rounds,
        final_indices: Vec::new(),
        transcript,
    })
}

/// One annotator's judgement of one constructed sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HumanVerdict {
    pub sample_id: String,
    pub annotator: String,
    pub accepted: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReviewOutcome {
    pub kept: Vec<Sample>,
    pub rejected: Vec<String>,
    /// Samples with fewer than the required number of reviews.
    pub pending: Vec<String>,
}

pub const REQUIRED_REVIEWERS: usize = 2;

/// Keeps samples that every reviewer accepted, with at least
/// [`REQUIRED_REVIEWERS`] distinct reviewers, and records who accepted them.
pub fn apply_human_review(samples: Vec<Sample>, verdicts: &[HumanVerdict]) -> ReviewOutcome {
    let mut by_sample: BTreeMap<&str, BTreeMap<&str, bool>> = BTreeMap::new();
    for v in verdicts {
        let slot = by_sample
            .entry(&v.sample_id)
            .or_default()
            .entry(&v.annotator)
            .or_insert(true);
        *slot &= v.accepted;
    }
    let mut out = ReviewOutcome::default();
    for mut s in samples {
        let reviews = by_sample.get(s.id.as_str());
        let n = reviews.map_or(0, BTreeMap::len);
        if reviews.is_some_and(|r| r.values().any(|ok| !ok)) {
            out.rejected.push(s.id);
        } else if n < REQUIRED_REVIEWERS {
            out.pending.push(s.id);
        } else {
            let who: BTreeSet<&str> = reviews.expect("reviewed").keys().copied().collect();
            s.accepted_by = who.into_iter().map(str::to_string).collect();
            out.kept.push(s);
        }
    }
    out
}
