//! Getting data in: LLM-driven generation and translation of instruction
//! examples over an OpenAI-compatible chat endpoint, and conversion of
//! Belebele test records into a [`Corpus`](crate::corpus::Corpus).
//!
//! Every endpoint response passes the corpus record checks
//! ([`check_example`](crate::corpus::check_example)) before it is accepted.

mod belebele;
mod checkpoint;
mod client;
mod generate;
pub mod prompts;

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use belebele::{
    convert_belebele, export_belebele, read_belebele, BelebeleConversion, BelebeleError,
    BelebeleRecord, BelebeleRow, DroppedGroup,
};
pub use checkpoint::{
    run_checkpointed, CheckpointEntry, CheckpointError, JobResult, RunOptions, RunSummary,
    CHECKPOINT_FILE, EXAMPLES_FILE, RESULTS_FILE,
};
pub use client::{ChatClient, ChatMessage, HttpChatClient, ServiceError};
pub use generate::{
    generate_instructions, parse_generation, parse_translation, translate_examples,
    GenerationJob, JobFailure, JobStatus, TranslateError,
};

/// Environment variable the CLI reads the API key from by default.
pub const API_KEY_ENV: &str = "CODESWITCH_API_KEY";

/// A credential. Never printed, logged or serialized.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct Secret(String);

impl Secret {
    pub fn new(value: impl Into<String>) -> Self {
        Secret(value.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Secret(***)")
    }
}

fn duration_secs<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

fn secs_duration<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
    let secs = f64::deserialize(d)?;
    Duration::try_from_secs_f64(secs).map_err(serde::de::Error::custom)
}

fn default_retries() -> u32 {
    3
}
fn default_timeout() -> Duration {
    Duration::from_secs(60)
}
fn default_backoff() -> Duration {
    Duration::from_millis(500)
}
fn default_concurrency() -> usize {
    4
}

/// Endpoint settings. Serializes without the key, so it is safe to log or
/// hash.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model_name: String,
    #[serde(skip)]
    pub api_key: Secret,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_timeout", serialize_with = "duration_secs", deserialize_with = "secs_duration")]
    pub request_timeout: Duration,
    #[serde(default = "default_concurrency")]
    pub concurrency_limit: usize,
    /// First retry delay; doubles per attempt.
    #[serde(default = "default_backoff", serialize_with = "duration_secs", deserialize_with = "secs_duration")]
    pub backoff_base: Duration,
    /// Sent only when set; otherwise the endpoint's default applies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>, model_name: impl Into<String>, api_key: Secret) -> Self {
        EndpointConfig {
            base_url: base_url.into(),
            model_name: model_name.into(),
            api_key,
            max_retries: default_retries(),
            request_timeout: default_timeout(),
            concurrency_limit: default_concurrency(),
            backoff_base: default_backoff(),
            temperature: None,
        }
    }

    /// Delay before retry number `attempt` (1-based), capped at 30 s.
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u32 << attempt.saturating_sub(1).min(16);
        (self.backoff_base * factor).min(Duration::from_secs(30))
    }
}

/// Why a response was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IngestCode {
    NotJson,
    GenerationCount,
    OptionKeys,
    AnswerInvalid,
    EmptyField,
    ArrayLength,
    AnswerMutated,
    Service,
}

impl IngestCode {
    pub fn as_str(self) -> &'static str {
        match self {
            IngestCode::NotJson => "NOT_JSON",
            IngestCode::GenerationCount => "GENERATION_COUNT",
            IngestCode::OptionKeys => "OPTION_KEYS",
            IngestCode::AnswerInvalid => "ANSWER_INVALID",
            IngestCode::EmptyField => "EMPTY_FIELD",
            IngestCode::ArrayLength => "ARRAY_LENGTH",
            IngestCode::AnswerMutated => "ANSWER_MUTATED",
            IngestCode::Service => "SERVICE",
        }
    }
}

impl fmt::Display for IngestCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Error)]
#[error("{code}: {message}")]
pub struct IngestViolation {
    pub code: IngestCode,
    pub message: String,
}

impl IngestViolation {
    pub fn new(code: IngestCode, message: impl Into<String>) -> Self {
        IngestViolation { code, message: message.into() }
    }
}

/// Lenient cleanup before strict JSON parsing: strips a surrounding
/// Markdown code fence and trailing commas before `]` or `}`.
pub fn repair_json(text: &str) -> String {
    let mut t = text.trim();
    if let Some(rest) = t.strip_prefix("```") {
        let rest = rest.split_once('\n').map_or("", |(_, body)| body);
        t = rest.trim_end().strip_suffix("```").unwrap_or(rest).trim();
    }

    let mut out = String::with_capacity(t.len());
    let mut in_string = false;
    let mut escaped = false;
    let chars: Vec<char> = t.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        if in_string {
            out.push(c);
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => {
                in_string = true;
                out.push(c);
            }
            ',' => {
                let next = chars[i + 1..].iter().find(|c| !c.is_whitespace());
                if !matches!(next, Some(']') | Some('}')) {
                    out.push(c);
                }
            }
            _ => out.push(c),
        }
    }
    out
}

/// Reads generation inputs, one per line: either a JSON object with `id`,
/// `text` and an optional `source` tag (the Dolma document layout), or a
/// plain line of text, whose id becomes `{input}-{line:06}`. Objects whose
/// `source` is in `exclude_sources` are skipped. Returns the jobs and the
/// number excluded.
pub fn read_jobs<R: std::io::BufRead>(
    input: &str,
    reader: R,
    exclude_sources: &[String],
) -> std::io::Result<(Vec<GenerationJob>, usize)> {
    #[derive(Deserialize)]
    struct Doc {
        id: serde_json::Value,
        text: String,
        #[serde(default)]
        source: Option<String>,
    }
    let mut jobs = Vec::new();
    let mut excluded = 0;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Doc>(&line) {
            Ok(doc) => {
                if doc.source.as_ref().is_some_and(|s| exclude_sources.contains(s)) {
                    excluded += 1;
                    continue;
                }
                let id = match doc.id {
                    serde_json::Value::String(s) => s,
                    other => other.to_string(),
                };
                jobs.push(GenerationJob::new(id, doc.text));
            }
            Err(_) => jobs.push(GenerationJob::new(format!("{input}-{:06}", i + 1), line)),
        }
    }
    Ok((jobs, excluded))
}
