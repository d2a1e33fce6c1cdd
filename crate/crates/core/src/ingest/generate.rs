use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::client::{ChatClient, ChatMessage};
use super::{prompts, repair_json, EndpointConfig, IngestCode, IngestViolation};
use crate::corpus::{check_example, InstructionExample, Language, Options, RecordLanguage, RuleCode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum JobStatus {
    #[default]
    Pending,
    Done,
    Failed,
}

/// One raw text to generate instruction examples from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationJob {
    pub source_text_id: String,
    pub raw_text: String,
    #[serde(default)]
    pub status: JobStatus,
    #[serde(default)]
    pub attempts: u32,
}

impl GenerationJob {
    pub fn new(source_text_id: impl Into<String>, raw_text: impl Into<String>) -> Self {
        GenerationJob {
            source_text_id: source_text_id.into(),
            raw_text: raw_text.into(),
            status: JobStatus::Pending,
            attempts: 0,
        }
    }
}

/// Retries exhausted.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("failed after {attempts} attempt(s): {last_error}")]
pub struct JobFailure {
    pub attempts: u32,
    pub last_error: String,
    pub codes: Vec<IngestCode>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TranslateError {
    #[error("invalid translation request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Failed(#[from] JobFailure),
}

fn describe(violations: &[IngestViolation]) -> String {
    violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

/// Calls `attempt` until it succeeds or `1 + max_retries` tries are used,
/// sleeping with exponential backoff in between.
fn with_retries<T>(
    cfg: &EndpointConfig,
    what: &str,
    mut attempt: impl FnMut() -> Result<T, Vec<IngestViolation>>,
) -> Result<(T, u32), JobFailure> {
    let mut last = Vec::new();
    for n in 1..=cfg.max_retries + 1 {
        if n > 1 {
            std::thread::sleep(cfg.backoff(n - 1));
        }
        match attempt() {
            Ok(v) => return Ok((v, n)),
            Err(violations) => {
                log::warn!("{what}: attempt {n} rejected: {}", describe(&violations));
                last = violations;
            }
        }
    }
    let mut codes: Vec<IngestCode> = last.iter().map(|v| v.code).collect();
    codes.sort();
    codes.dedup();
    Err(JobFailure { attempts: cfg.max_retries + 1, last_error: describe(&last), codes })
}

fn call(client: &dyn ChatClient, messages: &[ChatMessage]) -> Result<String, Vec<IngestViolation>> {
    client
        .complete(messages)
        .map_err(|e| vec![IngestViolation::new(IngestCode::Service, e.to_string())])
}

fn parse_array(response: &str) -> Result<Vec<Value>, Vec<IngestViolation>> {
    match serde_json::from_str::<Value>(&repair_json(response)) {
        Ok(Value::Array(items)) => Ok(items),
        Ok(other) => Err(vec![IngestViolation::new(
            IngestCode::NotJson,
            format!("expected a JSON array, got {}", kind(&other)),
        )]),
        Err(e) => Err(vec![IngestViolation::new(IngestCode::NotJson, e.to_string())]),
    }
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

/// Reads one response item into an example. Missing text fields become
/// empty strings so the record checks report them.
fn to_example(item: &Value, index: usize, id: String, language: Language) -> Result<InstructionExample, IngestViolation> {
    let shape = |msg: String| IngestViolation::new(IngestCode::NotJson, format!("item {index}: {msg}"));
    let obj = item.as_object().ok_or_else(|| shape(format!("expected an object, got {}", kind(item))))?;
    let text = |key: &str| -> Result<String, IngestViolation> {
        match obj.get(key) {
            None | Some(Value::Null) => Ok(String::new()),
            Some(Value::String(s)) => Ok(s.clone()),
            Some(other) => Err(shape(format!("`{key}` is {}, not a string", kind(other)))),
        }
    };
    let options = match obj.get("options") {
        None | Some(Value::Null) => Options::default(),
        Some(Value::Object(map)) => {
            let mut entries = Vec::with_capacity(map.len());
            for (k, v) in map {
                let v = v.as_str().ok_or_else(|| shape(format!("option `{k}` is {}, not a string", kind(v))))?;
                entries.push((k.clone(), v.to_string()));
            }
            Options::from_entries(entries)
        }
        Some(other) => return Err(shape(format!("`options` is {}, not an object", kind(other)))),
    };
    Ok(InstructionExample {
        id,
        language: RecordLanguage::Single(language),
        context: text("context")?,
        question: text("question")?,
        options,
        answer: text("answer")?,
    })
}

fn record_violations(ex: &InstructionExample, index: usize, skip_answer: bool) -> Vec<IngestViolation> {
    check_example(ex)
        .into_iter()
        .filter_map(|v| {
            let code = match v.rule {
                RuleCode::OptionKeys => IngestCode::OptionKeys,
                RuleCode::AnswerInvalid if skip_answer => return None,
                RuleCode::AnswerInvalid => IngestCode::AnswerInvalid,
                RuleCode::EmptyField => IngestCode::EmptyField,
                // Group-level rules cannot fire on a single record.
                _ => return None,
            };
            Some(IngestViolation::new(code, format!("item {index}: {}", v.message)))
        })
        .collect()
}

/// Validates a generation response: a JSON array of 3 to 5 valid examples.
/// Ids are `{source_id}#{index}`.
pub fn parse_generation(response: &str, source_id: &str) -> Result<Vec<InstructionExample>, Vec<IngestViolation>> {
    let items = parse_array(response)?;
    let mut violations = Vec::new();
    if !(3..=5).contains(&items.len()) {
        violations.push(IngestViolation::new(
            IngestCode::GenerationCount,
            format!("expected 3 to 5 items, got {}", items.len()),
        ));
    }
    let mut examples = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        match to_example(item, i, format!("{source_id}#{i}"), Language::En) {
            Ok(ex) => {
                violations.extend(record_violations(&ex, i, false));
                examples.push(ex);
            }
            Err(v) => violations.push(v),
        }
    }
    if violations.is_empty() { Ok(examples) } else { Err(violations) }
}

/// Generates 3 to 5 English examples from one raw text, retrying rejected
/// or failed calls. Returns the examples and the number of attempts used.
pub fn generate_instructions(
    job: &GenerationJob,
    client: &dyn ChatClient,
    cfg: &EndpointConfig,
) -> Result<(Vec<InstructionExample>, u32), JobFailure> {
    if job.raw_text.trim().is_empty() {
        return Err(JobFailure {
            attempts: 0,
            last_error: "raw text is empty".into(),
            codes: vec![IngestCode::EmptyField],
        });
    }
    let messages = [
        ChatMessage::system(prompts::GENERATION_SYSTEM),
        ChatMessage::user(prompts::generation_user(&job.raw_text)),
    ];
    with_retries(cfg, &format!("generate {}", job.source_text_id), || {
        parse_generation(&call(client, &messages)?, &job.source_text_id)
    })
}

#[derive(Serialize)]
struct QaItem<'a> {
    context: &'a str,
    question: &'a str,
    options: &'a Options,
    answer: &'a str,
}

/// The `{{QA_JSON}}` payload: the examples without ids or languages.
pub(crate) fn qa_json(examples: &[InstructionExample]) -> String {
    let items: Vec<QaItem> = examples
        .iter()
        .map(|e| QaItem { context: &e.context, question: &e.question, options: &e.options, answer: &e.answer })
        .collect();
    serde_json::to_string_pretty(&items).expect("serializable")
}

/// Validates a translation response against its inputs: same length, same
/// answer letters, canonical option keys, no empty fields.
pub fn parse_translation(
    response: &str,
    inputs: &[InstructionExample],
    target: Language,
) -> Result<Vec<InstructionExample>, Vec<IngestViolation>> {
    let items = parse_array(response)?;
    if items.len() != inputs.len() {
        return Err(vec![IngestViolation::new(
            IngestCode::ArrayLength,
            format!("expected {} items, got {}", inputs.len(), items.len()),
        )]);
    }
    let mut violations = Vec::new();
    let mut out = Vec::with_capacity(items.len());
    for (i, (item, input)) in items.iter().zip(inputs).enumerate() {
        match to_example(item, i, input.id.clone(), target) {
            Ok(ex) => {
                let mutated = ex.answer != input.answer;
                if mutated {
                    violations.push(IngestViolation::new(
                        IngestCode::AnswerMutated,
                        format!("item {i}: answer `{}` became `{}`", input.answer, ex.answer),
                    ));
                }
                violations.extend(record_violations(&ex, i, mutated));
                out.push(ex);
            }
            Err(v) => violations.push(v),
        }
    }
    if violations.is_empty() { Ok(out) } else { Err(violations) }
}

/// Translates one batch of English examples into `target`. Ids carry over;
/// the language becomes `target`. Returns the examples and attempts used.
pub fn translate_examples(
    examples: &[InstructionExample],
    target: Language,
    client: &dyn ChatClient,
    cfg: &EndpointConfig,
) -> Result<(Vec<InstructionExample>, u32), TranslateError> {
    if target == Language::En {
        return Err(TranslateError::InvalidRequest("target language must not be EN".into()));
    }
    if let Some(e) = examples.iter().find(|e| e.language != RecordLanguage::Single(Language::En)) {
        return Err(TranslateError::InvalidRequest(format!("{} is {}, not EN", e.id, e.language)));
    }
    if examples.is_empty() {
        return Ok((Vec::new(), 0));
    }
    let messages = [
        ChatMessage::system(prompts::translation_system(target)),
        ChatMessage::user(prompts::translation_user(target, &qa_json(examples))),
    ];
    let what = format!("translate {} into {target}", examples[0].id);
    Ok(with_retries(cfg, &what, || parse_translation(&call(client, &messages)?, examples, target))?)
}
