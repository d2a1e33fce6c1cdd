//! Resumable generation runs.
//!
//! An output directory holds three files:
//!
//! - `checkpoint.jsonl`: one [`CheckpointEntry`] per finished attempt
//!   sequence, appended as jobs complete; the last entry for a job wins.
//! - `results.jsonl`: one [`JobResult`] per successful job, written before
//!   its DONE entry.
//! - `examples.jsonl`: all generated examples in job order, rebuilt at the
//!   end of every run.
//!
//! DONE jobs are never re-sent; FAILED and unfinished jobs are retried.

use std::collections::{HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::client::ChatClient;
use super::generate::{generate_instructions, GenerationJob, JobStatus};
use super::EndpointConfig;
use crate::corpus::{write_examples, InstructionExample};

pub const CHECKPOINT_FILE: &str = "checkpoint.jsonl";
pub const RESULTS_FILE: &str = "results.jsonl";
pub const EXAMPLES_FILE: &str = "examples.jsonl";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointEntry {
    pub job_id: String,
    pub status: JobStatus,
    pub attempts: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobResult {
    pub job_id: String,
    pub examples: Vec<InstructionExample>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions<'a> {
    /// Checked before each job is started; in-flight jobs finish.
    pub cancel: Option<&'a AtomicBool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct RunSummary {
    pub done: usize,
    pub failed: usize,
    pub pending: usize,
    /// DONE before this run started.
    pub already_done: usize,
    /// Jobs attempted in this run.
    pub processed: usize,
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{path} line {line}: {message}. Refusing to run: repair or remove the file, or use a fresh output directory")]
    Corrupt { path: PathBuf, line: usize, message: String },
    #[error("job id `{0}` appears more than once in the input")]
    DuplicateJob(String),
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CheckpointError + '_ {
    move |e| CheckpointError::Io { path: path.to_path_buf(), message: e.to_string() }
}

/// Parses a JSONL state file. A final line without a newline is a torn
/// write: it is dropped and the file is truncated before it.
fn load_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CheckpointError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path)(e)),
    };
    let complete = match text.rfind('\n') {
        Some(i) => &text[..=i],
        None => "",
    };
    if complete.len() != text.len() {
        log::warn!("{}: dropping a torn final line", path.display());
        fs::write(path, complete).map_err(io_err(path))?;
    }
    let mut out = Vec::new();
    for (i, line) in complete.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(line).map_err(|e| CheckpointError::Corrupt {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

fn append_line<T: Serialize>(w: &mut BufWriter<File>, path: &Path, value: &T) -> Result<(), CheckpointError> {
    serde_json::to_writer(&mut *w, value).map_err(|e| CheckpointError::Io { path: path.to_path_buf(), message: e.to_string() })?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(io_err(path))
}

fn open_append(path: &Path) -> Result<BufWriter<File>, CheckpointError> {
    OpenOptions::new().create(true).append(true).open(path).map(BufWriter::new).map_err(io_err(path))
}

/// Runs every job not yet DONE in `dir`'s checkpoint, up to
/// `cfg.concurrency_limit` at a time, then rewrites `examples.jsonl`.
pub fn run_checkpointed(
    jobs: &[GenerationJob],
    client: &dyn ChatClient,
    cfg: &EndpointConfig,
    dir: &Path,
    options: RunOptions<'_>,
) -> Result<RunSummary, CheckpointError> {
    let mut ids = HashSet::new();
    for j in jobs {
        if !ids.insert(j.source_text_id.as_str()) {
            return Err(CheckpointError::DuplicateJob(j.source_text_id.clone()));
        }
    }
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let checkpoint_path = dir.join(CHECKPOINT_FILE);
    let results_path = dir.join(RESULTS_FILE);

    let mut state: HashMap<String, CheckpointEntry> = HashMap::new();
    for (i, e) in load_jsonl::<CheckpointEntry>(&checkpoint_path)?.into_iter().enumerate() {
        if !ids.contains(e.job_id.as_str()) {
            return Err(CheckpointError::Corrupt {
                path: checkpoint_path,
                line: i + 1,
                message: format!("unknown job `{}` (the checkpoint belongs to a different input)", e.job_id),
            });
        }
        state.insert(e.job_id.clone(), e);
    }
    let mut results: HashMap<String, Vec<InstructionExample>> = load_jsonl::<JobResult>(&results_path)?
        .into_iter()
        .map(|r| (r.job_id, r.examples))
        .collect();
    for e in state.values() {
        if e.status == JobStatus::Done && !results.contains_key(&e.job_id) {
            return Err(CheckpointError::Corrupt {
                path: results_path,
                line: 0,
                message: format!("job `{}` is DONE but has no results", e.job_id),
            });
        }
    }

    let is_done = |id: &str, state: &HashMap<String, CheckpointEntry>| {
        state.get(id).is_some_and(|e| e.status == JobStatus::Done)
    };
    let todo: Vec<&GenerationJob> = jobs.iter().filter(|j| !is_done(&j.source_text_id, &state)).collect();
    let mut summary = RunSummary { already_done: jobs.len() - todo.len(), ..Default::default() };

    if !todo.is_empty() {
        let mut checkpoint_w = open_append(&checkpoint_path)?;
        let mut results_w = open_append(&results_path)?;
        let next = AtomicUsize::new(0);
        let workers = cfg.concurrency_limit.clamp(1, todo.len());
        let (tx, rx) = mpsc::channel();

        std::thread::scope(|scope| -> Result<(), CheckpointError> {
            for _ in 0..workers {
                let tx = tx.clone();
                let (todo, next) = (&todo, &next);
                scope.spawn(move || loop {
                    if options.cancel.is_some_and(|c| c.load(Ordering::SeqCst)) {
                        break;
                    }
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(job) = todo.get(i) else { break };
                    let outcome = generate_instructions(job, client, cfg);
                    if tx.send((job.source_text_id.clone(), outcome)).is_err() {
                        break;
                    }
                });
            }
            drop(tx);

            // Single writer: results first, then the checkpoint entry.
            for (job_id, outcome) in rx {
                summary.processed += 1;
                let entry = match outcome {
                    Ok((examples, attempts)) => {
                        let r = JobResult { job_id: job_id.clone(), examples };
                        append_line(&mut results_w, &results_path, &r)?;
                        results.insert(job_id.clone(), r.examples);
                        CheckpointEntry { job_id, status: JobStatus::Done, attempts, error: None }
                    }
                    Err(f) => {
                        log::error!("job {job_id} failed: {f}");
                        CheckpointEntry { job_id, status: JobStatus::Failed, attempts: f.attempts, error: Some(f.last_error) }
                    }
                };
                append_line(&mut checkpoint_w, &checkpoint_path, &entry)?;
                state.insert(entry.job_id.clone(), entry);
            }
            Ok(())
        })?;
    }

    for j in jobs {
        match state.get(&j.source_text_id).map(|e| e.status) {
            Some(JobStatus::Done) => summary.done += 1,
            Some(JobStatus::Failed) => summary.failed += 1,
            _ => summary.pending += 1,
        }
    }

    let examples_path = dir.join(EXAMPLES_FILE);
    let tmp = dir.join(format!("{EXAMPLES_FILE}.tmp"));
    let mut w = BufWriter::new(File::create(&tmp).map_err(io_err(&tmp))?);
    let done = jobs
        .iter()
        .filter(|j| is_done(&j.source_text_id, &state))
        .flat_map(|j| results[&j.source_text_id].iter());
    write_examples(done, &mut w).map_err(|e| CheckpointError::Io { path: tmp.clone(), message: e.to_string() })?;
    w.flush().map_err(io_err(&tmp))?;
    drop(w);
    fs::rename(&tmp, &examples_path).map_err(io_err(&examples_path))?;
    Ok(summary)
}
