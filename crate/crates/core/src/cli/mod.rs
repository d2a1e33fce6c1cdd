//! The `codeswitch` command line.
//!
//! Exit codes: 0 success, 1 data validation failures, 2 usage or I/O error,
//! 3 external service failure. Machine-readable output goes to stdout,
//! diagnostics and the provenance banner to stderr. Wherever a path is
//! expected, `-` means stdin or stdout.

mod commands;

use std::ffi::OsString;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SERVICE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "codeswitch", version, about = "Sentence-level code-switching instruction data tools")]
pub struct Cli {
    /// Worker threads for parallel stages (default: all cores). Output does
    /// not depend on it.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    /// Only log warnings and errors.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a parallel corpus; prints one JSON line per violation.
    Validate(CorpusArgs),
    /// Corpus length statistics as JSON.
    Stats(StatsArgs),
    /// Split text into sentences.
    Segment(SegmentArgs),
    /// Build a code-switched dataset.
    MakeCsd(SynthArgs),
    /// Build the size-matched monolingual concatenation baseline.
    MakeConcat(SynthArgs),
    /// Multiple-choice accuracy from per-choice log-likelihoods.
    Score(ScoreArgs),
    /// CSD vs Concat result tables.
    Report(ReportArgs),
    /// Generate English instruction examples from raw texts via an LLM.
    Generate(GenerateArgs),
    /// Translate English instruction examples via an LLM.
    Translate(TranslateArgs),
    /// Convert Belebele records into a parallel corpus.
    ConvertBelebele(BelebeleArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Stats(_) => "stats",
            Command::Segment(_) => "segment",
            Command::MakeCsd(_) => "make-csd",
            Command::MakeConcat(_) => "make-concat",
            Command::Score(_) => "score",
            Command::Report(_) => "report",
            Command::Generate(_) => "generate",
            Command::Translate(_) => "translate",
            Command::ConvertBelebele(_) => "convert-belebele",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CorpusArgs {
    /// A directory of per-language files (`en.jsonl`, `ja.jsonl`, ...), or
    /// one interleaved JSONL file, or `-`.
    #[arg(long, value_name = "PATH")]
    pub corpus: String,
    /// Languages every group must have, e.g. `EN,JA` (default: all found).
    #[arg(long, value_delimiter = ',', value_name = "CODES")]
    pub languages: Option<Vec<String>>,
    /// Align per-language files by line position instead of by id.
    #[arg(long)]
    pub positional: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct StatsArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Counting unit.
    #[arg(long, default_value = "chars", value_parser = ["chars", "words"])]
    pub unit: String,
    /// JSONL of `{id, language, count}` that replaces the per-example count
    /// (e.g. tokenizer lengths computed elsewhere).
    #[arg(long, value_name = "FILE")]
    pub counts: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SegmentArgs {
    /// Language of the text: EN, JA, KO or ZH.
    #[arg(long)]
    pub lang: String,
    /// Text to segment; every line is a separate paragraph.
    #[arg(long, default_value = "-", value_name = "FILE")]
    pub input: String,
    /// Emit JSON lines `{line, start, end, text}` instead of one sentence
    /// per line.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    /// JSON synthesis config; flags below override its fields.
    #[arg(long, value_name = "FILE")]
    pub config: Option<String>,
    /// Language set: EN+JA, EN+KO, EN+ZH, E+J+K, E+J+Z, E+K+Z, E+J+K+Z (or
    /// any `+`-joined codes).
    #[arg(long)]
    pub setting: Option<String>,
    /// Master seed (required for make-csd).
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Examples to emit (default: every group).
    #[arg(long, value_name = "N")]
    pub size: Option<usize>,
    /// Misaligned-group policy.
    #[arg(long, value_parser = ["strict", "field-fallback"])]
    pub policy: Option<String>,
    /// Allow monolingual draws.
    #[arg(long)]
    pub no_min_mix: bool,
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Output directory, or `-` for the dataset alone on stdout.
    #[arg(long, value_name = "DIR")]
    pub out: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScoreArgs {
    /// Gold answers: JSONL with `example_id` (or `id`), `language`, `answer`.
    #[arg(long, value_name = "FILE")]
    pub gold: String,
    /// ChoiceScore JSONL.
    #[arg(long, value_name = "FILE")]
    pub scores: String,
    #[arg(long, default_value = "none", value_parser = ["none", "per-char", "per-token"])]
    pub normalization: String,
    /// Setting label stored in the table.
    #[arg(long, default_value = "")]
    pub label: String,
    #[arg(long, default_value = "-", value_name = "FILE")]
    pub out: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReportArgs {
    /// JSON array of `{setting, csd, concat}`; `csd`/`concat` are paths to
    /// `score` output (relative to the manifest) or inline `{"EN": 82.8, ...}`
    /// accuracy maps.
    #[arg(long, value_name = "FILE")]
    pub manifest: String,
    #[arg(long, default_value = "text", value_parser = ["text", "markdown", "csv"])]
    pub format: String,
    /// Suffix for positive deltas.
    #[arg(long, default_value = "*")]
    pub marker: String,
    #[arg(long, default_value = "-", value_name = "FILE")]
    pub out: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EndpointArgs {
    /// OpenAI-compatible API root, e.g. https://api.openai.com/v1
    #[arg(long)]
    pub base_url: String,
    #[arg(long)]
    pub model: String,
    /// Environment variable holding the API key.
    #[arg(long, default_value = crate::ingest::API_KEY_ENV)]
    pub api_key_env: String,
    #[arg(long, default_value_t = 3)]
    pub max_retries: u32,
    /// Request timeout in seconds.
    #[arg(long, default_value_t = 60.0)]
    pub timeout: f64,
    /// Concurrent requests.
    #[arg(long, default_value_t = 4)]
    pub concurrency: usize,
    /// First retry delay in seconds; doubles per retry.
    #[arg(long, default_value_t = 0.5)]
    pub backoff: f64,
    /// Sampling temperature (default: the endpoint's).
    #[arg(long)]
    pub temperature: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenerateArgs {
    /// Raw texts: JSONL `{id, text, source?}` or plain lines.
    #[arg(long, value_name = "FILE")]
    pub input: String,
    /// Run directory holding the checkpoint, results and examples.jsonl.
    #[arg(long, value_name = "DIR")]
    pub out: String,
    /// Skip inputs whose `source` tag matches (repeatable).
    #[arg(long, value_name = "TAG")]
    pub exclude_source: Vec<String>,
    #[command(flatten)]
    pub endpoint: EndpointArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TranslateArgs {
    /// English corpus JSONL; examples are batched by the id part before `#`.
    #[arg(long, value_name = "FILE")]
    pub input: String,
    /// JA, KO or ZH.
    #[arg(long)]
    pub target: String,
    #[arg(long, default_value = "-", value_name = "FILE")]
    pub out: String,
    #[command(flatten)]
    pub endpoint: EndpointArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BelebeleArgs {
    /// Belebele JSONL (or JSON array) files; one per dialect or combined.
    #[arg(long, value_name = "FILE", required = true, num_args = 1..)]
    pub input: Vec<String>,
    /// Interleaved corpus JSONL output, or `-`.
    #[arg(long, value_name = "FILE", conflicts_with = "out_dir")]
    pub out: Option<String>,
    /// Write per-language files (`en.jsonl`, ...) into this directory.
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<String>,
    /// Keep incomplete links, restricted to the languages all links share.
    #[arg(long)]
    pub non_strict: bool,
}

/// A failed command and its exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Service(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Service(_) => EXIT_SERVICE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Service(m) => f.write_str(m),
        }
    }
}

pub(crate) fn usage(m: impl fmt::Display) -> CliError {
    CliError::Usage(m.to_string())
}

pub(crate) fn data(m: impl fmt::Display) -> CliError {
    CliError::Data(m.to_string())
}

pub(crate) fn open_input(path: &str) -> Result<Box<dyn BufRead>, CliError> {
    if path == "-" {
        return Ok(Box::new(BufReader::new(io::stdin())));
    }
    let f = File::open(path).map_err(|e| usage(format!("cannot open {path}: {e}")))?;
    Ok(Box::new(BufReader::new(f)))
}

pub(crate) fn read_input(path: &str) -> Result<String, CliError> {
    let mut s = String::new();
    open_input(path)?.read_to_string(&mut s).map_err(|e| usage(format!("cannot read {path}: {e}")))?;
    Ok(s)
}

pub(crate) fn create_output(path: &str) -> Result<Box<dyn Write>, CliError> {
    if path == "-" {
        return Ok(Box::new(BufWriter::new(io::stdout())));
    }
    let p = Path::new(path);
    if let Some(parent) = p.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| usage(format!("cannot create {}: {e}", parent.display())))?;
    }
    let f = File::create(p).map_err(|e| usage(format!("cannot create {path}: {e}")))?;
    Ok(Box::new(BufWriter::new(f)))
}

pub(crate) fn write_err(path: impl AsRef<Path>) -> impl Fn(io::Error) -> CliError {
    let p: PathBuf = path.as_ref().to_path_buf();
    move |e| usage(format!("cannot write {}: {e}", p.display()))
}

/// Logs the provenance banner: a hash of the effective configuration and
/// the master seed.
pub(crate) fn banner<T: Serialize>(command: &str, config: &T, seed: Option<u64>) {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    let hash = Sha256::digest(&bytes);
    let hex: String = hash.iter().map(|b| format!("{b:02x}")).collect();
    let seed = seed.map_or("none".to_string(), |s| s.to_string());
    log::info!("codeswitch {command} {} config_sha256={hex} master_seed={seed}", env!("CARGO_PKG_VERSION"));
}

fn init_logging(quiet: bool) {
    let default = if quiet { "warn" } else { "info" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(default))
        .format_timestamp_millis()
        .target(env_logger::Target::Stderr)
        .try_init();
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    init_logging(cli.quiet);

    let result = match cli.jobs {
        Some(0) => Err(usage("--jobs must be at least 1")),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| commands::dispatch(&cli.command)),
            Err(e) => Err(usage(format!("cannot start {n} worker threads: {e}"))),
        },
        None => commands::dispatch(&cli.command),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            log::error!("{} failed: {e}", cli.command.name());
            e.code()
        }
    }
}
