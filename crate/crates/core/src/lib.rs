//! Tooling for sentence-level multilingual code-switching instruction data.
//!
//! - [`corpus`]: parallel EN/JA/KO/ZH multiple-choice records, parsing,
//!   validation and statistics.
//! - [`segmenter`]: rule-based sentence splitting for English and CJK text.
//! - [`synthesizer`]: code-switched datasets and size-matched concatenation
//!   baselines.
//! - [`evaluator`]: likelihood-based multiple-choice scoring and result tables.
//! - [`ingest`]: LLM-driven generation and translation, Belebele conversion.
//! - [`cli`]: the `codeswitch` command line.

pub mod cli;
pub mod corpus;
pub mod segmenter;
pub mod synthesizer;
pub mod evaluator;
pub mod ingest;
