//! Parse a per-language corpus directory and validate every group.
//!
//! cargo run --example validate_corpus [DIR]

use std::fs::File;
use std::path::PathBuf;

use codeswitch::corpus::{parse_groups, validate_group, Alignment, Language, ParseOptions, Source};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus"));

    let mut sources = Vec::new();
    for lang in Language::ALL {
        let path = dir.join(format!("{}.jsonl", lang.code().to_lowercase()));
        sources.push(Source::new(path.display().to_string(), Some(lang), File::open(&path)?));
    }
    let (groups, languages) = parse_groups(sources, &ParseOptions::per_language(Alignment::ById))?;

    let mut bad = 0;
    for g in &groups {
        let report = validate_group(g, &languages);
        if !report.is_clean() {
            bad += 1;
            print!("{}", report.to_jsonl());
        }
    }
    println!("{} groups, {} with violations", groups.len(), bad);
    Ok(())
}
