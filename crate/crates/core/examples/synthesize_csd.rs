//! Build a code-switched dataset from a parallel corpus and inspect the
//! per-slot language audit.
//!
//! cargo run --example synthesize_csd [SETTING] [SEED]

use std::fs::File;
use std::path::Path;

use codeswitch::corpus::{parse_corpus, Alignment, Language, ParseOptions, Source};
use codeswitch::synthesizer::{synthesize_csd_dataset, LanguageSet, SynthesisConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let setting: LanguageSet = args.next().as_deref().unwrap_or("E+J+K+Z").parse()?;
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(7);

    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus");
    let mut sources = Vec::new();
    for &l in setting.members() {
        let p = dir.join(format!("{}.jsonl", l.code().to_lowercase()));
        sources.push(Source::new(p.display().to_string(), Some(l), File::open(p)?));
    }
    let corpus = parse_corpus(sources, &ParseOptions::per_language(Alignment::ById))?;

    let config = SynthesisConfig::new(setting, seed, corpus.len());
    let out = synthesize_csd_dataset(&corpus, &config)?;
    for (ex, audit) in out.dataset.iter().zip(&out.audits) {
        let slots: Vec<&str> = audit.context_slot_languages.iter().map(|l: &Language| l.code()).collect();
        println!(
            "{}: context [{}] question {} options {}{}",
            ex.id,
            slots.join(" "),
            audit.question_language,
            audit.options_language,
            if audit.fallback_used { " (fallback)" } else { "" }
        );
        println!("  {}", ex.context);
    }
    println!("{}", serde_json::to_string_pretty(&out.stats)?);
    Ok(())
}
