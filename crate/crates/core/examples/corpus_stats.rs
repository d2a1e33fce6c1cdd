//! Length statistics in characters and in whitespace words.

use std::fs::File;
use std::path::Path;

use codeswitch::corpus::{compute_stats, count_chars, count_words, parse_corpus, Alignment, Language, ParseOptions, Source};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus");
    let sources = Language::ALL
        .into_iter()
        .map(|l| {
            let p = dir.join(format!("{}.jsonl", l.code().to_lowercase()));
            Ok(Source::new(p.display().to_string(), Some(l), File::open(p)?))
        })
        .collect::<std::io::Result<Vec<_>>>()?;
    let corpus = parse_corpus(sources, &ParseOptions::per_language(Alignment::ById))?;

    let chars = compute_stats(&corpus, count_chars);
    let words = compute_stats(&corpus, count_words);
    println!("{} examples", chars.example_count);
    for (lang, units) in &chars.per_language_units {
        println!("{lang}: {units} chars, {} words", words.per_language_units[lang]);
    }
    if let Some(s) = chars.unit_counts {
        println!("chars per example: min {} mean {:.1} max {}", s.min, s.mean, s.max);
    }
    Ok(())
}
