use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{Corpus, InstructionExample, Language};

/// Unicode scalar values in `text`. The default counting unit.
pub fn count_chars(text: &str) -> u64 {
    text.chars().count() as u64
}

/// Whitespace-separated words in `text`.
pub fn count_words(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitSummary {
    pub min: u64,
    pub mean: f64,
    pub max: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub example_count: usize,
    /// Per-example length summary; `None` for an empty corpus.
    pub unit_counts: Option<UnitSummary>,
    /// Number of examples per language.
    pub per_language_counts: BTreeMap<Language, usize>,
    /// Units per language.
    pub per_language_units: BTreeMap<Language, u64>,
    pub total_units: u64,
}

fn example_units<F: Fn(&str) -> u64>(ex: &InstructionExample, counter: &F) -> u64 {
    counter(&ex.context)
        + counter(&ex.question)
        + ex.options.texts().map(counter).sum::<u64>()
        + counter(&ex.answer)
}

/// Aggregates per-example unit counts over every version of every group.
pub fn compute_stats<F: Fn(&str) -> u64>(corpus: &Corpus, counter: F) -> CorpusStats {
    compute_stats_with_overrides(corpus, counter, &HashMap::new())
}

/// Like [`compute_stats`], but a per-example count keyed by `(id, language)`
/// in `overrides` replaces the counter's result for that example.
pub fn compute_stats_with_overrides<F: Fn(&str) -> u64>(
    corpus: &Corpus,
    counter: F,
    overrides: &HashMap<(String, Language), u64>,
) -> CorpusStats {
    let mut example_count = 0usize;
    let mut total = 0u64;
    let mut min = u64::MAX;
    let mut max = 0u64;
    let mut per_language_counts = BTreeMap::new();
    let mut per_language_units = BTreeMap::new();

    for group in corpus.groups() {
        for (&language, ex) in &group.versions {
            let units = overrides
                .get(&(ex.id.clone(), language))
                .copied()
                .unwrap_or_else(|| example_units(ex, &counter));
            example_count += 1;
            total += units;
            min = min.min(units);
            max = max.max(units);
            *per_language_counts.entry(language).or_insert(0) += 1;
            *per_language_units.entry(language).or_insert(0) += units;
        }
    }

    let unit_counts = (example_count > 0).then(|| UnitSummary {
        min,
        mean: total as f64 / example_count as f64,
        max,
    });

    CorpusStats {
        example_count,
        unit_counts,
        per_language_counts,
        per_language_units,
        total_units: total,
    }
}
