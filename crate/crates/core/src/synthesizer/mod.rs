//! Sentence-level code-switched datasets and size-matched concatenation
//! baselines built from a parallel corpus.
//!
//! A code-switched example takes each context sentence, the question and the
//! whole option block from independently drawn language versions of the same
//! parallel group. The concatenation baseline instead emits contiguous
//! monolingual blocks, one per language, with the same total size.

mod assign;
mod concat;
mod dataset;
pub mod rng;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Language, RuleCode};

pub use assign::{
    assign_languages, check_alignment, render_csd, AssignOutcome, SentenceAlignment,
};
pub use concat::{concat_blocks, synthesize_concat_dataset, ConcatBlock};
pub use dataset::{synthesize_csd_dataset, synthesize_csd_streaming, CsdOutput};
pub use rng::derive_rng;

/// Labels of the seven standard experimental settings, in table order.
pub const STANDARD_SETTINGS: [&str; 7] = [
    "EN+JA", "EN+KO", "EN+ZH", "E+J+K", "E+J+Z", "E+K+Z", "E+J+K+Z",
];

/// A non-empty set of languages kept in canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Language>", into = "Vec<Language>")]
pub struct LanguageSet(Vec<Language>);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LanguageSetError {
    #[error("a language set needs at least one language")]
    Empty,
    #[error("{0} appears more than once")]
    Duplicate(Language),
    #[error("cannot read `{0}` as a language setting (e.g. EN+JA or E+J+K+Z)")]
    BadSetting(String),
}

impl LanguageSet {
    pub fn new(languages: impl IntoIterator<Item = Language>) -> Result<Self, LanguageSetError> {
        let mut v: Vec<Language> = languages.into_iter().collect();
        v.sort();
        if let Some(w) = v.windows(2).find(|w| w[0] == w[1]) {
            return Err(LanguageSetError::Duplicate(w[0]));
        }
        if v.is_empty() {
            return Err(LanguageSetError::Empty);
        }
        Ok(LanguageSet(v))
    }

    pub fn all() -> Self {
        LanguageSet(Language::ALL.to_vec())
    }

    pub fn members(&self) -> &[Language] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, language: Language) -> bool {
        self.0.binary_search(&language).is_ok()
    }

    pub fn to_set(&self) -> BTreeSet<Language> {
        self.0.iter().copied().collect()
    }

    /// The member after `language` in canonical order, wrapping around.
    pub fn next_after(&self, language: Language) -> Language {
        self.0
            .iter()
            .copied()
            .find(|&l| l > language)
            .unwrap_or(self.0[0])
    }

    /// `EN+JA+KO` style label.
    pub fn label(&self) -> String {
        self.0.iter().map(|l| l.code()).collect::<Vec<_>>().join("+")
    }

    /// Parses `EN+JA`, `E+J+K+Z` and similar setting labels. Tokens are
    /// either full codes or the initials E, J, K and Z.
    pub fn from_setting(setting: &str) -> Result<Self, LanguageSetError> {
        let bad = || LanguageSetError::BadSetting(setting.to_string());
        let mut langs = Vec::new();
        for token in setting.split('+') {
            let token = token.trim();
            let lang = match token.to_ascii_uppercase().as_str() {
                "E" => Language::En,
                "J" => Language::Ja,
                "K" => Language::Ko,
                "Z" => Language::Zh,
                other => other.parse().map_err(|_| bad())?,
            };
            langs.push(lang);
        }
        LanguageSet::new(langs)
    }
}

impl TryFrom<Vec<Language>> for LanguageSet {
    type Error = LanguageSetError;

    fn try_from(v: Vec<Language>) -> Result<Self, Self::Error> {
        LanguageSet::new(v)
    }
}

impl From<LanguageSet> for Vec<Language> {
    fn from(s: LanguageSet) -> Self {
        s.0
    }
}

impl FromStr for LanguageSet {
    type Err = LanguageSetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LanguageSet::from_setting(s)
    }
}

impl fmt::Display for LanguageSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// What happens to a group whose language versions segment into different
/// numbers of context sentences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AlignmentPolicy {
    /// Skip the group.
    Strict,
    /// Draw one language for the whole context; other fields still switch.
    #[default]
    FieldFallback,
}

fn default_min_mix() -> bool {
    true
}

fn default_resample_limit() -> u32 {
    8
}

/// Synthesis settings. `master_seed` has no default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisConfig {
    pub languages: LanguageSet,
    pub master_seed: u64,
    pub dataset_size: usize,
    #[serde(default)]
    pub alignment_policy: AlignmentPolicy,
    /// Require at least two languages per example when the set allows it.
    #[serde(default = "default_min_mix")]
    pub min_mix: bool,
    #[serde(default = "default_resample_limit")]
    pub resample_limit: u32,
    /// Per-language draw weights; uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<BTreeMap<Language, f64>>,
    /// Concatenation baseline: re-emit the same leading groups in every
    /// language block instead of using disjoint groups.
    #[serde(default)]
    pub concat_overlap: bool,
}

impl SynthesisConfig {
    pub fn new(languages: LanguageSet, master_seed: u64, dataset_size: usize) -> Self {
        SynthesisConfig {
            languages,
            master_seed,
            dataset_size,
            alignment_policy: AlignmentPolicy::default(),
            min_mix: default_min_mix(),
            resample_limit: default_resample_limit(),
            weights: None,
            concat_overlap: false,
        }
    }

    pub fn check(&self) -> Result<(), SynthesisError> {
        let invalid = |m: String| Err(SynthesisError::InvalidConfig(m));
        if self.dataset_size == 0 {
            return invalid("dataset_size must be positive".into());
        }
        if self.resample_limit == 0 {
            return invalid("resample_limit must be positive".into());
        }
        if let Some(weights) = &self.weights {
            for (l, w) in weights {
                if !self.languages.contains(*l) {
                    return invalid(format!("weight given for {l}, which is not in the set"));
                }
                if !w.is_finite() || *w < 0.0 {
                    return invalid(format!("weight for {l} must be finite and non-negative"));
                }
            }
            let positive = self
                .languages
                .members()
                .iter()
                .any(|l| weights.get(l).copied().unwrap_or(0.0) > 0.0);
            if !positive {
                return invalid("at least one language needs a positive weight".into());
            }
        }
        Ok(())
    }

    /// Draw weights aligned with `languages.members()`, or `None` for uniform.
    pub(crate) fn weight_vector(&self) -> Option<Vec<f64>> {
        self.weights.as_ref().map(|w| {
            self.languages
                .members()
                .iter()
                .map(|l| w.get(l).copied().unwrap_or(0.0))
                .collect()
        })
    }
}

/// Audit record: which language version fed each slot of one emitted example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotAssignment {
    pub group_id: String,
    /// One entry per context sentence, or a single entry under field fallback.
    pub context_slot_languages: Vec<Language>,
    pub question_language: Language,
    pub options_language: Language,
    pub fallback_used: bool,
    pub seed_used: u64,
    /// Whole-assignment redraws made to satisfy `min_mix`.
    pub resamples: u32,
    /// The options language was switched after the redraw budget ran out.
    pub forced_mix: bool,
}

impl SlotAssignment {
    pub fn languages_used(&self) -> BTreeSet<Language> {
        self.context_slot_languages
            .iter()
            .copied()
            .chain([self.question_language, self.options_language])
            .collect()
    }

    /// The single language of a monolingual assignment.
    pub fn sole_language(&self) -> Option<Language> {
        let used = self.languages_used();
        (used.len() == 1).then(|| *used.iter().next().expect("one element"))
    }

    pub fn slot_count(&self) -> usize {
        self.context_slot_languages.len() + 2
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SynthesisStats {
    pub emitted: usize,
    pub fallback_count: usize,
    pub resample_events: u64,
    pub forced_mix_count: usize,
    /// Groups skipped as misaligned under the strict policy.
    pub skipped_misaligned: usize,
    pub per_slot_language_histogram: BTreeMap<Language, u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthesisError {
    #[error("invalid synthesis config: {0}")]
    InvalidConfig(String),
    #[error("group `{group}` has no {language} version")]
    MissingLanguage { group: String, language: Language },
    #[error("group `{group}` fails validation: {rules:?}")]
    InvalidGroup { group: String, rules: Vec<RuleCode> },
    #[error("need {required} eligible groups but only {eligible} are available")]
    InsufficientGroups { required: usize, eligible: usize },
    #[error("assignment does not fit group `{group}`: {detail}")]
    AssignmentMismatch { group: String, detail: String },
}
