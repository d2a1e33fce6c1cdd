//! Data model for parallel multilingual multiple-choice instruction data.
//!
//! A [`Corpus`] is an ordered list of [`ParallelGroup`]s; each group holds the
//! same [`InstructionExample`] rendered in up to four languages.
//!
//! The example type is deliberately permissive (option keys and the answer are
//! stored as read) so that malformed records can be represented and reported by
//! [`validate`] instead of being rejected at the type level.

mod parse;
mod stats;
mod validate;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use parse::{
    parse_corpus, parse_groups, read_examples, write_corpus, write_corpus_per_language,
    write_examples, Alignment, Layout, ParseDiagnostic, ParseFailure, ParseOptions, Source,
};
pub use stats::{
    compute_stats, compute_stats_with_overrides, count_chars, count_words, CorpusStats,
    UnitSummary,
};
pub use validate::{check_example, validate_group, RuleCode, ValidationReport, Violation};

/// One of the four corpus languages. The derived ordering is the canonical
/// order `EN < JA < KO < ZH`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Language {
    #[serde(rename = "EN")]
    En,
    #[serde(rename = "JA")]
    Ja,
    #[serde(rename = "KO")]
    Ko,
    #[serde(rename = "ZH")]
    Zh,
}

impl Language {
    pub const ALL: [Language; 4] = [Language::En, Language::Ja, Language::Ko, Language::Zh];

    pub fn code(self) -> &'static str {
        match self {
            Language::En => "EN",
            Language::Ja => "JA",
            Language::Ko => "KO",
            Language::Zh => "ZH",
        }
    }

    /// English name, as used in the translation prompt.
    pub fn english_name(self) -> &'static str {
        match self {
            Language::En => "English",
            Language::Ja => "Japanese",
            Language::Ko => "Korean",
            Language::Zh => "Chinese",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown language code `{0}` (expected EN, JA, KO or ZH)")]
pub struct UnknownLanguage(pub String);

impl FromStr for Language {
    type Err = UnknownLanguage;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "EN" => Ok(Language::En),
            "JA" => Ok(Language::Ja),
            "KO" => Ok(Language::Ko),
            "ZH" => Ok(Language::Zh),
            _ => Err(UnknownLanguage(s.to_string())),
        }
    }
}

/// Language label carried by a record: a single language, or `MIXED` for
/// code-switched output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RecordLanguage {
    Single(Language),
    Mixed,
}

impl RecordLanguage {
    pub fn as_single(self) -> Option<Language> {
        match self {
            RecordLanguage::Single(l) => Some(l),
            RecordLanguage::Mixed => None,
        }
    }
}

impl From<Language> for RecordLanguage {
    fn from(l: Language) -> Self {
        RecordLanguage::Single(l)
    }
}

impl fmt::Display for RecordLanguage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RecordLanguage::Single(l) => f.write_str(l.code()),
            RecordLanguage::Mixed => f.write_str("MIXED"),
        }
    }
}

impl FromStr for RecordLanguage {
    type Err = UnknownLanguage;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim().eq_ignore_ascii_case("MIXED") {
            Ok(RecordLanguage::Mixed)
        } else {
            s.parse().map(RecordLanguage::Single)
        }
    }
}

impl Serialize for RecordLanguage {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RecordLanguage {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(de::Error::custom)
    }
}

/// An answer option letter. Ordered `A < B < C < D`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Letter {
    A,
    B,
    C,
    D,
}

impl Letter {
    pub const ALL: [Letter; 4] = [Letter::A, Letter::B, Letter::C, Letter::D];

    pub fn as_str(self) -> &'static str {
        match self {
            Letter::A => "A",
            Letter::B => "B",
            Letter::C => "C",
            Letter::D => "D",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Maps a 1-based answer number (1..=4) to its letter.
    pub fn from_number(n: u8) -> Option<Letter> {
        match n {
            1..=4 => Some(Letter::ALL[n as usize - 1]),
            _ => None,
        }
    }

    pub fn number(self) -> u8 {
        self as u8 + 1
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Letter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" => Ok(Letter::A),
            "B" => Ok(Letter::B),
            "C" => Ok(Letter::C),
            "D" => Ok(Letter::D),
            other => Err(format!("`{other}` is not an option letter (A-D)")),
        }
    }
}

/// Option texts keyed by letter, in the order they were read.
///
/// A well-formed example has exactly the keys `A, B, C, D` in that order;
/// anything else is kept as-is and flagged as `OPTION_KEYS` by validation.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Options(Vec<(String, String)>);

impl Options {
    pub fn from_texts<S: Into<String>>(texts: [S; 4]) -> Self {
        Options(
            Letter::ALL
                .iter()
                .zip(texts)
                .map(|(l, t)| (l.as_str().to_string(), t.into()))
                .collect(),
        )
    }

    pub fn from_entries(entries: Vec<(String, String)>) -> Self {
        Options(entries)
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.0
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|(k, _)| k.as_str())
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|(_, v)| v.as_str())
    }

    pub fn get(&self, letter: Letter) -> Option<&str> {
        self.0
            .iter()
            .find(|(k, _)| k == letter.as_str())
            .map(|(_, v)| v.as_str())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// True when the keys are exactly `A, B, C, D` in order.
    pub fn has_canonical_keys(&self) -> bool {
        self.0.len() == 4
            && self
                .0
                .iter()
                .zip(Letter::ALL)
                .all(|((k, _), l)| k == l.as_str())
    }

    pub fn remove(&mut self, key: &str) -> Option<String> {
        let pos = self.0.iter().position(|(k, _)| k == key)?;
        Some(self.0.remove(pos).1)
    }

    pub fn set(&mut self, key: &str, text: impl Into<String>) {
        let text = text.into();
        match self.0.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = text,
            None => self.0.push((key.to_string(), text)),
        }
    }
}

impl Serialize for Options {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for Options {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct OptionsVisitor;

        impl<'de> Visitor<'de> for OptionsVisitor {
            type Value = Options;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an object mapping option letters to option texts")
            }

            fn visit_map<M: MapAccess<'de>>(self, mut access: M) -> Result<Options, M::Error> {
                let mut entries: Vec<(String, String)> = Vec::new();
                while let Some((k, v)) = access.next_entry::<String, String>()? {
                    if entries.iter().any(|(seen, _)| *seen == k) {
                        return Err(de::Error::custom(format!("duplicate option key `{k}`")));
                    }
                    entries.push((k, v));
                }
                Ok(Options(entries))
            }
        }

        d.deserialize_map(OptionsVisitor)
    }
}

/// One multiple-choice instruction example. Field order is the on-disk key
/// order: `id, language, context, question, options, answer`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionExample {
    pub id: String,
    pub language: RecordLanguage,
    pub context: String,
    pub question: String,
    pub options: Options,
    pub answer: String,
}

impl InstructionExample {
    pub fn new(
        id: impl Into<String>,
        language: impl Into<RecordLanguage>,
        context: impl Into<String>,
        question: impl Into<String>,
        options: [&str; 4],
        answer: Letter,
    ) -> Self {
        InstructionExample {
            id: id.into(),
            language: language.into(),
            context: context.into(),
            question: question.into(),
            options: Options::from_texts(options),
            answer: answer.as_str().to_string(),
        }
    }

    /// The answer as a letter, if it is one of `A-D`.
    pub fn answer_letter(&self) -> Option<Letter> {
        self.answer.parse().ok()
    }
}

/// The same example in several languages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelGroup {
    pub id: String,
    pub versions: BTreeMap<Language, InstructionExample>,
}

impl ParallelGroup {
    pub fn new(id: impl Into<String>) -> Self {
        ParallelGroup {
            id: id.into(),
            versions: BTreeMap::new(),
        }
    }

    pub fn version(&self, language: Language) -> Option<&InstructionExample> {
        self.versions.get(&language)
    }

    pub fn languages(&self) -> impl Iterator<Item = Language> + '_ {
        self.versions.keys().copied()
    }

    /// The answer letter shared by every version, if the versions agree on a
    /// valid letter.
    pub fn shared_answer(&self) -> Option<Letter> {
        let mut letters = self.versions.values().map(|v| v.answer_letter());
        let first = letters.next()??;
        letters.all(|l| l == Some(first)).then_some(first)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorpusError {
    #[error("duplicate group id `{0}`")]
    DuplicateGroup(String),
    #[error("group `{group}` has no {language} version")]
    MissingLanguage { group: String, language: Language },
}

/// An ordered collection of parallel groups that all cover `languages`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    groups: Vec<ParallelGroup>,
    languages: BTreeSet<Language>,
}

impl Corpus {
    pub fn new(
        groups: Vec<ParallelGroup>,
        languages: BTreeSet<Language>,
    ) -> Result<Self, CorpusError> {
        let mut seen = HashSet::with_capacity(groups.len());
        for g in &groups {
            if !seen.insert(g.id.as_str()) {
                return Err(CorpusError::DuplicateGroup(g.id.clone()));
            }
            if let Some(&language) = languages.iter().find(|l| !g.versions.contains_key(l)) {
                return Err(CorpusError::MissingLanguage {
                    group: g.id.clone(),
                    language,
                });
            }
        }
        Ok(Corpus { groups, languages })
    }

    pub fn groups(&self) -> &[ParallelGroup] {
        &self.groups
    }

    pub fn languages(&self) -> &BTreeSet<Language> {
        &self.languages
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn into_groups(self) -> Vec<ParallelGroup> {
        self.groups
    }
}
