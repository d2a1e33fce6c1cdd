//! Likelihood-based multiple-choice scoring and CSD-vs-Concat result tables.
//!
//! A scorer (any model runner) emits one [`ChoiceScore`] per
//! (example, language, choice). The prediction for an example is the choice
//! with the highest, optionally length-normalized, log-likelihood; accuracy
//! is aggregated per language into an [`AccuracyTable`], and two tables are
//! compared with [`delta_report`] and rendered with [`render_table`].

mod report;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Language, Letter};

pub use report::{
    delta_report, parse_csv, render_table, round1_tenths, Column, DeltaReport, RenderOptions,
    TableFormat, CSV_COLUMNS_DOC,
};

/// Log-likelihood of one answer choice. This is the JSONL contract shared
/// with external scorers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceScore {
    pub example_id: String,
    pub language: Language,
    pub choice: Letter,
    /// Natural-log likelihood of the choice continuation.
    pub logprob: f64,
    /// Length of the choice text in characters.
    pub char_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_count: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Normalization {
    /// Raw summed log-likelihood.
    #[default]
    None,
    PerChar,
    PerToken,
}

impl std::str::FromStr for Normalization {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "NONE" => Ok(Normalization::None),
            "PER_CHAR" => Ok(Normalization::PerChar),
            "PER_TOKEN" => Ok(Normalization::PerToken),
            _ => Err(format!("unknown normalization `{s}` (NONE, PER_CHAR or PER_TOKEN)")),
        }
    }
}

/// How exact score ties are broken. Only one policy exists; it is carried in
/// the config so that it is recorded alongside results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TiePolicy {
    /// Earliest letter in `A < B < C < D` order.
    #[default]
    FirstLetter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EvalConfig {
    pub normalization: Normalization,
    #[serde(default)]
    pub tie_policy: TiePolicy,
}

impl EvalConfig {
    pub fn new(normalization: Normalization) -> Self {
        EvalConfig { normalization, tie_policy: TiePolicy::FirstLetter }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub letter: Letter,
    /// Another present letter had exactly the same normalized score.
    pub tie: bool,
    /// Letters with no score record; the argmax ran over the others.
    pub missing: Vec<Letter>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("no score records for one example")]
    NoScores,
    #[error("scores for {example_id}/{language} mix several examples")]
    MixedExamples { example_id: String, language: Language },
    #[error("duplicate score for choice {letter} of {example_id}/{language}")]
    DuplicateLetter { example_id: String, language: Language, letter: Letter },
    #[error("PER_TOKEN normalization needs token_count on every record ({example_id}/{language} choice {letter} has none)")]
    MissingTokenCount { example_id: String, language: Language, letter: Letter },
    #[error("{example_id}/{language} choice {letter}: {message}")]
    InvalidScore { example_id: String, language: Language, letter: Letter, message: String },
    #[error("duplicate gold item {example_id}/{language}")]
    DuplicateGold { example_id: String, language: Language },
    #[error("{} gold item(s) have no score records: {}", .0.len(), .0.join(", "))]
    MissingScores(Vec<String>),
    #[error("tables cover different columns: {csd:?} vs {concat:?}")]
    ColumnMismatch { csd: Vec<Language>, concat: Vec<Language> },
    #[error("accuracy {value} for {column} is outside 0..=100")]
    OutOfRange { column: String, value: f64 },
    #[error("line {line}: {message}")]
    Read { line: usize, message: String },
}

fn normalized(score: &ChoiceScore, normalization: Normalization) -> Result<f64, EvalError> {
    let invalid = |message: &str| EvalError::InvalidScore {
        example_id: score.example_id.clone(),
        language: score.language,
        letter: score.choice,
        message: message.to_string(),
    };
    if !score.logprob.is_finite() {
        return Err(invalid("logprob is not finite"));
    }
    if score.char_count == 0 {
        return Err(invalid("char_count must be at least 1"));
    }
    match normalization {
        Normalization::None => Ok(score.logprob),
        Normalization::PerChar => Ok(score.logprob / score.char_count as f64),
        Normalization::PerToken => match score.token_count {
            None => Err(EvalError::MissingTokenCount {
                example_id: score.example_id.clone(),
                language: score.language,
                letter: score.choice,
            }),
            Some(0) => Err(invalid("token_count must be at least 1")),
            Some(t) => Ok(score.logprob / t as f64),
        },
    }
}

/// Picks the choice with the highest normalized score among the records of
/// one (example, language). Exact ties go to the earliest letter and are
/// flagged.
pub fn select_prediction<'a, I>(scores: I, config: &EvalConfig) -> Result<Prediction, EvalError>
where
    I: IntoIterator<Item = &'a ChoiceScore>,
{
    let mut slots: [Option<f64>; 4] = [None; 4];
    let mut key: Option<(&str, Language)> = None;
    for s in scores {
        match key {
            None => key = Some((&s.example_id, s.language)),
            Some((id, lang)) if id != s.example_id || lang != s.language => {
                return Err(EvalError::MixedExamples { example_id: id.to_string(), language: lang });
            }
            _ => {}
        }
        let value = normalized(s, config.normalization)?;
        let slot = &mut slots[s.choice.index()];
        if slot.is_some() {
            return Err(EvalError::DuplicateLetter {
                example_id: s.example_id.clone(),
                language: s.language,
                letter: s.choice,
            });
        }
        *slot = Some(value);
    }
    if key.is_none() {
        return Err(EvalError::NoScores);
    }

    let mut best: Option<(Letter, f64)> = None;
    let mut tie = false;
    let mut missing = Vec::new();
    for letter in Letter::ALL {
        let Some(v) = slots[letter.index()] else {
            missing.push(letter);
            continue;
        };
        match best {
            None => best = Some((letter, v)),
            Some((_, b)) if v > b => {
                best = Some((letter, v));
                tie = false;
            }
            Some((_, b)) if v == b => tie = true,
            _ => {}
        }
    }
    let (letter, _) = best.expect("at least one record");
    Ok(Prediction { letter, tie, missing })
}

/// One gold answer. Corpus JSONL records deserialize directly (their `id`
/// is accepted for `example_id`; other fields are ignored).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldItem {
    #[serde(alias = "id")]
    pub example_id: String,
    pub language: Language,
    pub answer: Letter,
}

/// Per-language accuracy percentages and their mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyTable {
    pub setting_label: String,
    pub per_language: BTreeMap<Language, f64>,
    pub average: f64,
    /// Evaluated items per language; empty for tables built from published
    /// numbers.
    #[serde(default)]
    pub n_per_language: BTreeMap<Language, u64>,
}

impl AccuracyTable {
    /// Builds a table from accuracy percentages; the average is the
    /// arithmetic mean over the given languages.
    pub fn new(
        setting_label: impl Into<String>,
        per_language: impl IntoIterator<Item = (Language, f64)>,
    ) -> Result<Self, EvalError> {
        let per_language: BTreeMap<Language, f64> = per_language.into_iter().collect();
        for (l, &v) in &per_language {
            if !(0.0..=100.0).contains(&v) {
                return Err(EvalError::OutOfRange { column: l.to_string(), value: v });
            }
        }
        let average = if per_language.is_empty() {
            0.0
        } else {
            per_language.values().sum::<f64>() / per_language.len() as f64
        };
        Ok(AccuracyTable {
            setting_label: setting_label.into(),
            per_language,
            average,
            n_per_language: BTreeMap::new(),
        })
    }

    pub fn languages(&self) -> Vec<Language> {
        self.per_language.keys().copied().collect()
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.setting_label = label.into();
        self
    }
}

/// Everything [`score_dataset`] learned besides the accuracy table.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoreDiagnostics {
    pub normalization: Normalization,
    pub tie_policy: TiePolicy,
    /// Items whose prediction was decided by the tie policy.
    pub ties: Vec<String>,
    /// Items scored over fewer than four choices.
    pub incomplete: Vec<String>,
    /// Score records without a gold item (ignored).
    pub orphan_records: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDataset {
    pub table: AccuracyTable,
    pub diagnostics: ScoreDiagnostics,
}

fn item_key(id: &str, language: Language) -> String {
    format!("{id}/{language}")
}

/// Accuracy of the predictions derived from `scores` against `gold`, per
/// gold language. The order of `scores` does not matter.
pub fn score_dataset(
    gold: &[GoldItem],
    scores: &[ChoiceScore],
    config: &EvalConfig,
) -> Result<ScoredDataset, EvalError> {
    let mut by_item: HashMap<(&str, Language), Vec<&ChoiceScore>> = HashMap::new();
    for s in scores {
        by_item.entry((&s.example_id, s.language)).or_default().push(s);
    }

    let mut seen = BTreeSet::new();
    let mut missing = Vec::new();
    for g in gold {
        if !seen.insert((g.example_id.as_str(), g.language)) {
            return Err(EvalError::DuplicateGold {
                example_id: g.example_id.clone(),
                language: g.language,
            });
        }
        if !by_item.contains_key(&(g.example_id.as_str(), g.language)) {
            missing.push(item_key(&g.example_id, g.language));
        }
    }
    if !missing.is_empty() {
        return Err(EvalError::MissingScores(missing));
    }

    let orphan_records: u64 = by_item
        .iter()
        .filter(|(k, _)| !seen.contains(k))
        .map(|(_, v)| v.len() as u64)
        .sum();
    if orphan_records > 0 {
        log::warn!("ignoring {orphan_records} score record(s) with no gold item");
    }

    let mut correct: BTreeMap<Language, u64> = BTreeMap::new();
    let mut total: BTreeMap<Language, u64> = BTreeMap::new();
    let mut diagnostics = ScoreDiagnostics {
        normalization: config.normalization,
        tie_policy: config.tie_policy,
        orphan_records,
        ..Default::default()
    };
    for g in gold {
        let records = &by_item[&(g.example_id.as_str(), g.language)];
        let p = select_prediction(records.iter().copied(), config)?;
        if p.tie {
            diagnostics.ties.push(item_key(&g.example_id, g.language));
        }
        if !p.missing.is_empty() {
            diagnostics.incomplete.push(item_key(&g.example_id, g.language));
        }
        *total.entry(g.language).or_insert(0) += 1;
        *correct.entry(g.language).or_insert(0) += u64::from(p.letter == g.answer);
    }

    let accuracies = total.iter().map(|(&l, &n)| (l, correct[&l] as f64 / n as f64 * 100.0));
    let mut table = AccuracyTable::new("", accuracies)?;
    table.n_per_language = total;
    Ok(ScoredDataset { table, diagnostics })
}

fn read_jsonl<T: serde::de::DeserializeOwned, R: BufRead>(reader: R) -> Result<Vec<T>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| EvalError::Read { line: i + 1, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let v = serde_json::from_str(&line)
            .map_err(|e| EvalError::Read { line: i + 1, message: e.to_string() })?;
        out.push(v);
    }
    Ok(out)
}

/// Reads ChoiceScore JSONL.
pub fn read_scores<R: BufRead>(reader: R) -> Result<Vec<ChoiceScore>, EvalError> {
    read_jsonl(reader)
}

/// Reads gold items from JSONL (a corpus file works).
pub fn read_gold<R: BufRead>(reader: R) -> Result<Vec<GoldItem>, EvalError> {
    read_jsonl(reader)
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::None => "NONE",
            Normalization::PerChar => "PER_CHAR",
            Normalization::PerToken => "PER_TOKEN",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn score(id: &str, choice: Letter, logprob: f64, chars: u64) -> ChoiceScore {
        ChoiceScore {
            example_id: id.into(),
            language: Language::En,
            choice,
            logprob,
            char_count: chars,
            token_count: None,
        }
    }

    fn four(values: [f64; 4]) -> Vec<ChoiceScore> {
        Letter::ALL.iter().zip(values).map(|(&l, v)| score("x", l, v, 5)).collect()
    }

    #[test]
    fn argmax_raw() {
        let p = select_prediction(&four([-1.2, -0.5, -3.0, -2.0]), &EvalConfig::default()).unwrap();
        assert_eq!(p, Prediction { letter: Letter::B, tie: false, missing: vec![] });
    }

    #[test]
    fn per_char() {
        let cfg = EvalConfig::new(Normalization::PerChar);
        // -2.0 over 2 chars (-1.0) loses to -2.0 over 4 chars (-0.5).
        let s = [score("x", Letter::A, -2.0, 2), score("x", Letter::B, -2.0, 4)];
        let p = select_prediction(&s, &cfg).unwrap();
        assert_eq!(p.letter, Letter::B);
        assert_eq!(p.missing, [Letter::C, Letter::D]);
        let s = [score("x", Letter::A, -2.0, 4), score("x", Letter::B, -2.0, 2)];
        assert_eq!(select_prediction(&s, &cfg).unwrap().letter, Letter::A);
        // Raw scores tie.
        assert!(select_prediction(&s, &EvalConfig::default()).unwrap().tie);
    }

    #[test]
    fn ties_go_to_the_first_letter() {
        let p = select_prediction(&four([-1.0, -1.0, -5.0, -5.0]), &EvalConfig::default()).unwrap();
        assert_eq!(p.letter, Letter::A);
        assert!(p.tie);
        // A tie below the maximum is not flagged.
        let p = select_prediction(&four([-5.0, -1.0, -5.0, -2.0]), &EvalConfig::default()).unwrap();
        assert!(!p.tie);
    }

    #[test]
    fn selection_errors() {
        let cfg = EvalConfig::default();
        let dup = [score("x", Letter::A, -1.0, 1), score("x", Letter::A, -2.0, 1)];
        assert!(matches!(select_prediction(&dup, &cfg), Err(EvalError::DuplicateLetter { .. })));
        assert!(matches!(select_prediction(&four([-1.0; 4]), &EvalConfig::new(Normalization::PerToken)),
            Err(EvalError::MissingTokenCount { .. })));
        assert_eq!(select_prediction(&[], &cfg), Err(EvalError::NoScores));
        let nan = [score("x", Letter::A, f64::NAN, 1)];
        assert!(matches!(select_prediction(&nan, &cfg), Err(EvalError::InvalidScore { .. })));
        let mixed = [score("x", Letter::A, -1.0, 1), score("y", Letter::B, -1.0, 1)];
        assert!(matches!(select_prediction(&mixed, &cfg), Err(EvalError::MixedExamples { .. })));
    }

    #[test]
    fn all_correct_gives_100() {
        let mut gold = Vec::new();
        let mut scores = Vec::new();
        for l in Language::ALL {
            gold.push(GoldItem { example_id: "q".into(), language: l, answer: Letter::C });
            for c in Letter::ALL {
                let mut s = score("q", c, if c == Letter::C { -0.1 } else { -3.0 }, 3);
                s.language = l;
                scores.push(s);
            }
        }
        let out = score_dataset(&gold, &scores, &EvalConfig::default()).unwrap();
        assert!(out.table.per_language.values().all(|&v| v == 100.0));
        assert_eq!(out.table.average, 100.0);
        assert_eq!(out.table.n_per_language[&Language::Ko], 1);
    }

    #[test]
    fn missing_and_orphan_scores() {
        let gold = vec![
            GoldItem { example_id: "a".into(), language: Language::En, answer: Letter::A },
            GoldItem { example_id: "b".into(), language: Language::En, answer: Letter::A },
        ];
        let scores = four([-1.0, -2.0, -3.0, -4.0]);
        match score_dataset(&gold, &scores, &EvalConfig::default()) {
            Err(EvalError::MissingScores(ids)) => assert_eq!(ids, ["a/EN", "b/EN"]),
            other => panic!("{other:?}"),
        }
        let gold = vec![GoldItem { example_id: "x".into(), language: Language::En, answer: Letter::B }];
        let mut scores = four([-1.0, -2.0, -3.0, -4.0]);
        scores.push(score("orphan", Letter::A, -1.0, 1));
        let out = score_dataset(&gold, &scores, &EvalConfig::default()).unwrap();
        assert_eq!(out.diagnostics.orphan_records, 1);
        assert_eq!(out.table.per_language[&Language::En], 0.0);
    }

    #[test]
    fn gold_from_corpus_records() {
        let line = r#"{"id":"g1","language":"JA","context":"c","question":"q","options":{"A":"1","B":"2","C":"3","D":"4"},"answer":"D"}"#;
        let gold = read_gold(line.as_bytes()).unwrap();
        assert_eq!(gold[0], GoldItem { example_id: "g1".into(), language: Language::Ja, answer: Letter::D });
    }

    #[test]
    fn average_of_published_row() {
        use Language::*;
        let t = AccuracyTable::new("EN+JA", [(En, 82.6), (Ja, 69.7), (Ko, 68.9), (Zh, 79.3)]).unwrap();
        assert!((t.average - 75.125).abs() < 1e-9);
        assert_eq!(round1_tenths(t.average), 751);
    }

    #[test]
    fn choice_score_json_shape() {
        let s = score("e", Letter::D, -1.5, 7);
        assert_eq!(
            serde_json::to_string(&s).unwrap(),
            r#"{"example_id":"e","language":"EN","choice":"D","logprob":-1.5,"char_count":7}"#
        );
    }
}
