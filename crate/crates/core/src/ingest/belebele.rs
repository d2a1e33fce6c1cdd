use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::corpus::{
    validate_group, Corpus, InstructionExample, Language, Letter, ParallelGroup, RecordLanguage, RuleCode,
};

const DIALECTS: [(&str, Language); 4] = [
    ("eng_Latn", Language::En),
    ("jpn_Jpan", Language::Ja),
    ("kor_Hang", Language::Ko),
    ("zho_Hans", Language::Zh),
];

fn dialect_language(dialect: &str) -> Option<Language> {
    DIALECTS.iter().find(|(d, _)| *d == dialect).map(|&(_, l)| l)
}

fn language_dialect(language: Language) -> &'static str {
    DIALECTS.iter().find(|(_, l)| *l == language).map(|&(d, _)| d).unwrap()
}

/// `correct_answer_num` is a string in the published files; integers are
/// accepted too.
fn answer_num<'de, D: Deserializer<'de>>(d: D) -> Result<u8, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Num {
        Int(u64),
        Str(String),
    }
    let n = match Num::deserialize(d)? {
        Num::Int(n) => n,
        Num::Str(s) => s.trim().parse().map_err(serde::de::Error::custom)?,
    };
    u8::try_from(n).map_err(serde::de::Error::custom)
}

fn answer_num_str<S: Serializer>(n: &u8, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(n)
}

/// One line of a Belebele file, in the published field layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BelebeleRow {
    pub link: String,
    pub question_number: u64,
    pub flores_passage: String,
    pub question: String,
    pub mc_answer1: String,
    pub mc_answer2: String,
    pub mc_answer3: String,
    pub mc_answer4: String,
    #[serde(deserialize_with = "answer_num", serialize_with = "answer_num_str")]
    pub correct_answer_num: u8,
    pub dialect: String,
}

/// A Belebele item in one of the corpus languages. `link_id` keys the
/// parallel versions of a question: `{link}#{question_number}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BelebeleRecord {
    pub passage: String,
    pub question: String,
    pub answers: [String; 4],
    /// 1-based.
    pub correct_index: u8,
    pub language: Language,
    pub link_id: String,
}

impl BelebeleRow {
    /// `None` for dialects outside the corpus languages.
    pub fn to_record(&self) -> Option<BelebeleRecord> {
        Some(BelebeleRecord {
            passage: self.flores_passage.clone(),
            question: self.question.clone(),
            answers: [
                self.mc_answer1.clone(),
                self.mc_answer2.clone(),
                self.mc_answer3.clone(),
                self.mc_answer4.clone(),
            ],
            correct_index: self.correct_answer_num,
            language: dialect_language(&self.dialect)?,
            link_id: format!("{}#{}", self.link, self.question_number),
        })
    }
}

impl BelebeleRecord {
    /// Splits `link_id` at its last `#`; `None` if it does not end in a
    /// question number.
    pub fn to_row(&self) -> Option<BelebeleRow> {
        let (link, number) = self.link_id.rsplit_once('#')?;
        let [a1, a2, a3, a4] = self.answers.clone();
        Some(BelebeleRow {
            link: link.to_string(),
            question_number: number.parse().ok()?,
            flores_passage: self.passage.clone(),
            question: self.question.clone(),
            mc_answer1: a1,
            mc_answer2: a2,
            mc_answer3: a3,
            mc_answer4: a4,
            correct_answer_num: self.correct_index,
            dialect: language_dialect(self.language).to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BelebeleError {
    #[error("{input} line {line}: {message}")]
    Read { input: String, line: usize, message: String },
    #[error("{link_id}/{language}: correct_index {index} is not in 1..=4")]
    BadIndex { link_id: String, language: Language, index: u8 },
    #[error("{link_id} has two {language} records")]
    Duplicate { link_id: String, language: Language },
    #[error("ANSWER_MISMATCH: correct answer differs across languages for {}", .0.join(", "))]
    AnswerMismatch(Vec<String>),
    #[error("{link_id}: {rules:?}")]
    Invalid { link_id: String, rules: Vec<RuleCode> },
}

/// Reads rows (JSONL, or one JSON array) and keeps the corpus languages.
/// Returns the records and a count of rows skipped per other dialect.
pub fn read_belebele<R: Read>(
    input: &str,
    mut reader: R,
) -> Result<(Vec<BelebeleRow>, BTreeMap<String, usize>), BelebeleError> {
    let err = |line: usize, message: String| BelebeleError::Read { input: input.to_string(), line, message };
    let mut text = String::new();
    reader.read_to_string(&mut text).map_err(|e| err(0, e.to_string()))?;

    let rows: Vec<BelebeleRow> = if text.trim_start().starts_with('[') {
        serde_json::from_str(&text).map_err(|e| err(e.line(), e.to_string()))?
    } else {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            rows.push(serde_json::from_str(line).map_err(|e| err(i + 1, e.to_string()))?);
        }
        rows
    };

    let mut skipped = BTreeMap::new();
    let kept = rows
        .into_iter()
        .filter(|r| {
            let keep = dialect_language(&r.dialect).is_some();
            if !keep {
                *skipped.entry(r.dialect.clone()).or_insert(0) += 1;
            }
            keep
        })
        .collect();
    Ok((kept, skipped))
}

/// A link whose language coverage was incomplete.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DroppedGroup {
    pub link_id: String,
    pub missing: Vec<Language>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BelebeleConversion {
    pub corpus: Corpus,
    /// Strict mode: groups dropped. Otherwise: groups whose extra versions
    /// were trimmed to the languages every group shares.
    pub incomplete: Vec<DroppedGroup>,
}

fn to_example(r: &BelebeleRecord, letter: Letter) -> InstructionExample {
    let [a, b, c, d] = &r.answers;
    InstructionExample::new(r.link_id.clone(), r.language, r.passage.clone(), r.question.clone(), [a, b, c, d], letter)
}

/// Groups records by `link_id` (in order of first appearance).
///
/// The language set is every language seen. In strict mode, groups missing
/// any of them are dropped; otherwise the corpus keeps every group but only
/// the languages all groups share.
pub fn convert_belebele(records: &[BelebeleRecord], strict: bool) -> Result<BelebeleConversion, BelebeleError> {
    let mut order: Vec<&str> = Vec::new();
    let mut by_link: HashMap<&str, BTreeMap<Language, (&BelebeleRecord, Letter)>> = HashMap::new();
    for r in records {
        let letter = Letter::from_number(r.correct_index).ok_or_else(|| BelebeleError::BadIndex {
                link_id: r.link_id.clone(),
                language: r.language,
                index: r.correct_index,
            })?;
        let versions = by_link.entry(&r.link_id).or_insert_with(|| {
            order.push(&r.link_id);
            BTreeMap::new()
        });
        if versions.insert(r.language, (r, letter)).is_some() {
            return Err(BelebeleError::Duplicate { link_id: r.link_id.clone(), language: r.language });
        }
    }

    let mismatched: Vec<String> = order
        .iter()
        .filter(|id| {
            let letters: BTreeSet<Letter> = by_link[*id].values().map(|&(_, l)| l).collect();
            letters.len() > 1
        })
        .map(|id| id.to_string())
        .collect();
    if !mismatched.is_empty() {
        return Err(BelebeleError::AnswerMismatch(mismatched));
    }

    let all: BTreeSet<Language> = records.iter().map(|r| r.language).collect();
    let mut incomplete = Vec::new();
    let mut shared = all.clone();
    for id in &order {
        let have: BTreeSet<Language> = by_link[*id].keys().copied().collect();
        if have != all {
            incomplete.push(DroppedGroup { link_id: id.to_string(), missing: all.difference(&have).copied().collect() });
            shared = shared.intersection(&have).copied().collect();
        }
    }
    let languages = if strict { all } else { shared };
    let dropped: BTreeSet<&str> = incomplete.iter().map(|d| d.link_id.as_str()).collect();

    let mut groups = Vec::new();
    for id in order {
        if strict && dropped.contains(id) {
            continue;
        }
        let mut g = ParallelGroup::new(id);
        for (&language, &(r, letter)) in &by_link[id] {
            if languages.contains(&language) {
                g.versions.insert(language, to_example(r, letter));
            }
        }
        let report = validate_group(&g, &languages);
        if !report.is_clean() {
            return Err(BelebeleError::Invalid { link_id: id.to_string(), rules: report.rule_codes().into_iter().collect() });
        }
        groups.push(g);
    }
    if !incomplete.is_empty() {
        log::warn!(
            "{} link(s) lack some of {:?}; {}",
            incomplete.len(),
            languages,
            if strict { "dropped" } else { "trimmed to shared languages" }
        );
    }
    let corpus = Corpus::new(groups, languages).expect("groups checked against the language set");
    Ok(BelebeleConversion { corpus, incomplete })
}

/// The inverse of [`convert_belebele`]: records in group order, languages in
/// canonical order.
pub fn export_belebele(corpus: &Corpus) -> Vec<BelebeleRecord> {
    let mut out = Vec::new();
    for g in corpus.groups() {
        for (&language, ex) in &g.versions {
            let text = |l: Letter| ex.options.get(l).unwrap_or_default().to_string();
            debug_assert_eq!(ex.language, RecordLanguage::Single(language));
            out.push(BelebeleRecord {
                passage: ex.context.clone(),
                question: ex.question.clone(),
                answers: Letter::ALL.map(text),
                correct_index: ex.answer_letter().map_or(0, Letter::number),
                language,
                link_id: g.id.clone(),
            });
        }
    }
    out
}
