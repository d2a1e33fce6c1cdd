use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{InstructionExample, Language, Letter, ParallelGroup, RecordLanguage};

/// Validation rule identifiers, serialized as `SCREAMING_SNAKE_CASE` codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RuleCode {
    /// Versions disagree on the answer letter.
    AnswerMismatch,
    /// Option keys are not exactly `A, B, C, D` in order.
    OptionKeys,
    /// Context, question or an option text is blank.
    EmptyField,
    /// A required language version is absent.
    VersionMissing,
    /// The answer is not one of `A-D`.
    AnswerInvalid,
    /// A version's id differs from its group id.
    IdMismatch,
    /// A version's language label differs from the slot it is stored under.
    LanguageMismatch,
}

impl RuleCode {
    pub fn as_str(self) -> &'static str {
        match self {
            RuleCode::AnswerMismatch => "ANSWER_MISMATCH",
            RuleCode::OptionKeys => "OPTION_KEYS",
            RuleCode::EmptyField => "EMPTY_FIELD",
            RuleCode::VersionMissing => "VERSION_MISSING",
            RuleCode::AnswerInvalid => "ANSWER_INVALID",
            RuleCode::IdMismatch => "ID_MISMATCH",
            RuleCode::LanguageMismatch => "LANGUAGE_MISMATCH",
        }
    }
}

impl fmt::Display for RuleCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: RuleCode,
    pub message: String,
}

impl Violation {
    pub fn new(rule: RuleCode, message: impl Into<String>) -> Self {
        Violation {
            rule,
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.rule, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub group_id: String,
    pub violations: Vec<Violation>,
}

/// One line of the validation report JSONL.
#[derive(Serialize)]
struct ReportLine<'a> {
    group_id: &'a str,
    rule_code: RuleCode,
    message: &'a str,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn rule_codes(&self) -> BTreeSet<RuleCode> {
        self.violations.iter().map(|v| v.rule).collect()
    }

    /// `{group_id, rule_code, message}` JSON lines, one per violation.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for v in &self.violations {
            let line = ReportLine {
                group_id: &self.group_id,
                rule_code: v.rule,
                message: &v.message,
            };
            out.push_str(&serde_json::to_string(&line).expect("report line serializes"));
            out.push('\n');
        }
        out
    }
}

/// Record-level rules: option keys, answer letter and non-blank fields.
pub fn check_example(example: &InstructionExample) -> Vec<Violation> {
    let mut out = Vec::new();
    let who = format!("{} [{}]", example.id, example.language);

    if !example.options.has_canonical_keys() {
        let keys: Vec<&str> = example.options.keys().collect();
        out.push(Violation::new(
            RuleCode::OptionKeys,
            format!("{who}: options must be exactly A-D, found {keys:?}"),
        ));
    }
    if example.answer_letter().is_none() {
        out.push(Violation::new(
            RuleCode::AnswerInvalid,
            format!("{who}: answer `{}` is not one of A-D", example.answer),
        ));
    }

    let mut blank = Vec::new();
    if example.context.trim().is_empty() {
        blank.push("context".to_string());
    }
    if example.question.trim().is_empty() {
        blank.push("question".to_string());
    }
    for (k, v) in example.options.entries() {
        if v.trim().is_empty() {
            blank.push(format!("option {k}"));
        }
    }
    if !blank.is_empty() {
        out.push(Violation::new(
            RuleCode::EmptyField,
            format!("{who}: empty {}", blank.join(", ")),
        ));
    }
    out
}

/// Checks a group against every rule. `expected` lists the languages the
/// group must contain.
pub fn validate_group(group: &ParallelGroup, expected: &BTreeSet<Language>) -> ValidationReport {
    let mut violations = Vec::new();

    for language in expected {
        if !group.versions.contains_key(language) {
            violations.push(Violation::new(
                RuleCode::VersionMissing,
                format!("{}: no {language} version", group.id),
            ));
        }
    }

    for (&language, version) in &group.versions {
        if version.id != group.id {
            violations.push(Violation::new(
                RuleCode::IdMismatch,
                format!(
                    "{} [{language}]: version carries id `{}`",
                    group.id, version.id
                ),
            ));
        }
        if version.language != RecordLanguage::Single(language) {
            violations.push(Violation::new(
                RuleCode::LanguageMismatch,
                format!(
                    "{} [{language}]: version is labelled {}",
                    group.id, version.language
                ),
            ));
        }
        violations.extend(check_example(version));
    }

    // Invalid letters are reported as ANSWER_INVALID; only valid ones take
    // part in the cross-version comparison.
    let letters: BTreeMap<Language, Letter> = group
        .versions
        .iter()
        .filter_map(|(&l, v)| v.answer_letter().map(|a| (l, a)))
        .collect();
    let distinct: BTreeSet<Letter> = letters.values().copied().collect();
    if distinct.len() > 1 {
        let detail: Vec<String> = letters.iter().map(|(l, a)| format!("{l}={a}")).collect();
        violations.push(Violation::new(
            RuleCode::AnswerMismatch,
            format!("{}: answers differ across versions ({})", group.id, detail.join(", ")),
        ));
    }

    ValidationReport {
        group_id: group.id.clone(),
        violations,
    }
}
