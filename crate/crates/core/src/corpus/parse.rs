//! Line-delimited corpus reading and writing.
//!
//! Each record is one JSON object with keys `id, language, context, question,
//! options, answer`. A source whose whole content is a JSON array (the shape
//! LLM generation returns) is accepted too, as is a line holding an array;
//! both are normalized to individual records.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{self, Read, Write};

use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;

use super::validate::{check_example, RuleCode};
use super::{Corpus, InstructionExample, Language, Options, ParallelGroup, RecordLanguage};

/// How per-language files are matched up into groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Alignment {
    /// Records are grouped by their `id` field.
    #[default]
    ById,
    /// The k-th record of every file forms group k; the id of the first
    /// language's record becomes the group id.
    Positional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// One source per language; each source declares its language.
    PerLanguage(Alignment),
    /// Records from any number of sources, keyed by their `language` field.
    Interleaved,
}

/// A named input stream. `language` is required for [`Layout::PerLanguage`].
pub struct Source<R> {
    pub name: String,
    pub language: Option<Language>,
    pub reader: R,
}

impl<R> Source<R> {
    pub fn new(name: impl Into<String>, language: Option<Language>, reader: R) -> Self {
        Source {
            name: name.into(),
            language,
            reader,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseOptions {
    pub layout: Layout,
    /// Languages every group must contain. When `None`, the languages of the
    /// per-language sources (or every language seen, for interleaved input).
    pub languages: Option<BTreeSet<Language>>,
}

impl ParseOptions {
    pub fn interleaved() -> Self {
        ParseOptions {
            layout: Layout::Interleaved,
            languages: None,
        }
    }

    pub fn per_language(alignment: Alignment) -> Self {
        ParseOptions {
            layout: Layout::PerLanguage(alignment),
            languages: None,
        }
    }

    pub fn with_languages(mut self, languages: impl IntoIterator<Item = Language>) -> Self {
        self.languages = Some(languages.into_iter().collect());
        self
    }
}

/// Where a record came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location {
    pub source: String,
    /// 1-based line number, or 1-based element index for array documents.
    pub line: usize,
    /// Byte offset of the line start; `None` for array elements.
    pub offset: Option<u64>,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.offset {
            Some(off) => write!(f, "{}:{} (byte {off})", self.source, self.line),
            None => write!(f, "{} element {}", self.source, self.line),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseDiagnostic {
    #[error("{input}: read failed: {message}")]
    Io { input: String, message: String },
    #[error("{at}: malformed record: {message}")]
    Malformed { at: Location, message: String },
    #[error("{at}: {rule}: {message}")]
    Rule {
        at: Location,
        rule: RuleCode,
        message: String,
    },
    #[error("{at}: record has no language field")]
    MissingLanguageField { at: Location },
    #[error("{at}: record labelled {found} in a {declared} source")]
    LanguageConflict {
        at: Location,
        declared: Language,
        found: RecordLanguage,
    },
    #[error("{at}: MIXED records cannot be part of a parallel corpus")]
    MixedRecord { at: Location },
    #[error("{input}: per-language source declares no language")]
    UndeclaredSourceLanguage { input: String },
    #[error("duplicate record for id `{id}` in {language}")]
    DuplicateRecord { id: String, language: Language },
    #[error("group `{group}` is missing its {language} version")]
    MissingLanguage { group: String, language: Language },
    #[error("{input}: {found} records, expected {expected} for positional alignment")]
    PositionalLength {
        input: String,
        expected: usize,
        found: usize,
    },
}

/// Every problem found while reading a corpus.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseFailure {
    pub diagnostics: Vec<ParseDiagnostic>,
}

impl fmt::Display for ParseFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} parse error(s)", self.diagnostics.len())?;
        for d in &self.diagnostics {
            write!(f, "\n  {d}")?;
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct RawRecord {
    id: Option<String>,
    language: Option<RecordLanguage>,
    context: String,
    question: String,
    options: Options,
    answer: String,
}

struct Located {
    at: Location,
    record: RawRecord,
}

/// Splits one source into records. Ids missing from the input are generated
/// as `<source name>-<zero-padded record index>`.
fn read_source<R: Read>(src: &mut Source<R>, diags: &mut Vec<ParseDiagnostic>) -> Vec<Located> {
    let mut text = String::new();
    if let Err(e) = src.reader.read_to_string(&mut text) {
        diags.push(ParseDiagnostic::Io {
            input: src.name.clone(),
            message: e.to_string(),
        });
        return Vec::new();
    }

    let mut values: Vec<(Location, Value)> = Vec::new();
    let whole_array = text
        .trim_start()
        .starts_with('[')
        .then(|| serde_json::from_str::<Vec<Value>>(&text).ok())
        .flatten();

    if let Some(items) = whole_array {
        for (i, v) in items.into_iter().enumerate() {
            let at = Location {
                source: src.name.clone(),
                line: i + 1,
                offset: None,
            };
            values.push((at, v));
        }
    } else {
        let mut offset = 0u64;
        for (i, line) in text.split_inclusive('\n').enumerate() {
            let at = Location {
                source: src.name.clone(),
                line: i + 1,
                offset: Some(offset),
            };
            offset += line.len() as u64;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            match serde_json::from_str::<Value>(trimmed) {
                Ok(Value::Array(items)) => values.extend(items.into_iter().map(|v| (at.clone(), v))),
                Ok(v) => values.push((at, v)),
                Err(e) => diags.push(ParseDiagnostic::Malformed {
                    at,
                    message: e.to_string(),
                }),
            }
        }
    }

    let mut out = Vec::with_capacity(values.len());
    for (index, (at, value)) in values.into_iter().enumerate() {
        match RawRecord::deserialize(value) {
            Ok(mut record) => {
                if record.id.is_none() {
                    record.id = Some(format!("{}-{index:06}", src.name));
                }
                out.push(Located { at, record });
            }
            Err(e) => diags.push(ParseDiagnostic::Malformed {
                at,
                message: e.to_string(),
            }),
        }
    }
    out
}

fn into_example(rec: RawRecord, language: Language) -> InstructionExample {
    InstructionExample {
        id: rec.id.unwrap_or_default(),
        language: RecordLanguage::Single(language),
        context: rec.context,
        question: rec.question,
        options: rec.options,
        answer: rec.answer,
    }
}

struct Grouped {
    groups: Vec<ParallelGroup>,
    languages: BTreeSet<Language>,
    locations: HashMap<(String, Language), Location>,
}

fn resolve_language(
    at: &Location,
    declared: Option<Language>,
    found: Option<RecordLanguage>,
    diags: &mut Vec<ParseDiagnostic>,
) -> Option<Language> {
    match (declared, found) {
        (_, Some(RecordLanguage::Mixed)) => {
            diags.push(ParseDiagnostic::MixedRecord { at: at.clone() });
            None
        }
        (Some(d), Some(RecordLanguage::Single(f))) if d != f => {
            diags.push(ParseDiagnostic::LanguageConflict {
                at: at.clone(),
                declared: d,
                found: RecordLanguage::Single(f),
            });
            None
        }
        (Some(d), _) => Some(d),
        (None, Some(RecordLanguage::Single(f))) => Some(f),
        (None, None) => {
            diags.push(ParseDiagnostic::MissingLanguageField { at: at.clone() });
            None
        }
    }
}

fn group_sources<R: Read>(
    mut sources: Vec<Source<R>>,
    opts: &ParseOptions,
    diags: &mut Vec<ParseDiagnostic>,
) -> Grouped {
    let per_language = matches!(opts.layout, Layout::PerLanguage(_));
    if per_language {
        for s in sources.iter().filter(|s| s.language.is_none()) {
            diags.push(ParseDiagnostic::UndeclaredSourceLanguage {
                input: s.name.clone(),
            });
        }
        sources.retain(|s| s.language.is_some());
        sources.sort_by_key(|s| s.language);
    }

    let mut seen_languages = BTreeSet::new();
    type Records = Vec<(Location, Language, RawRecord)>;
    let mut per_source: Vec<(Option<Language>, String, Records)> = Vec::new();
    for mut src in sources {
        let declared = if per_language { src.language } else { None };
        let located = read_source(&mut src, diags);
        let mut resolved = Vec::with_capacity(located.len());
        for Located { at, record } in located {
            if let Some(lang) = resolve_language(&at, declared, record.language, diags) {
                seen_languages.insert(lang);
                resolved.push((at, lang, record));
            }
        }
        if let Some(l) = declared {
            seen_languages.insert(l);
        }
        per_source.push((declared, src.name, resolved));
    }

    let languages = opts.languages.clone().unwrap_or(seen_languages);

    let mut groups: Vec<ParallelGroup> = Vec::new();
    let mut locations = HashMap::new();

    if let Layout::PerLanguage(Alignment::Positional) = opts.layout {
        let expected = per_source.first().map(|s| s.2.len()).unwrap_or(0);
        for (_, name, recs) in &per_source {
            if recs.len() != expected {
                diags.push(ParseDiagnostic::PositionalLength {
                    input: name.clone(),
                    expected,
                    found: recs.len(),
                });
            }
        }
        if diags.iter().any(|d| matches!(d, ParseDiagnostic::PositionalLength { .. })) {
            return Grouped {
                groups,
                languages,
                locations,
            };
        }
        let mut iters: Vec<_> = per_source.into_iter().map(|s| s.2.into_iter()).collect();
        for _ in 0..expected {
            let mut group: Option<ParallelGroup> = None;
            for it in iters.iter_mut() {
                let (at, lang, rec) = it.next().expect("lengths checked");
                let g = group.get_or_insert_with(|| {
                    ParallelGroup::new(rec.id.clone().unwrap_or_default())
                });
                let mut ex = into_example(rec, lang);
                ex.id = g.id.clone();
                locations.insert((g.id.clone(), lang), at);
                g.versions.insert(lang, ex);
            }
            groups.extend(group);
        }
    } else {
        let mut index: HashMap<String, usize> = HashMap::new();
        for (_, _, recs) in per_source {
            for (at, lang, rec) in recs {
                let id = rec.id.clone().unwrap_or_default();
                let gi = *index.entry(id.clone()).or_insert_with(|| {
                    groups.push(ParallelGroup::new(id.clone()));
                    groups.len() - 1
                });
                let g = &mut groups[gi];
                if g.versions.contains_key(&lang) {
                    diags.push(ParseDiagnostic::DuplicateRecord { id, language: lang });
                    continue;
                }
                locations.insert((id, lang), at);
                g.versions.insert(lang, into_example(rec, lang));
            }
        }
    }

    Grouped {
        groups,
        languages,
        locations,
    }
}

/// Structural parse only: records are grouped but not checked against the
/// record rules, and groups may lack languages. Used by validation, which
/// reports those problems as data.
pub fn parse_groups<R: Read>(
    sources: Vec<Source<R>>,
    opts: &ParseOptions,
) -> Result<(Vec<ParallelGroup>, BTreeSet<Language>), ParseFailure> {
    let mut diagnostics = Vec::new();
    let grouped = group_sources(sources, opts, &mut diagnostics);
    if diagnostics.is_empty() {
        Ok((grouped.groups, grouped.languages))
    } else {
        Err(ParseFailure { diagnostics })
    }
}

/// Parses sources into a [`Corpus`], reporting malformed lines, duplicate
/// `(id, language)` pairs, groups missing a declared language and records
/// that break the record rules (option keys, answer letter, blank fields).
pub fn parse_corpus<R: Read>(
    sources: Vec<Source<R>>,
    opts: &ParseOptions,
) -> Result<Corpus, ParseFailure> {
    let mut diagnostics = Vec::new();
    let grouped = group_sources(sources, opts, &mut diagnostics);

    for g in &grouped.groups {
        for &language in &grouped.languages {
            if !g.versions.contains_key(&language) {
                diagnostics.push(ParseDiagnostic::MissingLanguage {
                    group: g.id.clone(),
                    language,
                });
            }
        }
        for (&language, ex) in &g.versions {
            for v in check_example(ex) {
                let at = grouped.locations[&(g.id.clone(), language)].clone();
                diagnostics.push(ParseDiagnostic::Rule {
                    at,
                    rule: v.rule,
                    message: v.message,
                });
            }
        }
    }

    if !diagnostics.is_empty() {
        return Err(ParseFailure { diagnostics });
    }
    Ok(Corpus::new(grouped.groups, grouped.languages).expect("grouping guarantees the invariants"))
}

/// Reads flat records (any language label, including `MIXED`) in input order.
pub fn read_examples<R: Read>(
    mut source: Source<R>,
) -> Result<Vec<InstructionExample>, ParseFailure> {
    let mut diagnostics = Vec::new();
    let located = read_source(&mut source, &mut diagnostics);
    let mut out = Vec::with_capacity(located.len());
    for Located { at, record } in located {
        let language = match (record.language, source.language) {
            (Some(l), _) => l,
            (None, Some(l)) => RecordLanguage::Single(l),
            (None, None) => {
                diagnostics.push(ParseDiagnostic::MissingLanguageField { at });
                continue;
            }
        };
        out.push(InstructionExample {
            id: record.id.unwrap_or_default(),
            language,
            context: record.context,
            question: record.question,
            options: record.options,
            answer: record.answer,
        });
    }
    if diagnostics.is_empty() {
        Ok(out)
    } else {
        Err(ParseFailure { diagnostics })
    }
}

pub fn write_examples<'a, W: Write>(
    examples: impl IntoIterator<Item = &'a InstructionExample>,
    mut w: W,
) -> io::Result<()> {
    for ex in examples {
        serde_json::to_writer(&mut w, ex)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Interleaved JSONL: groups in corpus order, versions in canonical language
/// order.
pub fn write_corpus<W: Write>(corpus: &Corpus, w: W) -> io::Result<()> {
    write_examples(corpus.groups().iter().flat_map(|g| g.versions.values()), w)
}

/// One JSONL document per language.
pub fn write_corpus_per_language(corpus: &Corpus) -> BTreeMap<Language, Vec<u8>> {
    let mut out: BTreeMap<Language, Vec<u8>> = BTreeMap::new();
    for g in corpus.groups() {
        for (&l, ex) in &g.versions {
            let buf = out.entry(l).or_default();
            serde_json::to_writer(&mut *buf, ex).expect("in-memory write");
            buf.push(b'\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Letter;

    fn line(id: &str, lang: &str, answer: &str) -> String {
        format!(
            r#"{{"id":"{id}","language":"{lang}","context":"Ctx {id}.","question":"Q?","options":{{"A":"a","B":"b","C":"c","D":"d"}},"answer":"{answer}"}}"#
        )
    }

    fn interleaved(text: &str) -> Result<Corpus, ParseFailure> {
        parse_corpus(
            vec![Source::new("in.jsonl", None, text.as_bytes())],
            &ParseOptions::interleaved(),
        )
    }

    #[test]
    fn two_languages_one_group() {
        let text = format!("{}\n{}\n", line("g1", "EN", "A"), line("g1", "JA", "A"));
        let corpus = interleaved(&text).unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(
            corpus.languages().iter().copied().collect::<Vec<_>>(),
            [Language::En, Language::Ja]
        );
    }

    #[test]
    fn three_options_is_a_rule_error() {
        let text = r#"{"id":"g1","language":"EN","context":"c","question":"q","options":{"A":"a","B":"b","C":"c"},"answer":"A"}"#;
        let err = interleaved(text).unwrap_err();
        assert_eq!(err.diagnostics.len(), 1);
        match &err.diagnostics[0] {
            ParseDiagnostic::Rule { rule, message, .. } => {
                assert_eq!(*rule, RuleCode::OptionKeys);
                assert!(message.contains("options must be exactly A-D"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_input() {
        let corpus = interleaved("").unwrap();
        assert!(corpus.is_empty());
    }

    #[test]
    fn malformed_line_reports_line_and_offset() {
        let good = line("g1", "EN", "A");
        let text = format!("{good}\n{{not json\n");
        let err = interleaved(&text).unwrap_err();
        match &err.diagnostics[0] {
            ParseDiagnostic::Malformed { at, .. } => {
                assert_eq!(at.line, 2);
                assert_eq!(at.offset, Some(good.len() as u64 + 1));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_id_language() {
        let text = format!("{}\n{}\n", line("g1", "EN", "A"), line("g1", "EN", "B"));
        let err = interleaved(&text).unwrap_err();
        assert!(matches!(
            err.diagnostics[0],
            ParseDiagnostic::DuplicateRecord { language: Language::En, .. }
        ));
    }

    #[test]
    fn missing_declared_language() {
        let text = format!(
            "{}\n{}\n{}\n",
            line("g1", "EN", "A"),
            line("g1", "JA", "A"),
            line("g2", "EN", "A")
        );
        let err = interleaved(&text).unwrap_err();
        assert_eq!(
            err.diagnostics,
            vec![ParseDiagnostic::MissingLanguage {
                group: "g2".into(),
                language: Language::Ja
            }]
        );
    }

    #[test]
    fn per_language_by_id_and_generated_ids() {
        let en = "[{\"context\":\"c\",\"question\":\"q\",\"options\":{\"A\":\"a\",\"B\":\"b\",\"C\":\"c\",\"D\":\"d\"},\"answer\":\"B\"}]";
        let ja = "{\"context\":\"c\",\"question\":\"q\",\"options\":{\"A\":\"a\",\"B\":\"b\",\"C\":\"c\",\"D\":\"d\"},\"answer\":\"B\"}\n";
        let corpus = parse_corpus(
            vec![
                Source::new("toy", Some(Language::Ja), ja.as_bytes()),
                Source::new("toy", Some(Language::En), en.as_bytes()),
            ],
            &ParseOptions::per_language(Alignment::ById),
        )
        .unwrap();
        assert_eq!(corpus.len(), 1);
        let g = &corpus.groups()[0];
        assert_eq!(g.id, "toy-000000");
        assert_eq!(g.shared_answer(), Some(Letter::B));
    }

    #[test]
    fn positional_alignment_rewrites_ids() {
        let en = format!("{}\n", line("e1", "EN", "A"));
        let ko = format!("{}\n", line("k1", "KO", "A"));
        let corpus = parse_corpus(
            vec![
                Source::new("ko", Some(Language::Ko), ko.as_bytes()),
                Source::new("en", Some(Language::En), en.as_bytes()),
            ],
            &ParseOptions::per_language(Alignment::Positional),
        )
        .unwrap();
        let g = &corpus.groups()[0];
        assert_eq!(g.id, "e1");
        assert_eq!(g.version(Language::Ko).unwrap().id, "e1");
    }

    #[test]
    fn language_conflict_in_per_language_source() {
        let ja = format!("{}\n", line("g1", "KO", "A"));
        let err = parse_corpus(
            vec![Source::new("ja", Some(Language::Ja), ja.as_bytes())],
            &ParseOptions::per_language(Alignment::ById),
        )
        .unwrap_err();
        assert!(matches!(err.diagnostics[0], ParseDiagnostic::LanguageConflict { .. }));
    }

    #[test]
    fn write_then_parse_round_trips() {
        let text = format!(
            "{}\n{}\n{}\n{}\n",
            line("g1", "EN", "A"),
            line("g1", "JA", "A"),
            line("g2", "JA", "C"),
            line("g2", "EN", "C")
        );
        let corpus = interleaved(&text).unwrap();
        let mut buf = Vec::new();
        write_corpus(&corpus, &mut buf).unwrap();
        let again = interleaved(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(corpus, again);
    }
}
