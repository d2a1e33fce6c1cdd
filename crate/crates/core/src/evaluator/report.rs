use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{AccuracyTable, EvalError};
use crate::corpus::Language;

/// Rounds half-up to one decimal and returns the result in tenths.
///
/// A tiny epsilon absorbs binary representation error, so a mean such as
/// 297.4 / 4 (stored as 74.34999…) rounds to 74.4 as it would by hand.
pub fn round1_tenths(x: f64) -> i64 {
    (x * 10.0 + 0.5 + 1e-9).floor() as i64
}

fn fmt_tenths(t: i64) -> String {
    let sign = if t < 0 { "-" } else { "" };
    format!("{sign}{}.{}", t.abs() / 10, t.abs() % 10)
}

fn fmt_delta_tenths(t: i64) -> String {
    if t > 0 { format!("+{}", fmt_tenths(t)) } else { fmt_tenths(t) }
}

/// A result-table column: one language or the average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Column {
    Language(Language),
    Avg,
}

impl fmt::Display for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Column::Language(l) => write!(f, "{l}"),
            Column::Avg => f.write_str("Avg"),
        }
    }
}

impl FromStr for Column {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Avg" | "Avg." => Ok(Column::Avg),
            _ => s.parse().map(Column::Language).map_err(|e| format!("{e}")),
        }
    }
}

impl Serialize for Column {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Column {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// CSD minus Concat for one setting, over one-decimal rounded values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub csd: AccuracyTable,
    pub concat: AccuracyTable,
    pub delta: BTreeMap<Column, f64>,
    pub positive_flags: BTreeMap<Column, bool>,
}

impl DeltaReport {
    /// The CSD table's label.
    pub fn setting(&self) -> &str {
        &self.csd.setting_label
    }

    pub fn columns(&self) -> Vec<Column> {
        self.delta.keys().copied().collect()
    }

    /// Delta in tenths (exact).
    pub fn delta_tenths(&self, column: Column) -> Option<i64> {
        self.delta.get(&column).map(|d| (d * 10.0).round() as i64)
    }
}

fn value(table: &AccuracyTable, column: Column) -> Option<f64> {
    match column {
        Column::Language(l) => table.per_language.get(&l).copied(),
        Column::Avg => Some(table.average),
    }
}

pub fn delta_report(csd: &AccuracyTable, concat: &AccuracyTable) -> Result<DeltaReport, EvalError> {
    if csd.languages() != concat.languages() {
        return Err(EvalError::ColumnMismatch { csd: csd.languages(), concat: concat.languages() });
    }
    let mut delta = BTreeMap::new();
    let mut positive_flags = BTreeMap::new();
    let columns = csd.languages().into_iter().map(Column::Language).chain([Column::Avg]);
    for column in columns {
        let t = round1_tenths(value(csd, column).unwrap()) - round1_tenths(value(concat, column).unwrap());
        delta.insert(column, t as f64 / 10.0);
        positive_flags.insert(column, t > 0);
    }
    Ok(DeltaReport { csd: csd.clone(), concat: concat.clone(), delta, positive_flags })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TableFormat {
    #[default]
    Text,
    Markdown,
    Csv,
}

impl FromStr for TableFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "TEXT" => Ok(TableFormat::Text),
            "MARKDOWN" | "MD" => Ok(TableFormat::Markdown),
            "CSV" => Ok(TableFormat::Csv),
            _ => Err(format!("unknown table format `{s}` (TEXT, MARKDOWN or CSV)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderOptions {
    pub format: TableFormat,
    /// Appended to positive delta cells.
    pub marker: String,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions { format: TableFormat::Text, marker: "*".into() }
    }
}

impl RenderOptions {
    pub fn new(format: TableFormat) -> Self {
        RenderOptions { format, ..Default::default() }
    }
}

/// Column layout of CSV output.
pub const CSV_COLUMNS_DOC: &str = "setting, method (Concat | CSD | Δ), one unrounded value per \
language then Avg, the same columns rounded for display with the suffix `_display` (positive Δ \
cells carry the marker), then per-language item counts with the suffix `_n`. Languages are the \
union over all reports in EN, JA, KO, ZH order; absent cells are empty.";

fn languages_of(reports: &[DeltaReport]) -> Vec<Language> {
    let set: BTreeSet<Language> = reports.iter().flat_map(|r| r.csd.languages()).collect();
    if set.is_empty() { Language::ALL.to_vec() } else { set.into_iter().collect() }
}

struct Block<'a> {
    report: &'a DeltaReport,
    columns: &'a [Column],
    marker: &'a str,
}

impl Block<'_> {
    fn display_row(&self, table: &AccuracyTable) -> Vec<String> {
        self.columns
            .iter()
            .map(|&c| value(table, c).map(|v| fmt_tenths(round1_tenths(v))).unwrap_or_else(|| "n/a".into()))
            .collect()
    }

    fn delta_row(&self) -> Vec<String> {
        self.columns
            .iter()
            .map(|&c| match self.report.delta_tenths(c) {
                Some(t) if t > 0 => format!("{}{}", fmt_delta_tenths(t), self.marker),
                Some(t) => fmt_delta_tenths(t),
                None => "n/a".into(),
            })
            .collect()
    }

    fn rows(&self) -> [(&'static str, Vec<String>); 3] {
        [
            ("Concat", self.display_row(&self.report.concat)),
            ("CSD", self.display_row(&self.report.csd)),
            ("Δ", self.delta_row()),
        ]
    }
}

/// Renders CSD/Concat/Δ blocks, one per report.
pub fn render_table(reports: &[DeltaReport], options: &RenderOptions) -> String {
    let languages = languages_of(reports);
    let columns: Vec<Column> =
        languages.iter().map(|&l| Column::Language(l)).chain([Column::Avg]).collect();
    match options.format {
        TableFormat::Text => render_text(reports, &columns, &options.marker),
        TableFormat::Markdown => render_markdown(reports, &columns, &options.marker),
        TableFormat::Csv => render_csv(reports, &languages, &columns, &options.marker),
    }
}

fn header_labels(columns: &[Column]) -> Vec<String> {
    columns
        .iter()
        .map(|c| match c {
            Column::Avg => "Avg.".to_string(),
            c => c.to_string(),
        })
        .collect()
}

fn render_text(reports: &[DeltaReport], columns: &[Column], marker: &str) -> String {
    let setting_w = reports.iter().map(|r| r.setting().chars().count()).max().unwrap_or(0).max(7);
    let cell_w = 6 + marker.chars().count();
    let pad = |s: &str, w: usize| format!("{s}{}", " ".repeat(w.saturating_sub(s.chars().count())));
    let line = |setting: &str, method: &str, cells: &[String]| {
        let mut l = format!("{}  {}", pad(setting, setting_w), pad(method, 6));
        for c in cells {
            l.push_str("  ");
            l.push_str(&pad(c, cell_w));
        }
        l.trim_end().to_string()
    };
    let header = line("Setting", "Method", &header_labels(columns));
    let rule = "-".repeat(header.chars().count());
    let mut out = vec![header, rule.clone()];
    for (i, r) in reports.iter().enumerate() {
        if i > 0 {
            out.push(rule.clone());
        }
        let block = Block { report: r, columns, marker };
        for (j, (method, cells)) in block.rows().iter().enumerate() {
            out.push(line(if j == 0 { r.setting() } else { "" }, method, cells));
        }
    }
    out.join("\n") + "\n"
}

fn render_markdown(reports: &[DeltaReport], columns: &[Column], marker: &str) -> String {
    let row = |cells: Vec<String>| format!("| {} |", cells.join(" | "));
    let mut header = vec!["Setting".to_string(), "Method".to_string()];
    header.extend(header_labels(columns));
    let mut align = vec!["---".to_string(), "---".to_string()];
    align.extend(columns.iter().map(|_| "---:".to_string()));
    let mut out = vec![row(header), row(align)];
    for r in reports {
        let block = Block { report: r, columns, marker };
        for (j, (method, cells)) in block.rows().into_iter().enumerate() {
            let mut all = vec![if j == 0 { r.setting().replace('|', "\\|") } else { String::new() }];
            all.push(method.to_string());
            all.extend(cells);
            out.push(row(all));
        }
    }
    out.join("\n") + "\n"
}

fn render_csv(reports: &[DeltaReport], languages: &[Language], columns: &[Column], marker: &str) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["setting".to_string(), "method".to_string()];
    header.extend(columns.iter().map(|c| c.to_string()));
    header.extend(columns.iter().map(|c| format!("{c}_display")));
    header.extend(languages.iter().map(|l| format!("{l}_n")));
    w.write_record(&header).expect("in-memory write");

    for r in reports {
        let block = Block { report: r, columns, marker };
        let [(_, concat_display), (_, csd_display), (_, delta_display)] = block.rows();
        for (method, table, display) in [
            ("Concat", Some(&r.concat), concat_display),
            ("CSD", Some(&r.csd), csd_display),
            ("Δ", None, delta_display),
        ] {
            let mut rec = vec![r.setting().to_string(), method.to_string()];
            for &c in columns {
                let v = match table {
                    Some(t) => value(t, c),
                    None => r.delta.get(&c).copied(),
                };
                rec.push(v.map(|v| v.to_string()).unwrap_or_default());
            }
            rec.extend(display.into_iter().map(|d| if d == "n/a" { String::new() } else { d }));
            for l in languages {
                let n = table.and_then(|t| t.n_per_language.get(l));
                rec.push(n.map(|n| n.to_string()).unwrap_or_default());
            }
            w.write_record(&rec).expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

/// Reads CSV produced by [`render_table`] back into reports. Unrounded
/// values and counts are restored exactly; Δ rows are recomputed.
pub fn parse_csv(text: &str) -> Result<Vec<DeltaReport>, EvalError> {
    let bad = |line: usize, message: String| EvalError::Read { line, message };
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers().map_err(|e| bad(1, e.to_string()))?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let (Some(setting_i), Some(method_i), Some(avg_i)) = (find("setting"), find("method"), find("Avg")) else {
        return Err(bad(1, "missing setting, method or Avg column".into()));
    };
    let lang_cols: Vec<(Language, usize, Option<usize>)> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| h.parse::<Language>().ok().map(|l| (l, i, find(&format!("{l}_n")))))
        .collect();

    let mut reports = Vec::new();
    let mut pending: Option<AccuracyTable> = None;
    for (k, rec) in r.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| bad(line, e.to_string()))?;
        let float = |i: usize| -> Result<Option<f64>, EvalError> {
            let s = rec.get(i).unwrap_or("");
            if s.is_empty() { Ok(None) } else { s.parse().map(Some).map_err(|e| bad(line, format!("{e}: `{s}`"))) }
        };
        let method = rec.get(method_i).unwrap_or("");
        let table = || -> Result<AccuracyTable, EvalError> {
            let mut per_language = BTreeMap::new();
            let mut n_per_language = BTreeMap::new();
            for &(l, i, n_i) in &lang_cols {
                if let Some(v) = float(i)? {
                    per_language.insert(l, v);
                }
                if let Some(n_i) = n_i {
                    let s = rec.get(n_i).unwrap_or("");
                    if !s.is_empty() {
                        n_per_language.insert(l, s.parse().map_err(|e| bad(line, format!("{e}: `{s}`")))?);
                    }
                }
            }
            Ok(AccuracyTable {
                setting_label: rec.get(setting_i).unwrap_or("").to_string(),
                per_language,
                average: float(avg_i)?.ok_or_else(|| bad(line, "empty Avg".into()))?,
                n_per_language,
            })
        };
        match method {
            "Concat" => pending = Some(table()?),
            "CSD" => {
                let concat = pending.take().ok_or_else(|| bad(line, "CSD row without Concat row".into()))?;
                reports.push(delta_report(&table()?, &concat)?);
            }
            "Δ" => {}
            other => return Err(bad(line, format!("unknown method `{other}`"))),
        }
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Language::*;

    fn table(label: &str, v: [f64; 4]) -> AccuracyTable {
        AccuracyTable::new(label, [(En, v[0]), (Ja, v[1]), (Ko, v[2]), (Zh, v[3])]).unwrap()
    }

    fn en_ja() -> DeltaReport {
        delta_report(
            &table("EN+JA", [82.6, 69.7, 68.9, 79.3]),
            &table("EN+JA", [82.8, 68.8, 67.2, 78.6]),
        )
        .unwrap()
    }

    #[test]
    fn rounding_is_half_up() {
        assert_eq!(round1_tenths(74.35), 744);
        assert_eq!(round1_tenths(297.4 / 4.0), 744);
        assert_eq!(round1_tenths(75.125), 751);
        assert_eq!(round1_tenths(74.15), 742);
        assert_eq!(round1_tenths(0.0), 0);
    }

    #[test]
    fn bilingual_block() {
        let r = en_ja();
        let got: Vec<i64> = r.columns().into_iter().map(|c| r.delta_tenths(c).unwrap()).collect();
        assert_eq!(got, [-2, 9, 17, 7, 7]);
        assert!(!r.positive_flags[&Column::Language(En)]);
        assert!(r.positive_flags[&Column::Avg]);
    }

    #[test]
    fn delta_uses_rounded_values() {
        let r = delta_report(
            &table("all", [82.6, 71.1, 69.8, 79.4]),
            &table("all", [81.7, 67.7, 68.3, 78.9]),
        )
        .unwrap();
        assert_eq!(r.delta_tenths(Column::Avg), Some(15));
    }

    #[test]
    fn identical_tables() {
        let t = table("x", [50.0, 60.0, 70.0, 80.0]);
        let r = delta_report(&t, &t).unwrap();
        assert!(r.delta.values().all(|&d| d == 0.0));
        assert!(r.positive_flags.values().all(|&p| !p));
        assert!(render_table(&[r], &RenderOptions::default()).contains("0.0"));
    }

    #[test]
    fn column_mismatch() {
        let a = AccuracyTable::new("a", [(En, 1.0)]).unwrap();
        let b = AccuracyTable::new("b", [(Ja, 1.0)]).unwrap();
        assert!(matches!(delta_report(&a, &b), Err(EvalError::ColumnMismatch { .. })));
    }

    #[test]
    fn text_delta_row() {
        let text = render_table(&[en_ja()], &RenderOptions::default());
        let delta_line = text.lines().find(|l| l.trim_start().starts_with('Δ')).unwrap();
        let cells: Vec<&str> = delta_line.split_whitespace().skip(1).collect();
        assert_eq!(cells, ["-0.2", "+0.9*", "+1.7*", "+0.7*", "+0.7*"]);
        let plain = RenderOptions { marker: String::new(), ..Default::default() };
        let text = render_table(&[en_ja()], &plain);
        let delta_line = text.lines().find(|l| l.trim_start().starts_with('Δ')).unwrap();
        assert_eq!(delta_line.split_whitespace().skip(1).collect::<Vec<_>>().join(" "), "-0.2 +0.9 +1.7 +0.7 +0.7");
        assert!(text.contains("75.1"));
        assert!(text.contains("74.4"));
    }

    #[test]
    fn empty_is_header_only() {
        for format in [TableFormat::Text, TableFormat::Markdown, TableFormat::Csv] {
            let out = render_table(&[], &RenderOptions::new(format));
            assert!(out.contains("EN"), "{format:?}");
            let lines = out.lines().count();
            assert!(lines <= 2, "{format:?}: {out}");
        }
    }

    #[test]
    fn markdown_shape() {
        let md = render_table(&[en_ja()], &RenderOptions::new(TableFormat::Markdown));
        assert_eq!(md.lines().count(), 5);
        assert!(md.contains("| EN+JA | Concat | 82.8 | 68.8 | 67.2 | 78.6 | 74.4 |"));
        assert!(md.contains("|  | Δ | -0.2 | +0.9* |"));
    }

    #[test]
    fn csv_round_trip() {
        let mut r = en_ja();
        r.csd.n_per_language = BTreeMap::from([(En, 900), (Ja, 900), (Ko, 900), (Zh, 900)]);
        let text = render_table(&[r.clone()], &RenderOptions::new(TableFormat::Csv));
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        assert_eq!(reader.records().count(), 3);
        assert_eq!(parse_csv(&text).unwrap(), vec![r]);
    }
}
