//! CSD vs Concat tables in text, Markdown and CSV.

use codeswitch::corpus::Language;
use codeswitch::evaluator::{delta_report, render_table, AccuracyTable, RenderOptions, TableFormat};

fn table(label: &str, v: [f64; 4]) -> AccuracyTable {
    AccuracyTable::new(label, Language::ALL.into_iter().zip(v)).unwrap()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let reports = vec![
        delta_report(&table("EN+JA", [82.6, 69.7, 68.9, 79.3]), &table("EN+JA", [82.8, 68.8, 67.2, 78.6]))?,
        delta_report(&table("E+J+K+Z", [82.6, 71.1, 69.8, 79.4]), &table("E+J+K+Z", [81.7, 67.7, 68.3, 78.9]))?,
    ];
    for format in [TableFormat::Text, TableFormat::Markdown, TableFormat::Csv] {
        println!("{}", render_table(&reports, &RenderOptions::new(format)));
    }
    Ok(())
}
