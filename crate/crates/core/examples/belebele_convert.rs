//! Belebele rows (one per dialect) to a parallel corpus.

use codeswitch::corpus::write_corpus;
use codeswitch::ingest::{convert_belebele, read_belebele};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut jsonl = String::new();
    for (dialect, passage) in [
        ("eng_Latn", "The market opens at dawn."),
        ("kor_Hang", "시장은 새벽에 엽니다."),
        ("deu_Latn", "Der Markt öffnet im Morgengrauen."),
    ] {
        let row = serde_json::json!({
            "link": "https://example.org/market", "question_number": 1, "flores_passage": passage,
            "question": "When does the market open?", "mc_answer1": "At noon", "mc_answer2": "At dawn",
            "mc_answer3": "At dusk", "mc_answer4": "Never", "correct_answer_num": "2", "dialect": dialect,
        });
        jsonl += &(row.to_string() + "\n");
    }
    let (rows, skipped) = read_belebele("inline", jsonl.as_bytes())?;
    println!("kept {} rows, skipped {skipped:?}", rows.len());
    let records: Vec<_> = rows.iter().filter_map(|r| r.to_record()).collect();
    let conversion = convert_belebele(&records, true)?;
    write_corpus(&conversion.corpus, std::io::stdout())?;
    Ok(())
}
