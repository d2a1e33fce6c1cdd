//! Multiple-choice accuracy from per-choice log-likelihoods, under each
//! length normalization.

use codeswitch::corpus::{Language, Letter};
use codeswitch::evaluator::{score_dataset, ChoiceScore, EvalConfig, GoldItem, Normalization};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let gold = vec![
        GoldItem { example_id: "q1".into(), language: Language::En, answer: Letter::B },
        GoldItem { example_id: "q1".into(), language: Language::Ja, answer: Letter::B },
    ];
    // (logprob, chars, tokens) per choice A-D. The long correct answer has
    // the lowest raw score but the best per-character score.
    let raw = [
        (Language::En, [(-6.0, 6, 2), (-9.0, 30, 6), (-7.0, 8, 2), (-8.0, 9, 3)]),
        (Language::Ja, [(-5.0, 3, 2), (-4.0, 10, 4), (-6.0, 4, 2), (-7.0, 4, 3)]),
    ];
    let mut scores = Vec::new();
    for (language, choices) in raw {
        for (letter, (logprob, chars, tokens)) in Letter::ALL.into_iter().zip(choices) {
            scores.push(ChoiceScore {
                example_id: "q1".into(),
                language,
                choice: letter,
                logprob,
                char_count: chars,
                token_count: Some(tokens),
            });
        }
    }
    for mode in [Normalization::None, Normalization::PerChar, Normalization::PerToken] {
        let out = score_dataset(&gold, &scores, &EvalConfig::new(mode))?;
        println!("{mode}: {:?} (avg {:.1})", out.table.per_language, out.table.average);
    }
    Ok(())
}
