mod common;

use codeswitch::corpus::{Language, Letter};
use codeswitch::evaluator::{
    delta_report, parse_csv, render_table, score_dataset, select_prediction, AccuracyTable,
    ChoiceScore, EvalConfig, Normalization, RenderOptions, TableFormat,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;

use common::{oracle_recount, synthetic_scores};

const MODES: [Normalization; 3] = [Normalization::None, Normalization::PerChar, Normalization::PerToken];

#[test]
fn matches_brute_force_recount() {
    let (gold, scores) = synthetic_scores(2000, 11);
    for mode in MODES {
        let out = score_dataset(&gold, &scores, &EvalConfig::new(mode)).unwrap();
        for (l, (correct, total)) in oracle_recount(&gold, &scores, mode) {
            assert_eq!(out.table.n_per_language[&l], total);
            assert_eq!(out.table.per_language[&l], correct as f64 / total as f64 * 100.0);
        }
    }
}

#[test]
fn planted_75_percent() {
    let mut gold = Vec::new();
    let mut scores = Vec::new();
    for i in 0..400 {
        let language = Language::ALL[i % 4];
        let id = format!("q{}", i / 4);
        gold.push(codeswitch::evaluator::GoldItem { example_id: id.clone(), language, answer: Letter::B });
        // Every fourth item per language predicts D instead of B.
        let predicted = if (i / 4) % 4 == 0 { Letter::D } else { Letter::B };
        for c in Letter::ALL {
            scores.push(ChoiceScore {
                example_id: id.clone(),
                language,
                choice: c,
                logprob: if c == predicted { -1.0 } else { -4.0 },
                char_count: 4,
                token_count: None,
            });
        }
    }
    let out = score_dataset(&gold, &scores, &EvalConfig::default()).unwrap();
    assert!(out.table.per_language.values().all(|&v| v == 75.0));
    assert_eq!(out.table.average, 75.0);
}

fn arb_example() -> impl Strategy<Value = Vec<ChoiceScore>> {
    prop::collection::vec((-50.0f64..0.0, 1u64..30, 1u64..10), 4).prop_map(|v| {
        v.into_iter()
            .zip(Letter::ALL)
            .map(|((logprob, chars, tokens), choice)| ChoiceScore {
                example_id: "p".into(),
                language: Language::Ko,
                choice,
                logprob,
                char_count: chars,
                token_count: Some(tokens),
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn shift_does_not_change_selection(scores in arb_example(), k in -20i32..20) {
        let cfg = EvalConfig::default();
        let before = select_prediction(&scores, &cfg).unwrap();
        // Integer shifts keep the comparison exact.
        let shifted: Vec<_> = scores.iter().cloned().map(|mut s| { s.logprob = s.logprob.round() + f64::from(k); s }).collect();
        let rounded: Vec<_> = scores.iter().cloned().map(|mut s| { s.logprob = s.logprob.round(); s }).collect();
        prop_assert_eq!(select_prediction(&shifted, &cfg).unwrap(), select_prediction(&rounded, &cfg).unwrap());
        prop_assert!(Letter::ALL.contains(&before.letter));
    }

    #[test]
    fn record_order_does_not_matter(seed in any::<u64>()) {
        let (gold, mut scores) = synthetic_scores(60, seed);
        for mode in MODES {
            let cfg = EvalConfig::new(mode);
            let a = score_dataset(&gold, &scores, &cfg).unwrap();
            scores.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 1));
            let b = score_dataset(&gold, &scores, &cfg).unwrap();
            prop_assert_eq!(a.table, b.table);
        }
    }

    #[test]
    fn flags_follow_delta_and_csv_round_trips(
        csd in prop::collection::vec(0.0f64..=100.0, 4),
        concat in prop::collection::vec(0.0f64..=100.0, 4),
        n in 1u64..2000,
    ) {
        let mk = |v: &[f64]| {
            let mut t = AccuracyTable::new("S,1", Language::ALL.iter().copied().zip(v.iter().copied())).unwrap();
            t.n_per_language = Language::ALL.iter().map(|&l| (l, n)).collect();
            t
        };
        let r = delta_report(&mk(&csd), &mk(&concat)).unwrap();
        for (c, d) in &r.delta {
            prop_assert_eq!(r.positive_flags[c], *d > 0.0);
        }
        let text = render_table(std::slice::from_ref(&r), &RenderOptions::new(TableFormat::Csv));
        prop_assert_eq!(parse_csv(&text).unwrap(), vec![r]);
    }
}
