mod common;

use std::collections::HashSet;

use codeswitch::corpus::{check_example, Language, RecordLanguage};
use codeswitch::synthesizer::rng::{derive_rng, derive_seed, uniform_index};
use codeswitch::synthesizer::{
    assign_languages, render_csd, synthesize_concat_dataset, synthesize_csd_dataset,
    AlignmentPolicy, AssignOutcome, LanguageSet, SynthesisConfig, SynthesisError,
};
use rand::RngCore;

use common::{option_language, synthetic_corpus, synthetic_group};

/// SHA-256 of 24 zero bytes, computed independently of this crate.
const EMPTY_SEED_DIGEST: &str = "9d908ecfb6b256def8b49a7c504e6c889c4b0e41fe6ce3e01863dd7b61a20aa0";
/// First output of ChaCha8 seeded with that digest, frozen from the first run.
const EMPTY_STREAM_FIRST_U64: u64 = 3_692_097_333_657_409_102;

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[test]
fn golden_seed_for_empty_inputs() {
    assert_eq!(hex(&derive_seed(0, "", "")), EMPTY_SEED_DIGEST);
    let first = derive_rng(0, "", "").next_u64();
    assert_eq!(first, EMPTY_STREAM_FIRST_U64);
}

#[test]
fn streams_for_distinct_ids_differ() {
    let mut seen = HashSet::with_capacity(100_000);
    for i in 0..100_000 {
        let v = derive_rng(42, &format!("g{i}"), "slots").next_u64();
        assert!(seen.insert(v), "collision at g{i}");
    }
}

/// Replays the documented draw procedure for a one-sentence context and
/// counts leading monolingual attempts.
fn monolingual_attempts(master_seed: u64, group_id: &str, n_langs: usize) -> usize {
    let mut rng = derive_rng(master_seed, group_id, "slots");
    let mut attempts = 0;
    loop {
        let draws: Vec<usize> = (0..3).map(|_| uniform_index(&mut rng, n_langs)).collect();
        if draws.iter().any(|&d| d != draws[0]) {
            return attempts;
        }
        attempts += 1;
    }
}

/// Seed for which group "syn-000000" draws nine monolingual {EN, JA}
/// assignments in a row; found by `search_adversarial_seed`.
const ADVERSARIAL_SEED: u64 = 153765;

#[test]
#[ignore = "seed search; run once to regenerate ADVERSARIAL_SEED"]
fn search_adversarial_seed() {
    let seed = (0u64..)
        .find(|&s| monolingual_attempts(s, "syn-000000", 2) >= 9)
        .unwrap();
    println!("ADVERSARIAL_SEED = {seed}");
}

#[test]
fn exhausted_redraws_flip_the_options_language() {
    assert!(monolingual_attempts(ADVERSARIAL_SEED, "syn-000000", 2) >= 9);
    let group = synthetic_group(0, 1);
    let mut cfg = SynthesisConfig::new(
        LanguageSet::new([Language::En, Language::Ja]).unwrap(),
        ADVERSARIAL_SEED,
        1,
    );
    cfg.resample_limit = 8;
    let AssignOutcome::Assigned(a) = assign_languages(&group, &cfg).unwrap() else {
        panic!("aligned group");
    };
    assert_eq!(a.resamples, 8);
    assert!(a.forced_mix);
    let context_language = a.context_slot_languages[0];
    assert_eq!(a.question_language, context_language);
    assert_ne!(a.options_language, context_language);
    assert_eq!(a.languages_used().len(), 2);

    cfg.min_mix = false;
    let AssignOutcome::Assigned(plain) = assign_languages(&group, &cfg).unwrap() else {
        panic!("aligned group");
    };
    assert!(plain.sole_language().is_some());
}

#[test]
fn single_language_degenerates_to_monolingual() {
    let corpus = synthetic_corpus(10);
    let cfg = SynthesisConfig::new(LanguageSet::new([Language::En]).unwrap(), 5, 10);
    let csd = synthesize_csd_dataset(&corpus, &cfg).unwrap();
    let concat = synthesize_concat_dataset(&corpus, &cfg).unwrap();
    let source: Vec<_> = corpus.groups().iter().map(|g| g.versions[&Language::En].clone()).collect();
    assert_eq!(csd.dataset, source);
    assert_eq!(concat, source);
}

#[test]
fn quadrilingual_examples_hold_the_invariants() {
    let corpus = synthetic_corpus(300);
    let cfg = SynthesisConfig::new(LanguageSet::all(), 2024, 300);
    let out = synthesize_csd_dataset(&corpus, &cfg).unwrap();
    assert_eq!(out.stats.emitted, 300);
    assert_eq!(out.dataset.len(), 300);
    let slots: u64 = out.audits.iter().map(|a| a.slot_count() as u64).sum();
    assert_eq!(out.stats.per_slot_language_histogram.values().sum::<u64>(), slots);
    assert!(out.stats.fallback_count > 0, "the corpus plants misaligned groups");

    for ((ex, audit), group) in out.dataset.iter().zip(&out.audits).zip(corpus.groups()) {
        assert_eq!(ex.id, group.id);
        assert_eq!(audit.group_id, group.id);
        assert!(check_example(ex).is_empty());
        assert_eq!(ex.answer_letter(), group.shared_answer());
        assert!(audit.languages_used().len() >= 2);
        assert_eq!(ex.language, RecordLanguage::Mixed);
        let langs: HashSet<_> = ex.options.texts().map(|t| option_language(t).unwrap()).collect();
        assert_eq!(langs.len(), 1);
        assert_eq!(langs.into_iter().next(), Some(audit.options_language));
        // Re-rendering from the audit reproduces the example.
        let (again, _) = render_csd(group, audit).unwrap();
        assert_eq!(&again, ex);
    }
}

#[test]
fn strict_policy_shrinks_eligibility() {
    let corpus = synthetic_corpus(50);
    let mut cfg = SynthesisConfig::new(LanguageSet::all(), 1, 50);
    cfg.alignment_policy = AlignmentPolicy::Strict;
    match synthesize_csd_dataset(&corpus, &cfg) {
        Err(SynthesisError::InsufficientGroups { required: 50, eligible }) => assert!(eligible < 50),
        other => panic!("unexpected {:?}", other.map(|o| o.stats)),
    }
    cfg.dataset_size = 40;
    let out = synthesize_csd_dataset(&corpus, &cfg).unwrap();
    assert_eq!(out.stats.fallback_count, 0);
    assert!(out.stats.skipped_misaligned > 0);
    assert!(out.audits.iter().all(|a| !a.fallback_used));
}

#[test]
fn invalid_groups_are_rejected() {
    let mut groups = synthetic_corpus(3).into_groups();
    groups[1].versions.get_mut(&Language::Ja).unwrap().answer = "Z".into();
    let corpus = codeswitch::corpus::Corpus::new(groups, Language::ALL.into_iter().collect()).unwrap();
    let cfg = SynthesisConfig::new(LanguageSet::all(), 1, 3);
    assert!(matches!(
        synthesize_csd_dataset(&corpus, &cfg),
        Err(SynthesisError::InvalidGroup { .. })
    ));
    assert!(matches!(
        synthesize_concat_dataset(&corpus, &cfg),
        Err(SynthesisError::InvalidGroup { .. })
    ));
}

#[test]
fn pool_size_does_not_change_output() {
    let corpus = synthetic_corpus(5000);
    let cfg = SynthesisConfig::new(LanguageSet::from_setting("E+K+Z").unwrap(), 77, 4500);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| synthesize_csd_dataset(&corpus, &cfg).unwrap())
    };
    let (a, b) = (run(1), run(8));
    assert_eq!(a.dataset, b.dataset);
    assert_eq!(a.audits, b.audits);
    assert_eq!(a.stats, b.stats);
}

#[test]
fn uniform_draws_are_roughly_balanced() {
    let corpus = synthetic_corpus(2000);
    let mut cfg = SynthesisConfig::new(LanguageSet::all(), 3, 2000);
    cfg.min_mix = false;
    let out = synthesize_csd_dataset(&corpus, &cfg).unwrap();
    let total: u64 = out.stats.per_slot_language_histogram.values().sum();
    for (l, &n) in &out.stats.per_slot_language_histogram {
        let share = n as f64 / total as f64;
        assert!((share - 0.25).abs() < 0.02, "{l}: {share}");
    }
}
