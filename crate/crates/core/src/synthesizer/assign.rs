use std::collections::BTreeMap;

use rand::RngCore;

use super::rng::{derive_seed, seed_label, uniform_index, weighted_index};
use super::{AlignmentPolicy, LanguageSet, SlotAssignment, SynthesisConfig, SynthesisError};
use crate::corpus::{InstructionExample, Language, ParallelGroup, RecordLanguage};
use crate::segmenter::sentences;

/// Purpose label for the slot-drawing stream.
pub(crate) const SLOT_PURPOSE: &str = "slots";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SentenceAlignment {
    /// Every version's context has this many sentences.
    Aligned(usize),
    /// Sentence counts differ; the counts per language.
    Misaligned(BTreeMap<Language, usize>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AssignOutcome {
    Assigned(SlotAssignment),
    /// Misaligned group under the strict policy.
    Skipped {
        group_id: String,
        sentence_counts: BTreeMap<Language, usize>,
    },
}

/// Context sentences of the versions in `languages`, plus their alignment.
pub(crate) struct Prepared {
    pub sentences: BTreeMap<Language, Vec<String>>,
    pub alignment: SentenceAlignment,
}

fn require_languages(group: &ParallelGroup, languages: &[Language]) -> Result<(), SynthesisError> {
    match languages.iter().find(|l| !group.versions.contains_key(l)) {
        Some(&language) => Err(SynthesisError::MissingLanguage {
            group: group.id.clone(),
            language,
        }),
        None => Ok(()),
    }
}

fn version(group: &ParallelGroup, language: Language) -> Result<&InstructionExample, SynthesisError> {
    group
        .version(language)
        .ok_or_else(|| SynthesisError::MissingLanguage {
            group: group.id.clone(),
            language,
        })
}

pub(crate) fn prepare(
    group: &ParallelGroup,
    languages: &LanguageSet,
) -> Result<Prepared, SynthesisError> {
    require_languages(group, languages.members())?;
    let sentences: BTreeMap<Language, Vec<String>> = languages
        .members()
        .iter()
        .map(|&l| (l, sentences(&group.versions[&l].context, l)))
        .collect();
    let counts: BTreeMap<Language, usize> =
        sentences.iter().map(|(&l, s)| (l, s.len())).collect();
    let first = *counts.values().next().expect("language sets are non-empty");
    let alignment = if counts.values().all(|&c| c == first) {
        SentenceAlignment::Aligned(first)
    } else {
        SentenceAlignment::Misaligned(counts)
    };
    Ok(Prepared {
        sentences,
        alignment,
    })
}

/// Shared context sentence count of the versions in `languages`.
pub fn check_alignment(
    group: &ParallelGroup,
    languages: &LanguageSet,
) -> Result<SentenceAlignment, SynthesisError> {
    prepare(group, languages).map(|p| p.alignment)
}

struct Drawer<'a> {
    rng: rand_chacha::ChaCha8Rng,
    members: &'a [Language],
    weights: Option<Vec<f64>>,
}

impl Drawer<'_> {
    fn draw(&mut self) -> Language {
        let i = match &self.weights {
            Some(w) => weighted_index(&mut self.rng as &mut dyn RngCore, w),
            None => uniform_index(&mut self.rng, self.members.len()),
        };
        self.members[i]
    }
}

pub(crate) fn assign_prepared(
    group: &ParallelGroup,
    prepared: &Prepared,
    config: &SynthesisConfig,
) -> AssignOutcome {
    let context_slots = match (&prepared.alignment, config.alignment_policy) {
        (SentenceAlignment::Aligned(n), _) => Some(*n),
        (SentenceAlignment::Misaligned(_), AlignmentPolicy::FieldFallback) => None,
        (SentenceAlignment::Misaligned(counts), AlignmentPolicy::Strict) => {
            return AssignOutcome::Skipped {
                group_id: group.id.clone(),
                sentence_counts: counts.clone(),
            }
        }
    };

    let seed = derive_seed(config.master_seed, &group.id, SLOT_PURPOSE);
    let mut drawer = Drawer {
        rng: rand::SeedableRng::from_seed(seed),
        members: config.languages.members(),
        weights: config.weight_vector(),
    };
    let needs_mix = config.min_mix && config.languages.len() >= 2;

    let mut resamples = 0;
    loop {
        let context: Vec<Language> = (0..context_slots.unwrap_or(1))
            .map(|_| drawer.draw())
            .collect();
        let question = drawer.draw();
        let options = drawer.draw();
        let mut assignment = SlotAssignment {
            group_id: group.id.clone(),
            context_slot_languages: context,
            question_language: question,
            options_language: options,
            fallback_used: context_slots.is_none(),
            seed_used: seed_label(&seed),
            resamples,
            forced_mix: false,
        };
        let monolingual = assignment.sole_language();
        match monolingual {
            Some(only) if needs_mix => {
                if resamples == config.resample_limit {
                    assignment.options_language = config.languages.next_after(only);
                    assignment.forced_mix = true;
                    return AssignOutcome::Assigned(assignment);
                }
                resamples += 1;
            }
            _ => return AssignOutcome::Assigned(assignment),
        }
    }
}

/// Draws the per-slot languages for one group: one per context sentence (or
/// one for the whole context under field fallback), one for the question and
/// one for the option block.
pub fn assign_languages(
    group: &ParallelGroup,
    config: &SynthesisConfig,
) -> Result<AssignOutcome, SynthesisError> {
    let prepared = prepare(group, &config.languages)?;
    Ok(assign_prepared(group, &prepared, config))
}

pub(crate) fn render_prepared(
    group: &ParallelGroup,
    prepared: &Prepared,
    assignment: &SlotAssignment,
) -> Result<InstructionExample, SynthesisError> {
    let mismatch = |detail: String| SynthesisError::AssignmentMismatch {
        group: group.id.clone(),
        detail,
    };
    if assignment.group_id != group.id {
        return Err(mismatch(format!("assignment is for `{}`", assignment.group_id)));
    }

    if let Some(only) = assignment.sole_language() {
        return version(group, only).cloned();
    }

    let context = if assignment.fallback_used {
        let [language] = assignment.context_slot_languages[..] else {
            return Err(mismatch("fallback assignment needs exactly one context slot".into()));
        };
        version(group, language)?.context.clone()
    } else {
        let mut parts = Vec::with_capacity(assignment.context_slot_languages.len());
        for (i, language) in assignment.context_slot_languages.iter().enumerate() {
            let sentence = prepared
                .sentences
                .get(language)
                .and_then(|s| s.get(i))
                .ok_or_else(|| mismatch(format!("no sentence {i} in the {language} context")))?;
            parts.push(sentence.as_str());
        }
        match &prepared.alignment {
            SentenceAlignment::Aligned(n) if *n == parts.len() => {}
            SentenceAlignment::Aligned(n) => {
                return Err(mismatch(format!("{} context slots for {n} sentences", parts.len())))
            }
            SentenceAlignment::Misaligned(counts) => {
                return Err(mismatch(format!("contexts are misaligned: {counts:?}")))
            }
        }
        parts.join(" ")
    };

    let question = &version(group, assignment.question_language)?.question;
    let options_source = version(group, assignment.options_language)?;
    Ok(InstructionExample {
        id: group.id.clone(),
        language: RecordLanguage::Mixed,
        context,
        question: question.clone(),
        options: options_source.options.clone(),
        answer: options_source.answer.clone(),
    })
}

/// Builds the code-switched example described by `assignment`.
///
/// Context sentences are joined with a single space. An assignment that uses
/// only one language reproduces that language version verbatim.
pub fn render_csd(
    group: &ParallelGroup,
    assignment: &SlotAssignment,
) -> Result<(InstructionExample, SlotAssignment), SynthesisError> {
    let set = LanguageSet::new(assignment.languages_used()).map_err(|e| SynthesisError::AssignmentMismatch {
        group: group.id.clone(),
        detail: e.to_string(),
    })?;
    let prepared = prepare(group, &set)?;
    let example = render_prepared(group, &prepared, assignment)?;
    Ok((example, assignment.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Letter;

    fn group(contexts: [&str; 4]) -> ParallelGroup {
        let mut g = ParallelGroup::new("g1");
        for (l, ctx) in Language::ALL.into_iter().zip(contexts) {
            let opts = [
                format!("{l}-a"),
                format!("{l}-b"),
                format!("{l}-c"),
                format!("{l}-d"),
            ];
            let opts: [&str; 4] = [&opts[0], &opts[1], &opts[2], &opts[3]];
            g.versions.insert(
                l,
                InstructionExample::new("g1", l, ctx, format!("{l} question?"), opts, Letter::C),
            );
        }
        g
    }

    fn two_sentence_group() -> ParallelGroup {
        group([
            "The sky is blue. It rarely rains.",
            "空は青い。雨はめったに降らない。",
            "하늘은 파랗다. 비는 거의 오지 않는다.",
            "天空是蓝色的。很少下雨。",
        ])
    }

    fn assignment(ctx: &[Language], q: Language, o: Language) -> SlotAssignment {
        SlotAssignment {
            group_id: "g1".into(),
            context_slot_languages: ctx.to_vec(),
            question_language: q,
            options_language: o,
            fallback_used: false,
            seed_used: 0,
            resamples: 0,
            forced_mix: false,
        }
    }

    #[test]
    fn alignment_counts() {
        let g = two_sentence_group();
        assert_eq!(
            check_alignment(&g, &LanguageSet::all()).unwrap(),
            SentenceAlignment::Aligned(2)
        );
        let mut g2 = g.clone();
        g2.versions.get_mut(&Language::Ja).unwrap().context = "空は青い。".into();
        let en_ja = LanguageSet::new([Language::En, Language::Ja]).unwrap();
        assert!(matches!(
            check_alignment(&g2, &en_ja).unwrap(),
            SentenceAlignment::Misaligned(_)
        ));
        let en = LanguageSet::new([Language::En]).unwrap();
        assert_eq!(check_alignment(&g2, &en).unwrap(), SentenceAlignment::Aligned(2));
    }

    #[test]
    fn bilingual_render() {
        let g = two_sentence_group();
        let a = assignment(&[Language::En, Language::Ja], Language::En, Language::En);
        let (ex, audit) = render_csd(&g, &a).unwrap();
        assert_eq!(ex.context, "The sky is blue. 雨はめったに降らない。");
        assert_eq!(ex.question, "EN question?");
        assert_eq!(ex.answer, "C");
        assert_eq!(ex.language, RecordLanguage::Mixed);
        assert_eq!(audit, a);
    }

    #[test]
    fn options_come_from_one_version() {
        let g = two_sentence_group();
        let a = assignment(&[Language::Ja, Language::En], Language::Ko, Language::Zh);
        let (ex, _) = render_csd(&g, &a).unwrap();
        assert_eq!(ex.options, g.versions[&Language::Zh].options);
        assert_eq!(ex.answer, g.versions[&Language::En].answer);
        assert_eq!(ex.question, "KO question?");
    }

    #[test]
    fn monolingual_assignment_is_verbatim() {
        let g = two_sentence_group();
        let a = assignment(&[Language::En, Language::En], Language::En, Language::En);
        let (ex, _) = render_csd(&g, &a).unwrap();
        assert_eq!(ex, g.versions[&Language::En]);
    }

    #[test]
    fn out_of_range_slot_is_an_error() {
        let g = two_sentence_group();
        let a = assignment(
            &[Language::En, Language::Ja, Language::Ko],
            Language::En,
            Language::Ja,
        );
        assert!(matches!(
            render_csd(&g, &a),
            Err(SynthesisError::AssignmentMismatch { .. })
        ));
    }

    #[test]
    fn single_language_set_draws_only_that_language() {
        let g = two_sentence_group();
        let cfg = SynthesisConfig::new(LanguageSet::new([Language::En]).unwrap(), 9, 1);
        let AssignOutcome::Assigned(a) = assign_languages(&g, &cfg).unwrap() else {
            panic!("aligned group must be assigned");
        };
        assert_eq!(a.sole_language(), Some(Language::En));
        assert_eq!(a.resamples, 0);
        let (ex, _) = render_csd(&g, &a).unwrap();
        assert_eq!(ex, g.versions[&Language::En]);
    }

    #[test]
    fn strict_policy_skips_misaligned() {
        let mut g = two_sentence_group();
        g.versions.get_mut(&Language::Zh).unwrap().context = "天空是蓝色的，很少下雨。".into();
        let mut cfg = SynthesisConfig::new(LanguageSet::all(), 3, 1);
        cfg.alignment_policy = AlignmentPolicy::Strict;
        assert!(matches!(
            assign_languages(&g, &cfg).unwrap(),
            AssignOutcome::Skipped { .. }
        ));
        cfg.alignment_policy = AlignmentPolicy::FieldFallback;
        let AssignOutcome::Assigned(a) = assign_languages(&g, &cfg).unwrap() else {
            panic!("fallback must assign");
        };
        assert!(a.fallback_used);
        assert_eq!(a.context_slot_languages.len(), 1);
        let (ex, _) = render_csd(&g, &a).unwrap();
        let ctx_lang = a.context_slot_languages[0];
        if a.sole_language().is_none() {
            assert_eq!(ex.context, g.versions[&ctx_lang].context);
        }
    }

    #[test]
    fn missing_language_is_an_error() {
        let mut g = two_sentence_group();
        g.versions.remove(&Language::Ko);
        let cfg = SynthesisConfig::new(LanguageSet::all(), 3, 1);
        assert!(matches!(
            assign_languages(&g, &cfg),
            Err(SynthesisError::MissingLanguage { language: Language::Ko, .. })
        ));
    }

    #[test]
    fn assignments_are_deterministic_and_within_the_set() {
        let g = two_sentence_group();
        let set = LanguageSet::new([Language::Ja, Language::Zh]).unwrap();
        let cfg = SynthesisConfig::new(set.clone(), 11, 1);
        let a = assign_languages(&g, &cfg).unwrap();
        assert_eq!(a, assign_languages(&g, &cfg).unwrap());
        let AssignOutcome::Assigned(a) = a else { panic!() };
        assert!(a.languages_used().iter().all(|l| set.contains(*l)));
        assert!(a.languages_used().len() >= 2);
    }
}
