use std::borrow::Borrow;

use rayon::prelude::*;

use super::assign::{assign_prepared, prepare, render_prepared, AssignOutcome};
use super::{LanguageSet, SlotAssignment, SynthesisConfig, SynthesisError, SynthesisStats};
use crate::corpus::{validate_group, Corpus, InstructionExample, ParallelGroup};

/// Groups handed to the worker pool at a time. Output order never depends on
/// it.
const CHUNK: usize = 2048;

pub struct CsdOutput {
    pub dataset: Vec<InstructionExample>,
    pub audits: Vec<SlotAssignment>,
    pub stats: SynthesisStats,
}

/// Validates the versions of `group` that `languages` will read.
pub(crate) fn check_group(group: &ParallelGroup, languages: &LanguageSet) -> Result<(), SynthesisError> {
    let mut view = ParallelGroup::new(group.id.clone());
    for &l in languages.members() {
        match group.versions.get(&l) {
            Some(v) => {
                view.versions.insert(l, v.clone());
            }
            None => {
                return Err(SynthesisError::MissingLanguage {
                    group: group.id.clone(),
                    language: l,
                })
            }
        }
    }
    let report = validate_group(&view, &languages.to_set());
    if report.is_clean() {
        Ok(())
    } else {
        Err(SynthesisError::InvalidGroup {
            group: group.id.clone(),
            rules: report.rule_codes().into_iter().collect(),
        })
    }
}

enum Processed {
    Emit(InstructionExample, SlotAssignment),
    Skip,
}

fn process(group: &ParallelGroup, config: &SynthesisConfig) -> Result<Processed, SynthesisError> {
    check_group(group, &config.languages)?;
    let prepared = prepare(group, &config.languages)?;
    match assign_prepared(group, &prepared, config) {
        AssignOutcome::Assigned(a) => {
            let ex = render_prepared(group, &prepared, &a)?;
            Ok(Processed::Emit(ex, a))
        }
        AssignOutcome::Skipped { .. } => Ok(Processed::Skip),
    }
}

/// Streams code-switched examples for the first `dataset_size` eligible
/// groups into `sink`, in input order. Groups are processed in parallel on
/// the current rayon pool; results are identical for any pool size.
pub fn synthesize_csd_streaming<I, G, F>(
    groups: I,
    config: &SynthesisConfig,
    mut sink: F,
) -> Result<SynthesisStats, SynthesisError>
where
    I: IntoIterator<Item = G>,
    G: Borrow<ParallelGroup> + Send + Sync,
    F: FnMut(InstructionExample, SlotAssignment),
{
    config.check()?;
    let mut stats = SynthesisStats::default();
    let mut iter = groups.into_iter();
    let mut chunk: Vec<G> = Vec::with_capacity(CHUNK);

    while stats.emitted < config.dataset_size {
        chunk.clear();
        chunk.extend(iter.by_ref().take(CHUNK));
        if chunk.is_empty() {
            break;
        }
        let results: Vec<Result<Processed, SynthesisError>> = chunk
            .par_iter()
            .map(|g| process(g.borrow(), config))
            .collect();
        for result in results {
            match result? {
                Processed::Skip => stats.skipped_misaligned += 1,
                Processed::Emit(ex, audit) => {
                    stats.emitted += 1;
                    stats.fallback_count += usize::from(audit.fallback_used);
                    stats.forced_mix_count += usize::from(audit.forced_mix);
                    stats.resample_events += u64::from(audit.resamples);
                    for l in audit
                        .context_slot_languages
                        .iter()
                        .chain([&audit.question_language, &audit.options_language])
                    {
                        *stats.per_slot_language_histogram.entry(*l).or_insert(0) += 1;
                    }
                    sink(ex, audit);
                    if stats.emitted == config.dataset_size {
                        break;
                    }
                }
            }
        }
    }

    if stats.emitted < config.dataset_size {
        return Err(SynthesisError::InsufficientGroups {
            required: config.dataset_size,
            eligible: stats.emitted,
        });
    }
    Ok(stats)
}

/// Code-switched dataset drawn from the first `dataset_size` eligible groups
/// of `corpus`, with one audit record per example.
pub fn synthesize_csd_dataset(
    corpus: &Corpus,
    config: &SynthesisConfig,
) -> Result<CsdOutput, SynthesisError> {
    config.check()?;
    if config.dataset_size > corpus.len() {
        return Err(SynthesisError::InvalidConfig(format!(
            "dataset_size {} exceeds the corpus's {} groups",
            config.dataset_size,
            corpus.len()
        )));
    }
    let mut dataset = Vec::with_capacity(config.dataset_size);
    let mut audits = Vec::with_capacity(config.dataset_size);
    let stats = synthesize_csd_streaming(corpus.groups(), config, |ex, a| {
        dataset.push(ex);
        audits.push(a);
    })?;
    Ok(CsdOutput {
        dataset,
        audits,
        stats,
    })
}
