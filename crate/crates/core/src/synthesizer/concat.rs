use serde::{Deserialize, Serialize};

use super::dataset::check_group;
use super::{LanguageSet, SynthesisConfig, SynthesisError};
use crate::corpus::{Corpus, InstructionExample, Language};

/// A contiguous run of corpus groups emitted in one language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConcatBlock {
    pub language: Language,
    /// Index of the first source group.
    pub start: usize,
    pub len: usize,
}

/// Splits `dataset_size` examples into one block per language, in canonical
/// order. Earlier languages absorb the remainder one example each. Blocks
/// draw from disjoint consecutive groups, or all start at group 0 when
/// `overlap` is set.
pub fn concat_blocks(dataset_size: usize, languages: &LanguageSet, overlap: bool) -> Vec<ConcatBlock> {
    let k = languages.len();
    let base = dataset_size / k;
    let extra = dataset_size % k;
    let mut start = 0;
    languages
        .members()
        .iter()
        .enumerate()
        .map(|(j, &language)| {
            let len = base + usize::from(j < extra);
            let block = ConcatBlock {
                language,
                start: if overlap { 0 } else { start },
                len,
            };
            start += len;
            block
        })
        .collect()
}

/// Monolingual blocks, one per language, totalling `dataset_size` examples.
pub fn synthesize_concat_dataset(
    corpus: &Corpus,
    config: &SynthesisConfig,
) -> Result<Vec<InstructionExample>, SynthesisError> {
    config.check()?;
    let blocks = concat_blocks(config.dataset_size, &config.languages, config.concat_overlap);
    let needed = blocks.iter().map(|b| b.start + b.len).max().unwrap_or(0);
    if needed > corpus.len() {
        return Err(SynthesisError::InsufficientGroups {
            required: needed,
            eligible: corpus.len(),
        });
    }
    let groups = corpus.groups();
    for g in &groups[..needed] {
        check_group(g, &config.languages)?;
    }
    Ok(blocks
        .iter()
        .flat_map(|b| {
            groups[b.start..b.start + b.len]
                .iter()
                .map(move |g| g.versions[&b.language].clone())
        })
        .collect())
}
