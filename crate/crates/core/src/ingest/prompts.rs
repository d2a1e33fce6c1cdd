//! The generation and translation prompts, sent verbatim apart from their
//! placeholders.

use crate::corpus::Language;

pub const GENERATION_SYSTEM: &str = include_str!("prompts/generation_system.txt");
/// `{{TEXT}}` is replaced by the raw text.
pub const GENERATION_USER: &str = include_str!("prompts/generation_user.txt");
/// `{language}` is replaced by the target language's English name.
pub const TRANSLATION_SYSTEM: &str = include_str!("prompts/translation_system.txt");
/// `{language}` as above; `{{QA_JSON}}` is replaced by the input array.
pub const TRANSLATION_USER: &str = include_str!("prompts/translation_user.txt");

pub fn generation_user(raw_text: &str) -> String {
    GENERATION_USER.replace("{{TEXT}}", raw_text)
}

pub fn translation_system(target: Language) -> String {
    TRANSLATION_SYSTEM.replace("{language}", target.english_name())
}

/// Substitutes the language first so that `{language}` inside the QA JSON
/// is left alone.
pub fn translation_user(target: Language, qa_json: &str) -> String {
    TRANSLATION_USER
        .replace("{language}", target.english_name())
        .replace("{{QA_JSON}}", qa_json)
}
