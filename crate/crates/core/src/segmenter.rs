//! Rule-based sentence segmentation for EN, JA, KO and ZH text.
//!
//! Boundary rules:
//!
//! - EN and KO end sentences at `.`, `!` and `?`; JA and ZH additionally at
//!   the full-width `。`, `！` and `？`.
//! - A run of terminators is consumed as one unit and is extended through any
//!   closing quotes or brackets that follow it.
//! - Full-width terminators always end a sentence. ASCII terminators end one
//!   only when followed by whitespace or the end of the text (for JA and ZH
//!   also when directly followed by a CJK character).
//! - A single `.` between two digits is a decimal point, and a `.` closing one
//!   of a few English abbreviations (`Mr.`, `Dr.`, `e.g.`, `i.e.`, `etc.`,
//!   `vs.`, `U.S.`) is not a boundary.
//! - Ellipses (`...`, `…`) end a sentence only when followed by whitespace and
//!   then an uppercase or CJK character.
//! - An ASCII terminator followed by whitespace and a lowercase letter is not a
//!   boundary (`9 a.m. on Monday`, `"Ready?" she asked.`).
//! - JA: a quotation closed by `」` or `』` and followed directly by the
//!   quotative particle `と` continues the sentence (`「はい。」と答えた。`).
//!
//! Offsets in [`SentenceSpan`] are character (Unicode scalar) offsets.

use serde::{Deserialize, Serialize};

use crate::corpus::Language;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceSpan {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

const ABBREVIATIONS: &[&str] = &["mr.", "dr.", "e.g.", "i.e.", "etc.", "vs.", "u.s."];

fn is_ascii_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_fullwidth_terminator(c: char) -> bool {
    matches!(c, '。' | '！' | '？')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | '”' | '’' | '』' | '」' | '）' | ')')
}

/// Han ideographs, kana and Hangul.
pub(crate) fn is_cjk(c: char) -> bool {
    matches!(c,
        '\u{3040}'..='\u{30FF}'      // hiragana, katakana
        | '\u{31F0}'..='\u{31FF}'
        | '\u{3400}'..='\u{4DBF}'
        | '\u{4E00}'..='\u{9FFF}'
        | '\u{F900}'..='\u{FAFF}'
        | '\u{FF66}'..='\u{FF9F}'    // halfwidth katakana
        | '\u{1100}'..='\u{11FF}'    // hangul jamo
        | '\u{3130}'..='\u{318F}'
        | '\u{AC00}'..='\u{D7AF}'    // hangul syllables
        | '\u{20000}'..='\u{2FFFF}')
}

struct Segmenter<'a> {
    chars: &'a [char],
    cjk_terminators: bool,
    quotative_to: bool,
}

impl Segmenter<'_> {
    fn is_terminator(&self, c: char) -> bool {
        is_ascii_terminator(c) || c == '…' || (self.cjk_terminators && is_fullwidth_terminator(c))
    }

    /// Decides whether the terminator run starting at `i` ends a sentence.
    /// Returns `Ok(end)` (exclusive, closers included) for a boundary and
    /// `Err(resume)` with the index to continue scanning from otherwise.
    fn boundary_at(&self, i: usize, span_start: usize) -> Result<usize, usize> {
        let cs = self.chars;
        let n = cs.len();
        let mut run_end = i;
        while run_end < n && self.is_terminator(cs[run_end]) {
            run_end += 1;
        }
        let run = &cs[i..run_end];
        let mut end = run_end;
        while end < n && is_closer(cs[end]) {
            end += 1;
        }
        if end == n {
            return Ok(end);
        }
        let next = cs[end];

        if self.quotative_to && next == 'と' && matches!(cs[end - 1], '」' | '』') {
            return Err(run_end);
        }
        if run.iter().any(|&c| is_fullwidth_terminator(c)) {
            return Ok(end);
        }

        let dots = run.iter().filter(|&&c| c == '.').count();
        let has_ellipsis = run.contains(&'…') || dots >= 3;
        if has_ellipsis && !run.iter().any(|&c| c == '!' || c == '?') {
            if !next.is_whitespace() {
                return Err(run_end);
            }
            let following = cs[end..].iter().find(|c| !c.is_whitespace());
            return match following {
                Some(&c) if c.is_uppercase() || is_cjk(c) => Ok(end),
                Some(_) => Err(run_end),
                None => Ok(end),
            };
        }

        if run == ['.'] {
            let prev = (i > span_start).then(|| cs[i - 1]);
            if prev.is_some_and(|c| c.is_ascii_digit()) && next.is_ascii_digit() {
                return Err(run_end);
            }
            if self.is_abbreviation(i, span_start) {
                return Err(run_end);
            }
        }

        if next.is_whitespace() {
            let following = cs[end..].iter().find(|c| !c.is_whitespace());
            if following.is_some_and(|c| c.is_lowercase()) {
                return Err(run_end);
            }
            Ok(end)
        } else if self.cjk_terminators && is_cjk(next) {
            Ok(end)
        } else {
            Err(run_end)
        }
    }

    /// The word ending in the `.` at `dot`, bounded by whitespace and by the
    /// start of the current sentence.
    fn is_abbreviation(&self, dot: usize, span_start: usize) -> bool {
        let cs = self.chars;
        let mut s = dot;
        while s > span_start && !cs[s - 1].is_whitespace() {
            s -= 1;
        }
        let word: String = cs[s..=dot]
            .iter()
            .skip_while(|c| !c.is_alphanumeric())
            .flat_map(|c| c.to_lowercase())
            .collect();
        ABBREVIATIONS.contains(&word.as_str())
    }

    fn run(&self) -> Vec<SentenceSpan> {
        let cs = self.chars;
        let mut spans = Vec::new();
        let mut start: Option<usize> = None;
        let mut i = 0;
        while i < cs.len() {
            let c = cs[i];
            let span_start = match start {
                Some(s) => s,
                None if c.is_whitespace() => {
                    i += 1;
                    continue;
                }
                None => {
                    start = Some(i);
                    i
                }
            };
            if self.is_terminator(c) {
                match self.boundary_at(i, span_start) {
                    Ok(end) => {
                        spans.push(self.span(span_start, end));
                        start = None;
                        i = end;
                    }
                    Err(resume) => i = resume,
                }
            } else {
                i += 1;
            }
        }
        if let Some(s) = start {
            let mut end = cs.len();
            while end > s && cs[end - 1].is_whitespace() {
                end -= 1;
            }
            spans.push(self.span(s, end));
        }
        spans
    }

    fn span(&self, start: usize, end: usize) -> SentenceSpan {
        SentenceSpan {
            text: self.chars[start..end].iter().collect(),
            start,
            end,
        }
    }
}

/// Splits `text` into sentences. Empty or whitespace-only input yields no
/// spans; text without a terminator yields one span.
pub fn segment(text: &str, language: Language) -> Vec<SentenceSpan> {
    let chars: Vec<char> = text.chars().collect();
    Segmenter {
        chars: &chars,
        cjk_terminators: matches!(language, Language::Ja | Language::Zh),
        quotative_to: language == Language::Ja,
    }
    .run()
}

/// Sentence texts only.
pub fn sentences(text: &str, language: Language) -> Vec<String> {
    segment(text, language).into_iter().map(|s| s.text).collect()
}
