//! The size-matched concatenation baseline: one monolingual block per
//! language.

use codeswitch::synthesizer::{concat_blocks, LanguageSet};

fn main() {
    for (setting, size) in [("E+J+K+Z", 200_000), ("EN+JA", 7), ("E+J+K", 10)] {
        let set: LanguageSet = setting.parse().unwrap();
        println!("{setting}, {size} examples:");
        for b in concat_blocks(size, &set, false) {
            println!("  {} groups {}..{} ({} examples)", b.language, b.start, b.start + b.len, b.len);
        }
    }
}
