//! Sentence splitting for each corpus language.

use codeswitch::corpus::Language;
use codeswitch::segmenter::segment;

fn main() {
    let samples = [
        (Language::En, "Dr. Smith arrived at 9 a.m. on Monday. \"Is it ready?\" she asked. It was."),
        (Language::Ja, "今日は雨です。「傘はありますか？」と聞かれました。はい！"),
        (Language::Ko, "오늘은 비가 옵니다. 우산이 있나요? 네, 있습니다!"),
        (Language::Zh, "今天下雨了。你带伞了吗？带了！"),
    ];
    for (lang, text) in samples {
        println!("[{lang}]");
        for span in segment(text, lang) {
            println!("  {:>3}..{:<3} {}", span.start, span.end, span.text);
        }
    }
}
