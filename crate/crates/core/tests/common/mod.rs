#![allow(dead_code)]

use std::path::PathBuf;

use codeswitch::corpus::Language;

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// A paragraph of gold sentences and the text they were joined into.
pub struct GoldParagraph {
    pub text: String,
    pub sentences: Vec<String>,
}

pub fn segmenter_fixture(language: Language) -> Vec<GoldParagraph> {
    let path = fixture_dir()
        .join("segmenter")
        .join(format!("{}.txt", language.code().to_lowercase()));
    let raw = std::fs::read_to_string(&path).unwrap();
    let joiner = match language {
        Language::En | Language::Ko => " ",
        Language::Ja | Language::Zh => "",
    };
    raw.split("\n\n")
        .map(|block| {
            let sentences: Vec<String> = block
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(String::from)
                .collect();
            GoldParagraph {
                text: sentences.join(joiner),
                sentences,
            }
        })
        .filter(|p| !p.sentences.is_empty())
        .collect()
}

/// Characters that stress the segmentation rules.
pub const SEGMENTER_ALPHABET: &[char] = &[
    'a', 'b', 'e', 'g', 'i', 'r', 's', 't', 'u', 'v', 'M', 'D', 'U', 'S', 'T', '0', '1', '9',
    ' ', ' ', ' ', '\n', '\u{3000}', '.', '.', '.', '!', '?', '…', '。', '！', '？', '"', '\'',
    '”', '』', '」', '）', ')', '(', '「', ',', '今', 'は', 'ア', '한', '국',
];

use codeswitch::corpus::{Corpus, InstructionExample, Letter, ParallelGroup};

fn sentence(language: Language, group: usize, j: usize) -> String {
    match language {
        Language::En => format!("Group {group} makes point number {j}."),
        Language::Ja => format!("グループ{group}の{j}番目の文です。"),
        Language::Ko => format!("그룹 {group}의 {j}번째 문장입니다."),
        Language::Zh => format!("第{group}组的第{j}句话。"),
    }
}

/// A synthetic parallel group with `sentences` aligned context sentences.
pub fn synthetic_group(index: usize, sentences: usize) -> ParallelGroup {
    let id = format!("syn-{index:06}");
    let answer = Letter::ALL[index % 4];
    let mut g = ParallelGroup::new(id.clone());
    for language in Language::ALL {
        let joiner = if matches!(language, Language::Ja | Language::Zh) { "" } else { " " };
        let context = (0..sentences)
            .map(|j| sentence(language, index, j))
            .collect::<Vec<_>>()
            .join(joiner);
        let opts: Vec<String> = Letter::ALL
            .iter()
            .map(|l| format!("{}:{}:{}", language.code().to_lowercase(), index, l))
            .collect();
        g.versions.insert(
            language,
            InstructionExample::new(
                id.clone(),
                language,
                context,
                format!("{} question {index}?", language.code()),
                [&opts[0], &opts[1], &opts[2], &opts[3]],
                answer,
            ),
        );
    }
    g
}

/// `n` groups with 1-4 context sentences; every seventh group's ZH context
/// merges two sentences so it is misaligned with the other languages.
pub fn synthetic_corpus(n: usize) -> Corpus {
    let groups = (0..n)
        .map(|i| {
            let mut g = synthetic_group(i, 1 + i % 4);
            if i % 7 == 3 && 1 + i % 4 >= 2 {
                let zh = g.versions.get_mut(&Language::Zh).unwrap();
                zh.context = zh.context.replacen('。', "，", 1);
            }
            g
        })
        .collect();
    Corpus::new(groups, Language::ALL.into_iter().collect()).unwrap()
}

/// Which language version an option text came from (options are tagged
/// `<lang>:<group>:<letter>`).
pub fn option_language(text: &str) -> Option<Language> {
    text.split(':').next()?.parse().ok()
}

use codeswitch::evaluator::{ChoiceScore, GoldItem, Normalization};
use rand::{Rng, SeedableRng};

/// Synthetic gold items and score records. Logprobs are quantized to
/// quarters so exact ties occur; roughly one item in twenty lacks a letter.
pub fn synthetic_scores(items: usize, seed: u64) -> (Vec<GoldItem>, Vec<ChoiceScore>) {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut gold = Vec::with_capacity(items);
    let mut scores = Vec::with_capacity(items * 4);
    for i in 0..items {
        let language = Language::ALL[i % 4];
        let id = format!("item-{}", i / 4);
        gold.push(GoldItem { example_id: id.clone(), language, answer: Letter::ALL[rng.random_range(0..4)] });
        let skip = (rng.random_range(0..20) == 0).then(|| rng.random_range(0..4));
        for (k, &choice) in Letter::ALL.iter().enumerate() {
            if skip == Some(k) {
                continue;
            }
            scores.push(ChoiceScore {
                example_id: id.clone(),
                language,
                choice,
                logprob: -(rng.random_range(0..40) as f64) / 4.0,
                char_count: rng.random_range(1..6),
                token_count: Some(rng.random_range(1..4)),
            });
        }
    }
    (gold, scores)
}

/// Brute-force recount: for every gold item, scan all records, and compare
/// prediction to answer. Returns (correct, total) per language.
pub fn oracle_recount(
    gold: &[GoldItem],
    scores: &[ChoiceScore],
    normalization: Normalization,
) -> std::collections::BTreeMap<Language, (u64, u64)> {
    let mut out = std::collections::BTreeMap::new();
    for g in gold {
        let mut best: Option<(f64, Letter)> = None;
        for letter in ["A", "B", "C", "D"] {
            for s in scores {
                if s.example_id != g.example_id || s.language != g.language || s.choice.as_str() != letter {
                    continue;
                }
                let v = match normalization {
                    Normalization::None => s.logprob,
                    Normalization::PerChar => s.logprob / s.char_count as f64,
                    Normalization::PerToken => s.logprob / s.token_count.unwrap() as f64,
                };
                if best.is_none_or(|(b, _)| v > b) {
                    best = Some((v, s.choice));
                }
            }
        }
        let e = out.entry(g.language).or_insert((0, 0));
        e.1 += 1;
        if best.map(|(_, l)| l) == Some(g.answer) {
            e.0 += 1;
        }
    }
    out
}

pub mod mock {
    //! A minimal OpenAI-compatible chat endpoint on a local port.

    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::{Arc, Mutex};

    use serde_json::{json, Value};

    #[derive(Debug, Clone)]
    pub struct Recorded {
        pub path: String,
        pub authorization: Option<String>,
        pub body: Value,
    }

    impl Recorded {
        pub fn message(&self, role: &str) -> String {
            self.body["messages"]
                .as_array()
                .unwrap()
                .iter()
                .find(|m| m["role"] == role)
                .and_then(|m| m["content"].as_str())
                .unwrap_or_default()
                .to_string()
        }
    }

    type Responder = dyn Fn(&Recorded) -> (u16, String) + Send + Sync;

    pub struct MockServer {
        pub base_url: String,
        pub requests: Arc<Mutex<Vec<Recorded>>>,
    }

    impl MockServer {
        /// `respond` returns (status, assistant content) for status 200, or
        /// (status, raw body) otherwise.
        pub fn start(respond: impl Fn(&Recorded) -> (u16, String) + Send + Sync + 'static) -> Self {
            let listener = TcpListener::bind("127.0.0.1:0").unwrap();
            let base_url = format!("http://{}/v1", listener.local_addr().unwrap());
            let requests = Arc::new(Mutex::new(Vec::new()));
            let respond: Arc<Responder> = Arc::new(respond);
            let log = requests.clone();
            std::thread::spawn(move || {
                for stream in listener.incoming() {
                    let Ok(mut stream) = stream else { continue };
                    let (respond, log) = (respond.clone(), log.clone());
                    std::thread::spawn(move || {
                        let mut reader = BufReader::new(stream.try_clone().unwrap());
                        let mut request_line = String::new();
                        reader.read_line(&mut request_line).unwrap();
                        let path = request_line.split_whitespace().nth(1).unwrap_or("").to_string();
                        let (mut length, mut authorization) = (0, None);
                        loop {
                            let mut line = String::new();
                            reader.read_line(&mut line).unwrap();
                            let line = line.trim_end();
                            if line.is_empty() {
                                break;
                            }
                            let (k, v) = line.split_once(':').unwrap();
                            match k.to_ascii_lowercase().as_str() {
                                "content-length" => length = v.trim().parse().unwrap(),
                                "authorization" => authorization = Some(v.trim().to_string()),
                                _ => {}
                            }
                        }
                        let mut body = vec![0; length];
                        reader.read_exact(&mut body).unwrap();
                        let rec = Recorded { path, authorization, body: serde_json::from_slice(&body).unwrap() };
                        let (status, content) = respond(&rec);
                        log.lock().unwrap().push(rec);
                        let payload = if status == 200 {
                            json!({"choices": [{"index": 0, "message": {"role": "assistant", "content": content}}]}).to_string()
                        } else {
                            content
                        };
                        let _ = write!(
                            stream,
                            "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                            payload.len()
                        );
                    });
                }
            });
            MockServer { base_url, requests }
        }

        pub fn calls(&self) -> usize {
            self.requests.lock().unwrap().len()
        }
    }

    /// `n` valid generated items whose context quotes `tag`.
    pub fn generated_items(n: usize, tag: &str) -> String {
        let items: Vec<Value> = (0..n)
            .map(|i| {
                json!({
                    "context": format!("{tag} says fact {i}. It matters. Readers agree."),
                    "question": format!("What does {tag} say?"),
                    "options": {"A": format!("fact {i}"), "B": "nothing", "C": "a poem", "D": "a date"},
                    "answer": "A"
                })
            })
            .collect();
        serde_json::to_string_pretty(&items).unwrap()
    }

    /// The raw text of a generation request.
    pub fn raw_text(rec: &Recorded) -> String {
        rec.message("user").split_once("Raw text:\n").map(|(_, t)| t.to_string()).unwrap_or_default()
    }
}
