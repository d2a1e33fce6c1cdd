//! The generation and translation contract against a canned client. Any
//! [`ChatClient`] works; `HttpChatClient` talks to a real endpoint.

use codeswitch::corpus::Language;
use codeswitch::ingest::{
    generate_instructions, translate_examples, ChatClient, ChatMessage, EndpointConfig, GenerationJob, Secret,
    ServiceError,
};

struct Canned;

impl ChatClient for Canned {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, ServiceError> {
        let user = &messages.last().unwrap().content;
        let item = |ctx: &str, q: &str, opts: [&str; 4]| {
            serde_json::json!({"context": ctx, "question": q,
                "options": {"A": opts[0], "B": opts[1], "C": opts[2], "D": opts[3]}, "answer": "C"})
        };
        let items: Vec<_> = if user.contains("Raw text:") {
            (1..=3).map(|i| item("Bees make honey from nectar.", &format!("Question {i}: what do bees make?"), ["Wax only", "Milk", "Honey", "Silk"])).collect()
        } else {
            (1..=3).map(|i| item("蜂は花の蜜から蜂蜜を作る。", &format!("質問{i}：蜂は何を作る？"), ["蝋だけ", "牛乳", "蜂蜜", "絹"])).collect()
        };
        Ok(format!("```json\n{}\n```", serde_json::to_string_pretty(&items).unwrap()))
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = EndpointConfig::new("http://unused", "canned", Secret::default());
    let job = GenerationJob::new("doc-1", "Bees make honey from nectar.");
    let (english, attempts) = generate_instructions(&job, &Canned, &cfg)?;
    println!("generated {} examples in {attempts} attempt(s)", english.len());
    let (japanese, _) = translate_examples(&english, Language::Ja, &Canned, &cfg)?;
    for ex in &japanese {
        println!("{}", serde_json::to_string(ex)?);
    }
    Ok(())
}
