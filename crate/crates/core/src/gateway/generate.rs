use super::chat::ChatClient;
use crate::corpus::{Passage, Query};
use crate::error::{Error, Result};

pub const DEFAULT_GENERATION_TEMPLATE: &str = "{context}\n\nQuestion: {question}\nAnswer:";

/// Generation prompt with `{context}` and `{question}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate(String);

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate(DEFAULT_GENERATION_TEMPLATE.to_string())
    }
}

impl PromptTemplate {
    pub fn new(template: impl Into<String>) -> Result<Self> {
        let t = template.into();
        if !t.contains("{question}") {
            return Err(Error::Config("generation template lacks {question}".into()));
        }
        Ok(PromptTemplate(t))
    }

    /// Passages are rendered as `title: body` and separated by blank lines.
    pub fn render(&self, question: &str, context: &[&Passage]) -> String {
        let ctx: Vec<String> = context.iter().map(|p| p.display_text()).collect();
        self.0
            .replace("{context}", &ctx.join("\n\n"))
            .replace("{question}", question)
            .trim_start()
            .to_string()
    }
}

pub trait Generator: Send + Sync {
    fn generate(&self, query: &Query, context: &[&Passage]) -> Result<String>;
}

pub struct RemoteGenerator {
    chat: ChatClient,
    template: PromptTemplate,
}

impl RemoteGenerator {
    pub fn new(chat: ChatClient, template: PromptTemplate) -> Self {
        RemoteGenerator { chat, template }
    }
}

impl Generator for RemoteGenerator {
    fn generate(&self, query: &Query, context: &[&Passage]) -> Result<String> {
        self.chat.complete(&self.template.render(&query.text, context))
    }
}

/// Returns the first gold answer iff every gold passage is in the context.
#[derive(Debug, Clone, Default)]
pub struct GoldEchoGenerator;

impl Generator for GoldEchoGenerator {
    fn generate(&self, query: &Query, context: &[&Passage]) -> Result<String> {
        let all_gold = query.gold_ids.iter().all(|g| context.iter().any(|p| &p.id == g));
        Ok(if all_gold { query.answers[0].clone() } else { String::new() })
    }
}

/// Returns the first gold answer iff the final context slot holds a gold
/// passage.
#[derive(Debug, Clone, Default)]
pub struct PositionSensitiveGenerator;

impl Generator for PositionSensitiveGenerator {
    fn generate(&self, query: &Query, context: &[&Passage]) -> Result<String> {
        Ok(match context.last() {
            Some(p) if query.is_gold(&p.id) => query.answers[0].clone(),
            _ => String::new(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::chat::completion_body;
    use crate::gateway::stub::{StubResponse, StubServer};
    use crate::gateway::EndpointConfig;

    fn fixture() -> (Vec<Passage>, Query) {
        let ps = vec![
            Passage::new(Some("A"), "alpha", "t").unwrap(),
            Passage::new(Some("B"), "beta", "t").unwrap(),
            Passage::new(None, "gamma", "t").unwrap(),
        ];
        let q = Query {
            id: "q".into(),
            text: "what?".into(),
            hops: 2,
            answers: vec!["Answer".into(), "alias".into()],
            gold_ids: vec![ps[0].id.clone(), ps[1].id.clone()],
            candidate_ids: None,
            distractor_ids: vec![ps[2].id.clone()],
        };
        (ps, q)
    }

    #[test]
    fn gold_echo_policy() {
        let (ps, q) = fixture();
        let g = GoldEchoGenerator;
        assert_eq!(g.generate(&q, &[&ps[2], &ps[1], &ps[0]]).unwrap(), "Answer");
        assert_eq!(g.generate(&q, &[&ps[0], &ps[2]]).unwrap(), "");
        assert_eq!(g.generate(&q, &[]).unwrap(), "");
    }

    #[test]
    fn position_sensitive_policy() {
        let (ps, q) = fixture();
        let g = PositionSensitiveGenerator;
        assert_eq!(g.generate(&q, &[&ps[2], &ps[0]]).unwrap(), "Answer");
        assert_eq!(g.generate(&q, &[&ps[0], &ps[2]]).unwrap(), "");
    }

    #[test]
    fn template_layout() {
        let (ps, _) = fixture();
        let t = PromptTemplate::default();
        assert_eq!(
            t.render("what?", &[&ps[0], &ps[2]]),
            "A: alpha\n\ngamma\n\nQuestion: what?\nAnswer:"
        );
        assert_eq!(t.render("what?", &[]), "Question: what?\nAnswer:");
        assert!(PromptTemplate::new("{context} only").is_err());
    }

    #[test]
    fn remote_generator_sends_prompt() {
        let server = StubServer::start(|_| StubResponse::json(completion_body(" Answer ")));
        let (ps, q) = fixture();
        let chat = ChatClient::new("generator", EndpointConfig::new(server.url()), 32, None).unwrap();
        let g = RemoteGenerator::new(chat, PromptTemplate::default());
        assert_eq!(g.generate(&q, &[&ps[0]]).unwrap(), "Answer");
        let body: serde_json::Value = serde_json::from_str(&server.requests()[0].body).unwrap();
        assert_eq!(body["messages"][0]["content"], "A: alpha\n\nQuestion: what?\nAnswer:");
    }
}
