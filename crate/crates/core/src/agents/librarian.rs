use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::backend::{CompletionBackend, CompletionRequest, Decoding};
use crate::protocol::{AgentMessage, AgentRole, KeyPolicy};

use super::{consult_message, AgentError, PromptSet};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RetrieverError {
    #[error("retrieval unavailable: {0}")]
    Unavailable(String),
}

pub trait Retriever {
    fn search(&mut self, query: &str, limit: usize) -> Result<Vec<Document>, RetrieverError>;
}

impl<R: Retriever + ?Sized> Retriever for alloc::boxed::Box<R> {
    fn search(&mut self, query: &str, limit: usize) -> Result<Vec<Document>, RetrieverError> {
        (**self).search(query, limit)
    }
}

/// Local corpus ranked by shared word count. An empty corpus reports
/// itself unavailable.
#[derive(Debug, Clone, Default)]
pub struct OfflineRetriever {
    pub docs: Vec<Document>,
}

fn words(s: &str) -> BTreeSet<String> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|w| w.len() > 2)
        .map(str::to_lowercase)
        .collect()
}

impl Retriever for OfflineRetriever {
    fn search(&mut self, query: &str, limit: usize) -> Result<Vec<Document>, RetrieverError> {
        if self.docs.is_empty() {
            return Err(RetrieverError::Unavailable("offline, no local corpus".into()));
        }
        let q = words(query);
        let mut scored: Vec<(usize, &Document)> = self
            .docs
            .iter()
            .map(|d| (words(&d.text).intersection(&q).count(), d))
            .filter(|(n, _)| *n > 0)
            .collect();
        scored.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.id.cmp(&b.1.id)));
        Ok(scored.into_iter().take(limit).map(|(_, d)| d.clone()).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LibrarianAnswer {
    pub message: AgentMessage,
    /// No retriever hits backed the answer.
    pub unsourced: bool,
}

impl LibrarianAnswer {
    pub fn answer(&self) -> String {
        self.message.text("answer").unwrap_or_default()
    }
}

/// Answers a query. `sources` always lists the retriever hits actually shown
/// to the model, regardless of what the model claims.
pub fn librarian_answer(
    query: &str,
    retriever: &mut dyn Retriever,
    backend: &mut dyn CompletionBackend,
    prompts: &PromptSet,
    policy: &KeyPolicy,
    decoding: Decoding,
) -> Result<LibrarianAnswer, AgentError> {
    if query.trim().is_empty() {
        return Err(AgentError::Precondition("empty librarian query".into()));
    }
    let hits = retriever.search(query, 5).unwrap_or_default();
    let documents = if hits.is_empty() {
        String::from("(no documents retrieved)")
    } else {
        hits.iter()
            .map(|d| format!("[{}] {}", d.id, d.text))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let prompt = prompts.render("librarian", &[("query", query), ("documents", &documents)]);
    let mut req = CompletionRequest::new(AgentRole::Librarian, prompt);
    req.decoding = decoding;
    let mut message = consult_message(backend, &req, policy, |m| {
        if m.get("answer").is_some() {
            Ok(m)
        } else {
            Err("missing `answer` key".to_string())
        }
    })?;
    let sources: Vec<Value> = hits.iter().map(|d| Value::String(d.id.clone())).collect();
    message.body.insert("sources".into(), Value::Array(sources));
    Ok(LibrarianAnswer {
        message,
        unsourced: hits.is_empty(),
    })
}
