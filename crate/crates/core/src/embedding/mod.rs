//! Embedding and generation providers, plus the exact cosine index every store uses.

mod index;
mod mock;
mod provider;
mod remote;
pub mod vecfile;

pub use index::{cosine, sort_hits, ScoredHit, VectorIndex};
pub use mock::{mock_tokens, MockEmbedder};
pub use provider::{ProviderConfig, ProviderKind, DEFAULT_API_KEY_ENV, DEFAULT_MOCK_DIM};
pub use remote::{RemoteEmbedder, RemoteGenerator};

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unit-length embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f32>);

impl EmbeddingVector {
    /// Normalizes `values` to unit length; fails on zero, empty or non-finite input.
    pub fn normalized(values: Vec<f64>) -> Result<Self> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if values.is_empty() || !norm.is_finite() || norm == 0.0 {
            return Err(Error::EmptyText);
        }
        Ok(EmbeddingVector(values.iter().map(|v| (v / norm) as f32).collect()))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.0
    }
}

pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;

    /// One unit vector per text, in input order.
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>>;

    fn embed_one(&self, text: &str) -> Result<EmbeddingVector> {
        let mut v = self.embed(&[text.to_string()])?;
        v.pop().ok_or_else(|| Error::Provider { status: None, message: "empty embedding batch".into() })
    }
}

pub trait Generator: Send + Sync {
    fn generate(&self, prompt: &str) -> Result<String>;

    /// True for backends that do not really generate; query expansion is skipped for them.
    fn is_passthrough(&self) -> bool {
        false
    }
}

/// Embeds `texts` with the provider described by `config`.
pub fn embed(texts: &[String], config: &ProviderConfig) -> Result<Vec<EmbeddingVector>> {
    if texts.is_empty() {
        return Err(Error::InvalidInput("no texts to embed".into()));
    }
    config.embedder()?.embed(texts)
}

/// Generates a completion for `prompt` with the provider described by `config`.
pub fn generate(prompt: &str, config: &ProviderConfig) -> Result<String> {
    config.generator()?.generate(prompt)
}

/// Tag that marks a context chunk in an assembled prompt. Tags start a line.
pub fn citation_tag(uid: &str) -> String {
    format!("[ref:{uid}]")
}

fn citation_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?m)^\[ref:([^\]\s]+)\]").unwrap())
}

/// Uids of every context chunk cited in `prompt`, in order of appearance.
pub fn cited_uids(prompt: &str) -> Vec<String> {
    citation_re().captures_iter(prompt).map(|c| c[1].to_string()).collect()
}

pub(crate) fn check_prompt(prompt: &str, budget: Option<usize>) -> Result<()> {
    if prompt.trim().is_empty() {
        return Err(Error::InvalidInput("empty prompt".into()));
    }
    if let Some(budget) = budget {
        let len = prompt.chars().count();
        if len > budget {
            return Err(Error::PromptTooLarge { len, budget });
        }
    }
    Ok(())
}

/// Offline generator: answers with the comma-joined uids of the prompt's context chunks.
#[derive(Debug, Clone, Default)]
pub struct NullGenerator {
    pub max_prompt_chars: Option<usize>,
}

impl Generator for NullGenerator {
    fn generate(&self, prompt: &str) -> Result<String> {
        check_prompt(prompt, self.max_prompt_chars)?;
        Ok(cited_uids(prompt).join(","))
    }

    fn is_passthrough(&self) -> bool {
        true
    }
}
