//! Minimal JSON-over-HTTP providers.
//!
//! `POST {endpoint}/embed {"texts": [...], "model": ...}` answers `{"vectors": [[...]]}`;
//! `POST {endpoint}/generate {"prompt": ..., "model": ...}` answers `{"text": ...}`.

use std::thread;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{check_prompt, Embedder, EmbeddingVector, Generator, ProviderConfig};
use crate::error::{Error, Result};
use crate::par;

const BACKOFF_BASE: Duration = Duration::from_millis(100);
const BACKOFF_CAP: Duration = Duration::from_secs(2);

struct Client {
    agent: ureq::Agent,
    config: ProviderConfig,
    endpoint: String,
}

impl Client {
    fn new(config: ProviderConfig) -> Result<Self> {
        config.validate()?;
        let endpoint = config.endpoint.clone().unwrap_or_default().trim_end_matches('/').to_string();
        let agent = ureq::AgentBuilder::new().timeout(config.timeout()).build();
        Ok(Client { agent, config, endpoint })
    }

    fn post<Req: Serialize, Resp: DeserializeOwned>(&self, route: &str, body: &Req) -> Result<Resp> {
        let url = format!("{}/{route}", self.endpoint);
        let payload = serde_json::to_value(body)?;
        let key = self.config.api_key();
        let mut attempt = 0u32;
        loop {
            let mut req = self.agent.post(&url);
            if let Some(key) = &key {
                req = req.set("Authorization", &format!("Bearer {key}"));
            }
            let err = match req.send_json(payload.clone()) {
                Ok(resp) => {
                    return resp.into_json::<Resp>().map_err(|e| Error::Provider {
                        status: None,
                        message: format!("{url}: malformed response: {e}"),
                    })
                }
                Err(ureq::Error::Status(code, resp)) => {
                    let body = resp.into_string().unwrap_or_default();
                    let retryable = code == 429 || code >= 500;
                    let err = Error::Provider { status: Some(code), message: format!("{url}: {body}") };
                    if !retryable {
                        return Err(err);
                    }
                    err
                }
                Err(ureq::Error::Transport(t)) => Error::Provider { status: None, message: format!("{url}: {t}") },
            };
            if attempt >= self.config.retry_count {
                return Err(err);
            }
            let delay = BACKOFF_BASE.saturating_mul(1 << attempt.min(16)).min(BACKOFF_CAP);
            log::warn!("{err}; retrying in {delay:?}");
            thread::sleep(delay);
            attempt += 1;
        }
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
    model: &'a str,
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct GenerateRequest<'a> {
    prompt: &'a str,
    model: &'a str,
}

#[derive(Deserialize)]
struct GenerateResponse {
    text: String,
}

pub struct RemoteEmbedder {
    client: Client,
}

impl RemoteEmbedder {
    pub fn new(config: ProviderConfig) -> Result<Self> {
        Ok(RemoteEmbedder { client: Client::new(config)? })
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        let resp: EmbedResponse =
            self.client.post("embed", &EmbedRequest { texts, model: &self.client.config.model_name })?;
        if resp.vectors.len() != texts.len() {
            return Err(Error::Provider {
                status: None,
                message: format!("asked for {} vectors, got {}", texts.len(), resp.vectors.len()),
            });
        }
        let mut out = Vec::with_capacity(texts.len());
        for values in resp.vectors {
            if let Some(dim) = self.client.config.dim {
                if values.len() != dim {
                    return Err(Error::DimMismatch { expected: dim, actual: values.len() });
                }
            }
            out.push(EmbeddingVector::normalized(values)?);
        }
        Ok(out)
    }
}

impl Embedder for RemoteEmbedder {
    fn dim(&self) -> usize {
        self.client.config.dim.unwrap_or(0)
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        if let Some(i) = texts.iter().position(|t| t.trim().is_empty()) {
            return Err(Error::InvalidInput(format!("text {i} is empty")));
        }
        let batches: Vec<&[String]> = texts.chunks(self.client.config.batch_size).collect();
        let mut out = Vec::with_capacity(texts.len());
        for group in batches.chunks(self.client.config.max_parallel) {
            for batch in par::try_map(group, |b| self.embed_batch(b))? {
                out.extend(batch);
            }
        }
        Ok(out)
    }
}

pub struct RemoteGenerator {
    client: Client,
}

impl RemoteGenerator {
    pub fn new(config: ProviderConfig) -> Result<Self> {
        Ok(RemoteGenerator { client: Client::new(config)? })
    }
}

impl Generator for RemoteGenerator {
    fn generate(&self, prompt: &str) -> Result<String> {
        check_prompt(prompt, self.client.config.max_prompt_chars)?;
        let resp: GenerateResponse =
            self.client.post("generate", &GenerateRequest { prompt, model: &self.client.config.model_name })?;
        Ok(resp.text)
    }
}
