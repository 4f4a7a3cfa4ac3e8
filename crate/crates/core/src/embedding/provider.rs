use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Embedder, Generator, MockEmbedder, NullGenerator, RemoteEmbedder, RemoteGenerator};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    RemoteEmbed,
    MockEmbed,
    RemoteGenerate,
    NullGenerate,
}

impl ProviderKind {
    pub fn is_embed(self) -> bool {
        matches!(self, ProviderKind::RemoteEmbed | ProviderKind::MockEmbed)
    }

    pub fn is_remote(self) -> bool {
        matches!(self, ProviderKind::RemoteEmbed | ProviderKind::RemoteGenerate)
    }
}

pub const DEFAULT_MOCK_DIM: usize = 256;
pub const DEFAULT_API_KEY_ENV: &str = "SPECRAG_API_KEY";

/// Describes an embedding or generation backend. Mirrors the `providers` config section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub model_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_retry_count")]
    pub retry_count: u32,
    /// Texts per `/embed` request.
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    /// Concurrent requests allowed per embed call.
    #[serde(default = "default_max_parallel")]
    pub max_parallel: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_prompt_chars: Option<usize>,
    /// Environment variable holding a bearer token for remote kinds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
}

fn default_timeout_ms() -> u64 {
    30_000
}
fn default_retry_count() -> u32 {
    3
}
fn default_batch_size() -> usize {
    64
}
fn default_max_parallel() -> usize {
    4
}

impl ProviderConfig {
    fn base(kind: ProviderKind) -> Self {
        ProviderConfig {
            kind,
            endpoint: None,
            model_name: String::new(),
            dim: None,
            timeout_ms: default_timeout_ms(),
            retry_count: default_retry_count(),
            batch_size: default_batch_size(),
            max_parallel: default_max_parallel(),
            max_prompt_chars: None,
            api_key_env: None,
        }
    }

    pub fn mock_embed(dim: usize) -> Self {
        ProviderConfig { dim: Some(dim), model_name: "mock".into(), ..Self::base(ProviderKind::MockEmbed) }
    }

    pub fn null_generate() -> Self {
        ProviderConfig { model_name: "null".into(), ..Self::base(ProviderKind::NullGenerate) }
    }

    pub fn remote(kind: ProviderKind, endpoint: impl Into<String>) -> Self {
        ProviderConfig { endpoint: Some(endpoint.into()), ..Self::base(kind) }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind.is_remote() && self.endpoint.as_deref().is_none_or(str::is_empty) {
            return Err(Error::Config(format!("{:?} provider requires an endpoint", self.kind)));
        }
        if self.kind == ProviderKind::MockEmbed && !self.dim.is_some_and(|d| d > 0) {
            return Err(Error::Config("mock-embed provider requires dim > 0".into()));
        }
        if self.batch_size == 0 || self.max_parallel == 0 {
            return Err(Error::Config("batch_size and max_parallel must be positive".into()));
        }
        Ok(())
    }

    pub(crate) fn api_key(&self) -> Option<String> {
        let var = self.api_key_env.as_deref().unwrap_or(DEFAULT_API_KEY_ENV);
        std::env::var(var).ok().filter(|k| !k.is_empty())
    }

    pub fn embedder(&self) -> Result<Arc<dyn Embedder>> {
        self.validate()?;
        match self.kind {
            ProviderKind::MockEmbed => Ok(Arc::new(MockEmbedder::new(self.dim.unwrap_or(DEFAULT_MOCK_DIM))?)),
            ProviderKind::RemoteEmbed => Ok(Arc::new(RemoteEmbedder::new(self.clone())?)),
            k => Err(Error::Config(format!("{k:?} is not an embedding provider"))),
        }
    }

    pub fn generator(&self) -> Result<Arc<dyn Generator>> {
        self.validate()?;
        match self.kind {
            ProviderKind::NullGenerate => Ok(Arc::new(NullGenerator { max_prompt_chars: self.max_prompt_chars })),
            ProviderKind::RemoteGenerate => Ok(Arc::new(RemoteGenerator::new(self.clone())?)),
            k => Err(Error::Config(format!("{k:?} is not a generation provider"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(ProviderConfig::mock_embed(8).validate().is_ok());
        assert!(ProviderConfig::mock_embed(0).validate().is_err());
        assert!(ProviderConfig::base(ProviderKind::RemoteEmbed).validate().is_err());
        assert!(ProviderConfig::remote(ProviderKind::RemoteGenerate, "http://x").validate().is_ok());
        assert!(ProviderConfig::null_generate().embedder().is_err());
        assert!(ProviderConfig::mock_embed(4).generator().is_err());
    }

    #[test]
    fn toml_kind_names() {
        let cfg: ProviderConfig = toml::from_str("kind = \"mock-embed\"\ndim = 16\n").unwrap();
        assert_eq!(cfg.kind, ProviderKind::MockEmbed);
        assert_eq!(cfg.dim, Some(16));
        assert_eq!(cfg.retry_count, 3);
    }
}
