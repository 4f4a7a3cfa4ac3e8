//! TOML engine configuration.
//!
//! ```toml
//! prompt_template_path = "prompt.txt"
//!
//! [providers.embed]
//! kind = "mock-embed"
//! dim = 256
//!
//! [providers.generate]
//! kind = "null-generate"
//!
//! [retrieval]
//! k1 = 4
//! k2 = 3
//! k3 = 3
//! depth = 2
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::change_db::DEFAULT_LINE_BUDGET;
use crate::embedding::{ProviderConfig, DEFAULT_MOCK_DIM};
use crate::error::{Error, Result};
use crate::pipeline::{PromptTemplate, RetrievalConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Providers {
    #[serde(default = "default_embed")]
    pub embed: ProviderConfig,
    #[serde(default = "ProviderConfig::null_generate")]
    pub generate: ProviderConfig,
}

fn default_embed() -> ProviderConfig {
    ProviderConfig::mock_embed(DEFAULT_MOCK_DIM)
}

impl Default for Providers {
    fn default() -> Self {
        Providers { embed: default_embed(), generate: ProviderConfig::null_generate() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub providers: Providers,
    pub retrieval: RetrievalConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prompt_template_path: Option<PathBuf>,
    /// Maximum diff lines per change entry's embedding text.
    pub line_budget: usize,
    pub drop_trivial_crs: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            providers: Providers::default(),
            retrieval: RetrievalConfig::default(),
            prompt_template_path: None,
            line_budget: DEFAULT_LINE_BUDGET,
            drop_trivial_crs: false,
        }
    }
}

impl EngineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: EngineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path`; a relative template path is taken relative to the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text).map_err(|e| Error::ParseFile { path: path.into(), message: e.to_string() })?;
        if let (Some(tp), Some(dir)) = (&cfg.prompt_template_path, path.parent()) {
            if tp.is_relative() {
                cfg.prompt_template_path = Some(dir.join(tp));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.providers.embed.kind.is_embed() {
            return Err(Error::Config("providers.embed must be an embedding kind".into()));
        }
        if self.providers.generate.kind.is_embed() {
            return Err(Error::Config("providers.generate must be a generation kind".into()));
        }
        self.providers.embed.validate()?;
        self.providers.generate.validate()?;
        if self.line_budget == 0 {
            return Err(Error::Config("line_budget must be positive".into()));
        }
        Ok(())
    }

    pub fn prompt_template(&self) -> Result<PromptTemplate> {
        match &self.prompt_template_path {
            Some(p) => PromptTemplate::load(p),
            None => Ok(PromptTemplate::default()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::ProviderKind;
    use crate::spec_db::VersionPolicy;

    #[test]
    fn empty_is_default() {
        assert_eq!(EngineConfig::parse("").unwrap(), EngineConfig::default());
    }

    #[test]
    fn full_file() {
        let cfg = EngineConfig::parse(
            r#"
            line_budget = 50
            [providers.embed]
            kind = "mock-embed"
            dim = 64
            [providers.generate]
            kind = "null-generate"
            [retrieval]
            k1 = 3
            k2 = 2
            k3 = 0
            depth = 1
            hyde_enabled = false
            version_policy = "exact:17.4.0"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.providers.embed.dim, Some(64));
        assert_eq!(cfg.providers.generate.kind, ProviderKind::NullGenerate);
        assert_eq!((cfg.retrieval.k1, cfg.retrieval.k2, cfg.retrieval.k3, cfg.retrieval.max_depth), (3, 2, 0, 1));
        assert_eq!(cfg.retrieval.version_policy, "exact:17.4.0".parse::<VersionPolicy>().unwrap());
        assert_eq!(cfg.line_budget, 50);
    }

    #[test]
    fn rejects_swapped_kinds_and_unknown_keys() {
        assert!(EngineConfig::parse("[providers.embed]\nkind = \"null-generate\"").is_err());
        assert!(EngineConfig::parse("[retrieval]\nk4 = 1").is_err());
        assert!(EngineConfig::parse("line_budget = 0").is_err());
    }
}
