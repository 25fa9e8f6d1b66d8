//! TOML configuration for the command-line tools.
//!
//! [`AppConfig`] gathers the knobs of every subsystem: pipeline
//! orchestration (including sampler limits and the k distribution),
//! provider settings, retrieval-graph parameters, and split constraints.
//! Every section and field is optional and defaults apply, but unknown
//! keys are rejected so typos surface as errors instead of silently
//! falling back. Command-line flags override whatever the file says.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::RetrievalGraphConfig;
use crate::gateway::ProviderConfig;
use crate::pipeline::PipelineConfig;
use crate::split::SplitConstraints;

/// Errors raised while loading configuration.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid config {path}: {source}")]
    Parse {
        path: String,
        source: Box<toml::de::Error>,
    },
}

/// Top-level configuration file contents.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub pipeline: PipelineConfig,
    pub provider: ProviderConfig,
    pub retrieval: RetrievalGraphConfig,
    pub split: SplitConstraints,
}

impl AppConfig {
    /// Parses a TOML document; missing sections take their defaults.
    pub fn from_toml(text: &str, origin: &str) -> Result<AppConfig, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: origin.to_owned(),
            source: Box::new(source),
        })
    }

    /// Reads and parses a configuration file.
    pub fn load(path: &Path) -> Result<AppConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        AppConfig::from_toml(&text, &path.display().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_default_config() {
        let cfg = AppConfig::from_toml("", "inline").unwrap();
        assert_eq!(cfg, AppConfig::default());
    }

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = AppConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(AppConfig::from_toml(&text, "inline").unwrap(), cfg);
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let cfg = AppConfig::from_toml(
            "[pipeline]\nmaster_seed = 7\n\n[split]\nmin_per_category = 3\n",
            "inline",
        )
        .unwrap();
        assert_eq!(cfg.pipeline.master_seed, 7);
        assert_eq!(cfg.split.min_per_category, 3);
        assert_eq!(cfg.pipeline.workers, PipelineConfig::default().workers);
        assert_eq!(cfg.retrieval, RetrievalGraphConfig::default());
        assert_eq!(cfg.provider, ProviderConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected_at_every_level() {
        for text in [
            "nonsense = 1\n",
            "[pipeline]\nnonsense = 1\n",
            "[provider]\nnonsense = 1\n",
            "[retrieval]\nnonsense = 1\n",
            "[split]\nnonsense = 1\n",
            "[nonsense]\nx = 1\n",
        ] {
            let err = AppConfig::from_toml(text, "inline").unwrap_err();
            assert!(
                matches!(err, ConfigError::Parse { .. }),
                "{text:?} should be rejected"
            );
        }
    }

    #[test]
    fn missing_file_is_an_io_error_naming_the_path() {
        let err = AppConfig::load(Path::new("/nonexistent/kgqa.toml")).unwrap_err();
        match err {
            ConfigError::Io { path, .. } => assert_eq!(path, "/nonexistent/kgqa.toml"),
            other => panic!("expected io error, got {other:?}"),
        }
    }
}
