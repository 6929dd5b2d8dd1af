use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Error;
use crate::sim::{AgentConfig, FeatureMap, StreamConfig, TrackSpec, Variant};
use crate::tpn::RegimeParams;

/// The tuned configuration shipped with the crate.
pub const SHIPPED_CONFIG: &str = include_str!("../../configs/default.json");

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Missing {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("malformed config at line {line}, column {column}: {message}")]
    Malformed {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown key `{key}`")]
    UnknownKey { key: String },

    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

impl ConfigError {
    /// Dotted path of the offending key, when there is one.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::UnknownKey { key } | ConfigError::Invalid { key, .. } => Some(key),
            _ => None,
        }
    }
}

/// One cell of the experiment grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridCell {
    pub s_r: usize,
    pub s_c: usize,
}

/// Agent parameters shared by both variants; the grid supplies `s_c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentParams {
    pub controller_gain: f64,
    pub belief_gain: f64,
    pub query_scale: f64,
    pub query_bandwidth: f64,
    pub salience_weight: f64,
    pub pi_min: f64,
    pub retain_threshold: f64,
    pub regime: RegimeParams,
    pub coherence_gain: f64,
    #[serde(default)]
    pub lambda: f64,
}

impl AgentParams {
    pub fn agent(&self, variant: Variant, s_c: usize) -> AgentConfig {
        AgentConfig {
            variant,
            s_c,
            controller_gain: self.controller_gain,
            belief_gain: self.belief_gain,
            query_scale: self.query_scale,
            query_bandwidth: self.query_bandwidth,
            salience_weight: self.salience_weight,
            pi_min: self.pi_min,
            retain_threshold: self.retain_threshold,
            regime: self.regime,
            coherence_gain: self.coherence_gain,
            lambda: self.lambda,
        }
    }
}

/// Stream parameters; the grid supplies `s_r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamParams {
    pub rho: f64,
    pub obs_noise: f64,
    pub distractor_scale: f64,
    pub distractor_jitter: f64,
    pub distractor_periods: [f64; 2],
}

impl StreamParams {
    pub fn stream(&self, s_r: usize) -> StreamConfig {
        StreamConfig {
            s_r,
            rho: self.rho,
            obs_noise: self.obs_noise,
            distractor_scale: self.distractor_scale,
            distractor_jitter: self.distractor_jitter,
            distractor_periods: self.distractor_periods,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: Vec<GridCell>,
    pub seeds: Vec<u64>,
    pub agent: AgentParams,
    pub stream: StreamParams,
    pub track: TrackSpec,
    pub features: FeatureMap,
    /// Where trajectories and the report go unless overridden.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn invalid(section: &str, e: Error) -> ConfigError {
    match e {
        Error::Param { name, reason } => ConfigError::Invalid {
            key: format!("{section}.{name}"),
            reason,
        },
        other => ConfigError::Invalid {
            key: section.to_string(),
            reason: other.to_string(),
        },
    }
}

impl ExperimentConfig {
    pub fn shipped() -> Self {
        Self::from_json(SHIPPED_CONFIG).expect("shipped config is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let message = inner.to_string();
            match inner.classify() {
                serde_json::error::Category::Data => {
                    if let Some(rest) = message.strip_prefix("unknown field `") {
                        let name = rest.split('`').next().unwrap_or_default();
                        // the path already ends in the unknown key for maps,
                        // but not for structs
                        let key = if path.ends_with(name) {
                            path
                        } else if path == "." {
                            name.to_string()
                        } else {
                            format!("{path}.{name}")
                        };
                        ConfigError::UnknownKey { key }
                    } else {
                        ConfigError::Invalid {
                            key: path,
                            reason: message,
                        }
                    }
                }
                _ => ConfigError::Malformed {
                    line: inner.line(),
                    column: inner.column(),
                    message,
                },
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.grid.is_empty() {
            return Err(ConfigError::Invalid {
                key: "grid".into(),
                reason: "must contain at least one cell".into(),
            });
        }
        if self.seeds.is_empty() {
            return Err(ConfigError::Invalid {
                key: "seeds".into(),
                reason: "must contain at least one seed".into(),
            });
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = self.seeds.iter().find(|s| !seen.insert(**s)) {
            return Err(ConfigError::Invalid {
                key: "seeds".into(),
                reason: format!("seed {dup} listed twice"),
            });
        }
        for cell in &self.grid {
            // grid values are checked as the stream/agent fields they become
            self.stream
                .stream(cell.s_r)
                .validate()
                .map_err(|e| match e {
                    Error::Param {
                        name: "s_r",
                        reason,
                    } => ConfigError::Invalid {
                        key: "grid.s_r".into(),
                        reason,
                    },
                    e => invalid("stream", e),
                })?;
            self.agent
                .agent(Variant::Co4, cell.s_c)
                .validate()
                .map_err(|e| match e {
                    Error::Param {
                        name: "s_c",
                        reason,
                    } => ConfigError::Invalid {
                        key: "grid.s_c".into(),
                        reason,
                    },
                    e => invalid("agent", e),
                })?;
        }
        self.track.validate().map_err(|e| invalid("track", e))?;
        self.features
            .validate()
            .map_err(|e| invalid("features", e))?;
        Ok(())
    }

    /// SHA-256 over every field that affects results; `output_dir` excluded.
    pub fn hash(&self) -> String {
        let semantic = Self {
            output_dir: None,
            ..self.clone()
        };
        let bytes = serde_json::to_vec(&semantic).expect("config serialises");
        hex::encode(Sha256::digest(&bytes))
    }

    /// `s_c / s_r` for every cell, in grid order.
    pub fn gammas(&self) -> Vec<f64> {
        self.grid
            .iter()
            .map(|c| c.s_c as f64 / c.s_r as f64)
            .collect()
    }
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<ExperimentConfig, ConfigError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Missing {
        path: path.to_path_buf(),
        source,
    })?;
    ExperimentConfig::from_json(&text)
}
