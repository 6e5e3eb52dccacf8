//! Run configuration: a TOML file plus command line overrides.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use summrank_core::estimate::EstimationConfig;
use summrank_core::evaluation::Strategy;
use summrank_core::features::{FeatureSpec, Normalization};
use summrank_core::pseudo::{PseudoMethod, DEFAULT_SALIENT_RATIO};
use summrank_core::semantic::ScorerKind;
use summrank_core::TokenizerConfig;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub tokenizer: TokenizerConfig,
    pub features: FeatureConfig,
    /// Remote scorer endpoints by metric name.
    pub scorers: BTreeMap<String, RemoteConfig>,
    pub pseudo: PseudoConfig,
    pub estimation: EstimationConfig,
    pub evaluation: EvaluationConfig,
    pub export: ExportConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    /// Semantic scorers, in feature order.
    pub semantic: Vec<String>,
    pub normalization: Normalization,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            semantic: vec![ScorerKind::BuiltinLexical.as_str().to_string()],
            normalization: Normalization::PerInstanceMinmax,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemoteConfig {
    pub endpoint: String,
    /// Pins the score semantics; part of every cache key.
    pub version: String,
    pub batch_size: usize,
    pub max_in_flight: usize,
    pub attempts: u32,
    pub backoff_ms: u64,
    pub timeout_ms: u64,
    pub cache: bool,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            endpoint: String::from("http://127.0.0.1:8080"),
            version: String::from("1"),
            batch_size: 64,
            max_in_flight: 4,
            attempts: 3,
            backoff_ms: 250,
            timeout_ms: 60_000,
            cache: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PseudoConfig {
    pub method: PseudoMethod,
    pub seed: u64,
    pub salient_ratio: f64,
}

impl Default for PseudoConfig {
    fn default() -> Self {
        Self { method: PseudoMethod::Lead3, seed: 0, salient_ratio: DEFAULT_SALIENT_RATIO }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub strategies: Vec<String>,
    /// Row the gain column is relative to.
    pub baseline: String,
    pub seed: u64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        let strategies = ["first", "random", "longest", "minimum", "oracle", "summscore"];
        Self {
            strategies: strategies.iter().map(|s| s.to_string()).collect(),
            baseline: String::from("first"),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportConfig {
    /// Share of the most extractive labels flagged for paraphrasing.
    pub share: f64,
}

impl Default for ExportConfig {
    fn default() -> Self {
        Self { share: 0.25 }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let config: Self = toml::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.estimation.validate().map_err(|e| invalid(e.to_string()))?;
        self.feature_spec()?;
        for name in &self.features.semantic {
            let kind: ScorerKind = name.parse().map_err(|e: summrank_core::Error| invalid(e.to_string()))?;
            if !kind.is_builtin() && !self.scorers.contains_key(name) {
                return Err(invalid(format!("semantic feature `{name}` has no [scorers.{name}] endpoint")));
            }
        }
        for (name, remote) in &self.scorers {
            if remote.batch_size == 0 || remote.batch_size > 64 {
                return Err(invalid(format!("scorer `{name}`: batch_size must be in 1..=64")));
            }
            if remote.max_in_flight == 0 || remote.attempts == 0 {
                return Err(invalid(format!("scorer `{name}`: max_in_flight and attempts must be positive")));
            }
        }
        self.strategies()?;
        if !(self.pseudo.salient_ratio > 0.0 && self.pseudo.salient_ratio <= 1.0) {
            return Err(invalid("pseudo.salient_ratio must be in (0, 1]"));
        }
        if !(self.export.share > 0.0 && self.export.share <= 1.0) {
            return Err(invalid("export.share must be in (0, 1]"));
        }
        Ok(())
    }

    pub fn feature_spec(&self) -> Result<FeatureSpec> {
        let kinds = self
            .features
            .semantic
            .iter()
            .map(|s| s.parse())
            .collect::<summrank_core::Result<Vec<ScorerKind>>>()
            .map_err(|e| invalid(e.to_string()))?;
        let mut seen = kinds.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != kinds.len() {
            return Err(invalid("duplicate semantic scorer"));
        }
        Ok(FeatureSpec::new(&kinds))
    }

    pub fn strategies(&self) -> Result<Vec<Strategy>> {
        self.evaluation
            .strategies
            .iter()
            .map(|s| s.parse().map_err(|e: summrank_core::Error| invalid(e.to_string())))
            .collect()
    }

    /// Canonical JSON form, as embedded in provenance headers.
    pub fn canonical_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(&self.canonical_json()).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// A configuration or input that fails validation.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct Invalid(pub String);

pub fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Invalid(msg.into()).into()
}
