use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Per-invocation latency noise of a model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatencyNoise {
    #[default]
    None,
    /// Multiplicative lognormal factor with unit mean.
    Lognormal { sigma: f64 },
}

impl LatencyNoise {
    pub fn sigma(&self) -> f64 {
        match *self {
            LatencyNoise::None => 0.0,
            LatencyNoise::Lognormal { sigma } => sigma,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub id: String,
    /// Dollars per invocation.
    pub cost_per_invocation: f64,
    /// Seconds.
    pub latency_mean: f64,
    #[serde(default)]
    pub latency_noise: LatencyNoise,
    pub engine_id: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelCatalog {
    pub engines: Vec<String>,
    pub models: Vec<ModelSpec>,
}

impl ModelCatalog {
    pub fn validate(&self) -> Result<()> {
        let engines: BTreeSet<&str> = self.engines.iter().map(String::as_str).collect();
        if engines.len() != self.engines.len() {
            return Err(Error::config("catalog.engines", "engine ids must be unique"));
        }
        if self.engines.len() > 64 {
            return Err(Error::config("catalog.engines", "at most 64 engines are supported"));
        }
        if self.models.is_empty() {
            return Err(Error::config("catalog.models", "catalog is empty"));
        }
        let mut seen = BTreeSet::new();
        for (i, m) in self.models.iter().enumerate() {
            let at = |field: &str| format!("catalog.models[{i}].{field}");
            if m.id.is_empty() || m.id.contains('/') {
                return Err(Error::config(at("id"), "model ids must be nonempty and contain no '/'"));
            }
            if !seen.insert(m.id.as_str()) {
                return Err(Error::config(at("id"), format!("duplicate model id `{}`", m.id)));
            }
            if !(m.cost_per_invocation.is_finite() && m.cost_per_invocation > 0.0) {
                return Err(Error::config(at("cost_per_invocation"), "must be finite and > 0"));
            }
            if !(m.latency_mean.is_finite() && m.latency_mean > 0.0) {
                return Err(Error::config(at("latency_mean"), "must be finite and > 0"));
            }
            let sigma = m.latency_noise.sigma();
            if !(sigma.is_finite() && sigma >= 0.0) {
                return Err(Error::config(at("latency_noise.sigma"), "must be finite and >= 0"));
            }
            if !engines.contains(m.engine_id.as_str()) {
                return Err(Error::config(
                    at("engine_id"),
                    format!("engine `{}` is not listed in catalog.engines", m.engine_id),
                ));
            }
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&ModelSpec> {
        self.models.iter().find(|m| m.id == id)
    }

    pub fn hash(&self) -> String {
        content_hash(self)
    }
}

/// Hex SHA-256 of the canonical JSON encoding.
pub(crate) fn content_hash<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("serializable");
    hex::encode(Sha256::digest(&bytes))
}
