use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::catalog::ModelCatalog;
use super::template::WorkflowTemplate;
use crate::error::{Error, Result};

/// Per-request difficulty `d_q ~ Normal(mean, sd)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DifficultyLaw {
    pub mean: f64,
    pub sd: f64,
}

impl Default for DifficultyLaw {
    fn default() -> Self {
        DifficultyLaw { mean: 0.0, sd: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeepKind {
    /// Logit offset `r_u * base_l + noise`, with a per-prefix row factor `r_u`.
    /// Conditional probabilities still depend on request difficulty.
    LogitRank1,
    /// Request-independent probability `alpha_u * beta_l`: the conditional
    /// matrix of each deep depth is exactly rank-1 when `noise_sd` is 0.
    ProbRank1,
}

/// Law for stages at depth 3 and deeper.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeepBlock {
    pub kind: DeepKind,
    #[serde(default)]
    pub row_loc: f64,
    #[serde(default)]
    pub row_sd: f64,
    #[serde(default)]
    pub noise_sd: f64,
}

/// Logistic conditional-accuracy law.
///
/// A stage running model `l` at depth `t` under prefix `u` succeeds (given
/// every earlier stage failed) with probability `sigmoid(o(u.l) - d_q)` where
/// `o = strength_l - depth_penalty * (t - 1)`, plus a per-node offset drawn
/// with sd `interaction_sd` at depth 2. Depth 3 and deeper follow `deep` when
/// given, otherwise the same rule as depth 2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogisticLaw {
    pub strength: BTreeMap<String, f64>,
    #[serde(default)]
    pub depth_penalty: f64,
    #[serde(default)]
    pub interaction_sd: f64,
    #[serde(default)]
    pub deep: Option<DeepBlock>,
}

/// Request-independent conditional probabilities keyed by prefix (`G/S`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableLaw {
    pub probs: BTreeMap<String, f64>,
    #[serde(default)]
    pub default: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConditionalLaw {
    Logistic(LogisticLaw),
    Table(TableLaw),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    pub num_requests: usize,
    #[serde(default)]
    pub difficulty: DifficultyLaw,
    pub law: ConditionalLaw,
}

fn finite(path: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(path, "must be finite"))
    }
}

fn nonneg(path: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::config(path, "must be finite and >= 0"))
    }
}

fn probability(path: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::config(path, format!("probability {v} is outside [0, 1]")))
    }
}

impl WorldConfig {
    /// Checks everything except prefix keys of a table law, which need the
    /// trie and are checked during generation.
    pub fn validate(&self, template: &WorkflowTemplate, _catalog: &ModelCatalog) -> Result<()> {
        if self.num_requests == 0 {
            return Err(Error::config("world.num_requests", "must be >= 1"));
        }
        if self.num_requests > u32::MAX as usize {
            return Err(Error::config("world.num_requests", "too large"));
        }
        finite("world.difficulty.mean", self.difficulty.mean)?;
        nonneg("world.difficulty.sd", self.difficulty.sd)?;
        match &self.law {
            ConditionalLaw::Logistic(law) => {
                for (id, s) in &law.strength {
                    finite(&format!("world.law.strength.{id}"), *s)?;
                }
                for fam in &template.stage_families {
                    for m in &fam.admissible_models {
                        if !law.strength.contains_key(m) {
                            return Err(Error::config(
                                "world.law.strength",
                                format!("no strength for admissible model `{m}`"),
                            ));
                        }
                    }
                }
                finite("world.law.depth_penalty", law.depth_penalty)?;
                nonneg("world.law.interaction_sd", law.interaction_sd)?;
                if let Some(deep) = &law.deep {
                    finite("world.law.deep.row_loc", deep.row_loc)?;
                    nonneg("world.law.deep.row_sd", deep.row_sd)?;
                    nonneg("world.law.deep.noise_sd", deep.noise_sd)?;
                }
            }
            ConditionalLaw::Table(law) => {
                probability("world.law.default", law.default)?;
                for (k, p) in &law.probs {
                    probability(&format!("world.law.probs.{k}"), *p)?;
                }
            }
        }
        Ok(())
    }
}
