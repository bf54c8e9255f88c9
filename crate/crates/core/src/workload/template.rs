use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::catalog::{content_hash, ModelCatalog};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageKind {
    ConfigurableLlm,
    Tool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageFamily {
    pub family_id: String,
    pub kind: StageKind,
    #[serde(default)]
    pub admissible_models: Vec<String>,
    #[serde(default)]
    pub tool_latency: f64,
    #[serde(default)]
    pub tool_cost: f64,
}

impl StageFamily {
    pub fn llm(id: &str, models: &[&str]) -> Self {
        StageFamily {
            family_id: id.into(),
            kind: StageKind::ConfigurableLlm,
            admissible_models: models.iter().map(|m| m.to_string()).collect(),
            tool_latency: 0.0,
            tool_cost: 0.0,
        }
    }

    pub fn tool(id: &str, latency: f64, cost: f64) -> Self {
        StageFamily {
            family_id: id.into(),
            kind: StageKind::Tool,
            admissible_models: Vec::new(),
            tool_latency: latency,
            tool_cost: cost,
        }
    }
}

/// Workflow template.
///
/// Configurable families are invoked in list order, one per depth; the last
/// configurable family is the refinement loop and repeats until `max_depth`.
/// A tool family runs after every invocation of the nearest configurable
/// family that precedes it (leading tools attach to the first one), so tool
/// overhead is a fixed per-depth latency and cost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkflowTemplate {
    pub stage_families: Vec<StageFamily>,
    pub max_depth: usize,
    pub terminal_depths: BTreeSet<usize>,
}

impl WorkflowTemplate {
    /// One generation family followed by a repeated repair family.
    pub fn gen_repair(gen: &[&str], repair: &[&str], max_depth: usize) -> Self {
        WorkflowTemplate {
            stage_families: vec![StageFamily::llm("generate", gen), StageFamily::llm("repair", repair)],
            max_depth,
            terminal_depths: (1..=max_depth).collect(),
        }
    }

    /// A single repeated family (reflection loop).
    pub fn repeated(models: &[&str], max_depth: usize) -> Self {
        WorkflowTemplate {
            stage_families: vec![StageFamily::llm("reflect", models)],
            max_depth,
            terminal_depths: (1..=max_depth).collect(),
        }
    }

    pub fn with_terminal_depths(mut self, depths: impl IntoIterator<Item = usize>) -> Self {
        self.terminal_depths = depths.into_iter().collect();
        self
    }

    pub fn validate(&self, catalog: &ModelCatalog) -> Result<()> {
        if self.max_depth == 0 {
            return Err(Error::config("template.max_depth", "must be >= 1"));
        }
        if let Some(&d) = self.terminal_depths.iter().find(|&&d| d == 0 || d > self.max_depth) {
            return Err(Error::config(
                "template.terminal_depths",
                format!("depth {d} is outside 1..={}", self.max_depth),
            ));
        }
        if !self.terminal_depths.contains(&self.max_depth) {
            return Err(Error::config("template.terminal_depths", "must contain max_depth"));
        }
        let mut ids = BTreeSet::new();
        let mut configurable = 0;
        for (i, f) in self.stage_families.iter().enumerate() {
            let at = |field: &str| format!("template.stage_families[{i}].{field}");
            if !ids.insert(f.family_id.as_str()) {
                return Err(Error::config(at("family_id"), format!("duplicate family `{}`", f.family_id)));
            }
            if !(f.tool_latency.is_finite() && f.tool_latency >= 0.0) {
                return Err(Error::config(at("tool_latency"), "must be finite and >= 0"));
            }
            if !(f.tool_cost.is_finite() && f.tool_cost >= 0.0) {
                return Err(Error::config(at("tool_cost"), "must be finite and >= 0"));
            }
            match f.kind {
                StageKind::ConfigurableLlm => {
                    configurable += 1;
                    if f.admissible_models.is_empty() {
                        return Err(Error::config(at("admissible_models"), "configurable family needs models"));
                    }
                    let mut seen = BTreeSet::new();
                    for (j, m) in f.admissible_models.iter().enumerate() {
                        if catalog.get(m).is_none() {
                            return Err(Error::config(
                                format!("template.stage_families[{i}].admissible_models[{j}]"),
                                format!("unknown model id `{m}`"),
                            ));
                        }
                        if !seen.insert(m) {
                            return Err(Error::config(
                                format!("template.stage_families[{i}].admissible_models[{j}]"),
                                format!("duplicate model id `{m}`"),
                            ));
                        }
                    }
                }
                StageKind::Tool => {
                    if !f.admissible_models.is_empty() {
                        return Err(Error::config(at("admissible_models"), "tool families take no models"));
                    }
                }
            }
        }
        if configurable == 0 {
            return Err(Error::config("template.stage_families", "no configurable family"));
        }
        Ok(())
    }

    fn configurable_indices(&self) -> Vec<usize> {
        self.stage_families
            .iter()
            .enumerate()
            .filter(|(_, f)| f.kind == StageKind::ConfigurableLlm)
            .map(|(i, _)| i)
            .collect()
    }

    /// Index into `stage_families` of the configurable family invoked at `depth` (1-based).
    pub fn family_at_depth(&self, depth: usize) -> usize {
        let conf = self.configurable_indices();
        conf[(depth - 1).min(conf.len() - 1)]
    }

    /// Tool `(latency, cost)` added to every stage executed at `depth`.
    pub fn tool_overhead(&self, depth: usize) -> (f64, f64) {
        let conf = self.configurable_indices();
        let slot = (depth - 1).min(conf.len() - 1);
        let (mut lat, mut cost) = (0.0, 0.0);
        let mut owner: Option<usize> = None;
        for (i, f) in self.stage_families.iter().enumerate() {
            match f.kind {
                StageKind::ConfigurableLlm => {
                    owner = Some(conf.iter().position(|&c| c == i).expect("configurable"));
                }
                StageKind::Tool => {
                    if owner.unwrap_or(0) == slot {
                        lat += f.tool_latency;
                        cost += f.tool_cost;
                    }
                }
            }
        }
        (lat, cost)
    }

    pub fn hash(&self) -> String {
        content_hash(self)
    }
}
