use std::path::Path;

use serde::{Deserialize, Serialize};

use super::catalog::ModelCatalog;
use super::config::WorldConfig;
use super::template::WorkflowTemplate;
use super::world::GroundTruthWorld;
use crate::error::{Error, Result};
use crate::trie::ExecutionTrie;

/// The single JSON document a world is regenerated from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldDocument {
    pub catalog: ModelCatalog,
    pub template: WorkflowTemplate,
    pub world: WorldConfig,
    #[serde(default)]
    pub seed: u64,
}

/// Deserializes `text`, reporting the JSON path of the offending field.
pub(crate) fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(if path == "." { "<document>".to_string() } else { path }, e.into_inner().to_string())
    })
}

impl WorldDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: WorldDocument = parse_json(text)?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn validate(&self) -> Result<()> {
        self.catalog.validate()?;
        self.template.validate(&self.catalog)?;
        self.world.validate(&self.template, &self.catalog)
    }

    pub fn generate(&self) -> Result<GroundTruthWorld> {
        self.generate_with_seed(self.seed)
    }

    pub fn generate_with_seed(&self, seed: u64) -> Result<GroundTruthWorld> {
        GroundTruthWorld::generate(&self.template, &self.catalog, &self.world, seed)
    }

    pub fn trie(&self) -> Result<ExecutionTrie> {
        ExecutionTrie::build(&self.template, &self.catalog)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::presets;

    #[test]
    fn json_round_trip() {
        let doc = presets::w2_document(7);
        let back = WorldDocument::from_json(&doc.to_json()).unwrap();
        assert_eq!(back, doc);
    }

    #[test]
    fn schema_errors_name_the_field() {
        let mut v: serde_json::Value = serde_json::from_str(&presets::w2_document(7).to_json()).unwrap();
        v["catalog"]["models"][1]["latency_mean"] = serde_json::json!("slow");
        let err = WorldDocument::from_json(&v.to_string()).unwrap_err().to_string();
        assert!(err.contains("catalog.models[1].latency_mean"), "{err}");

        let mut v: serde_json::Value = serde_json::from_str(&presets::w2_document(7).to_json()).unwrap();
        v["template"]["stage_families"][0]["admissible_models"][0] = serde_json::json!("nope");
        let err = WorldDocument::from_json(&v.to_string()).unwrap_err().to_string();
        assert!(err.contains("template.stage_families[0].admissible_models[0]"), "{err}");
        assert!(err.contains("nope"), "{err}");
    }

    #[test]
    fn zero_requests_rejected() {
        let mut doc = presets::w2_document(7);
        doc.world.num_requests = 0;
        let err = doc.validate().unwrap_err().to_string();
        assert!(err.contains("world.num_requests"), "{err}");
    }

    #[test]
    fn out_of_range_probability_rejected() {
        let mut doc = presets::gs_example_document(1);
        if let crate::workload::ConditionalLaw::Table(t) = &mut doc.world.law {
            t.probs.insert("G".into(), 1.5);
        }
        let err = doc.validate().unwrap_err().to_string();
        assert!(err.contains("world.law.probs.G"), "{err}");
    }

    #[test]
    fn unknown_table_prefix_rejected() {
        let mut doc = presets::gs_example_document(1);
        if let crate::workload::ConditionalLaw::Table(t) = &mut doc.world.law {
            t.probs.insert("G/X".into(), 0.5);
        }
        let err = doc.generate().unwrap_err().to_string();
        assert!(err.contains("G/X"), "{err}");
    }
}
