use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Annotation, ExecutionTrie, NodeId, Support};
use crate::error::{Error, Result};
use crate::workload::{parse_json, ModelCatalog, WorkflowTemplate};

pub const ANNOTATION_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRecord {
    pub acc: f64,
    pub cost: f64,
    pub lat: f64,
    pub n_acc: u64,
    pub n_cost: u64,
    pub n_lat: u64,
}

/// Versioned annotation document keyed by slash-joined prefixes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationFile {
    pub version: u32,
    pub template_hash: String,
    pub catalog_hash: String,
    /// Free-form provenance such as the estimator that produced the file.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
    pub nodes: BTreeMap<String, NodeRecord>,
}

impl AnnotationFile {
    pub fn from_trie(trie: &ExecutionTrie) -> Self {
        let nodes = trie
            .ids()
            .filter_map(|id| {
                trie.annotation(id).map(|a| {
                    (
                        trie.prefix_key(id),
                        NodeRecord {
                            acc: a.acc,
                            cost: a.cost,
                            lat: a.lat,
                            n_acc: a.support.n_acc,
                            n_cost: a.support.n_cost,
                            n_lat: a.support.n_lat,
                        },
                    )
                })
            })
            .collect();
        AnnotationFile {
            version: ANNOTATION_VERSION,
            template_hash: trie.template_hash().to_string(),
            catalog_hash: trie.catalog_hash().to_string(),
            meta: BTreeMap::new(),
            nodes,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        // Check the version before the body so old files fail clearly.
        #[derive(Deserialize)]
        struct Header {
            version: u32,
        }
        let header: Header = parse_json(text)?;
        if header.version != ANNOTATION_VERSION {
            return Err(Error::Version { found: header.version, expected: ANNOTATION_VERSION });
        }
        parse_json(text)
    }

    /// Applies the file to a freshly built trie. Hash mismatches are errors
    /// unless `force` is set; prefixes absent from the file stay unannotated.
    pub fn apply(&self, template: &WorkflowTemplate, catalog: &ModelCatalog, force: bool) -> Result<ExecutionTrie> {
        let mut trie = ExecutionTrie::build(template, catalog)?;
        if !force {
            if self.template_hash != trie.template_hash() {
                return Err(Error::HashMismatch {
                    what: "template",
                    found: self.template_hash.clone(),
                    expected: trie.template_hash().to_string(),
                });
            }
            if self.catalog_hash != trie.catalog_hash() {
                return Err(Error::HashMismatch {
                    what: "catalog",
                    found: self.catalog_hash.clone(),
                    expected: trie.catalog_hash().to_string(),
                });
            }
        }
        for (key, r) in &self.nodes {
            let id = trie.find_key(key)?;
            if id == NodeId::ROOT {
                return Err(Error::UnknownPrefix(String::new()));
            }
            let field = |name: &str| format!("nodes.{key}.{name}");
            if !(0.0..=1.0).contains(&r.acc) {
                return Err(Error::Malformed { field: field("acc"), message: format!("{} is outside [0, 1]", r.acc) });
            }
            for (name, v) in [("cost", r.cost), ("lat", r.lat)] {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::Malformed { field: field(name), message: format!("{v} must be finite and >= 0") });
                }
            }
            trie.set_annotation(
                id,
                Some(Annotation {
                    acc: r.acc,
                    cost: r.cost,
                    lat: r.lat,
                    support: Support { n_acc: r.n_acc, n_cost: r.n_cost, n_lat: r.n_lat },
                }),
            );
        }
        Ok(trie)
    }
}

pub fn save_annotations(trie: &ExecutionTrie, destination: impl AsRef<Path>) -> Result<()> {
    std::fs::write(destination, AnnotationFile::from_trie(trie).to_json())?;
    Ok(())
}

pub fn load_annotations(
    source: impl AsRef<Path>,
    template: &WorkflowTemplate,
    catalog: &ModelCatalog,
    force: bool,
) -> Result<ExecutionTrie> {
    AnnotationFile::from_json(&std::fs::read_to_string(source)?)?.apply(template, catalog, force)
}
