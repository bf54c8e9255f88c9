//! Workflow templates, model catalogs and synthetic ground-truth worlds.

mod catalog;
mod config;
mod document;
pub mod presets;
mod template;
mod world;

pub use catalog::{LatencyNoise, ModelCatalog, ModelSpec};
pub use config::{ConditionalLaw, DeepBlock, DeepKind, DifficultyLaw, LogisticLaw, TableLaw, WorldConfig};
pub use document::WorldDocument;
pub(crate) use document::parse_json;
pub use template::{StageFamily, StageKind, WorkflowTemplate};
pub use world::{generate_world, sigmoid, true_column_means, GroundTruthWorld, NodeLaw, RequestId, TraceRecord, TrueMeans};
