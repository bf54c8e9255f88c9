//! Annotated execution tries for bounded agentic workflows: sparse cascade
//! profiling, column-mean estimation, constrained path selection and
//! receding-horizon control, all checked against synthetic ground truth.

pub mod controller;
pub mod planner;
pub mod profiler;
pub mod error;
pub mod estimators;
pub mod rng;
pub mod sim;
pub mod trie;
pub mod workload;

pub use error::{Error, Result};
pub use trie::{build_trie, check_monotonicity, Annotation, ExecutionTrie, ModelIdx, NodeId, TrieView};
pub use workload::{generate_world, true_column_means, GroundTruthWorld, ModelCatalog, TraceRecord, WorkflowTemplate};
