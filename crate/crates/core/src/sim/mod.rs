//! Scenario-driven experiments: static and replanning policies under latency
//! noise and engine load, planner frontiers, and static-versus-trie gaps.

mod run;
mod scenario;
mod sweep;

pub use run::{admission_plan, run_scenario, PolicySummary, RequestRow, RunReport, ROW_HEADER, SUMMARY_HEADER};
pub use scenario::{
    estimated_annotations, prepare_file, AnnotationSource, LoadConfig, NoiseConfig, Policy, Prepared, RequestSample, Scenario, Slo,
    SweepConfig, SweepKind, WorldSource,
};
pub use sweep::{
    frontier_sweep, gap_auc, policy_gap_report, sweep_sources, write_frontier_csv, write_gap_csv, FrontierRow, GapRow,
    FRONTIER_HEADER, GAP_HEADER,
};
