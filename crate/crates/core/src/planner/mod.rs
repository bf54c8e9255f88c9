//! Constrained path selection over an annotated (sub)trie.

mod objective;
mod search;

pub use objective::{Goal, Objective};
pub use search::{
    fastest_terminal, select_path, select_path_exhaustive, select_path_exhaustive_with, select_path_with, select_static_plan,
    select_static_plan_with, static_candidates, Binding, FamilyBinding, LoadAdjust, PlanResult, SearchContext,
    Selection, FEASIBILITY_TOLERANCE,
};
