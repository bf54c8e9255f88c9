use std::io::Write;

use serde::Serialize;

use super::scenario::{estimated_annotations, Prepared, SweepConfig, SweepKind};
use crate::error::Result;
use crate::planner::{select_path, select_static_plan, FamilyBinding, Objective, FEASIBILITY_TOLERANCE};
use crate::trie::{ExecutionTrie, NodeId};

/// Planner outcome at one bound for one annotation source, with the
/// selected node's true metrics alongside the planned ones.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrontierRow {
    pub source: String,
    pub bound: f64,
    pub path: Option<String>,
    pub planned: Option<(f64, f64, f64)>,
    pub achieved: Option<(f64, f64, f64)>,
    /// The true metrics honor the bound; `None` when nothing was selected.
    pub slo_met: Option<bool>,
}

fn sweep_objective(kind: SweepKind, bound: f64) -> Objective {
    match kind {
        SweepKind::MaxAccCost => Objective::max_acc_cost(bound),
        SweepKind::MinCostAcc => Objective::min_cost(bound),
    }
}

fn truth_at(truth: &ExecutionTrie, node: NodeId) -> (f64, f64, f64) {
    truth.metrics(node).expect("oracle trie is fully annotated")
}

/// Plans every bound of `grid` with each annotation source and scores the
/// selection against the oracle `truth`.
pub fn frontier_sweep(
    truth: &ExecutionTrie,
    sources: &[(String, ExecutionTrie)],
    kind: SweepKind,
    grid: &[f64],
) -> Vec<FrontierRow> {
    let mut rows = Vec::new();
    for (label, trie) in sources {
        for &bound in grid {
            let plan = select_path(&trie.view(), &sweep_objective(kind, bound));
            rows.push(match plan.selection {
                None => FrontierRow { source: label.clone(), bound, path: None, planned: None, achieved: None, slo_met: None },
                Some(s) => {
                    let achieved = truth_at(truth, s.node);
                    let met = match kind {
                        SweepKind::MaxAccCost => achieved.1 <= bound + FEASIBILITY_TOLERANCE,
                        SweepKind::MinCostAcc => achieved.0 >= bound - FEASIBILITY_TOLERANCE,
                    };
                    FrontierRow {
                        source: label.clone(),
                        bound,
                        path: Some(trie.prefix_key(s.node)),
                        planned: Some((s.acc, s.cost, s.lat)),
                        achieved: Some(achieved),
                        slo_met: Some(met),
                    }
                }
            });
        }
    }
    rows
}

/// Best static configuration against best trie path under one cost cap.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapRow {
    pub source: String,
    pub bound: f64,
    pub static_path: Option<String>,
    /// True accuracy of the static choice; 0 when none is feasible.
    pub static_acc: f64,
    pub trie_path: Option<String>,
    pub trie_acc: f64,
    pub delta: f64,
    /// Accuracies as the source's annotations predict them.
    pub planned_static_acc: f64,
    pub planned_trie_acc: f64,
}

/// Accuracy gained by choosing models per invocation instead of per stage
/// family, for every cost cap in `grid`. Both choices are made on the
/// source's annotations and scored with the oracle's accuracy.
pub fn policy_gap_report(truth: &ExecutionTrie, sources: &[(String, ExecutionTrie)], grid: &[f64]) -> Vec<GapRow> {
    let mut rows = Vec::new();
    for (label, trie) in sources {
        let binding = FamilyBinding::from_trie(trie);
        for &bound in grid {
            let o = Objective::max_acc_cost(bound);
            let fixed = select_static_plan(&trie.view(), &o, &binding).node();
            let free = select_path(&trie.view(), &o).node();
            let acc = |n: Option<NodeId>| n.map_or(0.0, |n| truth_at(truth, n).0);
            let (static_acc, trie_acc) = (acc(fixed), acc(free));
            let planned = |n: Option<NodeId>| n.and_then(|n| trie.metrics(n)).map_or(0.0, |m| m.0);
            rows.push(GapRow {
                source: label.clone(),
                bound,
                static_path: fixed.map(|n| trie.prefix_key(n)),
                static_acc,
                trie_path: free.map(|n| trie.prefix_key(n)),
                trie_acc,
                delta: trie_acc - static_acc,
                planned_static_acc: planned(fixed),
                planned_trie_acc: planned(free),
            });
        }
    }
    rows
}

/// Trapezoid area under one source's delta curve.
pub fn gap_auc(rows: &[GapRow], source: &str) -> f64 {
    let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.source == source).map(|r| (r.bound, r.delta)).collect();
    pts.windows(2).map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0)).sum()
}

/// Oracle plus each configured estimator, profiled from the scenario's world.
pub fn sweep_sources(p: &Prepared, cfg: &SweepConfig) -> Result<Vec<(String, ExecutionTrie)>> {
    let mut sources = vec![("oracle".to_string(), p.truth.clone())];
    for &m in &cfg.methods {
        sources.push((m.tag().to_string(), estimated_annotations(&p.world, m, cfg.coverage, cfg.profile_seed)?));
    }
    Ok(sources)
}

pub const FRONTIER_HEADER: [&str; 13] = [
    "scenario", "scenario_hash", "source", "kind", "bound", "path", "planned_acc", "planned_cost", "planned_lat", "achieved_acc", "achieved_cost",
    "achieved_lat", "slo_met",
];

/// Writes frontier rows tagged with the scenario name and hash.
pub fn write_frontier_csv(rows: &[FrontierRow], kind: SweepKind, scenario: (&str, &str), out: impl Write) -> Result<()> {
    let kind = kind.name();
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FRONTIER_HEADER)?;
    for r in rows {
        w.write_record([
            scenario.0.to_string(),
            scenario.1.to_string(),
            r.source.clone(),
            kind.to_string(),
            r.bound.to_string(),
            r.path.clone().unwrap_or_default(),
            opt(r.planned.map(|p| p.0)),
            opt(r.planned.map(|p| p.1)),
            opt(r.planned.map(|p| p.2)),
            opt(r.achieved.map(|p| p.0)),
            opt(r.achieved.map(|p| p.1)),
            opt(r.achieved.map(|p| p.2)),
            r.slo_met.map_or(String::new(), |b| b.to_string()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub const GAP_HEADER: [&str; 11] = [
    "scenario", "scenario_hash", "source", "bound", "static_path", "static_acc", "trie_path", "trie_acc", "delta", "planned_static_acc",
    "planned_trie_acc",
];

pub fn write_gap_csv(rows: &[GapRow], scenario: (&str, &str), out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(GAP_HEADER)?;
    for r in rows {
        w.write_record([
            scenario.0.to_string(),
            scenario.1.to_string(),
            r.source.clone(),
            r.bound.to_string(),
            r.static_path.clone().unwrap_or_default(),
            r.static_acc.to_string(),
            r.trie_path.clone().unwrap_or_default(),
            r.trie_acc.to_string(),
            r.delta.to_string(),
            r.planned_static_acc.to_string(),
            r.planned_trie_acc.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
