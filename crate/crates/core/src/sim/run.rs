use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::scenario::{Policy, Prepared};
use crate::controller::{next_action, Action, RequestContext, StageResult, Status};
use crate::error::{Error, Result};
use crate::planner::{
    select_path, select_static_plan, static_candidates, FamilyBinding, LoadAdjust, Objective, PlanResult,
};
use crate::rng::{self, Stream};
use crate::trie::{ExecutionTrie, ModelIdx, NodeId};
use crate::workload::RequestId;

/// One request under one policy.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RequestRow {
    pub request_id: RequestId,
    pub policy: Policy,
    /// Path planned at admission.
    pub planned_path: String,
    pub realized_path: String,
    pub stages: usize,
    pub success: bool,
    pub cost: f64,
    pub latency: f64,
    /// `latency > l`; false without a latency cap.
    pub violated: bool,
    pub status: Status,
    /// No plan met the constraints at admission.
    pub admission_fallback: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolicySummary {
    pub policy: Policy,
    pub requests: usize,
    pub accuracy: f64,
    pub mean_cost: f64,
    pub mean_latency: f64,
    pub violations: usize,
    pub violation_rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub scenario: String,
    pub scenario_hash: String,
    pub objective: Objective,
    pub with_replacement: bool,
    /// Grouped by policy in scenario order, then by request in sample order.
    pub rows: Vec<RequestRow>,
    pub summaries: Vec<PolicySummary>,
}

pub const ROW_HEADER: [&str; 13] = [
    "scenario", "request_id", "policy", "planned_path", "realized_path", "stages", "success", "cost", "latency",
    "violated", "status", "admission_fallback", "objective",
];

pub const SUMMARY_HEADER: [&str; 12] = [
    "scenario", "scenario_hash", "policy", "objective", "slo", "requests", "accuracy", "mean_cost", "mean_latency",
    "violations", "violation_rate", "with_replacement",
];

impl RunReport {
    pub fn summary(&self, policy: Policy) -> Option<&PolicySummary> {
        self.summaries.iter().find(|s| s.policy == policy)
    }

    pub fn rows_for(&self, policy: Policy) -> impl Iterator<Item = &RequestRow> {
        self.rows.iter().filter(move |r| r.policy == policy)
    }

    pub fn write_rows_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(ROW_HEADER)?;
        let objective = self.objective.to_string();
        for r in &self.rows {
            w.write_record([
                self.scenario.clone(),
                r.request_id.to_string(),
                r.policy.name().to_string(),
                r.planned_path.clone(),
                r.realized_path.clone(),
                r.stages.to_string(),
                r.success.to_string(),
                r.cost.to_string(),
                r.latency.to_string(),
                r.violated.to_string(),
                r.status.name().to_string(),
                r.admission_fallback.to_string(),
                objective.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(SUMMARY_HEADER)?;
        let slo = self.objective.lat_cap.map_or(String::new(), |l| l.to_string());
        for s in &self.summaries {
            w.write_record([
                self.scenario.clone(),
                self.scenario_hash.clone(),
                s.policy.name().to_string(),
                self.objective.to_string(),
                slo.clone(),
                s.requests.to_string(),
                s.accuracy.to_string(),
                s.mean_cost.to_string(),
                s.mean_latency.to_string(),
                s.violations.to_string(),
                s.violation_rate.to_string(),
                self.with_replacement.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs every policy of the scenario over the request sample.
///
/// A stage's realized latency is the world's latency for that request and
/// prefix, times a unit-mean lognormal draw keyed by scenario seed, request
/// and prefix (so all policies see the same draw for the same prefix), times
/// the engine's slowdown at its queue depth when the stage starts.
pub fn run_scenario(p: &Prepared) -> Result<RunReport> {
    let trie = &p.planning;
    if trie.ids().skip(1).all(|id| trie.annotation(id).is_none()) {
        return Err(Error::InvalidArgument("planning trie carries no annotations".into()));
    }
    let binding = FamilyBinding::from_trie(trie);
    let static_plan = select_static_plan(&trie.view(), &p.objective, &binding);
    let static_target = match static_plan.selection {
        Some(s) => Some((s.node, false)),
        None => fastest_static(trie, &binding).map(|n| (n, true)),
    };
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for &policy in &p.scenario.policies {
        let start = rows.len();
        let per_request: Vec<Result<RequestRow>> = p
            .requests
            .par_iter()
            .enumerate()
            .map(|(i, &q)| match policy {
                Policy::Static => run_static(p, q, i, static_target),
                Policy::Dynamic | Policy::DynamicLoadAware => run_dynamic(p, q, i, policy),
            })
            .collect();
        for r in per_request {
            rows.push(r?);
        }
        summaries.push(summarize(policy, &rows[start..]));
    }
    Ok(RunReport {
        scenario: p.scenario.name.clone(),
        scenario_hash: p.hash.clone(),
        objective: p.objective,
        with_replacement: p.with_replacement,
        rows,
        summaries,
    })
}

fn summarize(policy: Policy, rows: &[RequestRow]) -> PolicySummary {
    let n = rows.len().max(1) as f64;
    let violations = rows.iter().filter(|r| r.violated).count();
    PolicySummary {
        policy,
        requests: rows.len(),
        accuracy: rows.iter().filter(|r| r.success).count() as f64 / n,
        mean_cost: rows.iter().map(|r| r.cost).sum::<f64>() / n,
        mean_latency: rows.iter().map(|r| r.latency).sum::<f64>() / n,
        violations,
        violation_rate: violations as f64 / n,
    }
}

/// Static configuration with the smallest expected latency.
fn fastest_static(trie: &ExecutionTrie, binding: &FamilyBinding) -> Option<NodeId> {
    static_candidates(&trie.view(), binding)
        .into_iter()
        .filter_map(|v| trie.annotation(v).map(|a| (a.lat, a.cost, v)))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)))
        .map(|t| t.2)
}

struct Execution<'a> {
    p: &'a Prepared,
    q: RequestId,
    arrival: f64,
    ctx: RequestContext,
}

impl<'a> Execution<'a> {
    fn new(p: &'a Prepared, q: RequestId, index: usize) -> Self {
        let mut ctx = RequestContext::new(p.objective);
        ctx.hard_stop = p.scenario.hard_stop;
        let arrival = p.scenario.load.as_ref().map_or(0.0, |l| l.arrival_interval * index as f64);
        Execution { p, q, arrival, ctx }
    }

    fn queue_depths(&self) -> Vec<f64> {
        let engines = &self.p.world.catalog().engines;
        match &self.p.scenario.load {
            Some(load) => load.depths_at(engines, self.arrival + self.ctx.elapsed),
            None => vec![0.0; engines.len()],
        }
    }

    fn step(&mut self, m: ModelIdx) -> Result<()> {
        let world = &self.p.world;
        let s = world.structure();
        let mut path = self.ctx.prefix.clone();
        path.push(m);
        let node = s.find(&path).ok_or_else(|| Error::UnknownPrefix(s.path_key(&path)))?;
        let sigma = self.p.scenario.noise.sigma;
        let noise = if sigma > 0.0 {
            let k = rng::key(self.p.scenario.seed, Stream::ScenarioNoise, u64::from(self.q), world.prefix_hash(node));
            rng::lognormal_unit_mean(sigma, rng::standard_normal(k))
        } else {
            1.0
        };
        let slowdown = match &self.p.scenario.load {
            Some(load) => {
                let e = s.engine_of(node).expect("non-root") as usize;
                let engine = &world.catalog().engines[e];
                let depth = self.queue_depths()[e];
                load.truth.engines.get(engine).map_or(1.0, |c| c.slowdown(depth))
            }
            None => 1.0,
        };
        let stage = StageResult {
            model: m,
            latency: world.stage_latency(self.q, node) * noise * slowdown,
            cost: world.stage_cost(self.q, node),
            workflow_terminated: world.node_outcome(self.q, node),
        };
        self.ctx.update(s, stage)
    }

    fn finish(self, policy: Policy, planned: &[ModelIdx], admission_fallback: bool) -> RequestRow {
        let s = self.p.world.structure();
        let c = self.ctx;
        RequestRow {
            request_id: self.q,
            policy,
            planned_path: s.path_key(planned),
            realized_path: s.path_key(&c.prefix),
            stages: c.prefix.len(),
            success: c.status == Status::TerminatedSuccess,
            cost: c.spent,
            latency: c.elapsed,
            violated: c.objective.lat_cap.is_some_and(|l| c.elapsed > l),
            status: c.status,
            admission_fallback,
        }
    }
}

fn run_static(p: &Prepared, q: RequestId, index: usize, target: Option<(NodeId, bool)>) -> Result<RequestRow> {
    let mut ex = Execution::new(p, q, index);
    let (path, fallback) = match target {
        Some((node, fallback)) => (p.planning.node(node).prefix.clone(), fallback),
        None => (Vec::new(), true),
    };
    for &m in &path {
        if !ex.ctx.is_running() {
            break;
        }
        ex.step(m)?;
    }
    if ex.ctx.is_running() {
        ex.ctx.terminate()?;
    }
    Ok(ex.finish(Policy::Static, &path, fallback))
}

fn run_dynamic(p: &Prepared, q: RequestId, index: usize, policy: Policy) -> Result<RequestRow> {
    let mut ex = Execution::new(p, q, index);
    let mut planned: Option<(Vec<ModelIdx>, bool)> = None;
    while ex.ctx.is_running() {
        let adjust: Option<LoadAdjust> = match (policy, &p.load_model) {
            (Policy::DynamicLoadAware, Some(model)) => Some(model.adjust(&p.world.catalog().engines, &ex.queue_depths())),
            _ => None,
        };
        let d = next_action(&p.planning, &ex.ctx, adjust.as_ref());
        if planned.is_none() {
            planned = Some((d.suffix.clone(), !d.feasible));
        }
        match d.action {
            Action::Terminate => ex.ctx.terminate()?,
            Action::Invoke(m) => ex.step(m)?,
        }
    }
    let (path, fallback) = planned.unwrap_or_default();
    Ok(ex.finish(policy, &path, fallback))
}

/// Offline plan of the scenario objective on the planning annotations.
pub fn admission_plan(p: &Prepared) -> PlanResult {
    select_path(&p.planning.view(), &p.objective)
}
