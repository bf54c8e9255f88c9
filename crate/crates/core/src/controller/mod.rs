//! Receding-horizon execution: reroot at the realized prefix, re-plan the
//! remaining suffix against the remaining budget, take one step.

mod load;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use load::{fit_slowdown_curve, LoadMode, LoadModel, SlowdownCurve};

use crate::error::{Error, Result};
use crate::planner::{
    fastest_terminal, select_path_with, LoadAdjust, Objective, PlanResult, SearchContext, FEASIBILITY_TOLERANCE,
};
use crate::trie::{ExecutionTrie, ModelIdx, NodeId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Running,
    TerminatedSuccess,
    TerminatedBudget,
    TerminatedExhausted,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Running => "running",
            Status::TerminatedSuccess => "terminated_success",
            Status::TerminatedBudget => "terminated_budget",
            Status::TerminatedExhausted => "terminated_exhausted",
        }
    }
}

/// Outcome of one stage invocation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageResult {
    pub model: ModelIdx,
    /// Seconds.
    pub latency: f64,
    pub cost: f64,
    /// The workflow stopped with an accepted answer.
    pub workflow_terminated: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RequestContext {
    pub objective: Objective,
    pub prefix: Vec<ModelIdx>,
    pub elapsed: f64,
    pub spent: f64,
    pub history: Vec<StageResult>,
    pub status: Status,
    /// Stop once elapsed time exceeds the latency cap.
    pub hard_stop: bool,
}

impl RequestContext {
    pub fn new(objective: Objective) -> Self {
        RequestContext {
            objective,
            prefix: Vec::new(),
            elapsed: 0.0,
            spent: 0.0,
            history: Vec::new(),
            status: Status::Running,
            hard_stop: true,
        }
    }

    pub fn is_running(&self) -> bool {
        self.status == Status::Running
    }

    /// Seconds left under the latency cap, if any.
    pub fn remaining_latency(&self) -> Option<f64> {
        self.objective.lat_cap.map(|l| l - self.elapsed)
    }

    /// Records a stage and updates status. The trie bounds the prefix: a
    /// request that fails at a leaf is exhausted.
    pub fn update(&mut self, trie: &ExecutionTrie, stage: StageResult) -> Result<()> {
        if self.status != Status::Running {
            return Err(Error::AlreadyTerminated(self.status));
        }
        if !(stage.latency >= 0.0 && stage.cost >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "stage latency and cost must be nonnegative, got {} and {}",
                stage.latency, stage.cost
            )));
        }
        self.prefix.push(stage.model);
        let node = trie.find(&self.prefix).ok_or_else(|| Error::UnknownPrefix(trie.path_key(&self.prefix)))?;
        self.elapsed += stage.latency;
        self.spent += stage.cost;
        self.history.push(stage);
        self.status = if stage.workflow_terminated {
            Status::TerminatedSuccess
        } else if self.hard_stop && self.objective.lat_cap.is_some_and(|l| self.elapsed > l + FEASIBILITY_TOLERANCE) {
            Status::TerminatedBudget
        } else if trie.node(node).children.is_empty() {
            Status::TerminatedExhausted
        } else {
            Status::Running
        };
        Ok(())
    }

    /// The controller chose to stop here.
    pub fn terminate(&mut self) -> Result<()> {
        if self.status != Status::Running {
            return Err(Error::AlreadyTerminated(self.status));
        }
        self.status = Status::TerminatedExhausted;
        Ok(())
    }
}

/// Functional form of [`RequestContext::update`].
pub fn update_after_stage(trie: &ExecutionTrie, ctx: &RequestContext, stage: StageResult) -> Result<RequestContext> {
    let mut next = ctx.clone();
    next.update(trie, stage)?;
    Ok(next)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Action {
    Invoke(ModelIdx),
    Terminate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub action: Action,
    /// Node the current plan ends at, if any annotated node qualifies.
    pub target: Option<NodeId>,
    /// Models remaining on the planned suffix.
    pub suffix: Vec<ModelIdx>,
    /// Predicted remaining `(accuracy gain, cost, latency)` to the target.
    pub predicted: Option<(f64, f64, f64)>,
    /// The plan met every constraint; false when the fallback rule decided.
    pub feasible: bool,
    pub plan: PlanResult,
}

/// Chooses the next step for a running request.
///
/// Plans on the subtrie rooted at the realized prefix with the spent cost and
/// elapsed latency as offsets. If nothing is feasible the request stops when
/// it may, and otherwise heads for the terminal node with the smallest
/// predicted remaining latency.
pub fn next_action(trie: &ExecutionTrie, ctx: &RequestContext, load: Option<&LoadAdjust>) -> Decision {
    let view = match trie.reroot(&ctx.prefix) {
        Ok(v) => v,
        Err(_) => return stop(PlanResult::default(), None, false),
    };
    let sctx = SearchContext { spent: ctx.spent, elapsed: ctx.elapsed, load };
    let plan = select_path_with(&view, &ctx.objective, &sctx);
    let u = view.root();
    if !ctx.is_running() {
        return stop(plan, None, false);
    }
    let (chosen, feasible) = match plan.selection {
        Some(s) => (Some(s), true),
        None if u != NodeId::ROOT && trie.node(u).terminal_eligible => (None, false),
        None => (fastest_terminal(&view, &sctx), false),
    };
    let Some(sel) = chosen else {
        if u != NodeId::ROOT && trie.node(u).terminal_eligible || trie.node(u).children.is_empty() {
            return stop(plan, None, false);
        }
        // Nothing annotated below: head for the first terminal in path order.
        let target = view.ids().find(|&v| v != NodeId::ROOT && trie.node(v).terminal_eligible && v != u);
        let suffix = target.map(|t| view.suffix(t).to_vec()).unwrap_or_default();
        let action = suffix.first().map_or(Action::Terminate, |&m| Action::Invoke(m));
        return Decision { action, target, suffix, predicted: None, feasible: false, plan };
    };
    let suffix = view.suffix(sel.node).to_vec();
    let predicted = Some((
        sel.acc - trie.metrics(u).map_or(0.0, |m| m.0),
        sel.eff_cost - ctx.spent,
        sel.eff_lat - ctx.elapsed,
    ));
    let action = suffix.first().map_or(Action::Terminate, |&m| Action::Invoke(m));
    Decision { action, target: Some(sel.node), suffix, predicted, feasible, plan }
}

fn stop(plan: PlanResult, target: Option<NodeId>, feasible: bool) -> Decision {
    Decision { action: Action::Terminate, target, suffix: Vec::new(), predicted: None, feasible, plan }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OverheadStats {
    pub repetitions: usize,
    /// Seconds per call.
    pub mean: f64,
    pub p50: f64,
    pub p99: f64,
    pub max: f64,
}

/// Times `next_action` at the root of `trie` for a fresh request.
pub fn replanning_overhead_probe(trie: &ExecutionTrie, objective: &Objective, repetitions: usize) -> OverheadStats {
    let ctx = RequestContext::new(*objective);
    let mut samples = Vec::with_capacity(repetitions);
    for _ in 0..repetitions.max(1) {
        let t = Instant::now();
        let d = next_action(trie, &ctx, None);
        samples.push(t.elapsed().as_secs_f64());
        std::hint::black_box(d);
    }
    samples.sort_by(f64::total_cmp);
    let at = |q: f64| samples[((samples.len() - 1) as f64 * q).round() as usize];
    OverheadStats {
        repetitions: samples.len(),
        mean: samples.iter().sum::<f64>() / samples.len() as f64,
        p50: at(0.5),
        p99: at(0.99),
        max: samples[samples.len() - 1],
    }
}
