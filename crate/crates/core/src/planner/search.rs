use std::cmp::Ordering;
use std::io::Write;
use std::time::{Duration, Instant};

use super::objective::{Goal, Objective};
use crate::error::Result;
use crate::trie::{ExecutionTrie, ModelIdx, NodeId, TrieView};

/// Slack allowed on every constraint, shared by all planners.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;

/// Per-engine latency inflation applied to suffix stages.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LoadAdjust {
    /// Extra seconds per engine, added once for every engine a suffix uses.
    pub delay: Vec<f64>,
    /// Multiplier per engine on the latency increment of each stage it runs.
    /// Empty means no multiplicative inflation.
    pub multiplier: Vec<f64>,
}

impl LoadAdjust {
    fn multiplicative(&self) -> bool {
        self.multiplier.iter().any(|&m| m != 1.0)
    }

    fn delay_sum(&self, mask: u64) -> f64 {
        let mut total = 0.0;
        for (e, d) in self.delay.iter().enumerate() {
            if mask >> e & 1 == 1 {
                total += d;
            }
        }
        total
    }
}

/// Where a search starts from: cost already spent and latency already
/// elapsed on the realized prefix, plus an optional load snapshot.
#[derive(Clone, Copy, Debug, Default)]
pub struct SearchContext<'a> {
    pub spent: f64,
    pub elapsed: f64,
    pub load: Option<&'a LoadAdjust>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Selection {
    pub node: NodeId,
    /// Annotation of the selected node.
    pub acc: f64,
    pub cost: f64,
    pub lat: f64,
    /// `spent + C(v) - C(root)`.
    pub eff_cost: f64,
    /// `elapsed + T(v) - T(root)`, load-inflated.
    pub eff_lat: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Binding {
    Accuracy,
    Cost,
    Latency,
    /// Each constraint alone is satisfiable but not all together.
    Joint,
    /// No annotated terminal-eligible node in the view.
    NoCandidates,
}

impl Binding {
    pub fn name(self) -> &'static str {
        match self {
            Binding::Accuracy => "acc",
            Binding::Cost => "cost",
            Binding::Latency => "lat",
            Binding::Joint => "joint",
            Binding::NoCandidates => "no_candidates",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PlanResult {
    pub selection: Option<Selection>,
    /// Set exactly when `selection` is `None`.
    pub binding: Option<Binding>,
    pub nodes_expanded: usize,
    pub nodes_pruned: usize,
    /// Roots of subtrees skipped by pruning (each root itself was expanded).
    pub pruned_roots: Vec<NodeId>,
    pub skipped_unannotated: usize,
    pub wall_time: Duration,
}

impl PlanResult {
    pub fn is_feasible(&self) -> bool {
        self.selection.is_some()
    }

    pub fn node(&self) -> Option<NodeId> {
        self.selection.map(|s| s.node)
    }

    /// Same selection and infeasibility verdict, ignoring counters and timing.
    pub fn same_decision(&self, other: &PlanResult) -> bool {
        self.selection == other.selection && self.binding == other.binding
    }

    pub const CSV_HEADER: [&'static str; 12] = [
        "objective", "status", "path", "acc", "cost", "lat", "eff_cost", "eff_lat", "binding",
        "nodes_expanded", "nodes_pruned", "skipped_unannotated",
    ];

    pub fn csv_record(&self, trie: &ExecutionTrie, objective: &Objective) -> Vec<String> {
        let mut row = vec![objective.to_string()];
        match &self.selection {
            Some(s) => row.extend([
                "selected".to_string(),
                trie.prefix_key(s.node),
                s.acc.to_string(),
                s.cost.to_string(),
                s.lat.to_string(),
                s.eff_cost.to_string(),
                s.eff_lat.to_string(),
                String::new(),
            ]),
            None => {
                row.extend(["infeasible".to_string()]);
                row.extend(std::iter::repeat_n(String::new(), 6));
                row.push(self.binding.map_or("", Binding::name).to_string());
            }
        }
        row.extend([self.nodes_expanded.to_string(), self.nodes_pruned.to_string(), self.skipped_unannotated.to_string()]);
        row
    }

    pub fn write_csv(&self, trie: &ExecutionTrie, objective: &Objective, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::CSV_HEADER)?;
        w.write_record(self.csv_record(trie, objective))?;
        w.flush()?;
        Ok(())
    }
}

/// Latency bookkeeping carried down a path.
#[derive(Clone, Copy, Debug)]
struct PathState {
    /// Sum of load-scaled latency increments (multiplicative mode only).
    scaled: f64,
    /// Latency annotation of the nearest annotated node on the path.
    last_lat: f64,
    /// Engines used strictly below the search root.
    engines: u64,
}

struct Evaluator<'a> {
    trie: &'a ExecutionTrie,
    root: NodeId,
    root_cost: f64,
    root_lat: f64,
    obj: Objective,
    ctx: SearchContext<'a>,
    multiplicative: bool,
}

#[derive(Clone, Copy)]
struct Eval {
    acc: f64,
    cost: f64,
    lat: f64,
    eff_cost: f64,
    eff_lat: f64,
}

impl<'a> Evaluator<'a> {
    fn new(view: &TrieView<'a>, obj: &Objective, ctx: &SearchContext<'a>) -> Self {
        let trie = view.trie();
        // An unannotated search root counts as zero spend and latency.
        let (_, root_cost, root_lat) = trie.metrics(view.root()).unwrap_or((0.0, 0.0, 0.0));
        Evaluator {
            trie,
            root: view.root(),
            root_cost,
            root_lat,
            obj: *obj,
            ctx: *ctx,
            multiplicative: ctx.load.is_some_and(LoadAdjust::multiplicative),
        }
    }

    fn root_state(&self) -> PathState {
        PathState { scaled: 0.0, last_lat: self.root_lat, engines: 0 }
    }

    fn step(&self, parent: PathState, node: NodeId) -> PathState {
        let engine = self.trie.engine_of(node).expect("non-root") as u64;
        let mut s = PathState { engines: parent.engines | 1 << engine, ..parent };
        if let Some(a) = self.trie.annotation(node) {
            if self.multiplicative {
                let m = self.ctx.load.and_then(|l| l.multiplier.get(engine as usize)).copied().unwrap_or(1.0);
                s.scaled = parent.scaled + (a.lat - parent.last_lat) * m;
            }
            s.last_lat = a.lat;
        }
        s
    }

    fn eval(&self, node: NodeId, state: PathState) -> Option<Eval> {
        let a = if node == self.root {
            let (acc, cost, lat) = self.trie.metrics(node)?;
            (acc, cost, lat)
        } else {
            let a = self.trie.annotation(node)?;
            (a.acc, a.cost, a.lat)
        };
        let rise = if self.multiplicative { state.scaled } else { a.2 - self.root_lat };
        let delay = self.ctx.load.map_or(0.0, |l| l.delay_sum(state.engines));
        Some(Eval {
            acc: a.0,
            cost: a.1,
            lat: a.2,
            eff_cost: self.ctx.spent + (a.1 - self.root_cost),
            eff_lat: self.ctx.elapsed + rise + delay,
        })
    }

    fn over_caps(&self, e: &Eval) -> bool {
        self.obj.cost_cap.is_some_and(|c| e.eff_cost > c + FEASIBILITY_TOLERANCE)
            || self.obj.lat_cap.is_some_and(|l| e.eff_lat > l + FEASIBILITY_TOLERANCE)
    }

    fn feasible(&self, e: &Eval) -> bool {
        !self.over_caps(e) && self.obj.acc_floor.is_none_or(|a| e.acc >= a - FEASIBILITY_TOLERANCE)
    }

    fn is_candidate(&self, node: NodeId) -> bool {
        node != NodeId::ROOT && self.trie.node(node).terminal_eligible
    }

    /// State at `node` by walking down from the search root.
    fn state_at(&self, node: NodeId) -> PathState {
        let depth0 = self.trie.node(self.root).depth;
        let mut state = self.root_state();
        let mut id = self.root;
        for &m in &self.trie.node(node).prefix[depth0..] {
            id = self.trie.child(id, m).expect("descendant");
            state = self.step(state, id);
        }
        state
    }

    fn selection(node: NodeId, e: &Eval) -> Selection {
        Selection { node, acc: e.acc, cost: e.cost, lat: e.lat, eff_cost: e.eff_cost, eff_lat: e.eff_lat }
    }

    /// Why nothing is feasible, from a scan of every annotated candidate.
    fn binding(&self, candidates: impl Iterator<Item = NodeId>) -> Binding {
        let mut any = false;
        let (mut acc_ok, mut cost_ok, mut lat_ok) = (false, false, false);
        for v in candidates {
            let Some(e) = self.eval(v, self.state_at(v)) else { continue };
            any = true;
            acc_ok |= self.obj.acc_floor.is_none_or(|a| e.acc >= a - FEASIBILITY_TOLERANCE);
            cost_ok |= self.obj.cost_cap.is_none_or(|c| e.eff_cost <= c + FEASIBILITY_TOLERANCE);
            lat_ok |= self.obj.lat_cap.is_none_or(|l| e.eff_lat <= l + FEASIBILITY_TOLERANCE);
        }
        if !any {
            Binding::NoCandidates
        } else if !acc_ok {
            Binding::Accuracy
        } else if !cost_ok {
            Binding::Cost
        } else if !lat_ok {
            Binding::Latency
        } else {
            Binding::Joint
        }
    }
}

fn cmp_f(a: f64, b: f64) -> Ordering {
    a.partial_cmp(&b).unwrap_or(Ordering::Equal)
}

/// Total order on selections: `Less` means `a` is preferred. Node ids are in
/// preorder, which is lexicographic path order.
fn preference(goal: Goal, a: &Selection, b: &Selection) -> Ordering {
    let tail = || {
        cmp_f(a.eff_cost, b.eff_cost).then(cmp_f(a.eff_lat, b.eff_lat)).then(a.node.cmp(&b.node))
    };
    match goal {
        Goal::MaxAcc => cmp_f(b.acc, a.acc).then_with(tail),
        Goal::MinCost => tail(),
    }
}

fn offer(goal: Goal, best: &mut Option<Selection>, cand: Selection) {
    if best.is_none_or(|b| preference(goal, &cand, &b) == Ordering::Less) {
        *best = Some(cand);
    }
}

fn finish(ev: &Evaluator, view: &TrieView, best: Option<Selection>, mut result: PlanResult, start: Instant) -> PlanResult {
    result.selection = best;
    if best.is_none() {
        result.binding = Some(ev.binding(view.ids().filter(|&v| ev.is_candidate(v))));
    }
    result.wall_time = start.elapsed();
    result
}

fn empty_result() -> PlanResult {
    PlanResult {
        selection: None,
        binding: None,
        nodes_expanded: 0,
        nodes_pruned: 0,
        pruned_roots: Vec::new(),
        skipped_unannotated: 0,
        wall_time: Duration::ZERO,
    }
}

pub fn select_path(view: &TrieView, objective: &Objective) -> PlanResult {
    select_path_with(view, objective, &SearchContext::default())
}

/// Pruned depth-first search.
///
/// Sound when cost and latency annotations are nondecreasing along every
/// chain (accuracy may be arbitrary): a node over a cap has no feasible
/// descendant. Under `MinCost` a feasible candidate dominates its whole
/// subtree, and a node whose `(cost, latency)` is no better than the
/// incumbent's cannot lead to a better one, since preorder visits it after
/// the incumbent.
pub fn select_path_with(view: &TrieView, objective: &Objective, ctx: &SearchContext) -> PlanResult {
    let start = Instant::now();
    let ev = Evaluator::new(view, objective, ctx);
    let trie = view.trie();
    let mut result = empty_result();
    let mut best: Option<Selection> = None;
    let mut stack = vec![(view.root(), ev.root_state())];
    let prune = |result: &mut PlanResult, node: NodeId| {
        let below = trie.subtree_size(node) - 1;
        if below > 0 {
            result.nodes_pruned += below;
            result.pruned_roots.push(node);
        }
    };
    while let Some((node, state)) = stack.pop() {
        result.nodes_expanded += 1;
        let eval = ev.eval(node, state);
        if let Some(e) = &eval {
            if ev.over_caps(e) {
                prune(&mut result, node);
                continue;
            }
            if objective.goal == Goal::MinCost {
                if let Some(b) = &best {
                    if cmp_f(e.eff_cost, b.eff_cost).then(cmp_f(e.eff_lat, b.eff_lat)) != Ordering::Less {
                        prune(&mut result, node);
                        continue;
                    }
                }
            }
        }
        if ev.is_candidate(node) {
            match &eval {
                Some(e) if ev.feasible(e) => {
                    offer(objective.goal, &mut best, Evaluator::selection(node, e));
                    if objective.goal == Goal::MinCost {
                        prune(&mut result, node);
                        continue;
                    }
                }
                Some(_) => {}
                None => result.skipped_unannotated += 1,
            }
        }
        for &(_, child) in trie.node(node).children.iter().rev() {
            stack.push((child, ev.step(state, child)));
        }
    }
    finish(&ev, view, best, result, start)
}

pub fn select_path_exhaustive(view: &TrieView, objective: &Objective) -> PlanResult {
    select_path_exhaustive_with(view, objective, &SearchContext::default())
}

/// Enumerates every terminal-eligible node of the view.
pub fn select_path_exhaustive_with(view: &TrieView, objective: &Objective, ctx: &SearchContext) -> PlanResult {
    exhaustive_filtered(view, objective, ctx, |_| true)
}

fn exhaustive_filtered(
    view: &TrieView,
    objective: &Objective,
    ctx: &SearchContext,
    allowed: impl Fn(NodeId) -> bool,
) -> PlanResult {
    let start = Instant::now();
    let ev = Evaluator::new(view, objective, ctx);
    let mut result = empty_result();
    let mut best = None;
    for v in view.ids() {
        result.nodes_expanded += 1;
        if !ev.is_candidate(v) || !allowed(v) {
            continue;
        }
        match ev.eval(v, ev.state_at(v)) {
            Some(e) if ev.feasible(&e) => offer(objective.goal, &mut best, Evaluator::selection(v, &e)),
            Some(_) => {}
            None => result.skipped_unannotated += 1,
        }
    }
    result.selection = best;
    if best.is_none() {
        result.binding = Some(ev.binding(view.ids().filter(|&v| ev.is_candidate(v) && allowed(v))));
    }
    result.wall_time = start.elapsed();
    result
}

/// Which depths invoke the same stage family and must share a model under
/// a static plan. `group[d]` is the family index of depth `d` (index 0 unused).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FamilyBinding {
    pub group: Vec<usize>,
}

impl FamilyBinding {
    pub fn from_trie(trie: &ExecutionTrie) -> Self {
        let mut names: Vec<&str> = Vec::new();
        let mut group = vec![0];
        for d in 1..=trie.max_depth() {
            let f = trie.family_at_depth(d);
            let idx = names.iter().position(|&n| n == f).unwrap_or_else(|| {
                names.push(f);
                names.len() - 1
            });
            group.push(idx);
        }
        FamilyBinding { group }
    }

    /// Every depth of a family uses one model along `path`.
    pub fn consistent(&self, path: &[ModelIdx]) -> bool {
        let mut bound: Vec<Option<ModelIdx>> = vec![None; self.group.len()];
        for (i, &m) in path.iter().enumerate() {
            let g = self.group[i + 1];
            match bound[g] {
                Some(b) if b != m => return false,
                _ => bound[g] = Some(m),
            }
        }
        true
    }
}

/// Terminal-eligible nodes a static plan can reach: one model per family
/// plus a stopping depth.
pub fn static_candidates(view: &TrieView, binding: &FamilyBinding) -> Vec<NodeId> {
    let trie = view.trie();
    view.ids()
        .filter(|&v| v != NodeId::ROOT && trie.node(v).terminal_eligible && binding.consistent(&trie.node(v).prefix))
        .collect()
}

pub fn select_static_plan(view: &TrieView, objective: &Objective, binding: &FamilyBinding) -> PlanResult {
    select_static_plan_with(view, objective, binding, &SearchContext::default())
}

/// Same objective and tie-breaks as `select_path`, restricted to static plans.
pub fn select_static_plan_with(
    view: &TrieView,
    objective: &Objective,
    binding: &FamilyBinding,
    ctx: &SearchContext,
) -> PlanResult {
    let trie = view.trie();
    exhaustive_filtered(view, objective, ctx, |v| binding.consistent(&trie.node(v).prefix))
}

/// Annotated terminal-eligible node of the view with the smallest effective
/// latency, ties broken by effective cost then path order. Constraints are
/// ignored.
pub fn fastest_terminal(view: &TrieView, ctx: &SearchContext) -> Option<Selection> {
    let unconstrained = Objective { goal: Goal::MinCost, acc_floor: None, cost_cap: None, lat_cap: None };
    let ev = Evaluator::new(view, &unconstrained, ctx);
    let mut best: Option<Selection> = None;
    for v in view.ids().filter(|&v| ev.is_candidate(v)) {
        let Some(e) = ev.eval(v, ev.state_at(v)) else { continue };
        let cand = Evaluator::selection(v, &e);
        let better = best.is_none_or(|b| {
            cmp_f(cand.eff_lat, b.eff_lat).then(cmp_f(cand.eff_cost, b.eff_cost)).then(cand.node.cmp(&b.node))
                == Ordering::Less
        });
        if better {
            best = Some(cand);
        }
    }
    best
}
