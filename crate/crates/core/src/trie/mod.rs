//! Execution trie: one node per feasible prefix of model choices.
//!
//! Nodes live in an arena in depth-first preorder, so the subtree of any
//! node is the contiguous id range `[id, subtree_end)`. Rerooting is then a
//! range restriction and never copies.

mod annotate;
mod io;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use annotate::annotate_from_traces;
pub use io::{load_annotations, save_annotations, AnnotationFile, NodeRecord, ANNOTATION_VERSION};

use crate::error::{Error, Result};
use crate::workload::{LatencyNoise, ModelCatalog, WorkflowTemplate};

/// Index of a model in the trie's id-sorted model table. Ordering of
/// `ModelIdx` therefore equals lexicographic ordering of model ids.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ModelIdx(pub u16);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub const ROOT: NodeId = NodeId(0);

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug)]
pub struct ModelInfo {
    pub id: String,
    pub cost: f64,
    pub latency_mean: f64,
    pub noise: LatencyNoise,
    pub engine: u16,
}

#[derive(Clone, Debug)]
pub struct TrieNode {
    pub prefix: Vec<ModelIdx>,
    pub depth: usize,
    pub parent: Option<NodeId>,
    pub model: Option<ModelIdx>,
    pub terminal_eligible: bool,
    /// Sorted by model id.
    pub children: Vec<(ModelIdx, NodeId)>,
    subtree_end: u32,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Support {
    pub n_acc: u64,
    pub n_cost: u64,
    pub n_lat: u64,
}

/// Expected metrics of terminating at a node: accuracy, expected spend
/// (reach-discounted) and the undiscounted sum of per-stage latency means.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Annotation {
    pub acc: f64,
    pub cost: f64,
    pub lat: f64,
    pub support: Support,
}

#[derive(Clone, Debug)]
pub struct ExecutionTrie {
    nodes: Vec<TrieNode>,
    annotations: Vec<Option<Annotation>>,
    models: Vec<ModelInfo>,
    engines: Vec<String>,
    /// Tool `(latency, cost)` per depth; index 0 unused.
    depth_tool: Vec<(f64, f64)>,
    /// Stage family id per depth; index 0 unused.
    depth_family: Vec<String>,
    max_depth: usize,
    template_hash: String,
    catalog_hash: String,
}

pub fn build_trie(template: &WorkflowTemplate, catalog: &ModelCatalog) -> Result<ExecutionTrie> {
    ExecutionTrie::build(template, catalog)
}

impl ExecutionTrie {
    pub fn build(template: &WorkflowTemplate, catalog: &ModelCatalog) -> Result<Self> {
        catalog.validate()?;
        template.validate(catalog)?;

        let mut specs: Vec<_> = catalog.models.iter().collect();
        specs.sort_by(|a, b| a.id.cmp(&b.id));
        let models: Vec<ModelInfo> = specs
            .iter()
            .map(|m| ModelInfo {
                id: m.id.clone(),
                cost: m.cost_per_invocation,
                latency_mean: m.latency_mean,
                noise: m.latency_noise,
                engine: catalog.engines.iter().position(|e| *e == m.engine_id).expect("validated") as u16,
            })
            .collect();
        let idx_of = |id: &str| ModelIdx(models.iter().position(|m| m.id == id).expect("validated") as u16);

        let max_depth = template.max_depth;
        let mut admissible: Vec<Vec<ModelIdx>> = vec![Vec::new()];
        let mut depth_tool = vec![(0.0, 0.0)];
        let mut depth_family = vec![String::new()];
        for depth in 1..=max_depth {
            let fam = &template.stage_families[template.family_at_depth(depth)];
            let mut set: Vec<ModelIdx> = fam.admissible_models.iter().map(|m| idx_of(m)).collect();
            set.sort();
            admissible.push(set);
            depth_tool.push(template.tool_overhead(depth));
            depth_family.push(fam.family_id.clone());
        }

        let mut trie = ExecutionTrie {
            nodes: Vec::new(),
            annotations: Vec::new(),
            models,
            engines: catalog.engines.clone(),
            depth_tool,
            depth_family,
            max_depth,
            template_hash: template.hash(),
            catalog_hash: catalog.hash(),
        };
        trie.grow(None, None, Vec::new(), &admissible, &template.terminal_depths);
        trie.annotations = vec![None; trie.nodes.len()];
        Ok(trie)
    }

    fn grow(
        &mut self,
        parent: Option<NodeId>,
        model: Option<ModelIdx>,
        prefix: Vec<ModelIdx>,
        admissible: &[Vec<ModelIdx>],
        terminal: &std::collections::BTreeSet<usize>,
    ) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        let depth = prefix.len();
        self.nodes.push(TrieNode {
            prefix: prefix.clone(),
            depth,
            parent,
            model,
            terminal_eligible: depth > 0 && terminal.contains(&depth),
            children: Vec::new(),
            subtree_end: 0,
        });
        if depth < self.max_depth {
            for &m in &admissible[depth + 1] {
                let mut p = prefix.clone();
                p.push(m);
                let child = self.grow(Some(id), Some(m), p, admissible, terminal);
                self.nodes[id.index()].children.push((m, child));
            }
        }
        self.nodes[id.index()].subtree_end = self.nodes.len() as u32;
        id
    }

    pub fn root(&self) -> NodeId {
        NodeId::ROOT
    }

    pub fn node(&self, id: NodeId) -> &TrieNode {
        &self.nodes[id.index()]
    }

    /// Number of nodes excluding the root.
    pub fn node_count(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Arena size including the root; valid `NodeId`s are `0..len()`.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() <= 1
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len() as u32).map(NodeId)
    }

    pub fn terminal_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.ids().filter(|&id| self.node(id).terminal_eligible)
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn models(&self) -> &[ModelInfo] {
        &self.models
    }

    pub fn engines(&self) -> &[String] {
        &self.engines
    }

    pub fn model(&self, m: ModelIdx) -> &ModelInfo {
        &self.models[m.0 as usize]
    }

    pub fn model_index(&self, id: &str) -> Option<ModelIdx> {
        self.models.iter().position(|m| m.id == id).map(|i| ModelIdx(i as u16))
    }

    pub fn template_hash(&self) -> &str {
        &self.template_hash
    }

    pub fn catalog_hash(&self) -> &str {
        &self.catalog_hash
    }

    pub fn family_at_depth(&self, depth: usize) -> &str {
        &self.depth_family[depth]
    }

    pub fn tool_overhead(&self, depth: usize) -> (f64, f64) {
        self.depth_tool[depth]
    }

    /// Exclusive end of the subtree rooted at `id` in preorder.
    pub fn subtree_end(&self, id: NodeId) -> NodeId {
        NodeId(self.nodes[id.index()].subtree_end)
    }

    pub fn subtree_size(&self, id: NodeId) -> usize {
        (self.nodes[id.index()].subtree_end - id.0) as usize
    }

    pub fn is_ancestor_or_self(&self, ancestor: NodeId, node: NodeId) -> bool {
        ancestor <= node && node.0 < self.nodes[ancestor.index()].subtree_end
    }

    pub fn child(&self, id: NodeId, m: ModelIdx) -> Option<NodeId> {
        self.node(id).children.iter().find(|(cm, _)| *cm == m).map(|&(_, c)| c)
    }

    /// Node reached by walking `prefix` down from `from`.
    pub fn descend(&self, from: NodeId, prefix: &[ModelIdx]) -> Option<NodeId> {
        prefix.iter().try_fold(from, |id, &m| self.child(id, m))
    }

    pub fn find(&self, prefix: &[ModelIdx]) -> Option<NodeId> {
        self.descend(NodeId::ROOT, prefix)
    }

    /// Parses a slash-joined prefix key such as `G/S/S`; the empty string is the root.
    pub fn parse_prefix(&self, key: &str) -> Result<Vec<ModelIdx>> {
        if key.is_empty() {
            return Ok(Vec::new());
        }
        key.split('/')
            .map(|id| self.model_index(id).ok_or_else(|| Error::UnknownPrefix(key.to_string())))
            .collect()
    }

    pub fn find_key(&self, key: &str) -> Result<NodeId> {
        let prefix = self.parse_prefix(key)?;
        self.find(&prefix).ok_or_else(|| Error::UnknownPrefix(key.to_string()))
    }

    pub fn prefix_key(&self, id: NodeId) -> String {
        self.path_key(&self.node(id).prefix)
    }

    pub fn path_key(&self, path: &[ModelIdx]) -> String {
        path.iter().map(|&m| self.model(m).id.as_str()).collect::<Vec<_>>().join("/")
    }

    pub fn engine_of(&self, id: NodeId) -> Option<u16> {
        self.node(id).model.map(|m| self.model(m).engine)
    }

    /// Configured mean latency of the stage entered at `id`, tools included.
    pub fn nominal_stage_latency(&self, id: NodeId) -> f64 {
        let n = self.node(id);
        match n.model {
            Some(m) => self.model(m).latency_mean + self.depth_tool[n.depth].0,
            None => 0.0,
        }
    }

    pub fn nominal_stage_cost(&self, id: NodeId) -> f64 {
        let n = self.node(id);
        match n.model {
            Some(m) => self.model(m).cost + self.depth_tool[n.depth].1,
            None => 0.0,
        }
    }

    pub fn annotation(&self, id: NodeId) -> Option<&Annotation> {
        self.annotations[id.index()].as_ref()
    }

    pub fn set_annotation(&mut self, id: NodeId, a: Option<Annotation>) {
        self.annotations[id.index()] = a;
    }

    pub fn clear_annotations(&mut self) {
        self.annotations.iter_mut().for_each(|a| *a = None);
    }

    /// Metrics used when searching from `id`: the root behaves as `(0, 0, 0)`.
    pub fn metrics(&self, id: NodeId) -> Option<(f64, f64, f64)> {
        if id == NodeId::ROOT {
            return Some((0.0, 0.0, 0.0));
        }
        self.annotation(id).map(|a| (a.acc, a.cost, a.lat))
    }

    pub fn same_shape(&self, other: &ExecutionTrie) -> bool {
        self.template_hash == other.template_hash && self.catalog_hash == other.catalog_hash
    }

    pub fn view(&self) -> TrieView<'_> {
        TrieView { trie: self, root: NodeId::ROOT }
    }

    pub fn reroot(&self, prefix: &[ModelIdx]) -> Result<TrieView<'_>> {
        self.view().reroot(prefix)
    }

    pub fn check_monotonicity(&self) -> MonotonicityReport {
        check_monotonicity(self)
    }
}

/// Read-only view of the subtree below one node.
#[derive(Clone, Copy)]
pub struct TrieView<'a> {
    trie: &'a ExecutionTrie,
    root: NodeId,
}

impl<'a> TrieView<'a> {
    pub fn trie(&self) -> &'a ExecutionTrie {
        self.trie
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn root_prefix(&self) -> &'a [ModelIdx] {
        &self.trie.node(self.root).prefix
    }

    /// All nodes of the view in preorder, the root first.
    pub fn ids(&self) -> impl Iterator<Item = NodeId> + 'a {
        (self.root.0..self.trie.subtree_end(self.root).0).map(NodeId)
    }

    pub fn len(&self) -> usize {
        self.trie.subtree_size(self.root)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.trie.is_ancestor_or_self(self.root, id)
    }

    /// Rerooting composes: `view.reroot(v)` of `trie.reroot(u)` is `trie.reroot(u ++ v)`.
    pub fn reroot(&self, relative: &[ModelIdx]) -> Result<TrieView<'a>> {
        let root = self.trie.descend(self.root, relative).ok_or_else(|| {
            let mut full = self.root_prefix().to_vec();
            full.extend_from_slice(relative);
            Error::UnknownPrefix(self.trie.path_key(&full))
        })?;
        Ok(TrieView { trie: self.trie, root })
    }

    /// Model choices from the view root down to `id`.
    pub fn suffix(&self, id: NodeId) -> &'a [ModelIdx] {
        &self.trie.node(id).prefix[self.trie.node(self.root).depth..]
    }
}

impl fmt::Debug for TrieView<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TrieView")
            .field("root", &self.trie.prefix_key(self.root))
            .field("len", &self.len())
            .finish()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Acc,
    Cost,
    Lat,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub parent: String,
    pub child: String,
    pub metric: Metric,
    pub parent_value: f64,
    pub child_value: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MonotonicityReport {
    pub violations: Vec<Violation>,
    /// Parent-child pairs where both sides carried annotations.
    pub edges_checked: usize,
}

impl MonotonicityReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, metric: Metric) -> usize {
        self.violations.iter().filter(|v| v.metric == metric).count()
    }
}

pub const MONOTONICITY_TOLERANCE: f64 = 1e-9;

pub fn check_monotonicity(trie: &ExecutionTrie) -> MonotonicityReport {
    let mut report = MonotonicityReport::default();
    for id in trie.ids().skip(1) {
        let Some(parent) = trie.node(id).parent.filter(|&p| p != NodeId::ROOT) else {
            continue;
        };
        let (Some(pa), Some(ca)) = (trie.annotation(parent), trie.annotation(id)) else {
            continue;
        };
        report.edges_checked += 1;
        for (metric, p, c) in [
            (Metric::Acc, pa.acc, ca.acc),
            (Metric::Cost, pa.cost, ca.cost),
            (Metric::Lat, pa.lat, ca.lat),
        ] {
            if c < p - MONOTONICITY_TOLERANCE {
                report.violations.push(Violation {
                    parent: trie.prefix_key(parent),
                    child: trie.prefix_key(id),
                    metric,
                    parent_value: p,
                    child_value: c,
                });
            }
        }
    }
    report
}
