use rayon::prelude::*;

use super::catalog::ModelCatalog;
use super::config::{ConditionalLaw, DeepKind, WorldConfig};
use super::template::WorkflowTemplate;
use crate::error::{Error, Result};
use crate::rng::{self, Stream};
use crate::trie::{Annotation, ExecutionTrie, ModelIdx, NodeId, Support};

/// Requests per parallel work unit. Partial sums are merged in chunk order,
/// so floating-point results do not depend on the thread count.
const CHUNK: usize = 256;

pub type RequestId = u32;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NodeLaw {
    /// `P(success | ancestors failed) = sigmoid(offset - d_q)`.
    Logit(f64),
    /// Request-independent probability.
    Fixed(f64),
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Synthetic world with prefix-closed success outcomes.
///
/// Nothing is stored per `(request, prefix)`: outcomes, latencies and costs
/// are recomputed from keyed draws on demand.
#[derive(Clone, Debug)]
pub struct GroundTruthWorld {
    template: WorkflowTemplate,
    catalog: ModelCatalog,
    config: WorldConfig,
    seed: u64,
    structure: ExecutionTrie,
    laws: Vec<NodeLaw>,
    prefix_hash: Vec<u64>,
    difficulty: Vec<f64>,
}

pub fn generate_world(
    template: &WorkflowTemplate,
    catalog: &ModelCatalog,
    config: &WorldConfig,
    seed: u64,
) -> Result<GroundTruthWorld> {
    GroundTruthWorld::generate(template, catalog, config, seed)
}

impl GroundTruthWorld {
    pub fn generate(
        template: &WorkflowTemplate,
        catalog: &ModelCatalog,
        config: &WorldConfig,
        seed: u64,
    ) -> Result<Self> {
        let structure = ExecutionTrie::build(template, catalog)?;
        config.validate(template, catalog)?;

        let mut prefix_hash = vec![rng::ROOT_PREFIX_HASH; structure.len()];
        for id in structure.ids().skip(1) {
            let n = structure.node(id);
            let parent = n.parent.expect("non-root");
            let m = n.model.expect("non-root");
            prefix_hash[id.index()] = rng::extend_prefix_hash(prefix_hash[parent.index()], &structure.model(m).id);
        }

        let z = |stream: Stream, h: u64| rng::standard_normal(rng::key(seed, stream, h, 0));
        let mut laws = vec![NodeLaw::Fixed(0.0); structure.len()];
        match &config.law {
            ConditionalLaw::Logistic(law) => {
                for id in structure.ids().skip(1) {
                    let n = structure.node(id);
                    let parent = n.parent.expect("non-root");
                    let model = &structure.model(n.model.expect("non-root")).id;
                    let base = law.strength[model] - law.depth_penalty * (n.depth as f64 - 1.0);
                    let h = prefix_hash[id.index()];
                    laws[id.index()] = match (n.depth, &law.deep) {
                        (1, _) => NodeLaw::Logit(base),
                        (d, Some(deep)) if d >= 3 => {
                            let row = deep.row_loc + deep.row_sd * z(Stream::RowFactor, prefix_hash[parent.index()]);
                            let noise = if deep.noise_sd > 0.0 { deep.noise_sd * z(Stream::NodeOffset, h) } else { 0.0 };
                            match deep.kind {
                                DeepKind::LogitRank1 => NodeLaw::Logit(row.exp() * base + noise),
                                DeepKind::ProbRank1 => {
                                    let p = sigmoid(row) * sigmoid(base) * noise.exp();
                                    NodeLaw::Fixed(p.clamp(0.0, 1.0))
                                }
                            }
                        }
                        _ => {
                            let off = if law.interaction_sd > 0.0 {
                                law.interaction_sd * z(Stream::NodeOffset, h)
                            } else {
                                0.0
                            };
                            NodeLaw::Logit(base + off)
                        }
                    };
                }
            }
            ConditionalLaw::Table(law) => {
                for id in structure.ids().skip(1) {
                    laws[id.index()] = NodeLaw::Fixed(law.default);
                }
                for (key, &p) in &law.probs {
                    let id = structure
                        .find_key(key)
                        .map_err(|_| Error::config(format!("world.law.probs.{key}"), "prefix is not in the trie"))?;
                    if id == NodeId::ROOT {
                        return Err(Error::config("world.law.probs", "the empty prefix has no stage"));
                    }
                    laws[id.index()] = NodeLaw::Fixed(p);
                }
            }
        }

        let difficulty = (0..config.num_requests as u64)
            .map(|q| config.difficulty.mean + config.difficulty.sd * rng::standard_normal(rng::key(seed, Stream::Difficulty, q, 0)))
            .collect();

        Ok(GroundTruthWorld {
            template: template.clone(),
            catalog: catalog.clone(),
            config: config.clone(),
            seed,
            structure,
            laws,
            prefix_hash,
            difficulty,
        })
    }

    pub fn template(&self) -> &WorkflowTemplate {
        &self.template
    }

    pub fn catalog(&self) -> &ModelCatalog {
        &self.catalog
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Unannotated trie with the world's node ids.
    pub fn structure(&self) -> &ExecutionTrie {
        &self.structure
    }

    pub fn num_requests(&self) -> usize {
        self.difficulty.len()
    }

    pub fn request_ids(&self) -> impl Iterator<Item = RequestId> {
        0..self.difficulty.len() as RequestId
    }

    pub fn difficulty(&self, q: RequestId) -> f64 {
        self.difficulty[q as usize]
    }

    pub fn node_law(&self, node: NodeId) -> NodeLaw {
        self.laws[node.index()]
    }

    pub fn prefix_hash(&self, node: NodeId) -> u64 {
        self.prefix_hash[node.index()]
    }

    /// Probability that the stage at `node` succeeds for `q` given every
    /// earlier stage on the prefix failed.
    pub fn conditional_prob(&self, q: RequestId, node: NodeId) -> f64 {
        match self.laws[node.index()] {
            NodeLaw::Logit(o) => sigmoid(o - self.difficulty[q as usize]),
            NodeLaw::Fixed(p) => p,
        }
    }

    pub fn node_outcome(&self, q: RequestId, node: NodeId) -> bool {
        if node == NodeId::ROOT {
            return false;
        }
        let u = rng::unit(rng::key(self.seed, Stream::Outcome, u64::from(q), self.prefix_hash[node.index()]));
        u < self.conditional_prob(q, node)
    }

    pub fn stage_cost(&self, _q: RequestId, node: NodeId) -> f64 {
        self.structure.nominal_stage_cost(node)
    }

    pub fn stage_latency(&self, q: RequestId, node: NodeId) -> f64 {
        let n = self.structure.node(node);
        let Some(m) = n.model else { return 0.0 };
        let info = self.structure.model(m);
        let sigma = info.noise.sigma();
        let factor = if sigma > 0.0 {
            let z = rng::standard_normal(rng::key(self.seed, Stream::Latency, u64::from(q), self.prefix_hash[node.index()]));
            rng::lognormal_unit_mean(sigma, z)
        } else {
            1.0
        };
        info.latency_mean * factor + self.structure.tool_overhead(n.depth).0
    }

    /// `A(q, p)`: some stage on the prefix succeeded.
    pub fn success(&self, q: RequestId, node: NodeId) -> bool {
        self.first_success_depth(q, node).is_some()
    }

    pub fn first_success_depth(&self, q: RequestId, node: NodeId) -> Option<usize> {
        let prefix = &self.structure.node(node).prefix;
        let mut id = NodeId::ROOT;
        for (i, &m) in prefix.iter().enumerate() {
            id = self.structure.child(id, m).expect("prefix of an existing node");
            if self.node_outcome(q, id) {
                return Some(i + 1);
            }
        }
        None
    }

    /// Walks `path` for request `q`, stopping at the first successful stage.
    pub fn realize_run(&self, q: RequestId, path: &[ModelIdx]) -> Result<TraceRecord> {
        if q as usize >= self.num_requests() {
            return Err(Error::InvalidArgument(format!("request id {q} out of range")));
        }
        if path.is_empty() {
            return Err(Error::InfeasiblePath { position: 0, reason: "empty path".into() });
        }
        let mut nodes = Vec::with_capacity(path.len());
        let mut id = NodeId::ROOT;
        for (i, &m) in path.iter().enumerate() {
            id = self.structure.child(id, m).ok_or_else(|| Error::InfeasiblePath {
                position: i,
                reason: match self.structure.models().get(m.0 as usize) {
                    Some(info) if i < self.structure.max_depth() => {
                        format!("model `{}` is not admissible at depth {}", info.id, i + 1)
                    }
                    Some(_) => format!("path exceeds max depth {}", self.structure.max_depth()),
                    None => format!("model index {} is not in the catalog", m.0),
                },
            })?;
            nodes.push(id);
        }
        let n = path.len();
        let mut reached = vec![false; n];
        let mut stage_cost = vec![0.0; n];
        let mut stage_latency = vec![0.0; n];
        let mut success = false;
        let mut stop_depth = n;
        for (i, &node) in nodes.iter().enumerate() {
            reached[i] = true;
            stage_cost[i] = self.stage_cost(q, node);
            stage_latency[i] = self.stage_latency(q, node);
            if self.node_outcome(q, node) {
                success = true;
                stop_depth = i + 1;
                break;
            }
        }
        Ok(TraceRecord {
            request_id: q,
            path: path.to_vec(),
            nodes,
            reached,
            stage_cost,
            stage_latency,
            success,
            stop_depth,
        })
    }

    /// One trace per (request, terminal-eligible node).
    pub fn exhaustive_traces(&self) -> Vec<TraceRecord> {
        let terminals: Vec<NodeId> = self.structure.terminal_nodes().collect();
        self.request_ids()
            .flat_map(|q| {
                terminals
                    .iter()
                    .map(move |&t| self.realize_run(q, &self.structure.node(t).prefix).expect("trie path"))
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub request_id: RequestId,
    pub path: Vec<ModelIdx>,
    pub nodes: Vec<NodeId>,
    /// `reached[i]`: every stage before `i` failed.
    pub reached: Vec<bool>,
    /// Realized cost per stage; zero for unreached stages.
    pub stage_cost: Vec<f64>,
    pub stage_latency: Vec<f64>,
    pub success: bool,
    pub stop_depth: usize,
}

impl TraceRecord {
    pub fn total_cost(&self) -> f64 {
        self.stage_cost.iter().sum()
    }

    pub fn total_latency(&self) -> f64 {
        self.stage_latency.iter().sum()
    }
}

/// Exhaustively evaluated per-node truth, indexed by `NodeId`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrueMeans {
    pub mu: Vec<f64>,
    pub cost: Vec<f64>,
    pub lat: Vec<f64>,
    /// Requests reaching each node's stage.
    pub reach: Vec<u64>,
    pub num_requests: u64,
}

impl TrueMeans {
    pub fn get(&self, node: NodeId) -> (f64, f64, f64) {
        let i = node.index();
        (self.mu[i], self.cost[i], self.lat[i])
    }

    /// Writes the truth into `trie` as annotations on every non-root node.
    pub fn annotate(&self, trie: &mut ExecutionTrie) {
        for id in trie.ids().skip(1).collect::<Vec<_>>() {
            let i = id.index();
            trie.set_annotation(
                id,
                Some(Annotation {
                    acc: self.mu[i],
                    cost: self.cost[i],
                    lat: self.lat[i],
                    support: Support {
                        n_acc: self.num_requests,
                        n_cost: self.num_requests,
                        n_lat: self.reach[i],
                    },
                }),
            );
        }
    }
}

#[derive(Clone)]
struct Partial {
    succ: Vec<u64>,
    cost: Vec<f64>,
    lat: Vec<f64>,
    reach: Vec<u64>,
}

impl Partial {
    fn new(n: usize) -> Self {
        Partial { succ: vec![0; n], cost: vec![0.0; n], lat: vec![0.0; n], reach: vec![0; n] }
    }

    fn merge(mut self, other: Partial) -> Partial {
        for i in 0..self.succ.len() {
            self.succ[i] += other.succ[i];
            self.cost[i] += other.cost[i];
            self.lat[i] += other.lat[i];
            self.reach[i] += other.reach[i];
        }
        self
    }
}

/// Brute-force `(mu, C, T)` for every node of `trie`.
///
/// `mu(p)` is the fraction of requests with `A(q, p) = 1`; `C(u)` adds the
/// mean cost of `u`'s stage over all requests (zero for those that stopped
/// earlier) to `C(parent)`; `T(u)` adds the mean stage latency over the
/// requests that reach `u` to `T(parent)`, or the configured mean when none do.
pub fn true_column_means(world: &GroundTruthWorld, trie: &ExecutionTrie) -> Result<TrueMeans> {
    if !trie.same_shape(world.structure()) {
        return Err(Error::Mismatch);
    }
    let s = world.structure();
    let n = s.len();
    let parents: Vec<usize> = s.ids().map(|id| s.node(id).parent.map_or(0, NodeId::index)).collect();
    let requests: Vec<RequestId> = world.request_ids().collect();
    let partials: Vec<Partial> = requests
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = Partial::new(n);
            let mut done = vec![false; n];
            for &q in chunk {
                for i in 1..n {
                    let id = NodeId(i as u32);
                    if done[parents[i]] {
                        done[i] = true;
                    } else {
                        acc.reach[i] += 1;
                        acc.cost[i] += world.stage_cost(q, id);
                        acc.lat[i] += world.stage_latency(q, id);
                        done[i] = world.node_outcome(q, id);
                    }
                    acc.succ[i] += u64::from(done[i]);
                }
            }
            acc
        })
        .collect();
    let total = partials.into_iter().reduce(Partial::merge).unwrap_or_else(|| Partial::new(n));

    let nq = requests.len() as f64;
    let mut out = TrueMeans {
        mu: vec![0.0; n],
        cost: vec![0.0; n],
        lat: vec![0.0; n],
        reach: total.reach.clone(),
        num_requests: requests.len() as u64,
    };
    for i in 1..n {
        let p = parents[i];
        out.mu[i] = total.succ[i] as f64 / nq;
        out.cost[i] = out.cost[p] + total.cost[i] / nq;
        let stage = if total.reach[i] > 0 {
            total.lat[i] / total.reach[i] as f64
        } else {
            s.nominal_stage_latency(NodeId(i as u32))
        };
        out.lat[i] = out.lat[p] + stage;
    }
    Ok(out)
}
