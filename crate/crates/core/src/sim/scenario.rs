use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::controller::LoadModel;
use crate::error::{Error, Result};
use crate::estimators::{annotate_estimate, estimate, Method};
use crate::planner::{select_path, Objective};
use crate::profiler::{cascade_sample, Budget};
use crate::rng::{self, Stream};
use crate::trie::{load_annotations, ExecutionTrie};
use crate::workload::{parse_json, presets, true_column_means, GroundTruthWorld, RequestId, WorldDocument};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WorldSource {
    Preset { name: String, seed: u64 },
    /// World document, relative to the scenario file.
    File { path: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnnotationSource {
    /// Exact column means of the world.
    Oracle,
    /// Annotation file, relative to the scenario file.
    File {
        path: String,
        #[serde(default)]
        force: bool,
    },
    /// Profile the world at `coverage` and annotate with `method`.
    Estimate { method: Method, coverage: f64, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestSample {
    pub count: usize,
    pub seed: u64,
    /// Allow `count` above the world's request count.
    #[serde(default)]
    pub with_replacement: bool,
}

/// Latency cap applied on top of the scenario objective.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Slo {
    Fixed(f64),
    /// `scale` times the expected latency of the oracle plan for `objective`.
    PlanLatency {
        objective: String,
        #[serde(default = "one")]
        scale: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Lognormal sigma of a unit-mean multiplier on every stage latency.
    #[serde(default)]
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadConfig {
    /// Slowdown curves the engines actually follow.
    pub truth: LoadModel,
    /// Curves the load-aware policy plans with; defaults to `truth`.
    #[serde(default)]
    pub model: Option<LoadModel>,
    /// Same, read from a file relative to the scenario file.
    #[serde(default)]
    pub model_file: Option<String>,
    /// Per engine: `(start_time, queue_depth)` steps in time order. The
    /// depth is 0 before the first step.
    #[serde(default)]
    pub schedule: BTreeMap<String, Vec<(f64, f64)>>,
    /// Seconds between consecutive request arrivals.
    #[serde(default)]
    pub arrival_interval: f64,
}

impl LoadConfig {
    /// Queue depth of each engine at global time `t`.
    pub fn depths_at(&self, engines: &[String], t: f64) -> Vec<f64> {
        engines
            .iter()
            .map(|e| {
                self.schedule
                    .get(e)
                    .and_then(|steps| steps.iter().rev().find(|s| s.0 <= t))
                    .map_or(0.0, |s| s.1)
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Static,
    Dynamic,
    DynamicLoadAware,
}

impl Policy {
    pub fn name(self) -> &'static str {
        match self {
            Policy::Static => "static",
            Policy::Dynamic => "dynamic",
            Policy::DynamicLoadAware => "dynamic_load_aware",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    /// Bounds are cost caps; maximize accuracy.
    MaxAccCost,
    /// Bounds are accuracy floors; minimize cost.
    MinCostAcc,
}

impl SweepKind {
    pub fn name(self) -> &'static str {
        match self {
            SweepKind::MaxAccCost => "max_acc_cost",
            SweepKind::MinCostAcc => "min_cost_acc",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub kind: SweepKind,
    pub grid: Vec<f64>,
    /// Estimators compared against the oracle.
    #[serde(default)]
    pub methods: Vec<Method>,
    #[serde(default = "default_coverage")]
    pub coverage: f64,
    #[serde(default)]
    pub profile_seed: u64,
}

fn default_coverage() -> f64 {
    0.02
}

/// One simulated experiment: a world, the annotations policies plan with,
/// a request sample, an objective, noise and load, and the policies to run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub world: WorldSource,
    #[serde(default = "oracle")]
    pub annotations: AnnotationSource,
    pub requests: RequestSample,
    pub objective: String,
    #[serde(default)]
    pub slo: Option<Slo>,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub load: Option<LoadConfig>,
    #[serde(default)]
    pub policies: Vec<Policy>,
    /// Stop a request once its elapsed time exceeds the latency cap.
    #[serde(default = "yes")]
    pub hard_stop: bool,
    /// Seed of the latency noise draws.
    pub seed: u64,
    #[serde(default)]
    pub frontier: Option<SweepConfig>,
    #[serde(default)]
    pub policy_gap: Option<SweepConfig>,
}

fn oracle() -> AnnotationSource {
    AnnotationSource::Oracle
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        parse_json(text)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes") + "\n"
    }

    /// SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("scenario serializes")))
    }

    /// Same scenario with every seed shifted by `offset`.
    pub fn reseeded(&self, offset: u64) -> Scenario {
        let mut s = self.clone();
        s.seed = s.seed.wrapping_add(offset);
        s.requests.seed = s.requests.seed.wrapping_add(offset);
        if let WorldSource::Preset { seed, .. } = &mut s.world {
            *seed = seed.wrapping_add(offset);
        }
        if let AnnotationSource::Estimate { seed, .. } = &mut s.annotations {
            *seed = seed.wrapping_add(offset);
        }
        s
    }

    pub fn world_document(&self, base: &Path) -> Result<WorldDocument> {
        match &self.world {
            WorldSource::Preset { name, seed } => presets::by_name(name, *seed).ok_or_else(|| {
                Error::config("world.name", format!("unknown preset `{name}`; expected one of {}", presets::WORLD_PRESETS.join(", ")))
            }),
            WorldSource::File { path } => WorldDocument::load(base.join(path)),
        }
    }

    /// Builds the world, both annotated tries, the request sample and the
    /// resolved objective. Relative paths resolve against `base`.
    pub fn prepare(&self, base: &Path) -> Result<Prepared> {
        let doc = self.world_document(base)?;
        let world = doc.generate()?;
        let mut truth = world.structure().clone();
        true_column_means(&world, &truth)?.annotate(&mut truth);
        let planning = match &self.annotations {
            AnnotationSource::Oracle => truth.clone(),
            AnnotationSource::File { path, force } => {
                load_annotations(base.join(path), world.template(), world.catalog(), *force)?
            }
            AnnotationSource::Estimate { method, coverage, seed } => {
                estimated_annotations(&world, *method, *coverage, *seed)?
            }
        };
        let mut objective: Objective = self.objective.parse()?;
        match &self.slo {
            None => {}
            Some(Slo::Fixed(l)) => objective.lat_cap = Some(*l),
            Some(Slo::PlanLatency { objective: base_obj, scale }) => {
                let o: Objective = base_obj.parse()?;
                let plan = select_path(&truth.view(), &o);
                let sel = plan
                    .selection
                    .ok_or_else(|| Error::config("slo.plan_latency.objective", format!("`{o}` is infeasible on the oracle")))?;
                objective.lat_cap = Some(sel.lat * scale);
            }
        }
        objective.validate().map_err(|e| Error::config("objective", e.to_string()))?;
        if !(self.noise.sigma >= 0.0 && self.noise.sigma.is_finite()) {
            return Err(Error::config("noise.sigma", "must be finite and nonnegative"));
        }
        let load_model = match &self.load {
            None => None,
            Some(load) => {
                let engines = world.catalog().engines.as_slice();
                let known = |e: &String| engines.contains(e);
                for e in load.schedule.keys() {
                    if !known(e) {
                        return Err(Error::config(format!("load.schedule.{e}"), "unknown engine"));
                    }
                }
                for e in load.truth.engines.keys() {
                    if !known(e) {
                        return Err(Error::config(format!("load.truth.engines.{e}"), "unknown engine"));
                    }
                }
                if !(load.arrival_interval >= 0.0) {
                    return Err(Error::config("load.arrival_interval", "must be nonnegative"));
                }
                Some(match (&load.model, &load.model_file) {
                    (Some(m), _) => m.clone(),
                    (None, Some(p)) => LoadModel::from_json(&std::fs::read_to_string(base.join(p))?)?,
                    (None, None) => load.truth.clone(),
                })
            }
        };
        let (requests, with_replacement) = sample_requests(&world, &self.requests)?;
        Ok(Prepared {
            scenario: self.clone(),
            hash: self.hash(),
            world,
            truth,
            planning,
            objective,
            load_model,
            requests,
            with_replacement,
        })
    }
}

/// Profiles `world` at `coverage` and annotates its trie with `method`.
pub fn estimated_annotations(world: &GroundTruthWorld, method: Method, coverage: f64, seed: u64) -> Result<ExecutionTrie> {
    let obs = cascade_sample(world, Budget::Coverage(coverage), seed)?;
    let est = estimate(method, &obs, world.structure());
    Ok(annotate_estimate(world.structure(), &est, &obs))
}

fn sample_requests(world: &GroundTruthWorld, s: &RequestSample) -> Result<(Vec<RequestId>, bool)> {
    let n = world.num_requests();
    if s.count == 0 {
        return Err(Error::config("requests.count", "must be positive"));
    }
    let mut rng = rng::rng(rng::key(s.seed, Stream::Requests, 0, 0));
    if s.count <= n {
        let mut ids: Vec<RequestId> = index::sample(&mut rng, n, s.count).into_iter().map(|i| i as RequestId).collect();
        ids.sort_unstable();
        Ok((ids, false))
    } else if s.with_replacement {
        Ok(((0..s.count).map(|_| rng.random_range(0..n) as RequestId).collect(), true))
    } else {
        Err(Error::config(
            "requests.count",
            format!("{} exceeds the world's {n} requests; set with_replacement to resample", s.count),
        ))
    }
}

/// A scenario resolved into everything a run needs.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub scenario: Scenario,
    pub hash: String,
    pub world: GroundTruthWorld,
    /// Oracle annotations.
    pub truth: ExecutionTrie,
    /// Annotations the policies plan with.
    pub planning: ExecutionTrie,
    /// Scenario objective with the latency cap resolved.
    pub objective: Objective,
    /// Curves the load-aware policy plans with.
    pub load_model: Option<LoadModel>,
    pub requests: Vec<RequestId>,
    pub with_replacement: bool,
}

/// Loads a scenario file and prepares it with paths relative to the file.
pub fn prepare_file(path: impl AsRef<Path>) -> Result<Prepared> {
    let path = path.as_ref();
    let base: PathBuf = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Scenario::load(path)?.prepare(&base)
}
