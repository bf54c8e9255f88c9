//! Ready-made templates, catalogs and world documents used by tests,
//! benches and the committed scenarios.

use std::collections::BTreeMap;

use super::catalog::{LatencyNoise, ModelCatalog, ModelSpec};
use super::config::{ConditionalLaw, DeepBlock, DeepKind, DifficultyLaw, LogisticLaw, TableLaw, WorldConfig};
use super::document::WorldDocument;
use super::template::WorkflowTemplate;
use crate::trie::{Annotation, ExecutionTrie, Support};

fn spec(id: &str, cost: f64, latency: f64, sigma: f64, engine: &str) -> ModelSpec {
    ModelSpec {
        id: id.into(),
        cost_per_invocation: cost,
        latency_mean: latency,
        latency_noise: if sigma > 0.0 { LatencyNoise::Lognormal { sigma } } else { LatencyNoise::None },
        engine_id: engine.into(),
    }
}

/// `k` identical unit-cost models named `m00, m01, ...` on one repeated family.
pub fn uniform_shape(k: usize, depth: usize) -> (WorkflowTemplate, ModelCatalog) {
    let ids: Vec<String> = (0..k).map(|i| format!("m{i:02}")).collect();
    let catalog = ModelCatalog {
        engines: vec!["e0".into()],
        models: ids.iter().map(|id| spec(id, 1.0, 1.0, 0.0, "e0")).collect(),
    };
    let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
    (WorkflowTemplate::repeated(&refs, depth), catalog)
}

/// `k` models on a generate family followed by a repair loop to `depth`.
pub fn gen_repair_shape(k: usize, depth: usize) -> (WorkflowTemplate, ModelCatalog) {
    let (_, catalog) = uniform_shape(k, depth);
    let ids: Vec<&str> = catalog.models.iter().map(|m| m.id.as_str()).collect();
    (WorkflowTemplate::gen_repair(&ids, &ids, depth), catalog.clone())
}

fn gs_catalog() -> ModelCatalog {
    ModelCatalog {
        engines: vec!["engine-g".into(), "engine-s".into()],
        models: vec![spec("G", 1.0, 1.0, 0.0, "engine-g"), spec("S", 10.0, 3.5, 0.0, "engine-s")],
    }
}

/// Two models, a cheap fast `G` and an expensive slow `S`, generate then one
/// repair; only depth-2 executions terminate.
pub fn gs_shape() -> (WorkflowTemplate, ModelCatalog) {
    let t = WorkflowTemplate::gen_repair(&["G", "S"], &["G", "S"], 2).with_terminal_depths([2]);
    (t, gs_catalog())
}

/// Hand-entered annotations of the two-model worked example.
pub const GS_EXAMPLE_ANNOTATIONS: [(&str, f64, f64, f64); 6] = [
    ("G", 0.72, 1.0, 1.0),
    ("G/G", 0.79, 2.0, 2.1),
    ("G/S", 0.91, 11.0, 4.8),
    ("S", 0.86, 10.0, 3.5),
    ("S/G", 0.89, 11.0, 4.7),
    ("S/S", 0.94, 20.0, 7.0),
];

/// The two-model example trie; only depth-2 nodes may terminate.
pub fn gs_example_trie() -> ExecutionTrie {
    let (t, c) = gs_shape();
    gs_annotated(&t, &c)
}

/// The same annotations with `G` and `S` also allowed to terminate.
pub fn gs_open_example_trie() -> ExecutionTrie {
    let t = WorkflowTemplate::gen_repair(&["G", "S"], &["G", "S"], 2);
    gs_annotated(&t, &gs_catalog())
}

fn gs_annotated(t: &WorkflowTemplate, c: &ModelCatalog) -> ExecutionTrie {
    let mut trie = ExecutionTrie::build(t, c).expect("valid preset");
    for (key, acc, cost, lat) in GS_EXAMPLE_ANNOTATIONS {
        let id = trie.find_key(key).expect("preset prefix");
        trie.set_annotation(id, Some(Annotation { acc, cost, lat, support: Support::default() }));
    }
    trie
}

/// World whose column means are the worked example's accuracies, every depth
/// terminal. Conditional probabilities follow from inverting the cascade
/// recursion, e.g. `q(G | G failed) = (0.79 - 0.72) / 0.28 = 0.25`.
pub fn gs_example_document(seed: u64) -> WorldDocument {
    let mut probs = BTreeMap::new();
    for (key, mu) in [("G", 0.72), ("S", 0.86)] {
        probs.insert(key.to_string(), mu);
    }
    for (key, parent, mu) in [("G/G", 0.72, 0.79), ("G/S", 0.72, 0.91), ("S/G", 0.86, 0.89), ("S/S", 0.86, 0.94)] {
        probs.insert(key.to_string(), (mu - parent) / (1.0 - parent));
    }
    WorldDocument {
        catalog: gs_catalog(),
        template: WorkflowTemplate::gen_repair(&["G", "S"], &["G", "S"], 2),
        world: WorldConfig {
            num_requests: 10_000,
            difficulty: DifficultyLaw::default(),
            law: ConditionalLaw::Table(TableLaw { probs, default: 0.0 }),
        },
        seed,
    }
}

/// Two models, depth 2, every depth terminal, logistic law with
/// request-dependent difficulty and noisy latencies.
pub fn w2_document(seed: u64) -> WorldDocument {
    WorldDocument {
        catalog: ModelCatalog {
            engines: vec!["engine-g".into(), "engine-s".into()],
            models: vec![spec("G", 1.0, 1.0, 0.3, "engine-g"), spec("S", 10.0, 3.5, 0.3, "engine-s")],
        },
        template: WorkflowTemplate::gen_repair(&["G", "S"], &["G", "S"], 2),
        world: WorldConfig {
            num_requests: 10_000,
            difficulty: DifficultyLaw { mean: 0.0, sd: 1.5 },
            law: ConditionalLaw::Logistic(LogisticLaw {
                strength: [("G".to_string(), 1.0), ("S".to_string(), 2.2)].into(),
                depth_penalty: 0.4,
                interaction_sd: 0.3,
                deep: None,
            }),
        },
        seed,
    }
}

const EIGHT: [(&str, f64, f64, f64, &str); 8] = [
    // id, cost, latency, strength, engine
    ("L1", 0.10, 0.6, -0.6, "e1"),
    ("L2", 0.15, 0.8, -0.2, "e1"),
    ("L3", 0.25, 1.0, 0.1, "e2"),
    ("L4", 0.40, 1.3, 0.4, "e2"),
    ("L5", 0.60, 1.6, 0.8, "e3"),
    ("L6", 1.00, 2.0, 1.1, "e3"),
    ("L7", 1.50, 2.6, 1.5, "e4"),
    ("L8", 2.50, 3.2, 1.9, "e4"),
];

fn eight_catalog(sigma: f64) -> ModelCatalog {
    ModelCatalog {
        engines: ["e1", "e2", "e3", "e4"].iter().map(|e| e.to_string()).collect(),
        models: EIGHT.iter().map(|&(id, c, l, _, e)| spec(id, c, l, sigma, e)).collect(),
    }
}

fn eight_template() -> WorkflowTemplate {
    let ids: Vec<&str> = EIGHT.iter().map(|m| m.0).collect();
    WorkflowTemplate::gen_repair(&ids, &ids, 3)
}

fn eight_strengths(shift: f64) -> BTreeMap<String, f64> {
    EIGHT.iter().map(|&(id, _, _, s, _)| (id.to_string(), s + shift)).collect()
}

/// Eight heterogeneous models on four engines, generate plus two repairs,
/// 2000 requests. Deep stages follow a noisy rank-1 logit law.
pub fn reference_document(seed: u64) -> WorldDocument {
    WorldDocument {
        catalog: eight_catalog(0.3),
        template: eight_template(),
        world: WorldConfig {
            num_requests: 2000,
            difficulty: DifficultyLaw { mean: 0.0, sd: 1.5 },
            law: ConditionalLaw::Logistic(LogisticLaw {
                strength: eight_strengths(0.0),
                depth_penalty: 0.4,
                interaction_sd: 0.4,
                deep: Some(DeepBlock { kind: DeepKind::LogitRank1, row_loc: 0.0, row_sd: 0.3, noise_sd: 0.2 }),
            }),
        },
        seed,
    }
}

/// Reference shape whose deep conditional matrix is exactly rank-1 and
/// request-independent.
pub fn rank1_document(seed: u64) -> WorldDocument {
    let mut doc = reference_document(seed);
    if let ConditionalLaw::Logistic(law) = &mut doc.world.law {
        law.deep = Some(DeepBlock { kind: DeepKind::ProbRank1, row_loc: 0.0, row_sd: 1.0, noise_sd: 0.0 });
    }
    doc
}

/// Eight models, depth 3, with easy first stages and hard repairs, sized so
/// that 5% profiling coverage leaves deep columns mostly unobserved.
pub fn coverage_document(seed: u64) -> WorldDocument {
    WorldDocument {
        catalog: eight_catalog(0.0),
        template: eight_template(),
        world: WorldConfig {
            num_requests: 200,
            difficulty: DifficultyLaw { mean: -3.0, sd: 1.0 },
            law: ConditionalLaw::Logistic(LogisticLaw {
                strength: eight_strengths(0.0),
                depth_penalty: 2.5,
                interaction_sd: 0.3,
                deep: None,
            }),
        },
        seed,
    }
}

/// Two models, generate plus three repairs (30 trie paths).
pub fn two_by_four_shape() -> (WorkflowTemplate, ModelCatalog) {
    let catalog = ModelCatalog {
        engines: vec!["e1".into(), "e2".into()],
        models: vec![spec("A", 0.2, 1.0, 0.0, "e1"), spec("B", 1.0, 2.0, 0.0, "e2")],
    };
    (WorkflowTemplate::gen_repair(&["A", "B"], &["A", "B"], 4), catalog)
}

/// Eight models, generate plus two repairs (584 trie paths).
pub fn eight_by_three_shape() -> (WorkflowTemplate, ModelCatalog) {
    (eight_template(), eight_catalog(0.0))
}

/// Four models, generate plus five repairs (5460 trie paths).
pub fn four_by_six_shape() -> (WorkflowTemplate, ModelCatalog) {
    let catalog = ModelCatalog {
        engines: vec!["e1".into(), "e2".into()],
        models: EIGHT[..4].iter().map(|&(id, c, l, _, _)| spec(id, c, l, 0.0, if c < 0.2 { "e1" } else { "e2" })).collect(),
    };
    let ids: Vec<&str> = EIGHT[..4].iter().map(|m| m.0).collect();
    (WorkflowTemplate::gen_repair(&ids, &ids, 6), catalog)
}

/// Names accepted by [`by_name`].
pub const WORLD_PRESETS: [&str; 5] = ["gs_example", "w2", "reference", "rank1", "coverage"];

pub fn by_name(name: &str, seed: u64) -> Option<WorldDocument> {
    Some(match name {
        "gs_example" => gs_example_document(seed),
        "w2" => w2_document(seed),
        "reference" => reference_document(seed),
        "rank1" => rank1_document(seed),
        "coverage" => coverage_document(seed),
        _ => return None,
    })
}
