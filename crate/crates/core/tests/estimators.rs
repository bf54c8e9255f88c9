use std::collections::BTreeMap;

use trieflow_core::estimators::*;
use trieflow_core::profiler::*;
use trieflow_core::workload::{presets, ConditionalLaw, DifficultyLaw, TableLaw, WorldConfig, WorldDocument};
use trieflow_core::{true_column_means, ExecutionTrie, GroundTruthWorld, NodeId};

fn table_world(k: usize, depth: usize, requests: usize, probs: BTreeMap<String, f64>, default: f64, seed: u64) -> GroundTruthWorld {
    let (template, catalog) = presets::uniform_shape(k, depth);
    WorldDocument {
        catalog,
        template,
        world: WorldConfig {
            num_requests: requests,
            difficulty: DifficultyLaw::default(),
            law: ConditionalLaw::Table(TableLaw { probs, default }),
        },
        seed,
    }
    .generate()
    .unwrap()
}

fn direct(value: bool) -> Cell {
    Cell { value, provenance: Provenance::Direct }
}

fn two_model_trie() -> ExecutionTrie {
    let (t, c) = presets::uniform_shape(2, 2);
    ExecutionTrie::build(&t, &c).unwrap()
}

#[test]
fn direct_average_is_arithmetic_mean() {
    let trie = two_model_trie();
    let col = trie.find_key("m00").unwrap();
    let mut filled = FilledTable::default();
    for (q, v) in [(0, true), (1, true), (2, false), (3, true)] {
        filled.insert(q, col, direct(v));
    }
    let est = estimate_direct_average(&filled, &trie);
    assert_eq!(est.get(col), 0.75);
    // Unobserved children inherit the parent's estimate.
    assert_eq!(est.get(trie.find_key("m00/m01").unwrap()), 0.75);
    assert_eq!(est.get(trie.find_key("m01").unwrap()), 0.0);
}

#[test]
fn prefix_avg_counts_fill_in() {
    let trie = two_model_trie();
    let col = trie.find_key("m00/m01").unwrap();
    let mut filled = FilledTable::default();
    for q in 0..3 {
        filled.insert(q, col, Cell { value: true, provenance: Provenance::FillIn });
    }
    filled.insert(3, col, direct(false));
    assert_eq!(estimate_prefix_avg(&filled, &trie).get(col), 0.75);
    assert_eq!(estimate_direct_average(&filled, &trie).get(col), 0.0);
}

#[test]
fn averages_exact_on_fully_observed_table() {
    let world = presets::w2_document(3).generate().unwrap();
    let s = world.structure();
    let truth = true_column_means(&world, s).unwrap();
    let filled = FilledTable::from_truth(&world);
    for est in [estimate_direct_average(&filled, s), estimate_prefix_avg(&filled, s)] {
        for id in s.ids().skip(1) {
            assert!((est.get(id) - truth.get(id).0).abs() < 1e-12);
        }
    }
}

#[test]
fn conditional_matrix_cells() {
    let trie = two_model_trie();
    let mut obs = ObservationSet::new(0);
    let (a, ab) = (trie.find_key("m00").unwrap(), trie.find_key("m00/m01").unwrap());
    for q in 0..2 {
        obs.insert(q, a, Entry { outcome: false, cost: 1.0, latency: 1.0 });
    }
    obs.insert(0, ab, Entry { outcome: true, cost: 1.0, latency: 1.0 });
    obs.insert(1, ab, Entry { outcome: false, cost: 1.0, latency: 1.0 });
    let cm = build_conditional_matrix(&obs, &trie);
    assert_eq!(cm.cell(ab), Some(0.5));
    assert_eq!(cm.count(ab), 2);
    assert_eq!(cm.cell(trie.find_key("m00/m00").unwrap()), None);
    let (_, _, block) = cm.block(&trie, 2);
    assert_eq!((block.rows, block.cols), (2, 2));
    assert_eq!(block.mask.iter().filter(|&&m| m).count(), 1);
}

#[test]
fn conditional_cells_converge_to_configured_rates() {
    let mut doc = presets::gs_example_document(2);
    doc.world.num_requests = 50_000;
    let world = doc.generate().unwrap();
    let s = world.structure();
    let obs = cascade_sample(&world, Budget::Runs(200_000), 1).unwrap();
    let cm = build_conditional_matrix(&obs, s);
    let ConditionalLaw::Table(law) = &doc.world.law else { unreachable!() };
    let mut total = 0.0;
    for (key, p) in &law.probs {
        total += (cm.cell(s.find_key(key).unwrap()).unwrap() - p).abs();
    }
    let mae = total / law.probs.len() as f64;
    assert!(mae < 0.01, "{mae}");
}

fn two_stage_recursion(mu1: f64, q: f64) -> f64 {
    let trie = two_model_trie();
    let mut cells = vec![None; trie.len()];
    cells[trie.find_key("m00").unwrap().index()] = Some(mu1);
    cells[trie.find_key("m00/m01").unwrap().index()] = Some(q);
    let (mu, _) = recurse(&trie, &cells);
    mu[trie.find_key("m00/m01").unwrap().index()]
}

#[test]
fn recursion_matches_disjoint_outcome_enumeration() {
    for (mu1, q) in [(0.6, 0.5), (0.72, 0.25), (0.1, 0.9), (1.0, 0.3), (0.0, 0.0)] {
        // Enumerate (stage1, stage2) outcomes; the path succeeds unless both fail.
        let mut oracle = 0.0;
        for s1 in [true, false] {
            for s2 in [true, false] {
                let p = if s1 { mu1 } else { 1.0 - mu1 } * if s2 { q } else { 1.0 - q };
                if s1 || s2 {
                    oracle += p;
                }
            }
        }
        assert!((two_stage_recursion(mu1, q) - oracle).abs() < 1e-12);
    }
    assert!((two_stage_recursion(0.6, 0.5) - 0.8).abs() < 1e-12);
    assert_eq!(two_stage_recursion(1.0, 0.123), 1.0);
}

#[test]
fn worked_example_inversion() {
    let q: f64 = (0.79 - 0.72) / (1.0 - 0.72);
    assert!((q - 0.25).abs() < 1e-12);
    assert!((two_stage_recursion(0.72, 0.25) - 0.79).abs() < 1e-12);
}

#[test]
fn unobserved_cells_use_depth_mean_and_are_counted() {
    let trie = two_model_trie();
    let mut cells = vec![None; trie.len()];
    cells[trie.find_key("m00").unwrap().index()] = Some(0.5);
    cells[trie.find_key("m01").unwrap().index()] = Some(0.7);
    cells[trie.find_key("m00/m00").unwrap().index()] = Some(0.2);
    cells[trie.find_key("m00/m01").unwrap().index()] = Some(0.4);
    let (mu, fallback) = recurse(&trie, &cells);
    assert_eq!(fallback, 2);
    let s_s = mu[trie.find_key("m01/m01").unwrap().index()];
    assert!((s_s - (0.7 + 0.3 * 0.3)).abs() < 1e-12);
}

#[test]
fn estimates_bounded_and_monotone() {
    let world = presets::reference_document(5).generate().unwrap();
    let s = world.structure();
    let obs = cascade_sample(&world, Budget::Coverage(0.02), 5).unwrap();
    for m in Method::ALL {
        let est = estimate(m, &obs, s);
        assert!(est.mu.iter().all(|v| (0.0..=1.0).contains(v)), "{m}");
        if matches!(m, Method::CascadeLite | Method::CascadeSmoothed) {
            for id in s.ids().skip(1) {
                let p = s.node(id).parent.unwrap();
                assert!(est.get(id) >= est.get(p), "{m} {}", s.prefix_key(id));
            }
        }
    }
}

#[test]
fn cascade_methods_exact_on_exhaustive_profiling() {
    let world = presets::reference_document(2).generate().unwrap();
    let s = world.structure();
    let truth = true_column_means(&world, s).unwrap();
    let obs = ObservationSet::exhaustive(&world);
    let lite = estimate_cascade_lite(&obs, s);
    for id in s.ids().skip(1) {
        // Depth-3 nodes whose prefix never fails have no entries; those use
        // the fallback and carry no weight since mu(parent) = 1 there.
        assert!((lite.get(id) - truth.get(id).0).abs() < 1e-9, "{}", s.prefix_key(id));
    }
}

#[test]
fn smoothing_is_identity_on_exact_rank1_blocks() {
    // Depth-3 outcomes are deterministic with a rank-1 0/1 pattern, so the
    // observed conditional block is exactly rank-1.
    let mut probs = BTreeMap::new();
    let alpha = [1.0, 0.0, 1.0, 1.0];
    let beta = [1.0, 0.0];
    let prefixes = ["m00/m00", "m00/m01", "m01/m00", "m01/m01"];
    for (i, p) in prefixes.iter().enumerate() {
        for (j, m) in ["m00", "m01"].iter().enumerate() {
            probs.insert(format!("{p}/{m}"), alpha[i] * beta[j]);
        }
    }
    let world = table_world(2, 3, 400, probs, 0.3, 3);
    let s = world.structure();
    let obs = ObservationSet::exhaustive(&world);
    let lite = estimate_cascade_lite(&obs, s);
    let smooth = estimate_cascade_smoothed(&obs, s);
    assert_eq!(lite.fallback_cells, 0);
    for id in s.ids() {
        assert!((lite.get(id) - smooth.get(id)).abs() < 1e-6);
    }
}

#[test]
fn smoothing_helps_on_rank1_world() {
    let mut wins = 0;
    for seed in 0..10 {
        let world = presets::rank1_document(seed).generate().unwrap();
        let s = world.structure();
        let truth = true_column_means(&world, s).unwrap();
        let obs = cascade_sample(&world, Budget::Coverage(0.05), seed).unwrap();
        let lite = error_report(&estimate_cascade_lite(&obs, s), &truth.mu, s);
        let smooth = error_report(&estimate_cascade_smoothed(&obs, s), &truth.mu, s);
        wins += usize::from(smooth.depth(3).mean_abs <= lite.depth(3).mean_abs);
    }
    assert!(wins >= 8, "{wins}/10");
}

#[test]
fn error_report_arithmetic() {
    let world = presets::w2_document(1).generate().unwrap();
    let s = world.structure();
    let truth = true_column_means(&world, s).unwrap();
    let mut est = ColumnMeanEstimate { mu: truth.mu.clone(), method: Method::CascadeLite, coverage: None, fallback_cells: 0, residual: None };
    let r = error_report(&est, &truth.mu, s);
    assert_eq!((r.overall.mean_signed, r.overall.mean_abs, r.overall.max_abs), (0.0, 0.0, 0.0));
    est.mu.iter_mut().for_each(|m| *m += 0.01);
    let r = error_report(&est, &truth.mu, s);
    for d in std::iter::once(&r.overall).chain(&r.per_depth) {
        assert!((d.mean_signed - 0.01).abs() < 1e-12);
        assert!((d.mean_abs - 0.01).abs() < 1e-12);
        assert!((d.max_abs - 0.01).abs() < 1e-12);
    }
    assert_eq!(r.overall.columns, 6);
}

#[test]
fn error_report_ordering_invariant() {
    let world = presets::reference_document(1).generate().unwrap();
    let s = world.structure();
    let truth = true_column_means(&world, s).unwrap();
    let obs = cascade_sample(&world, Budget::Coverage(0.02), 3).unwrap();
    for m in Method::ALL {
        let r = error_report(&estimate(m, &obs, s), &truth.mu, s);
        for d in std::iter::once(&r.overall).chain(&r.per_depth) {
            assert!(d.mean_signed.abs() <= d.mean_abs + 1e-15 && d.mean_abs <= d.max_abs + 1e-15);
        }
    }
}

#[test]
fn method_tags_parse() {
    for m in Method::ALL {
        assert_eq!(m.tag().parse::<Method>().unwrap(), m);
    }
    let err = "xgboost".parse::<Method>().unwrap_err().to_string();
    assert!(err.contains("lite"), "{err}");
}

#[test]
fn estimate_annotation_reproduces_expected_spend() {
    let world = presets::w2_document(6).generate().unwrap();
    let s = world.structure();
    let truth = true_column_means(&world, s).unwrap();
    let obs = ObservationSet::exhaustive(&world);
    let est = estimate_cascade_lite(&obs, s);
    let annotated = annotate_estimate(s, &est, &obs);
    for id in s.ids().skip(1) {
        let a = annotated.annotation(id).unwrap();
        let (mu, c, _) = truth.get(id);
        assert!((a.acc - mu).abs() < 1e-9);
        assert!((a.cost - c).abs() < 1e-9, "{}", s.prefix_key(id));
    }
    assert_eq!(annotated.annotation(NodeId::ROOT), None);
}
