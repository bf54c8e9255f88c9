use std::path::{Path, PathBuf};

use trieflow_core::estimators::Method;
use trieflow_core::sim::*;
use trieflow_core::workload::presets;
use trieflow_core::{Annotation, ExecutionTrie};

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn load(name: &str) -> Scenario {
    Scenario::load(scenario_path(name)).unwrap()
}

fn prepare(s: &Scenario) -> Prepared {
    s.prepare(&scenario_path("")).unwrap()
}

fn outcome(r: &RequestRow) -> (u32, String, bool, f64, f64, bool, &'static str) {
    (r.request_id, r.realized_path.clone(), r.success, r.cost, r.latency, r.violated, r.status.name())
}

#[test]
fn static_and_dynamic_agree_without_noise_or_load() {
    let base = load("no_noise_equivalence.json");
    for objective in ["max_acc:lat<=4.9", "max_acc:lat<=7", "min_cost:acc>=0.9", "max_acc:cost<=11", "max_acc:cost<=2"] {
        let mut s = base.clone();
        s.objective = objective.into();
        let report = run_scenario(&prepare(&s)).unwrap();
        let a: Vec<_> = report.rows_for(Policy::Static).map(outcome).collect();
        let b: Vec<_> = report.rows_for(Policy::Dynamic).map(outcome).collect();
        assert_eq!(a.len(), 1000);
        assert_eq!(a, b, "{objective}");
        let (st, dy) = (report.summary(Policy::Static).unwrap(), report.summary(Policy::Dynamic).unwrap());
        assert_eq!((st.accuracy, st.mean_cost, st.mean_latency), (dy.accuracy, dy.mean_cost, dy.mean_latency));
    }
}

#[test]
fn replanning_cuts_violations_under_latency_noise() {
    let report = run_scenario(&prepare(&load("noise_reduction.json"))).unwrap();
    let st = report.summary(Policy::Static).unwrap();
    let dy = report.summary(Policy::Dynamic).unwrap();
    assert_eq!(st.requests, 2000);
    assert!(st.violations > 0);
    assert!(dy.violation_rate < st.violation_rate, "{} vs {}", dy.violation_rate, st.violation_rate);
}

#[test]
fn load_aware_policy_avoids_the_congested_engine() {
    let report = run_scenario(&prepare(&load("load_spike.json"))).unwrap();
    let dy = report.summary(Policy::Dynamic).unwrap();
    let la = report.summary(Policy::DynamicLoadAware).unwrap();
    assert!(la.violation_rate <= dy.violation_rate, "{} vs {}", la.violation_rate, dy.violation_rate);
    assert!(la.violation_rate < report.summary(Policy::Static).unwrap().violation_rate);
}

#[test]
fn violation_flag_is_exact() {
    let report = run_scenario(&prepare(&load("noise_reduction.json"))).unwrap();
    let cap = report.objective.lat_cap.unwrap();
    for r in &report.rows {
        assert_eq!(r.violated, r.latency > cap);
    }
}

#[test]
fn policies_share_noise_draws() {
    // Draws are keyed by request and prefix, not by policy or run order.
    let mut s = load("noise_reduction.json");
    s.requests.count = 300;
    s.policies = vec![Policy::Dynamic, Policy::Dynamic];
    let report = run_scenario(&prepare(&s)).unwrap();
    let (a, b) = report.rows.split_at(300);
    assert_eq!(a, b);
}

#[test]
fn reports_are_deterministic() {
    let mut s = load("load_spike.json");
    s.requests.count = 400;
    let csv = |s: &Scenario| {
        let report = run_scenario(&prepare(s)).unwrap();
        let (mut rows, mut summary) = (Vec::new(), Vec::new());
        report.write_rows_csv(&mut rows).unwrap();
        report.write_summary_csv(&mut summary).unwrap();
        (rows, summary)
    };
    assert_eq!(csv(&s), csv(&s));
    assert_ne!(csv(&s).0, csv(&s.reseeded(1)).0);
}

#[test]
fn scenario_files_round_trip_and_reject_unknown_fields() {
    let s = load("load_spike.json");
    let back = Scenario::from_json(&s.to_json()).unwrap();
    assert_eq!(back, s);
    assert_eq!(back.hash(), s.hash());
    assert_ne!(s.reseeded(1).hash(), s.hash());
    let bad = r#"{"name":"x","world":{"kind":"preset","name":"w2","seed":1},"requests":{"count":1,"seed":1},"objective":"min_cost:acc>=0.5","seed":1,"extra":1}"#;
    assert!(Scenario::from_json(bad).is_err());
}

#[test]
fn oversized_samples_need_replacement() {
    let mut s = load("no_noise_equivalence.json");
    s.requests.count = 20_000;
    assert!(s.prepare(&scenario_path("")).is_err());
    s.requests.with_replacement = true;
    let p = prepare(&s);
    assert_eq!(p.requests.len(), 20_000);
    assert!(p.with_replacement);
}

#[test]
fn oracle_frontier_achieves_what_it_plans() {
    let s = load("reference_sweeps.json");
    let p = prepare(&s);
    let sources = vec![("oracle".to_string(), p.truth.clone())];
    for kind in [SweepKind::MinCostAcc, SweepKind::MaxAccCost] {
        let grid = match kind {
            SweepKind::MinCostAcc => s.frontier.as_ref().unwrap().grid.clone(),
            SweepKind::MaxAccCost => s.policy_gap.as_ref().unwrap().grid.clone(),
        };
        for r in frontier_sweep(&p.truth, &sources, kind, &grid) {
            assert_eq!(r.planned, r.achieved);
            assert_ne!(r.slo_met, Some(false));
        }
    }
}

#[test]
fn direct_averaging_cannot_reach_high_accuracy_floors() {
    let s = load("reference_sweeps.json");
    let p = prepare(&s);
    let mut cfg = s.frontier.clone().unwrap();
    cfg.methods = vec![Method::Direct];
    let rows = frontier_sweep(&p.truth, &sweep_sources(&p, &cfg).unwrap(), cfg.kind, &cfg.grid);
    // Sparse deep columns can plan for any floor; what the plan achieves stops short.
    let best = |src: &str| {
        rows.iter().filter(|r| r.source == src).filter_map(|r| r.achieved).map(|a| a.0).fold(0.0, f64::max)
    };
    assert!(best("direct") < best("oracle") - 0.05, "direct {} oracle {}", best("direct"), best("oracle"));
    assert!(rows.iter().filter(|r| r.source == "direct" && r.bound >= 0.8).all(|r| r.slo_met != Some(true)));
}

#[test]
fn mixing_identical_models_gains_nothing() {
    let (t, c) = presets::gen_repair_shape(3, 3);
    let mut trie = ExecutionTrie::build(&t, &c).unwrap();
    let ids: Vec<_> = trie.ids().skip(1).collect();
    for id in ids {
        let d = trie.node(id).prefix.len() as f64;
        trie.set_annotation(id, Some(Annotation { acc: 1.0 - 0.5f64.powf(d), cost: d, lat: d, support: Default::default() }));
    }
    let grid: Vec<f64> = (0..=8).map(|i| 0.5 * i as f64).collect();
    for r in policy_gap_report(&trie, &[("oracle".into(), trie.clone())], &grid) {
        assert_eq!(r.delta, 0.0);
    }
}

#[test]
fn trie_paths_dominate_static_configurations() {
    let s = load("reference_sweeps.json");
    let p = prepare(&s);
    let cfg = s.policy_gap.clone().unwrap();
    let rows = policy_gap_report(&p.truth, &sweep_sources(&p, &cfg).unwrap(), &cfg.grid);
    for r in &rows {
        assert!(r.planned_trie_acc >= r.planned_static_acc, "{r:?}");
    }
    let oracle: Vec<_> = rows.iter().filter(|r| r.source == "oracle").collect();
    assert!(oracle.iter().all(|r| r.delta >= 0.0));
    assert!(oracle.iter().any(|r| r.delta > 0.0));
    assert!(gap_auc(&rows, "oracle") > 0.0);
}
