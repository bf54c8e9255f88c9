use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use trieflow_bench::{four_by_six, two_by_four};
use trieflow_core::controller::{next_action, RequestContext};
use trieflow_core::planner::{select_path, select_path_exhaustive, Objective};

fn planner(c: &mut Criterion) {
    let mut g = c.benchmark_group("select_path");
    for (name, trie) in [("2x4", two_by_four()), ("4x6", four_by_six())] {
        for o in ["max_acc:lat<=5", "min_cost:acc>=0.8"] {
            let o: Objective = o.parse().unwrap();
            g.bench_with_input(BenchmarkId::new(format!("pruned/{name}"), o), &trie, |b, t| {
                b.iter(|| select_path(&t.view(), black_box(&o)))
            });
            g.bench_with_input(BenchmarkId::new(format!("exhaustive/{name}"), o), &trie, |b, t| {
                b.iter(|| select_path_exhaustive(&t.view(), black_box(&o)))
            });
        }
    }
    g.finish();
}

fn controller(c: &mut Criterion) {
    let mut g = c.benchmark_group("next_action");
    for (name, trie) in [("2x4", two_by_four()), ("4x6", four_by_six())] {
        let fresh = RequestContext::new(Objective::max_acc_lat(5.0));
        g.bench_function(format!("fresh/{name}"), |b| b.iter(|| next_action(&trie, black_box(&fresh), None)));
        let mut mid = fresh.clone();
        let first = trie.node(trie.node(trie.root()).children[0].1).model.unwrap();
        mid.prefix.push(first);
        mid.elapsed = 1.0;
        mid.spent = 0.1;
        g.bench_function(format!("rerooted/{name}"), |b| b.iter(|| next_action(&trie, black_box(&mid), None)));
    }
    g.finish();
}

criterion_group!(benches, planner, controller);
criterion_main!(benches);
