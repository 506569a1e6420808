use std::path::PathBuf;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use signage_explore::batch::{map_sequential, map_trials};
use signage_explore::harness::Scenario;

fn load(name: &str, trials: usize) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name);
    Scenario::load(path).unwrap().with_trials(trials, 1)
}

fn trials(c: &mut Criterion) {
    let mut group = c.benchmark_group("trials");
    group.sample_size(10);
    for (name, n) in [("distractors.json", 8), ("mall4_start1.json", 4)] {
        let scn = load(name, n);
        let idx: Vec<usize> = (0..n).collect();
        let run = |&i: &usize| scn.run_trial(i).unwrap().metrics.covered;
        group.bench_with_input(BenchmarkId::new("sequential", name), &idx, |b, idx| {
            b.iter(|| map_sequential(idx, run))
        });
        group.bench_with_input(BenchmarkId::new("parallel", name), &idx, |b, idx| {
            b.iter(|| map_trials(idx, run))
        });
    }
    group.finish();
}

criterion_group!(benches, trials);
criterion_main!(benches);
