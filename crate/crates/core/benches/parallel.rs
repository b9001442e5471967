//! Parallel versus sequential execution of the two hot paths.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sinr_sketch::conflict::{build_graph_with, SublinearF};
use sinr_sketch::generators::{gen_random, Family, GenSpec, RandomParams};
use sinr_sketch::harness::{run_tightness_experiment, TightnessConfig};
use sinr_sketch::par::Execution;
use sinr_sketch::scheduling::PowerMode;

const MODES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn graph(c: &mut Criterion) {
    let mut group = c.benchmark_group("build_graph");
    for n in [200, 800] {
        let inst = gen_random(&RandomParams { n, ..Default::default() }, 1).unwrap();
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, n), &inst, |b, inst| b.iter(|| build_graph_with(inst, SublinearF::power(2.0, 0.8), false, exec).unwrap()));
        }
    }
    group.finish();
}

fn tightness(c: &mut Criterion) {
    let mut group = c.benchmark_group("tightness");
    group.sample_size(10);
    let cfg = TightnessConfig {
        spec: GenSpec::new(Family::RandomEuclidean(RandomParams::default()), 0),
        f_lo: SublinearF::One,
        f_hi: SublinearF::power(2.5, 0.8),
        trials: 8,
        master_seed: 1,
        mode: PowerMode::Global,
        timing: false,
    };
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| run_tightness_experiment(&cfg, exec).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, graph, tightness);
criterion_main!(benches);
