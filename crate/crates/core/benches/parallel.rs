use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use diagraph::baselines::{forest_fit, ForestConfig};
use diagraph::gnn::Arch;
use diagraph::graph::Scheme;
use diagraph::ingest::{generate_synthetic_corpus, SyntheticSpec};
use diagraph::parallel::Execution;
use diagraph::training::{run_protocol, Dataset, Hyperparams, Task, TrainOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const POLICIES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn forest(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x: Vec<Vec<f64>> = (0..2000).map(|_| (0..4).map(|_| rng.gen()).collect()).collect();
    let y: Vec<usize> = x.iter().map(|r| usize::from(r[0] + r[1] > 1.0) + usize::from(r[2] > 0.7)).collect();
    let config = ForestConfig {
        n_trees: 50,
        ..ForestConfig::default()
    };
    let mut group = c.benchmark_group("forest_fit");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| forest_fit(&x, &y, 3, &config, 1, exec).unwrap())
        });
    }
    group.finish();
}

fn protocol(c: &mut Criterion) {
    let spec = SyntheticSpec {
        n_diagrams: 40,
        ..SyntheticSpec::default()
    };
    let diagrams = generate_synthetic_corpus(&spec, 1).unwrap().into_diagrams();
    let data = Dataset::node(&diagrams, Scheme::A).unwrap();
    let hp = Hyperparams {
        learning_rate: 0.01,
        batch_size: 8,
        hidden_size: 16,
        l2_penalty: 1e-5,
    };
    let opts = TrainOptions {
        max_epochs: 5,
        ..TrainOptions::for_task(Task::Node)
    };
    let mut group = c.benchmark_group("run_protocol");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| run_protocol(&data, Arch::Gcn, &hp, 4, 1, &opts, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, forest, protocol);
criterion_main!(benches);
