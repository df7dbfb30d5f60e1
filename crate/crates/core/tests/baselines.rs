use diagraph::baselines::*;
use diagraph::gnn::{Arch, Model, ModelConfig, TaskKind};
use diagraph::graph::Scheme;
use diagraph::ingest::{generate_synthetic_corpus, SyntheticSpec};
use diagraph::parallel::Execution;
use diagraph::tensor::Tensor;
use diagraph::training::{Dataset, NodeEmbedder, Task};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn blobs(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let c = i % 2;
        let centre = if c == 0 { -2.0 } else { 2.0 };
        x.push(vec![centre + rng.gen_range(-1.0..1.0), rng.gen_range(-3.0..3.0), centre + rng.gen_range(-1.0..1.0)]);
        y.push(c);
    }
    (x, y)
}

#[test]
fn separable_blobs() {
    let (x, y) = blobs(200, 1);
    let (xt, yt) = blobs(200, 2);
    let f = forest_fit(&x, &y, 2, &ForestConfig::default(), 3, Execution::Parallel).unwrap();
    let acc = f.predict(&xt).iter().zip(&yt).filter(|(p, t)| p == t).count() as f64 / 200.0;
    assert!(acc >= 0.95, "accuracy {acc}");
}

#[test]
fn single_tree_on_pure_labels() {
    let (x, _) = blobs(50, 4);
    let y = vec![1; 50];
    let cfg = ForestConfig {
        n_trees: 1,
        ..ForestConfig::default()
    };
    let f = forest_fit(&x, &y, 3, &cfg, 0, Execution::Sequential).unwrap();
    assert_eq!(f.predict(&x), y);
    assert_eq!(f.trees[0].n_leaves(), 1);
}

#[test]
fn seeded_and_policy_independent() {
    let (x, y) = blobs(120, 5);
    let cfg = ForestConfig {
        n_trees: 20,
        ..ForestConfig::default()
    };
    let a = forest_fit(&x, &y, 2, &cfg, 9, Execution::Sequential).unwrap();
    let b = forest_fit(&x, &y, 2, &cfg, 9, Execution::Parallel).unwrap();
    assert_eq!(a, b);
    let c = forest_fit(&x, &y, 2, &cfg, 10, Execution::Sequential).unwrap();
    assert_ne!(a, c);
}

#[test]
fn vote_ignores_tree_order() {
    let (x, y) = blobs(120, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let y: Vec<usize> = y.iter().map(|&c| if rng.gen_bool(0.3) { 2 } else { c }).collect();
    let cfg = ForestConfig {
        n_trees: 15,
        ..ForestConfig::default()
    };
    let f = forest_fit(&x, &y, 3, &cfg, 1, Execution::Sequential).unwrap();
    let mut rev = f.clone();
    rev.trees.reverse();
    assert_eq!(f.predict(&x), rev.predict(&x));
}

#[test]
fn unbounded_forest_beats_majority_on_training_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..5 {
        let n = 80;
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..4).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
        let y: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
        let f = forest_fit(&x, &y, 3, &ForestConfig::default(), trial, Execution::Sequential).unwrap();
        let acc = f.predict(&x).iter().zip(&y).filter(|(p, t)| p == t).count();
        let majority = (0..3).map(|c| y.iter().filter(|&&v| v == c).count()).max().unwrap();
        assert!(acc >= majority, "{acc} < {majority}");
    }
}

#[test]
fn dummy_on_balanced_classes() {
    let train: Vec<usize> = (0..1000).map(|i| i % 2).collect();
    let truth: Vec<usize> = (0..4000).map(|i| (i / 3) % 2).collect();
    let pred = dummy_fit_predict(&train, truth.len(), 12).unwrap();
    let acc = pred.iter().zip(&truth).filter(|(p, t)| p == t).count() as f64 / truth.len() as f64;
    // 95% binomial interval around 0.5 for n = 4000
    let half_width = 1.96 * (0.25f64 / 4000.0).sqrt();
    assert!((acc - 0.5).abs() <= half_width, "accuracy {acc}");
}

#[test]
fn mean_vector_matches_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let rows = rng.gen_range(1..20);
        let data: Vec<f64> = (0..rows * 5).map(|_| rng.gen_range(0.0..1.0)).collect();
        let t = Tensor::from_vec(rows, 5, data).unwrap();
        let got = graph_mean_vector(&t).unwrap();
        for (c, &g) in got.iter().enumerate() {
            let mut s = 0.0;
            for r in 0..rows {
                s += t.get(r, c);
            }
            assert!((g - s / rows as f64).abs() <= 1e-12);
        }
    }
}

#[test]
fn baseline_runs_on_synthetic_data() {
    let spec = SyntheticSpec {
        n_diagrams: 40,
        ..SyntheticSpec::default()
    };
    let diagrams = generate_synthetic_corpus(&spec, 3).unwrap().into_diagrams();
    let node = FlatData::from_dataset(&Dataset::node(&diagrams, Scheme::A).unwrap()).unwrap();
    let cfg = ForestConfig {
        n_trees: 10,
        ..ForestConfig::default()
    };
    for b in Baseline::ALL {
        let a = run_baseline(b, &node, &cfg, 3, 5, Execution::Parallel).unwrap();
        let s = run_baseline(b, &node, &cfg, 3, 5, Execution::Sequential).unwrap();
        assert_eq!(a, s);
        assert!(a.iter().all(|r| (0.0..=1.0).contains(&r.accuracy) && r.epochs == 0));
    }
    let model = Model::new(
        ModelConfig::new(Arch::Gcn, TaskKind::Node, 4, 5, 5),
        &mut ChaCha8Rng::seed_from_u64(0),
    )
    .unwrap();
    let embedder = NodeEmbedder {
        scheme: Scheme::A,
        model,
    };
    let graph = Dataset::graph(&diagrams, Scheme::A, Task::GraphFine12, &embedder).unwrap();
    let flat = FlatData::from_dataset(&graph).unwrap();
    assert!(flat.groups.iter().all(|(x, y)| x.len() == 1 && x[0].len() == 5 && y.len() == 1));
    let sum: f64 = flat.groups[0].0[0].iter().sum();
    assert!((sum - 1.0).abs() < 1e-9);
    assert_eq!(run_baseline(Baseline::Rf, &flat, &cfg, 2, 1, Execution::Parallel).unwrap().len(), 2);
}
