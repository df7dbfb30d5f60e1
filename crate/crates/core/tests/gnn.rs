mod common;

use std::rc::Rc;

use common::oracles::{gat_loop_oracle, random_gat_heads, random_sage, run_gat, run_sage, sage_loop_oracle};
use common::{add_bias, dense_mul, dense_normalized, random_graph, random_tensor};
use diagraph::gnn::{
    gcn_layer, mean_readout, normalized_adjacency, sgc_propagate, Arch, GraphBatch, Model, ModelConfig,
    NeighborOrder, TaskKind,
};
use diagraph::graph::TypedGraph;
use diagraph::tensor::{gradient_check, Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn batch_of(g: &TypedGraph, x: &Tensor) -> GraphBatch {
    GraphBatch::new(&[(g, x)]).unwrap()
}

fn two_node_graph() -> TypedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    loop {
        let g = random_graph(&mut rng, 2, 1.0);
        if g.non_loop_edges().count() == 2 {
            return g;
        }
    }
}

#[test]
fn normalized_adjacency_examples() {
    let s = normalized_adjacency(&two_node_graph()).unwrap();
    assert_eq!(s.to_rows(), vec![vec![0.5, 0.5], vec![0.5, 0.5]]);

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let empty = random_graph(&mut rng, 5, 0.0);
    assert_eq!(normalized_adjacency(&empty).unwrap(), Tensor::identity(5));
}

#[test]
fn ring_rows_sum_equally() {
    use diagraph::graph::build_scheme_a_graph;
    use diagraph::ingest::{Element, RawAnnotation, Relation};
    let n = 6;
    let mut elements: Vec<Element> = (0..n - 1)
        .map(|i| Element {
            id: format!("E{i}"),
            kind: diagraph::graph::NodeKind::Text,
            polygon: Some(diagraph::geometry::Polygon::from_coords(&[(0., 0.), (1., 0.), (1., 1.)])),
            text: None,
        })
        .collect();
    elements.push(Element {
        id: "I0".into(),
        kind: diagraph::graph::NodeKind::ImageConst,
        polygon: None,
        text: None,
    });
    let relations = (0..n)
        .map(|i| Relation {
            id: format!("R{i}"),
            category: "x".into(),
            participants: vec![elements[i].id.clone(), elements[(i + 1) % n].id.clone()],
        })
        .collect();
    let raw = RawAnnotation {
        diagram_id: "ring".into(),
        image_width: 10.0,
        image_height: 10.0,
        elements,
        relations,
    };
    let s = normalized_adjacency(&build_scheme_a_graph(&raw).finalize(true).unwrap()).unwrap();
    let sums: Vec<f64> = s.to_rows().iter().map(|r| r.iter().sum()).collect();
    for v in &sums {
        assert!((v - sums[0]).abs() < 1e-12);
    }
    assert!(s.max_abs_diff(&s.transpose()) < 1e-15);
}

#[test]
fn gcn_on_edgeless_graph_is_dense_layer() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let g = random_graph(&mut rng, 4, 0.0);
    let x = random_tensor(&mut rng, 4, 3);
    let (w, b) = (random_tensor(&mut rng, 3, 2), random_tensor(&mut rng, 1, 2));
    let batch = batch_of(&g, &x);
    let mut tape = Tape::new();
    let (hx, hw, hb) = (tape.leaf(x.clone()), tape.leaf(w.clone()), tape.leaf(b.clone()));
    let out = gcn_layer(&mut tape, &batch, hx, hw, hb).unwrap();
    let out = tape.relu(out);
    let expected = add_bias(&dense_mul(&x, &w), &b).map(|v| v.max(0.0));
    assert!(tape.value(out).max_abs_diff(&expected) < 1e-15);
}

#[test]
fn gcn_complete_graph_identical_features() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = random_graph(&mut rng, 5, 1.0);
    let row = random_tensor(&mut rng, 1, 3);
    let x = Tensor::from_rows(&vec![row.row(0).to_vec(); 5]).unwrap();
    let batch = batch_of(&g, &x);
    let mut tape = Tape::new();
    let (hx, hw, hb) = (
        tape.leaf(x),
        tape.leaf(random_tensor(&mut rng, 3, 4)),
        tape.leaf(Tensor::zeros(1, 4)),
    );
    let out = gcn_layer(&mut tape, &batch, hx, hw, hb).unwrap();
    let v = tape.value(out);
    for r in 1..5 {
        for c in 0..4 {
            assert!((v.get(r, c) - v.get(0, c)).abs() < 1e-12);
        }
    }
}

#[test]
fn gcn_matches_dense_oracle_on_100_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let n = rng.gen_range(1..10);
        let g = random_graph(&mut rng, n, 0.3);
        let x = random_tensor(&mut rng, n, 4);
        let (w, b) = (random_tensor(&mut rng, 4, 3), random_tensor(&mut rng, 1, 3));
        let batch = batch_of(&g, &x);
        let mut tape = Tape::new();
        let (hx, hw, hb) = (tape.leaf(x.clone()), tape.leaf(w.clone()), tape.leaf(b.clone()));
        let out = gcn_layer(&mut tape, &batch, hx, hw, hb).unwrap();
        let s = dense_normalized(&g);
        let expected = add_bias(&dense_mul(&s, &dense_mul(&x, &w)), &b);
        assert!(tape.value(out).max_abs_diff(&expected) < 1e-12);
    }
}

#[test]
fn sgc_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let n = rng.gen_range(1..10);
        let g = random_graph(&mut rng, n, 0.3);
        let x = random_tensor(&mut rng, n, 4);
        let batch = batch_of(&g, &x);
        let mut tape = Tape::new();
        let hx = tape.leaf(x.clone());
        let out = sgc_propagate(&mut tape, &batch, hx, 2).unwrap();
        let s = dense_normalized(&g);
        let expected = dense_mul(&s, &dense_mul(&s, &x));
        assert!(tape.value(out).max_abs_diff(&expected) < 1e-12);
    }
}

#[test]
fn sgc_two_node_example() {
    let g = two_node_graph();
    let batch = batch_of(&g, &Tensor::identity(2));
    let cfg = ModelConfig::new(Arch::Sgc, TaskKind::Node, 2, 0, 2);
    let mut model = Model::new(cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    model.restore(&[Tensor::identity(2), Tensor::zeros(1, 2)]);
    assert_eq!(
        model.logits(&batch, NeighborOrder::Index).unwrap().to_rows(),
        vec![vec![0.5, 0.5], vec![0.5, 0.5]]
    );
}

#[test]
fn sgc_equals_two_linear_gcn_layers() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let g = random_graph(&mut rng, 7, 0.4);
    let x = random_tensor(&mut rng, 7, 4);
    let w = random_tensor(&mut rng, 4, 3);
    let batch = batch_of(&g, &x);
    let mut tape = Tape::new();
    let (hx, hw) = (tape.leaf(x.clone()), tape.leaf(w.clone()));
    let (eye, z4, z3) = (
        tape.leaf(Tensor::identity(4)),
        tape.leaf(Tensor::zeros(1, 4)),
        tape.leaf(Tensor::zeros(1, 3)),
    );
    let s2x = sgc_propagate(&mut tape, &batch, hx, 2).unwrap();
    let sgc = tape.matmul(s2x, hw).unwrap();
    let l1 = gcn_layer(&mut tape, &batch, hx, eye, z4).unwrap();
    let l2 = gcn_layer(&mut tape, &batch, l1, hw, z3).unwrap();
    assert!(tape.value(sgc).max_abs_diff(tape.value(l2)) < 1e-12);
}

#[test]
fn gat_matches_loop_oracle_on_100_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let n = rng.gen_range(1..10);
        let g = random_graph(&mut rng, n, 0.3);
        let x = random_tensor(&mut rng, n, 4);
        let heads = random_gat_heads(&mut rng, 4, 3, 2);
        let got = run_gat(&batch_of(&g, &x), &x, &heads);
        assert!(got.max_abs_diff(&gat_loop_oracle(&g, &x, &heads, 0.2)) < 1e-12);
    }
}

#[test]
fn gat_isolated_node_attends_to_itself() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let g = random_graph(&mut rng, 1, 0.0);
    let x = random_tensor(&mut rng, 1, 4);
    let heads = random_gat_heads(&mut rng, 4, 3, 2);
    let got = run_gat(&batch_of(&g, &x), &x, &heads);
    for (k, h) in heads.iter().enumerate() {
        let wh = add_bias(&dense_mul(&x, &h.w), &h.b);
        for c in 0..3 {
            assert!((got.get(0, k * 3 + c) - wh.get(0, c)).abs() < 1e-15);
        }
    }
}

#[test]
fn gat_attention_sums_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let g = random_graph(&mut rng, 8, 0.4);
    let x = random_tensor(&mut rng, 8, 4);
    let batch = batch_of(&g, &x);
    let mut tape = Tape::new();
    let scores = tape.leaf(random_tensor(&mut rng, batch.edges().len(), 1));
    let dst: Rc<[usize]> = batch.edges().iter().map(|&(d, _)| d).collect();
    let alpha = tape.segment_softmax(scores, dst.clone()).unwrap();
    let mut sums = [0.0; 8];
    for (e, &d) in dst.iter().enumerate() {
        sums[d] += tape.value(alpha).data()[e];
    }
    for s in sums {
        assert!((s - 1.0).abs() < 1e-12);
    }
}

#[test]
fn sage_matches_loop_oracle_on_100_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..100 {
        let n = rng.gen_range(1..10);
        let g = random_graph(&mut rng, n, 0.3);
        let x = random_tensor(&mut rng, n, 3);
        let p = random_sage(&mut rng, 3, 4);
        let batch = batch_of(&g, &x);
        let got = run_sage(&batch, &x, &p, batch.neighbors());
        assert!(got.max_abs_diff(&sage_loop_oracle(&g, &x, &p)) < 1e-12);
    }
}

#[test]
fn sage_isolated_node_uses_only_self() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let g = random_graph(&mut rng, 3, 0.0);
    let x = random_tensor(&mut rng, 3, 3);
    let p = random_sage(&mut rng, 3, 4);
    let got = run_sage(&batch_of(&g, &x), &x, &p, &[vec![], vec![], vec![]]);
    let expected = add_bias(&dense_mul(&x, &p.w_self), &p.b);
    assert!(got.max_abs_diff(&expected) < 1e-15);
}

#[test]
fn sage_single_neighbor_is_one_lstm_step() {
    let g = two_node_graph();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let x = random_tensor(&mut rng, 2, 3);
    let p = random_sage(&mut rng, 3, 2);
    let got = run_sage(&batch_of(&g, &x), &x, &p, &[vec![1], vec![0]]);
    let mut tape = Tape::new();
    let vars = p.lstm.record(&mut tape);
    let x1 = tape.leaf(Tensor::from_vec(1, 3, x.row(1).to_vec()).unwrap());
    let zero = tape.leaf(Tensor::zeros(1, 3));
    let (h, _) = diagraph::tensor::lstm_cell(&mut tape, x1, zero, zero, &vars).unwrap();
    let own = Tensor::from_vec(1, 3, x.row(0).to_vec()).unwrap();
    let expected = add_bias(
        &dense_mul(&own, &p.w_self).zip_map(&dense_mul(tape.value(h), &p.w_neigh), |a, b| a + b),
        &p.b,
    );
    assert!((0..2).all(|c| (got.get(0, c) - expected.get(0, c)).abs() < 1e-15));
}

#[test]
fn sage_seeded_order_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let g = random_graph(&mut rng, 9, 0.5);
    let x = random_tensor(&mut rng, 9, 4);
    let cfg = ModelConfig::new(Arch::Sage, TaskKind::Node, 4, 6, 3);
    let model = Model::new(cfg, &mut rng).unwrap();
    let batch = batch_of(&g, &x);
    let a = model.logits(&batch, NeighborOrder::Seeded(42)).unwrap();
    let b = model.logits(&batch, NeighborOrder::Seeded(42)).unwrap();
    assert_eq!(a.data(), b.data());
}

#[test]
fn mean_readout_matches_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let graphs: Vec<TypedGraph> = (0..5)
        .map(|_| {
            let n = rng.gen_range(1..7);
            random_graph(&mut rng, n, 0.3)
        })
        .collect();
    let feats: Vec<Tensor> = graphs.iter().map(|g| random_tensor(&mut rng, g.node_count(), 3)).collect();
    let pairs: Vec<(&TypedGraph, &Tensor)> = graphs.iter().zip(&feats).collect();
    let batch = GraphBatch::new(&pairs).unwrap();
    let mut tape = Tape::new();
    let x = tape.leaf(batch.features().clone());
    let out = mean_readout(&mut tape, &batch, x).unwrap();
    for (gi, f) in feats.iter().enumerate() {
        for c in 0..3 {
            let mean = (0..f.rows()).map(|r| f.get(r, c)).sum::<f64>() / f.rows() as f64;
            assert!((tape.value(out).get(gi, c) - mean).abs() < 1e-12);
        }
    }
}

#[test]
fn gcn_parameter_count() {
    let cfg = ModelConfig::new(Arch::Gcn, TaskKind::Node, 4, 10, 5);
    let model = Model::new(cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    // weights 4x10, 10x10, 10x5 plus biases 10, 10, 5
    assert_eq!(model.parameter_count(), 4 * 10 + 10 * 10 + 10 * 5 + (10 + 10 + 5));
}

#[test]
fn outputs_are_per_node_or_per_graph() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let graphs: Vec<TypedGraph> = (0..3).map(|_| random_graph(&mut rng, 5, 0.4)).collect();
    let refs: Vec<&TypedGraph> = graphs.iter().collect();
    let batch = GraphBatch::from_layout(&refs).unwrap();
    for arch in Arch::ALL {
        for (task, rows) in [(TaskKind::Node, 15), (TaskKind::Graph, 3)] {
            let model = Model::new(ModelConfig::new(arch, task, 4, 6, 5), &mut rng).unwrap();
            let p = model.predict_proba(&batch, NeighborOrder::Seeded(1)).unwrap();
            assert_eq!(p.shape(), [rows, 5], "{arch} {task:?}");
            for r in 0..rows {
                assert!((p.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
}

fn permuted(g: &TypedGraph, x: &Tensor, perm: &[usize]) -> (TypedGraph, Tensor) {
    // perm[new] = old
    use diagraph::graph::build_scheme_a_graph;
    use diagraph::ingest::{Element, RawAnnotation, Relation};
    let nodes = g.nodes();
    let elements: Vec<Element> = perm
        .iter()
        .map(|&o| Element {
            id: nodes[o].id.clone(),
            kind: nodes[o].kind,
            polygon: nodes[o].polygon.clone(),
            text: None,
        })
        .collect();
    let relations = g
        .non_loop_edges()
        .filter(|e| e.src < e.dst)
        .enumerate()
        .map(|(i, e)| Relation {
            id: format!("R{i}"),
            category: "x".into(),
            participants: vec![nodes[e.src].id.clone(), nodes[e.dst].id.clone()],
        })
        .collect();
    let raw = RawAnnotation {
        diagram_id: g.diagram_id.clone(),
        image_width: 100.0,
        image_height: 100.0,
        elements,
        relations,
    };
    let pg = build_scheme_a_graph(&raw).finalize(true).unwrap();
    let rows: Vec<Vec<f64>> = perm.iter().map(|&o| x.row(o).to_vec()).collect();
    (pg, Tensor::from_rows(&rows).unwrap())
}

#[test]
fn permutation_equivariance() {
    use rand::seq::SliceRandom;
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for _ in 0..10 {
        let g = random_graph(&mut rng, 7, 0.4);
        let x = random_tensor(&mut rng, 7, 4);
        let mut perm: Vec<usize> = (0..7).collect();
        perm.shuffle(&mut rng);
        let (pg, px) = permuted(&g, &x, &perm);
        for arch in Arch::ALL {
            let order = if arch == Arch::Sage {
                NeighborOrder::ByFeatures
            } else {
                NeighborOrder::Index
            };
            let node = Model::new(ModelConfig::new(arch, TaskKind::Node, 4, 5, 3), &mut rng).unwrap();
            let a = node.logits(&batch_of(&g, &x), order).unwrap();
            let b = node.logits(&batch_of(&pg, &px), order).unwrap();
            for (new, &old) in perm.iter().enumerate() {
                for c in 0..3 {
                    assert!((a.get(old, c) - b.get(new, c)).abs() < 1e-9, "{arch}");
                }
            }
            let graph = Model::new(ModelConfig::new(arch, TaskKind::Graph, 4, 5, 3), &mut rng).unwrap();
            let a = graph.logits(&batch_of(&g, &x), order).unwrap();
            let b = graph.logits(&batch_of(&pg, &px), order).unwrap();
            assert!(a.max_abs_diff(&b) < 1e-9, "{arch}");
        }
    }
}

#[test]
fn isolated_node_output_ignores_other_nodes() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut checked = 0;
    while checked < 10 {
        let g = random_graph(&mut rng, 6, 0.3);
        let Some(iso) = (0..6).find(|&v| g.non_loop_edges().all(|e| e.src != v && e.dst != v)) else {
            continue;
        };
        checked += 1;
        let x = random_tensor(&mut rng, 6, 4);
        let mut y = random_tensor(&mut rng, 6, 4);
        y.row_mut(iso).copy_from_slice(x.row(iso));
        for arch in Arch::ALL {
            let m = Model::new(ModelConfig::new(arch, TaskKind::Node, 4, 5, 3), &mut rng).unwrap();
            let a = m.logits(&batch_of(&g, &x), NeighborOrder::Seeded(3)).unwrap();
            let b = m.logits(&batch_of(&g, &y), NeighborOrder::Seeded(3)).unwrap();
            for c in 0..3 {
                assert!((a.get(iso, c) - b.get(iso, c)).abs() < 1e-12, "{arch}");
            }
        }
    }
}

#[test]
fn every_architecture_passes_gradient_check() {
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let graphs = [random_graph(&mut rng, 6, 0.4), random_graph(&mut rng, 6, 0.4)];
        let feats = [random_tensor(&mut rng, 6, 4), random_tensor(&mut rng, 6, 4)];
        let batch = GraphBatch::new(&[(&graphs[0], &feats[0]), (&graphs[1], &feats[1])]).unwrap();
        for arch in Arch::ALL {
            for task in [TaskKind::Node, TaskKind::Graph] {
                let cfg = ModelConfig::new(arch, task, 4, 3, 3);
                let model = Model::new(cfg.clone(), &mut rng).unwrap();
                let rows = if task == TaskKind::Node { 12 } else { 2 };
                let targets: Rc<[usize]> = (0..rows).map(|_| rng.gen_range(0..3)).collect();
                let weights: Rc<[f64]> = vec![1.5, 0.75, 1.0].into();
                // random biases keep pre-activations away from the relu kink
                let inputs: Vec<Tensor> = model
                    .snapshot()
                    .iter()
                    .map(|t| {
                        let noise = random_tensor(&mut rng, t.rows(), t.cols());
                        t.zip_map(&noise, |a, b| a + 0.1 * b)
                    })
                    .collect();
                let report = gradient_check(
                    |tape, vars| {
                        let logits =
                            Model::forward_with(&cfg, tape, vars, &batch, NeighborOrder::Seeded(seed))
                                .map_err(|e| match e {
                                    diagraph::gnn::GnnError::Tensor(t) => t,
                                    other => panic!("{other}"),
                                })?;
                        tape.weighted_cross_entropy(logits, targets.clone(), weights.clone())
                    },
                    &inputs,
                    1e-5,
                )
                .unwrap();
                assert!(
                    report.max_relative_error < 1e-4,
                    "{arch} {task:?} seed {seed}: {report:?}"
                );
            }
        }
    }
}

#[test]
fn checkpoint_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let dir = tempfile::tempdir().unwrap();
    for arch in Arch::ALL {
        let m = Model::new(ModelConfig::new(arch, TaskKind::Graph, 5, 7, 4), &mut rng).unwrap();
        let path = dir.path().join(format!("{arch}.json"));
        m.save(&path).unwrap();
        let back = Model::load(&path).unwrap();
        assert_eq!(back.snapshot(), m.snapshot());
        assert_eq!(back.config(), m.config());
    }
    let m = Model::new(ModelConfig::new(Arch::Gcn, TaskKind::Node, 4, 5, 3), &mut rng).unwrap();
    let mut ck = m.to_checkpoint();
    ck.params[0].shape = [5, 5];
    assert!(Model::from_checkpoint(&ck).is_err());
}

#[test]
fn invalid_configs_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(Model::new(ModelConfig::new(Arch::Gcn, TaskKind::Node, 0, 5, 3), &mut rng).is_err());
    assert!(Model::new(ModelConfig::new(Arch::Gat, TaskKind::Node, 4, 0, 3), &mut rng).is_err());
    assert!(Model::new(ModelConfig::new(Arch::Sgc, TaskKind::Node, 4, 0, 3), &mut rng).is_ok());
}

#[test]
fn unfinalized_graph_is_contract_violation() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let g = random_graph(&mut rng, 3, 0.5);
    let raw_graph = {
        use diagraph::graph::build_scheme_a_graph;
        use diagraph::ingest::{Element, RawAnnotation};
        let raw = RawAnnotation {
            diagram_id: "u".into(),
            image_width: 1.0,
            image_height: 1.0,
            elements: vec![Element {
                id: "I0".into(),
                kind: diagraph::graph::NodeKind::ImageConst,
                polygon: None,
                text: None,
            }],
            relations: vec![],
        };
        build_scheme_a_graph(&raw)
    };
    let x = Tensor::zeros(1, 4);
    assert!(GraphBatch::new(&[(&raw_graph, &x)]).is_err());
    assert!(GraphBatch::new(&[(&g, &Tensor::zeros(2, 4))]).is_err());
}
