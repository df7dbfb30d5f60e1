use std::collections::BTreeSet;

use diagraph::graph::{build_graph, EdgeKind, NodeKind, Scheme};
use diagraph::ingest::{build_corpus_index, generate_synthetic_corpus, load_corpus, Diagram, SyntheticSpec};

fn corpus(n: usize, seed: u64) -> Vec<Diagram> {
    let spec = SyntheticSpec {
        n_diagrams: n,
        ..SyntheticSpec::default()
    };
    generate_synthetic_corpus(&spec, seed).unwrap().into_diagrams()
}

fn pairs(d: &Diagram, scheme: Scheme) -> BTreeSet<(String, String)> {
    let g = build_graph(scheme, &d.raw, d.rst.as_ref(), true).unwrap();
    g.non_loop_edges()
        .map(|e| (g.nodes()[e.src].id.clone(), g.nodes()[e.dst].id.clone()))
        .collect()
}

#[test]
fn model_graphs_are_finalized_and_symmetric() {
    for d in corpus(40, 3) {
        for scheme in [Scheme::A, Scheme::Grouping, Scheme::GroupingConnectivity] {
            let g = build_graph(scheme, &d.raw, d.rst.as_ref(), true).unwrap();
            assert!(g.is_finalized() && g.is_symmetric());
            let loops = g.edges().iter().filter(|e| e.kind == EdgeKind::SelfLoop).count();
            assert_eq!(loops, g.node_count());
            let a = g.dense_adjacency();
            for i in 0..g.node_count() {
                assert_eq!(a.get(i, i), 1.0);
                for j in 0..g.node_count() {
                    assert_eq!(a.get(i, j), a.get(j, i));
                }
            }
            let x = g.layout_matrix().unwrap();
            assert_eq!(x.shape(), [g.node_count(), 4]);
            assert!(x.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}

#[test]
fn node_universes_per_scheme() {
    for d in corpus(20, 4) {
        let a = build_graph(Scheme::A, &d.raw, None, true).unwrap();
        assert_eq!(a.node_count(), d.raw.elements.len());
        assert_eq!(a.nodes().iter().filter(|n| n.kind == NodeKind::ImageConst).count(), 1);

        let g = build_graph(Scheme::Grouping, &d.raw, d.rst.as_ref(), true).unwrap();
        assert!(g.nodes().iter().all(|n| n.kind != NodeKind::Arrowhead));
        let groups = g.nodes().iter().filter(|n| n.kind == NodeKind::Group).count();
        let kept = d.raw.elements.iter().filter(|e| e.kind != NodeKind::Arrowhead).count();
        assert_eq!(g.node_count(), kept + groups);

        let gc = build_graph(Scheme::GroupingConnectivity, &d.raw, d.rst.as_ref(), true).unwrap();
        let ids = |g: &diagraph::graph::TypedGraph| g.nodes().iter().map(|n| n.id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&g), ids(&gc));
    }
}

#[test]
fn connectivity_only_adds_edges() {
    for d in corpus(20, 5) {
        let g = pairs(&d, Scheme::Grouping);
        let gc = pairs(&d, Scheme::GroupingConnectivity);
        assert!(g.is_subset(&gc), "{}", d.id());
    }
}

#[test]
fn expert_schemes_need_expert_layers() {
    let d = &corpus(1, 6)[0];
    assert!(build_graph(Scheme::Grouping, &d.raw, None, true).is_err());
    assert!(build_graph(Scheme::A, &d.raw, None, true).is_ok());
}

#[test]
fn written_corpus_loads_back_identically() {
    let spec = SyntheticSpec {
        n_diagrams: 15,
        ..SyntheticSpec::default()
    };
    let generated = generate_synthetic_corpus(&spec, 8).unwrap();
    let dir = tempfile::tempdir().unwrap();
    generated.write_to(dir.path()).unwrap();
    let index = build_corpus_index(dir.path(), None).unwrap();
    assert_eq!(index.len(), 15);
    let loaded = load_corpus(&index).unwrap();
    assert_eq!(loaded, generated.diagrams());
    for (a, b) in loaded.iter().zip(generated.diagrams()) {
        for scheme in [Scheme::A, Scheme::GroupingConnectivity] {
            let ga = build_graph(scheme, &a.raw, a.rst.as_ref(), true).unwrap();
            let gb = build_graph(scheme, &b.raw, b.rst.as_ref(), true).unwrap();
            assert_eq!(ga.to_edge_list(), gb.to_edge_list());
        }
    }
}

#[test]
fn generation_is_seeded() {
    assert_eq!(corpus(10, 9), corpus(10, 9));
    assert_ne!(corpus(10, 9), corpus(10, 10));
}
