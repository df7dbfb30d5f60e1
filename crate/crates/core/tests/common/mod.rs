#![allow(dead_code)]

pub mod oracles;

use diagraph::geometry::{Point, Polygon};
use diagraph::graph::{build_scheme_a_graph, NodeKind, TypedGraph};
use diagraph::ingest::{Element, RawAnnotation, Relation};
use diagraph::tensor::Tensor;
use rand::Rng;

/// Finalized, symmetrized scheme-A graph with `n` nodes (the last is the
/// image constant) and each unordered pair linked with probability `p`.
pub fn random_graph<R: Rng>(rng: &mut R, n: usize, p: f64) -> TypedGraph {
    let kinds = [NodeKind::Text, NodeKind::Graphic, NodeKind::Arrow, NodeKind::Arrowhead];
    let mut elements: Vec<Element> = (0..n - 1)
        .map(|i| {
            let x = rng.gen_range(0.0..80.0);
            let y = rng.gen_range(0.0..80.0);
            Element {
                id: format!("E{i}"),
                kind: kinds[i % 4],
                polygon: Some(Polygon::rect(Point::new(x, y), Point::new(x + 10.0, y + 5.0))),
                text: None,
            }
        })
        .collect();
    elements.push(Element {
        id: "I0".into(),
        kind: NodeKind::ImageConst,
        polygon: None,
        text: None,
    });
    let mut relations = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p) {
                relations.push(Relation {
                    id: format!("R{}", relations.len()),
                    category: "x".into(),
                    participants: vec![elements[i].id.clone(), elements[j].id.clone()],
                });
            }
        }
    }
    let raw = RawAnnotation {
        diagram_id: format!("g{n}"),
        image_width: 100.0,
        image_height: 100.0,
        elements,
        relations,
    };
    build_scheme_a_graph(&raw).finalize(true).unwrap()
}

pub fn random_tensor<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Tensor::from_vec(rows, cols, data).unwrap()
}

/// Dense matrix product, written out.
pub fn dense_mul(a: &Tensor, b: &Tensor) -> Tensor {
    let mut out = Tensor::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            let mut s = 0.0;
            for k in 0..a.cols() {
                s += a.get(i, k) * b.get(k, j);
            }
            out.set(i, j, s);
        }
    }
    out
}

/// `D^-1/2 A D^-1/2` from the graph's dense adjacency (self-loops included).
pub fn dense_normalized(g: &TypedGraph) -> Tensor {
    let a = g.dense_adjacency();
    let n = a.rows();
    let deg: Vec<f64> = (0..n).map(|i| (0..n).map(|j| a.get(i, j)).sum()).collect();
    let mut s = Tensor::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            s.set(i, j, a.get(j, i) / (deg[i] * deg[j]).sqrt());
        }
    }
    s
}

pub fn add_bias(m: &Tensor, b: &Tensor) -> Tensor {
    let mut out = m.clone();
    for r in 0..out.rows() {
        for c in 0..out.cols() {
            out.set(r, c, m.get(r, c) + b.get(0, c));
        }
    }
    out
}
