use std::ops::Range;
use std::rc::Rc;

use super::{GnnError, Result};
use crate::graph::TypedGraph;
use crate::tensor::Tensor;

/// Block-diagonal union of finalized graphs with their node features.
///
/// Edge lists are stored as `(dst, src)`: a message flows from `src` into
/// `dst`. Every node carries its self-loop.
#[derive(Clone, Debug)]
pub struct GraphBatch {
    features: Tensor,
    membership: Rc<[usize]>,
    offsets: Vec<usize>,
    edges: Rc<[(usize, usize)]>,
    edge_dst: Rc<[usize]>,
    dst_rows: Rc<[Option<usize>]>,
    src_rows: Rc<[Option<usize>]>,
    gcn_weights: Rc<[(usize, usize, f64)]>,
    neighbors: Vec<Vec<usize>>,
    targets: Vec<usize>,
}

impl GraphBatch {
    /// Each graph comes with an `N_g x d` feature matrix in node order.
    pub fn new(graphs: &[(&TypedGraph, &Tensor)]) -> Result<Self> {
        if graphs.is_empty() {
            return Err(GnnError::Contract("a batch needs at least one graph".into()));
        }
        let dim = graphs[0].1.cols();
        let total: usize = graphs.iter().map(|(g, _)| g.node_count()).sum();
        let mut data = Vec::with_capacity(total * dim);
        let mut membership = Vec::with_capacity(total);
        let mut offsets = vec![0];
        let mut edges = Vec::new();
        for (gi, (g, x)) in graphs.iter().enumerate() {
            if !g.is_finalized() {
                return Err(GnnError::Contract(format!(
                    "graph `{}` must be finalized (self-loops missing)",
                    g.diagram_id
                )));
            }
            if g.node_count() == 0 {
                return Err(GnnError::Contract(format!("graph `{}` has no nodes", g.diagram_id)));
            }
            if x.rows() != g.node_count() || x.cols() != dim {
                return Err(GnnError::Contract(format!(
                    "graph `{}`: feature matrix is {}x{}, expected {}x{dim}",
                    g.diagram_id,
                    x.rows(),
                    x.cols(),
                    g.node_count()
                )));
            }
            let base = *offsets.last().unwrap();
            data.extend_from_slice(x.data());
            membership.extend(std::iter::repeat_n(gi, g.node_count()));
            edges.extend(g.adjacency_pairs().into_iter().map(|(s, d)| (base + d, base + s)));
            offsets.push(base + g.node_count());
        }
        let mut degree = vec![0usize; total];
        let mut neighbors = vec![Vec::new(); total];
        for &(d, s) in &edges {
            degree[d] += 1;
            if d != s {
                neighbors[d].push(s);
            }
        }
        let gcn_weights: Rc<[(usize, usize, f64)]> = edges
            .iter()
            .map(|&(d, s)| (d, s, 1.0 / ((degree[d] * degree[s]) as f64).sqrt()))
            .collect();
        Ok(Self {
            features: Tensor::from_vec(total, dim, data)?,
            membership: membership.into(),
            offsets,
            edge_dst: edges.iter().map(|&(d, _)| d).collect(),
            dst_rows: edges.iter().map(|&(d, _)| Some(d)).collect(),
            src_rows: edges.iter().map(|&(_, s)| Some(s)).collect(),
            edges: edges.into(),
            gcn_weights,
            neighbors,
            targets: Vec::new(),
        })
    }

    /// Batch over layout features.
    pub fn from_layout(graphs: &[&TypedGraph]) -> Result<Self> {
        let feats = graphs
            .iter()
            .map(|g| g.layout_matrix())
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let pairs: Vec<(&TypedGraph, &Tensor)> = graphs.iter().copied().zip(feats.iter()).collect();
        Self::new(&pairs)
    }

    pub fn with_targets(mut self, targets: Vec<usize>) -> Self {
        self.targets = targets;
        self
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn n_nodes(&self) -> usize {
        self.features.rows()
    }

    pub fn n_graphs(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn graph_range(&self, g: usize) -> Range<usize> {
        self.offsets[g]..self.offsets[g + 1]
    }

    pub fn membership(&self) -> &Rc<[usize]> {
        &self.membership
    }

    /// All edges as `(dst, src)`, self-loops included.
    pub fn edges(&self) -> &Rc<[(usize, usize)]> {
        &self.edges
    }

    pub(crate) fn edge_dst(&self) -> &Rc<[usize]> {
        &self.edge_dst
    }

    pub(crate) fn dst_rows(&self) -> &Rc<[Option<usize>]> {
        &self.dst_rows
    }

    pub(crate) fn src_rows(&self) -> &Rc<[Option<usize>]> {
        &self.src_rows
    }

    /// `(dst, src, 1/sqrt(d_dst d_src))` with degrees counting self-loops.
    pub fn gcn_weights(&self) -> &Rc<[(usize, usize, f64)]> {
        &self.gcn_weights
    }

    /// In-neighbours of every node, self excluded, in edge order.
    pub fn neighbors(&self) -> &[Vec<usize>] {
        &self.neighbors
    }
}

/// Dense `S = D^-1/2 (A + I) D^-1/2` with `S[dst][src]`, for a finalized graph.
pub fn normalized_adjacency(graph: &TypedGraph) -> Result<Tensor> {
    let x = Tensor::zeros(graph.node_count(), 1);
    let batch = GraphBatch::new(&[(graph, &x)])?;
    let n = graph.node_count();
    let mut s = Tensor::zeros(n, n);
    for &(d, src, w) in batch.gcn_weights().iter() {
        s.set(d, src, w);
    }
    Ok(s)
}
