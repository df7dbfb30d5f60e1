use std::rc::Rc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{GraphBatch, Result};
use crate::parallel::derive_seed;
use crate::tensor::{lstm_cell, LstmVars, Tape, Tensor, Var};

/// Order in which SAGE feeds a node's neighbours to the LSTM.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NeighborOrder {
    /// Edge order of the batch.
    Index,
    /// Uniform random permutation per node, derived from the seed and layer.
    Seeded(u64),
    /// Lexicographic order of the neighbours' current representations, which
    /// does not depend on node numbering.
    ByFeatures,
}

pub(crate) fn order_neighbors(
    neighbors: &[Vec<usize>],
    order: NeighborOrder,
    layer: u64,
    values: &Tensor,
) -> Vec<Vec<usize>> {
    let mut out = neighbors.to_vec();
    match order {
        NeighborOrder::Index => {}
        NeighborOrder::Seeded(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, layer, 0));
            for list in &mut out {
                list.shuffle(&mut rng);
            }
        }
        NeighborOrder::ByFeatures => {
            for list in &mut out {
                list.sort_by(|&a, &b| {
                    values
                        .row(a)
                        .iter()
                        .zip(values.row(b))
                        .map(|(x, y)| x.total_cmp(y))
                        .find(|o| o.is_ne())
                        .unwrap_or(std::cmp::Ordering::Equal)
                });
            }
        }
    }
    out
}

/// `S (H W) + b` with the symmetric normalized adjacency of the batch.
pub fn gcn_layer(tape: &mut Tape, batch: &GraphBatch, h: Var, w: Var, b: Var) -> Result<Var> {
    let hw = tape.matmul(h, w)?;
    let agg = tape.propagate(hw, batch.gcn_weights().clone(), batch.n_nodes())?;
    Ok(tape.add_row(agg, b)?)
}

/// `S^hops X`.
pub fn sgc_propagate(tape: &mut Tape, batch: &GraphBatch, x: Var, hops: usize) -> Result<Var> {
    let mut out = x;
    for _ in 0..hops {
        out = tape.propagate(out, batch.gcn_weights().clone(), batch.n_nodes())?;
    }
    Ok(out)
}

/// One attention head: projection `w`, attention vectors for the source and
/// destination halves of `a`, and an output bias.
#[derive(Clone, Copy, Debug)]
pub struct GatHead {
    pub w: Var,
    pub a_src: Var,
    pub a_dst: Var,
    pub bias: Var,
}

/// Multi-head attention layer; head outputs are concatenated.
///
/// For each edge `j -> i`, `e_ij = leaky_relu(a_dst . Wh_i + a_src . Wh_j)`,
/// normalized by softmax over the incoming edges of `i` (self-loop included).
pub fn gat_layer(tape: &mut Tape, batch: &GraphBatch, h: Var, heads: &[GatHead], slope: f64) -> Result<Var> {
    let mut outs = Vec::with_capacity(heads.len());
    for head in heads {
        let z = tape.matmul(h, head.w)?;
        let sd = tape.matmul(z, head.a_dst)?;
        let ss = tape.matmul(z, head.a_src)?;
        let ed = tape.gather_rows(sd, batch.dst_rows().clone())?;
        let es = tape.gather_rows(ss, batch.src_rows().clone())?;
        let e = tape.add(ed, es)?;
        let e = tape.leaky_relu(e, slope);
        let alpha = tape.segment_softmax(e, batch.edge_dst().clone())?;
        let agg = tape.edge_aggregate(alpha, z, batch.edges().clone(), batch.n_nodes())?;
        outs.push(tape.add_row(agg, head.bias)?);
    }
    if outs.len() == 1 {
        Ok(outs[0])
    } else {
        Ok(tape.concat(&outs)?)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SageVars {
    pub lstm: LstmVars,
    pub w_self: Var,
    pub w_neigh: Var,
    pub bias: Var,
}

/// `H W_self + h_N W_neigh + b`, where `h_N` is the final LSTM state after
/// reading the node's neighbours in the given order (zero when there are
/// none). All nodes advance in lock-step; a node's state is frozen once its
/// neighbour list is exhausted.
pub fn sage_layer(
    tape: &mut Tape,
    batch: &GraphBatch,
    h: Var,
    p: &SageVars,
    neighbors: &[Vec<usize>],
) -> Result<Var> {
    let n = batch.n_nodes();
    let hd = p.lstm.hidden_dim;
    let steps = neighbors.iter().map(Vec::len).max().unwrap_or(0);
    let mut hs = tape.leaf(Tensor::zeros(n, hd));
    let mut cs = tape.leaf(Tensor::zeros(n, hd));
    for t in 0..steps {
        let index: Rc<[Option<usize>]> = neighbors.iter().map(|l| l.get(t).copied()).collect();
        let x = tape.gather_rows(h, index.clone())?;
        let (hn, cn) = lstm_cell(tape, x, hs, cs, &p.lstm)?;
        if index.iter().all(Option::is_some) {
            (hs, cs) = (hn, cn);
            continue;
        }
        let mut mask = Tensor::zeros(n, hd);
        for (r, i) in index.iter().enumerate() {
            if i.is_some() {
                mask.row_mut(r).fill(1.0);
            }
        }
        let mask = tape.leaf(mask);
        let dh = tape.sub(hn, hs)?;
        let dh = tape.mul(mask, dh)?;
        hs = tape.add(hs, dh)?;
        let dc = tape.sub(cn, cs)?;
        let dc = tape.mul(mask, dc)?;
        cs = tape.add(cs, dc)?;
    }
    let own = tape.matmul(h, p.w_self)?;
    let agg = tape.matmul(hs, p.w_neigh)?;
    let sum = tape.add(own, agg)?;
    Ok(tape.add_row(sum, p.bias)?)
}

/// Per-graph mean of node rows.
pub fn mean_readout(tape: &mut Tape, batch: &GraphBatch, h: Var) -> Result<Var> {
    Ok(tape.segment_mean(h, batch.membership().clone(), batch.n_graphs())?)
}
