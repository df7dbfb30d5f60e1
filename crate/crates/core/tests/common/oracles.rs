use diagraph::geometry::{Point, Polygon};
use diagraph::gnn::{gat_layer, sage_layer, GatHead, GraphBatch, SageVars};
use diagraph::graph::TypedGraph;
use diagraph::tensor::{lstm_sequence, LstmParams, Tape, Tensor};
use rand::Rng;

use super::{add_bias, dense_mul, random_tensor};

pub struct GatOracleHead {
    pub w: Tensor,
    pub a_src: Tensor,
    pub a_dst: Tensor,
    pub b: Tensor,
}

pub fn gat_loop_oracle(g: &TypedGraph, x: &Tensor, heads: &[GatOracleHead], slope: f64) -> Tensor {
    let n = g.node_count();
    let a = g.dense_adjacency();
    let hd = heads[0].w.cols();
    let mut out = Tensor::zeros(n, hd * heads.len());
    for (k, head) in heads.iter().enumerate() {
        let z = dense_mul(x, &head.w);
        let dot = |r: usize, v: &Tensor| (0..hd).map(|c| z.get(r, c) * v.get(c, 0)).sum::<f64>();
        for i in 0..n {
            let nbrs: Vec<usize> = (0..n).filter(|&j| a.get(j, i) == 1.0).collect();
            let e: Vec<f64> = nbrs
                .iter()
                .map(|&j| {
                    let s = dot(i, &head.a_dst) + dot(j, &head.a_src);
                    if s > 0.0 {
                        s
                    } else {
                        slope * s
                    }
                })
                .collect();
            let m = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let total: f64 = e.iter().map(|v| (v - m).exp()).sum();
            for c in 0..hd {
                let mut s = head.b.get(0, c);
                for (idx, &j) in nbrs.iter().enumerate() {
                    s += (e[idx] - m).exp() / total * z.get(j, c);
                }
                out.set(i, k * hd + c, s);
            }
        }
    }
    out
}

pub fn random_gat_heads<R: Rng>(rng: &mut R, din: usize, hd: usize, k: usize) -> Vec<GatOracleHead> {
    (0..k)
        .map(|_| GatOracleHead {
            w: random_tensor(rng, din, hd),
            a_src: random_tensor(rng, hd, 1),
            a_dst: random_tensor(rng, hd, 1),
            b: random_tensor(rng, 1, hd),
        })
        .collect()
}

pub fn run_gat(batch: &GraphBatch, x: &Tensor, heads: &[GatOracleHead]) -> Tensor {
    let mut tape = Tape::new();
    let hx = tape.leaf(x.clone());
    let vars: Vec<GatHead> = heads
        .iter()
        .map(|h| GatHead {
            w: tape.leaf(h.w.clone()),
            a_src: tape.leaf(h.a_src.clone()),
            a_dst: tape.leaf(h.a_dst.clone()),
            bias: tape.leaf(h.b.clone()),
        })
        .collect();
    let out = gat_layer(&mut tape, batch, hx, &vars, 0.2).unwrap();
    tape.value(out).clone()
}

pub struct SageOracle {
    pub lstm: LstmParams,
    pub w_self: Tensor,
    pub w_neigh: Tensor,
    pub b: Tensor,
}

pub fn sage_loop_oracle(g: &TypedGraph, x: &Tensor, p: &SageOracle) -> Tensor {
    let n = g.node_count();
    let d = x.cols();
    let mut out = Tensor::zeros(n, p.w_self.cols());
    for v in 0..n {
        let nbrs: Vec<usize> = g
            .edges()
            .iter()
            .filter(|e| e.dst == v && e.src != v)
            .map(|e| e.src)
            .collect();
        let h_n = if nbrs.is_empty() {
            Tensor::zeros(1, d)
        } else {
            let mut tape = Tape::new();
            let vars = p.lstm.record(&mut tape);
            let seq: Vec<_> = nbrs
                .iter()
                .map(|&j| tape.leaf(Tensor::from_vec(1, d, x.row(j).to_vec()).unwrap()))
                .collect();
            let h = lstm_sequence(&mut tape, &seq, &vars).unwrap();
            tape.value(h).clone()
        };
        let own = Tensor::from_vec(1, d, x.row(v).to_vec()).unwrap();
        let row = add_bias(
            &dense_mul(&own, &p.w_self).zip_map(&dense_mul(&h_n, &p.w_neigh), |a, b| a + b),
            &p.b,
        );
        out.row_mut(v).copy_from_slice(row.row(0));
    }
    out
}

pub fn random_sage<R: Rng>(rng: &mut R, d: usize, h: usize) -> SageOracle {
    SageOracle {
        lstm: LstmParams {
            w_input: random_tensor(rng, d, 4 * d),
            w_hidden: random_tensor(rng, d, 4 * d),
            bias: random_tensor(rng, 1, 4 * d),
        },
        w_self: random_tensor(rng, d, h),
        w_neigh: random_tensor(rng, d, h),
        b: random_tensor(rng, 1, h),
    }
}

pub fn run_sage(batch: &GraphBatch, x: &Tensor, p: &SageOracle, order: &[Vec<usize>]) -> Tensor {
    let mut tape = Tape::new();
    let hx = tape.leaf(x.clone());
    let vars = SageVars {
        lstm: p.lstm.record(&mut tape),
        w_self: tape.leaf(p.w_self.clone()),
        w_neigh: tape.leaf(p.w_neigh.clone()),
        bias: tape.leaf(p.b.clone()),
    };
    let out = sage_layer(&mut tape, batch, hx, &vars, order).unwrap();
    tape.value(out).clone()
}

/// Per-class loop over raw label pairs.
pub fn brute_metrics(pairs: &[(usize, usize)], c: usize) -> (f64, f64, f64) {
    let n = pairs.len() as f64;
    let acc = pairs.iter().filter(|(t, p)| t == p).count() as f64 / n;
    let (mut macro_sum, mut weighted) = (0.0, 0.0);
    for k in 0..c {
        let tp = pairs.iter().filter(|&&(t, p)| t == k && p == k).count() as f64;
        let fp = pairs.iter().filter(|&&(t, p)| t != k && p == k).count() as f64;
        let fn_ = pairs.iter().filter(|&&(t, p)| t == k && p != k).count() as f64;
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        macro_sum += f1;
        weighted += f1 * (tp + fn_);
    }
    (acc, macro_sum / c as f64, weighted / n)
}

/// Star-shaped polygon around `(cx, cy)`: vertices at sorted random angles
/// with every angular gap below pi, so the centre stays inside and no edges
/// cross.
pub fn star_polygon<R: Rng>(rng: &mut R, cx: f64, cy: f64) -> Polygon {
    use std::f64::consts::{PI, TAU};
    let angles = loop {
        let n = rng.gen_range(3..16);
        let mut a: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..TAU)).collect();
        a.sort_by(f64::total_cmp);
        let wrap = a[0] + TAU - a[n - 1];
        if wrap < PI && a.windows(2).all(|w| w[1] - w[0] < PI) {
            break a;
        }
    };
    let verts = angles
        .iter()
        .map(|a| {
            let r = rng.gen_range(8.0..60.0);
            Point::new(cx + r * a.cos(), cy + r * a.sin())
        })
        .collect();
    Polygon::new(verts)
}

pub fn contains(p: &Polygon, x: f64, y: f64) -> bool {
    let v = &p.vertices;
    let mut inside = false;
    let mut j = v.len() - 1;
    for i in 0..v.len() {
        let (a, b) = (v[i], v[j]);
        if (a.y > y) != (b.y > y) && x < (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Rasterized area: each pixel contributes the fraction of its 8x8 sample
/// grid that falls inside the polygon.
pub fn raster_area(p: &Polygon) -> f64 {
    const SUB: usize = 8;
    let (lo, hi) = p.bounding_box().unwrap();
    let mut covered = 0usize;
    for py in lo.y.floor() as i64..=hi.y.ceil() as i64 {
        for px in lo.x.floor() as i64..=hi.x.ceil() as i64 {
            for sy in 0..SUB {
                for sx in 0..SUB {
                    let x = px as f64 + (sx as f64 + 0.5) / SUB as f64;
                    let y = py as f64 + (sy as f64 + 0.5) / SUB as f64;
                    covered += contains(p, x, y) as usize;
                }
            }
        }
    }
    covered as f64 / (SUB * SUB) as f64
}
