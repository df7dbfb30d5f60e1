use std::rc::Rc;

use super::{Result, Tensor, TensorError};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Concat(Vec<Var>),
    SliceCols(Var, usize),
    Relu(Var),
    LeakyRelu(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    SoftmaxRows(Var),
    Sum(Var),
    GatherRows(Var, Rc<[Option<usize>]>),
    Propagate(Var, Rc<[(usize, usize, f64)]>),
    SegmentSoftmax(Var, Rc<[usize]>),
    EdgeAggregate {
        alpha: Var,
        x: Var,
        edges: Rc<[(usize, usize)]>,
    },
    SegmentMean(Var, Rc<[usize]>, Rc<[f64]>),
    WeightedCrossEntropy {
        logits: Var,
        targets: Rc<[usize]>,
        weights: Rc<[f64]>,
        probs: Tensor,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Records a computation for reverse-mode differentiation.
///
/// A tape is built per forward pass and dropped afterwards, so gradient
/// buffers always start from zero.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Cotangents produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<[usize; 2]>,
}

impl Gradients {
    /// Gradient for `v`; a zero matrix when `v` did not influence the output.
    pub fn get(&self, v: Var) -> Tensor {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => {
                let [r, c] = self.shapes[v.0];
                Tensor::zeros(r, c)
            }
        }
    }

    pub fn take(&mut self, v: Var) -> Tensor {
        match self.grads[v.0].take() {
            Some(g) => g,
            None => {
                let [r, c] = self.shapes[v.0];
                Tensor::zeros(r, c)
            }
        }
    }
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> TensorError {
    TensorError::Shape {
        op,
        left: a.shape(),
        right: b.shape(),
    }
}

fn accumulate(slot: &mut Option<Tensor>, g: Tensor) {
    match slot {
        Some(acc) => acc.add_assign(&g),
        None => *slot = Some(g),
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Records an input. Leaves receive gradients like any other node; inputs
    /// that are not differentiated simply have their gradient ignored.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> [usize; 2] {
        self.nodes[v.0].value.shape()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err(op, ta, tb));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y);
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x - y);
        Ok(self.push(value, Op::Sub(a, b)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y);
        Ok(self.push(value, Op::Mul(a, b)))
    }

    /// Adds a `1 x c` row vector to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(bias));
        if tb.rows() != 1 || tb.cols() != ta.cols() {
            return Err(shape_err("add_row", ta, tb));
        }
        let mut value = ta.clone();
        for r in 0..value.rows() {
            for (x, b) in value.row_mut(r).iter_mut().zip(tb.data()) {
                *x += b;
            }
        }
        Ok(self.push(value, Op::AddRow(a, bias)))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.value(a).map(|x| x * factor);
        self.push(value, Op::Scale(a, factor))
    }

    /// Concatenates along columns.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = match parts.first() {
            Some(&v) => self.value(v),
            None => return Err(TensorError::EmptySequence),
        };
        let rows = first.rows();
        let mut cols = 0;
        for &p in parts {
            let t = self.value(p);
            if t.rows() != rows {
                return Err(shape_err("concat", first, t));
            }
            cols += t.cols();
        }
        let mut value = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let mut offset = 0;
            for &p in parts {
                let src = self.value(p).row(r);
                value.row_mut(r)[offset..offset + src.len()].copy_from_slice(src);
                offset += src.len();
            }
        }
        Ok(self.push(value, Op::Concat(parts.to_vec())))
    }

    /// Columns `start..start + width` of `a`.
    pub fn slice_cols(&mut self, a: Var, start: usize, width: usize) -> Result<Var> {
        let ta = self.value(a);
        if start + width > ta.cols() {
            return Err(TensorError::Shape {
                op: "slice_cols",
                left: ta.shape(),
                right: [start, width],
            });
        }
        let mut value = Tensor::zeros(ta.rows(), width);
        for r in 0..ta.rows() {
            value
                .row_mut(r)
                .copy_from_slice(&ta.row(r)[start..start + width]);
        }
        Ok(self.push(value, Op::SliceCols(a, start)))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.max(0.0));
        self.push(value, Op::Relu(a))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let value = self
            .value(a)
            .map(|x| if x > 0.0 { x } else { slope * x });
        self.push(value, Op::LeakyRelu(a, slope))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(sigmoid);
        self.push(value, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::tanh);
        self.push(value, Op::Tanh(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let value = self.value(a).softmax_rows();
        self.push(value, Op::SoftmaxRows(a))
    }

    /// Sum of all entries as a `1 x 1` value.
    pub fn sum(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).sum());
        self.push(value, Op::Sum(a))
    }

    /// Row `i` of the output is row `index[i]` of `a`, or zeros for `None`.
    pub fn gather_rows(&mut self, a: Var, index: Rc<[Option<usize>]>) -> Result<Var> {
        let ta = self.value(a);
        let mut value = Tensor::zeros(index.len(), ta.cols());
        for (i, src) in index.iter().enumerate() {
            if let Some(s) = *src {
                if s >= ta.rows() {
                    return Err(TensorError::Index {
                        index: s,
                        rows: ta.rows(),
                    });
                }
                value.row_mut(i).copy_from_slice(ta.row(s));
            }
        }
        Ok(self.push(value, Op::GatherRows(a, index)))
    }

    /// Sparse weighted propagation: `out[dst] += w * x[src]` for every
    /// `(dst, src, w)`. The output has `n_out` rows.
    pub fn propagate(
        &mut self,
        x: Var,
        entries: Rc<[(usize, usize, f64)]>,
        n_out: usize,
    ) -> Result<Var> {
        let tx = self.value(x);
        let mut value = Tensor::zeros(n_out, tx.cols());
        for &(dst, src, w) in entries.iter() {
            if src >= tx.rows() || dst >= n_out {
                return Err(TensorError::Index {
                    index: src.max(dst),
                    rows: tx.rows().min(n_out),
                });
            }
            let (s, d) = (tx.row(src).to_vec(), value.row_mut(dst));
            for (o, v) in d.iter_mut().zip(s) {
                *o += w * v;
            }
        }
        Ok(self.push(value, Op::Propagate(x, entries)))
    }

    /// Softmax of an `E x 1` column taken separately within each segment.
    pub fn segment_softmax(&mut self, scores: Var, segments: Rc<[usize]>) -> Result<Var> {
        let ts = self.value(scores);
        if ts.cols() != 1 || ts.rows() != segments.len() {
            return Err(TensorError::Shape {
                op: "segment_softmax",
                left: ts.shape(),
                right: [segments.len(), 1],
            });
        }
        let n_seg = segments.iter().copied().max().map_or(0, |m| m + 1);
        let mut max = vec![f64::NEG_INFINITY; n_seg];
        for (e, &s) in segments.iter().enumerate() {
            max[s] = max[s].max(ts.data()[e]);
        }
        let mut exp: Vec<f64> = segments
            .iter()
            .enumerate()
            .map(|(e, &s)| (ts.data()[e] - max[s]).exp())
            .collect();
        let mut total = vec![0.0; n_seg];
        for (e, &s) in segments.iter().enumerate() {
            total[s] += exp[e];
        }
        for (e, &s) in segments.iter().enumerate() {
            exp[e] /= total[s];
        }
        let value = Tensor::from_vec(segments.len(), 1, exp)?;
        Ok(self.push(value, Op::SegmentSoftmax(scores, segments)))
    }

    /// `out[dst] += alpha[e] * x[src]` for every edge `e = (dst, src)`.
    pub fn edge_aggregate(
        &mut self,
        alpha: Var,
        x: Var,
        edges: Rc<[(usize, usize)]>,
        n_out: usize,
    ) -> Result<Var> {
        let (ta, tx) = (self.value(alpha), self.value(x));
        if ta.cols() != 1 || ta.rows() != edges.len() {
            return Err(TensorError::Shape {
                op: "edge_aggregate",
                left: ta.shape(),
                right: [edges.len(), 1],
            });
        }
        let mut value = Tensor::zeros(n_out, tx.cols());
        for (e, &(dst, src)) in edges.iter().enumerate() {
            if src >= tx.rows() || dst >= n_out {
                return Err(TensorError::Index {
                    index: src.max(dst),
                    rows: tx.rows().min(n_out),
                });
            }
            let a = ta.data()[e];
            let s = tx.row(src).to_vec();
            for (o, v) in value.row_mut(dst).iter_mut().zip(s) {
                *o += a * v;
            }
        }
        Ok(self.push(value, Op::EdgeAggregate { alpha, x, edges }))
    }

    /// Mean of the rows belonging to each segment; every segment must be
    /// non-empty.
    pub fn segment_mean(&mut self, x: Var, segments: Rc<[usize]>, n_seg: usize) -> Result<Var> {
        let tx = self.value(x);
        if tx.rows() != segments.len() {
            return Err(TensorError::Shape {
                op: "segment_mean",
                left: tx.shape(),
                right: [segments.len(), tx.cols()],
            });
        }
        let mut counts = vec![0.0; n_seg];
        for &s in segments.iter() {
            if s >= n_seg {
                return Err(TensorError::Index {
                    index: s,
                    rows: n_seg,
                });
            }
            counts[s] += 1.0;
        }
        if let Some(empty) = counts.iter().position(|&c| c == 0.0) {
            return Err(TensorError::Index {
                index: empty,
                rows: 0,
            });
        }
        let mut value = Tensor::zeros(n_seg, tx.cols());
        for (r, &s) in segments.iter().enumerate() {
            let src = tx.row(r).to_vec();
            for (o, v) in value.row_mut(s).iter_mut().zip(src) {
                *o += v / counts[s];
            }
        }
        let inv: Rc<[f64]> = counts.iter().map(|c| 1.0 / c).collect();
        Ok(self.push(value, Op::SegmentMean(x, segments, inv)))
    }

    /// Mean over rows of `weight[target] * -log softmax(logits)[target]`.
    pub fn weighted_cross_entropy(
        &mut self,
        logits: Var,
        targets: Rc<[usize]>,
        weights: Rc<[f64]>,
    ) -> Result<Var> {
        let tl = self.value(logits);
        let classes = tl.cols();
        if tl.rows() != targets.len() || weights.len() != classes {
            return Err(TensorError::Shape {
                op: "weighted_cross_entropy",
                left: tl.shape(),
                right: [targets.len(), weights.len()],
            });
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= classes) {
            return Err(TensorError::Label {
                label: bad,
                classes,
            });
        }
        let probs = tl.softmax_rows();
        let n = targets.len().max(1) as f64;
        let mut loss = 0.0;
        for (r, &t) in targets.iter().enumerate() {
            let row = tl.row(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
            loss += weights[t] * (lse - row[t]);
        }
        let value = Tensor::scalar(loss / n);
        Ok(self.push(
            value,
            Op::WeightedCrossEntropy {
                logits,
                targets,
                weights,
                probs,
            },
        ))
    }

    /// Reverse sweep from a scalar output.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let out_shape = self.shape(output);
        if out_shape != [1, 1] {
            return Err(TensorError::NotScalar(out_shape));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; output.0 + 1];
        grads[output.0] = Some(Tensor::scalar(1.0));
        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            self.backward_node(node, &g, &mut grads)?;
            grads[i] = Some(g);
        }
        grads.resize(self.nodes.len(), None);
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape()).collect(),
        })
    }

    fn backward_node(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let val = |v: Var| &self.nodes[v.0].value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let ga = g.matmul(&val(*b).transpose())?;
                let gb = val(*a).transpose().matmul(g)?;
                accumulate(&mut grads[a.0], ga);
                accumulate(&mut grads[b.0], gb);
            }
            Op::Add(a, b) => {
                accumulate(&mut grads[a.0], g.clone());
                accumulate(&mut grads[b.0], g.clone());
            }
            Op::Sub(a, b) => {
                accumulate(&mut grads[a.0], g.clone());
                accumulate(&mut grads[b.0], g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                accumulate(&mut grads[a.0], g.zip_map(val(*b), |x, y| x * y));
                accumulate(&mut grads[b.0], g.zip_map(val(*a), |x, y| x * y));
            }
            Op::AddRow(a, bias) => {
                let mut gb = Tensor::zeros(1, g.cols());
                for r in 0..g.rows() {
                    for (o, x) in gb.data_mut().iter_mut().zip(g.row(r)) {
                        *o += x;
                    }
                }
                accumulate(&mut grads[a.0], g.clone());
                accumulate(&mut grads[bias.0], gb);
            }
            Op::Scale(a, f) => accumulate(&mut grads[a.0], g.map(|x| x * f)),
            Op::Concat(parts) => {
                let mut offset = 0;
                for p in parts {
                    let width = val(*p).cols();
                    let mut gp = Tensor::zeros(g.rows(), width);
                    for r in 0..g.rows() {
                        gp.row_mut(r)
                            .copy_from_slice(&g.row(r)[offset..offset + width]);
                    }
                    offset += width;
                    accumulate(&mut grads[p.0], gp);
                }
            }
            Op::SliceCols(a, start) => {
                let src = val(*a);
                let mut ga = Tensor::zeros(src.rows(), src.cols());
                for r in 0..g.rows() {
                    ga.row_mut(r)[*start..*start + g.cols()].copy_from_slice(g.row(r));
                }
                accumulate(&mut grads[a.0], ga);
            }
            Op::Relu(a) => {
                let ga = g.zip_map(val(*a), |x, z| if z > 0.0 { x } else { 0.0 });
                accumulate(&mut grads[a.0], ga);
            }
            Op::LeakyRelu(a, slope) => {
                let ga = g.zip_map(val(*a), |x, z| if z > 0.0 { x } else { slope * x });
                accumulate(&mut grads[a.0], ga);
            }
            Op::Sigmoid(a) => {
                let ga = g.zip_map(&node.value, |x, y| x * y * (1.0 - y));
                accumulate(&mut grads[a.0], ga);
            }
            Op::Tanh(a) => {
                let ga = g.zip_map(&node.value, |x, y| x * (1.0 - y * y));
                accumulate(&mut grads[a.0], ga);
            }
            Op::SoftmaxRows(a) => {
                let y = &node.value;
                let mut ga = Tensor::zeros(y.rows(), y.cols());
                for r in 0..y.rows() {
                    let dot: f64 = y.row(r).iter().zip(g.row(r)).map(|(p, q)| p * q).sum();
                    for c in 0..y.cols() {
                        ga.set(r, c, y.get(r, c) * (g.get(r, c) - dot));
                    }
                }
                accumulate(&mut grads[a.0], ga);
            }
            Op::Sum(a) => {
                let [r, c] = val(*a).shape();
                accumulate(&mut grads[a.0], Tensor::filled(r, c, g.data()[0]));
            }
            Op::GatherRows(a, index) => {
                let [r, c] = val(*a).shape();
                let mut ga = Tensor::zeros(r, c);
                for (i, src) in index.iter().enumerate() {
                    if let Some(s) = *src {
                        for (o, x) in ga.row_mut(s).iter_mut().zip(g.row(i)) {
                            *o += x;
                        }
                    }
                }
                accumulate(&mut grads[a.0], ga);
            }
            Op::Propagate(x, entries) => {
                let [r, c] = val(*x).shape();
                let mut gx = Tensor::zeros(r, c);
                for &(dst, src, w) in entries.iter() {
                    let gd = g.row(dst).to_vec();
                    for (o, v) in gx.row_mut(src).iter_mut().zip(gd) {
                        *o += w * v;
                    }
                }
                accumulate(&mut grads[x.0], gx);
            }
            Op::SegmentSoftmax(scores, segments) => {
                let y = node.value.data();
                let n_seg = segments.iter().copied().max().map_or(0, |m| m + 1);
                let mut dot = vec![0.0; n_seg];
                for (e, &s) in segments.iter().enumerate() {
                    dot[s] += y[e] * g.data()[e];
                }
                let data = segments
                    .iter()
                    .enumerate()
                    .map(|(e, &s)| y[e] * (g.data()[e] - dot[s]))
                    .collect();
                accumulate(&mut grads[scores.0], Tensor::from_vec(y.len(), 1, data)?);
            }
            Op::EdgeAggregate { alpha, x, edges } => {
                let (ta, tx) = (val(*alpha), val(*x));
                let mut galpha = Tensor::zeros(ta.rows(), 1);
                let mut gx = Tensor::zeros(tx.rows(), tx.cols());
                for (e, &(dst, src)) in edges.iter().enumerate() {
                    let gd = g.row(dst);
                    galpha.data_mut()[e] = gd.iter().zip(tx.row(src)).map(|(p, q)| p * q).sum();
                    let a = ta.data()[e];
                    for (o, v) in gx.row_mut(src).iter_mut().zip(gd) {
                        *o += a * v;
                    }
                }
                accumulate(&mut grads[alpha.0], galpha);
                accumulate(&mut grads[x.0], gx);
            }
            Op::SegmentMean(x, segments, inv) => {
                let [r, c] = val(*x).shape();
                let mut gx = Tensor::zeros(r, c);
                for (row, &s) in segments.iter().enumerate() {
                    for (o, v) in gx.row_mut(row).iter_mut().zip(g.row(s)) {
                        *o = v * inv[s];
                    }
                }
                accumulate(&mut grads[x.0], gx);
            }
            Op::WeightedCrossEntropy {
                logits,
                targets,
                weights,
                probs,
            } => {
                let n = targets.len().max(1) as f64;
                let upstream = g.data()[0];
                let mut gl = probs.clone();
                for (r, &t) in targets.iter().enumerate() {
                    let w = weights[t] * upstream / n;
                    let row = gl.row_mut(r);
                    row[t] -= 1.0;
                    for x in row.iter_mut() {
                        *x *= w;
                    }
                }
                accumulate(&mut grads[logits.0], gl);
            }
        }
        Ok(())
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
