use std::path::Path;
use std::rc::Rc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::order_neighbors;
use super::{
    gat_layer, gcn_layer, mean_readout, sage_layer, sgc_propagate, Arch, GatHead, GnnError, GraphBatch,
    ModelConfig, NeighborOrder, Result, SageVars, TaskKind,
};
use crate::tensor::{LstmParams, LstmVars, Parameter, Tape, Tensor, Var};

pub const CHECKPOINT_FORMAT: &str = "diagraph-model";
pub const CHECKPOINT_VERSION: u32 = 1;

/// A network and its trainable parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    config: ModelConfig,
    params: Vec<Parameter>,
}

/// Output of a recorded forward pass: logits (one row per node or per graph)
/// and the tape variables of the parameters, in [`Model::params`] order.
#[derive(Clone, Debug)]
pub struct Forward {
    pub logits: Var,
    pub params: Vec<Var>,
}

fn layout(config: &ModelConfig) -> Vec<(String, [usize; 2], bool)> {
    // (name, shape, is_bias)
    let mut out = Vec::new();
    let mut push = |name: String, shape: [usize; 2], bias: bool| out.push((name, shape, bias));
    let (d, h, c) = (config.in_dim, config.hidden_dim, config.out_dim);
    match config.arch {
        Arch::Sgc => {
            push("sgc.w".into(), [d, c], false);
            push("sgc.b".into(), [1, c], true);
            return out;
        }
        Arch::Gcn => {
            for (l, din) in [(1, d), (2, h)] {
                push(format!("gcn{l}.w"), [din, h], false);
                push(format!("gcn{l}.b"), [1, h], true);
            }
        }
        Arch::Gat => {
            for (l, din) in [(1, d), (2, config.heads * h)] {
                for k in 0..config.heads {
                    push(format!("gat{l}.head{k}.w"), [din, h], false);
                    push(format!("gat{l}.head{k}.a_src"), [h, 1], false);
                    push(format!("gat{l}.head{k}.a_dst"), [h, 1], false);
                    push(format!("gat{l}.head{k}.b"), [1, h], true);
                }
            }
        }
        Arch::Sage => {
            for (l, din) in [(1, d), (2, h)] {
                push(format!("sage{l}.lstm.w_input"), [din, 4 * din], false);
                push(format!("sage{l}.lstm.w_hidden"), [din, 4 * din], false);
                push(format!("sage{l}.lstm.b"), [1, 4 * din], true);
                push(format!("sage{l}.w_self"), [din, h], false);
                push(format!("sage{l}.w_neigh"), [din, h], false);
                push(format!("sage{l}.b"), [1, h], true);
            }
        }
    }
    push("dense.w".into(), [config.layer_width(), c], false);
    push("dense.b".into(), [1, c], true);
    out
}

impl Model {
    /// Glorot-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let params = layout(&config)
            .into_iter()
            .map(|(name, [r, c], bias)| {
                let value = if bias {
                    Tensor::zeros(r, c)
                } else if name.contains(".lstm.") {
                    // gate blocks share fan-in/out of a single gate
                    let gate = LstmParams::glorot(r, c / 4, rng);
                    if name.ends_with("w_input") {
                        gate.w_input
                    } else {
                        gate.w_hidden
                    }
                } else {
                    Tensor::glorot(r, c, rng)
                };
                Parameter::new(name, value)
            })
            .collect();
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &[Parameter] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Parameter] {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn snapshot(&self) -> Vec<Tensor> {
        self.params.iter().map(|p| p.value.clone()).collect()
    }

    pub fn restore(&mut self, values: &[Tensor]) {
        for (p, v) in self.params.iter_mut().zip(values) {
            p.value = v.clone();
        }
    }

    /// Records the network on `tape` with the given parameter values, which
    /// must follow the layout of [`Model::params`].
    pub fn forward_with(
        config: &ModelConfig,
        tape: &mut Tape,
        params: &[Var],
        batch: &GraphBatch,
        order: NeighborOrder,
    ) -> Result<Var> {
        if batch.features().cols() != config.in_dim {
            return Err(GnnError::Contract(format!(
                "batch features have {} columns, model expects {}",
                batch.features().cols(),
                config.in_dim
            )));
        }
        let mut next = params.iter().copied();
        let mut take = || {
            next.next()
                .ok_or_else(|| GnnError::Contract("parameter list too short".into()))
        };
        let x = tape.leaf(batch.features().clone());
        let graph_task = config.task == TaskKind::Graph;
        let mut h = x;
        match config.arch {
            Arch::Sgc => {
                let mut s = sgc_propagate(tape, batch, x, config.sgc_hops)?;
                if graph_task {
                    s = mean_readout(tape, batch, s)?;
                }
                let (w, b) = (take()?, take()?);
                let z = tape.matmul(s, w)?;
                return Ok(tape.add_row(z, b)?);
            }
            Arch::Gcn => {
                for _ in 0..2 {
                    let (w, b) = (take()?, take()?);
                    let z = gcn_layer(tape, batch, h, w, b)?;
                    h = tape.relu(z);
                }
            }
            Arch::Gat => {
                for _ in 0..2 {
                    let mut heads = Vec::with_capacity(config.heads);
                    for _ in 0..config.heads {
                        heads.push(GatHead {
                            w: take()?,
                            a_src: take()?,
                            a_dst: take()?,
                            bias: take()?,
                        });
                    }
                    let z = gat_layer(tape, batch, h, &heads, config.leaky_slope)?;
                    h = tape.relu(z);
                }
            }
            Arch::Sage => {
                for layer in 0..2u64 {
                    let din = tape.shape(h)[1];
                    let p = SageVars {
                        lstm: LstmVars {
                            w_input: take()?,
                            w_hidden: take()?,
                            bias: take()?,
                            hidden_dim: din,
                        },
                        w_self: take()?,
                        w_neigh: take()?,
                        bias: take()?,
                    };
                    let order = order_neighbors(batch.neighbors(), order, layer, tape.value(h));
                    let z = sage_layer(tape, batch, h, &p, &order)?;
                    h = tape.relu(z);
                }
            }
        }
        if graph_task {
            h = mean_readout(tape, batch, h)?;
        }
        let (w, b) = (take()?, take()?);
        let z = tape.matmul(h, w)?;
        Ok(tape.add_row(z, b)?)
    }

    pub fn forward(&self, tape: &mut Tape, batch: &GraphBatch, order: NeighborOrder) -> Result<Forward> {
        let params: Vec<Var> = self.params.iter().map(|p| tape.leaf(p.value.clone())).collect();
        let logits = Self::forward_with(&self.config, tape, &params, batch, order)?;
        Ok(Forward { logits, params })
    }

    pub fn logits(&self, batch: &GraphBatch, order: NeighborOrder) -> Result<Tensor> {
        let mut tape = Tape::new();
        let f = self.forward(&mut tape, batch, order)?;
        Ok(tape.value(f.logits).clone())
    }

    /// Softmax class probabilities, one row per node (node task) or graph.
    pub fn predict_proba(&self, batch: &GraphBatch, order: NeighborOrder) -> Result<Tensor> {
        Ok(self.logits(batch, order)?.softmax_rows())
    }

    pub fn predict(&self, batch: &GraphBatch, order: NeighborOrder) -> Result<Vec<usize>> {
        Ok(self.logits(batch, order)?.argmax_rows())
    }

    /// Class-weighted cross-entropy and its gradient for every parameter.
    pub fn loss_and_gradients(
        &self,
        batch: &GraphBatch,
        targets: Rc<[usize]>,
        weights: Rc<[f64]>,
        order: NeighborOrder,
    ) -> Result<(f64, Vec<Tensor>)> {
        let mut tape = Tape::new();
        let f = self.forward(&mut tape, batch, order)?;
        let loss = tape.weighted_cross_entropy(f.logits, targets, weights)?;
        let value = tape.value(loss).data()[0];
        let mut grads = tape.backward(loss)?;
        Ok((value, f.params.iter().map(|&v| grads.take(v)).collect()))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            params: self
                .params
                .iter()
                .map(|p| NamedTensor {
                    name: p.name.clone(),
                    shape: p.value.shape(),
                    data: p.value.data().to_vec(),
                })
                .collect(),
        }
    }

    /// Rebuilds a model, checking names and shapes against the layout the
    /// stored configuration implies. Optimizer state starts fresh.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(GnnError::Checkpoint(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        ck.config.validate()?;
        let expected = layout(&ck.config);
        if expected.len() != ck.params.len() {
            return Err(GnnError::Checkpoint(format!(
                "expected {} tensors, found {}",
                expected.len(),
                ck.params.len()
            )));
        }
        let mut params = Vec::with_capacity(expected.len());
        for ((name, shape, _), t) in expected.into_iter().zip(&ck.params) {
            if name != t.name || shape != t.shape {
                return Err(GnnError::Checkpoint(format!(
                    "tensor `{}` {:?} does not match expected `{name}` {shape:?}",
                    t.name, t.shape
                )));
            }
            let value = Tensor::from_vec(shape[0], shape[1], t.data.clone())
                .map_err(|e| GnnError::Checkpoint(format!("tensor `{name}`: {e}")))?;
            params.push(Parameter::new(name, value));
        }
        Ok(Self {
            config: ck.config.clone(),
            params,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(&self.to_checkpoint()).expect("checkpoints serialize");
        std::fs::write(path, text).map_err(|e| GnnError::Checkpoint(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GnnError::Checkpoint(format!("{}: {e}", path.display())))?;
        let ck: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| GnnError::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_checkpoint(&ck)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

/// JSON checkpoint: `{"format": "diagraph-model", "version": 1, "config":
/// {..}, "params": [{"name", "shape": [rows, cols], "data": [row-major]}]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: ModelConfig,
    pub params: Vec<NamedTensor>,
}
