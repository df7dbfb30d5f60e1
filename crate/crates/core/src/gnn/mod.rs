//! Message-passing architectures (GCN, SGC, GAT, SAGE with LSTM aggregation)
//! assembled into node and graph classifiers.

mod batch;
mod layers;
mod model;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use batch::{normalized_adjacency, GraphBatch};
pub use layers::{
    gat_layer, gcn_layer, mean_readout, sage_layer, sgc_propagate, GatHead, NeighborOrder, SageVars,
};
pub use model::{Checkpoint, Forward, Model, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};

use crate::geometry::GeometryError;
use crate::graph::GraphError;
use crate::tensor::TensorError;

#[derive(Debug, Error)]
pub enum GnnError {
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub type Result<T> = std::result::Result<T, GnnError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Gcn,
    Sgc,
    Gat,
    Sage,
}

impl Arch {
    pub const ALL: [Arch; 4] = [Arch::Gcn, Arch::Sgc, Arch::Gat, Arch::Sage];

    pub fn as_str(self) -> &'static str {
        match self {
            Arch::Gcn => "gcn",
            Arch::Sgc => "sgc",
            Arch::Gat => "gat",
            Arch::Sage => "sage",
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.as_str().to_uppercase())
    }
}

impl FromStr for Arch {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        Arch::ALL
            .into_iter()
            .find(|a| a.as_str() == lower)
            .ok_or_else(|| format!("unknown architecture `{s}` (expected gcn, sgc, gat or sage)"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Node,
    Graph,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub arch: Arch,
    pub task: TaskKind,
    pub in_dim: usize,
    /// Ignored by SGC.
    pub hidden_dim: usize,
    pub out_dim: usize,
    pub heads: usize,
    pub sgc_hops: usize,
    pub leaky_slope: f64,
}

impl ModelConfig {
    pub fn new(arch: Arch, task: TaskKind, in_dim: usize, hidden_dim: usize, out_dim: usize) -> Self {
        Self {
            arch,
            task,
            in_dim,
            hidden_dim,
            out_dim,
            heads: 2,
            sgc_hops: 2,
            leaky_slope: 0.2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GnnError::Config(m));
        if self.in_dim == 0 || self.out_dim == 0 {
            return bad(format!("dimensions must be positive (in {}, out {})", self.in_dim, self.out_dim));
        }
        if self.arch != Arch::Sgc && self.hidden_dim == 0 {
            return bad("hidden size must be positive".into());
        }
        if self.arch == Arch::Gat && self.heads == 0 {
            return bad("GAT needs at least one head".into());
        }
        if self.arch == Arch::Sgc && self.sgc_hops == 0 {
            return bad("SGC needs at least one hop".into());
        }
        if !self.leaky_slope.is_finite() {
            return bad("leaky slope must be finite".into());
        }
        Ok(())
    }

    /// Width of the representation after each graph layer.
    pub fn layer_width(&self) -> usize {
        match self.arch {
            Arch::Gat => self.heads * self.hidden_dim,
            Arch::Sgc => self.in_dim,
            _ => self.hidden_dim,
        }
    }
}
