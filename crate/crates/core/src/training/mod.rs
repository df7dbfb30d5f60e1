//! Splits, class weights, the early-stopping training loop, random
//! hyperparameter search, the multi-run protocol and node embeddings for the
//! graph task.

mod dataset;
mod search;
mod trainer;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dataset::{extract_node_embeddings, train_embedder, Dataset, NodeEmbedder, Sample};
pub use search::{random_search, run_protocol, run_seed, SearchOutcome, Trial};
pub use trainer::{evaluate, train_model, EpochRecord, Scores, TrainOptions, TrainOutcome};

use crate::evaluation::EvalError;
use crate::gnn::{GnnError, TaskKind};
use crate::graph::GraphError;
use crate::ingest::LabelSpace;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training setup: {0}")]
    Spec(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error("search failed: {0}")]
    Search(String),
    #[error("training diverged at epoch {epoch}: non-finite loss or gradient")]
    Diverged { epoch: usize },
    #[error(transparent)]
    Gnn(#[from] GnnError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

pub type Result<T> = std::result::Result<T, TrainError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "node")]
    Node,
    #[serde(rename = "graph-a17")]
    GraphA17,
    #[serde(rename = "graph-coarse5")]
    GraphCoarse5,
    #[serde(rename = "graph-fine12")]
    GraphFine12,
}

impl Task {
    pub const ALL: [Task; 4] = [Task::Node, Task::GraphA17, Task::GraphCoarse5, Task::GraphFine12];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Node => "node",
            Task::GraphA17 => "graph-a17",
            Task::GraphCoarse5 => "graph-coarse5",
            Task::GraphFine12 => "graph-fine12",
        }
    }

    pub fn kind(self) -> TaskKind {
        match self {
            Task::Node => TaskKind::Node,
            _ => TaskKind::Graph,
        }
    }

    /// Diagram-level label space of a graph task.
    pub fn label_space(self) -> Option<LabelSpace> {
        match self {
            Task::Node => None,
            Task::GraphA17 => Some(LabelSpace::Ai2d),
            Task::GraphCoarse5 => Some(LabelSpace::RstCoarse),
            Task::GraphFine12 => Some(LabelSpace::RstFine),
        }
    }

    pub fn search_space(self) -> SearchSpace {
        SearchSpace::for_kind(self.kind())
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Task::ALL.into_iter().find(|t| t.as_str() == s).ok_or_else(|| {
            format!("unknown task `{s}` (expected node, graph-a17, graph-coarse5 or graph-fine12)")
        })
    }
}

/// Early-stopping patience in epochs.
pub fn default_patience(kind: TaskKind) -> usize {
    match kind {
        TaskKind::Node => 25,
        TaskKind::Graph => 15,
    }
}

pub const MAX_EPOCHS: usize = 100;
pub const SEARCH_BUDGET: usize = 100;
pub const PROTOCOL_RUNS: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub hidden_size: usize,
    pub l2_penalty: f64,
}

/// Inclusive ranges; learning rate and L2 penalty are sampled on a log scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub learning_rate: (f64, f64),
    pub batch_size: (usize, usize),
    pub hidden_size: (usize, usize),
    pub l2_penalty: (f64, f64),
}

impl SearchSpace {
    pub fn for_kind(kind: TaskKind) -> Self {
        Self {
            learning_rate: (1e-4, 1e-2),
            batch_size: match kind {
                TaskKind::Node => (2, 16),
                TaskKind::Graph => (4, 32),
            },
            hidden_size: (5, 30),
            l2_penalty: (1e-5, 1e-3),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Hyperparams {
        let log_uniform = |rng: &mut R, (lo, hi): (f64, f64)| (rng.gen_range(lo.ln()..=hi.ln())).exp().clamp(lo, hi);
        Hyperparams {
            learning_rate: log_uniform(rng, self.learning_rate),
            batch_size: rng.gen_range(self.batch_size.0..=self.batch_size.1),
            hidden_size: rng.gen_range(self.hidden_size.0..=self.hidden_size.1),
            l2_penalty: log_uniform(rng, self.l2_penalty),
        }
    }

    pub fn contains(&self, hp: &Hyperparams) -> bool {
        let within = |v: f64, (lo, hi): (f64, f64)| v >= lo && v <= hi;
        within(hp.learning_rate, self.learning_rate)
            && (self.batch_size.0..=self.batch_size.1).contains(&hp.batch_size)
            && (self.hidden_size.0..=self.hidden_size.1).contains(&hp.hidden_size)
            && within(hp.l2_penalty, self.l2_penalty)
    }
}

/// `w_c = N / (C * n_c)` over the classes present in `labels`.
pub fn class_weights<T: Ord + Clone>(labels: &[T]) -> Result<BTreeMap<T, f64>> {
    if labels.is_empty() {
        return Err(TrainError::Input("class weights need at least one label".into()));
    }
    let mut counts: BTreeMap<T, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l.clone()).or_default() += 1;
    }
    let n = labels.len() as f64;
    let c = counts.len() as f64;
    Ok(counts
        .into_iter()
        .map(|(k, nc)| (k, n / (c * nc as f64)))
        .collect())
}

/// Dense weight vector for class indices `0..classes`; classes absent from
/// `labels` get weight 0.
pub fn class_weight_vector(labels: &[usize], classes: usize) -> Result<Vec<f64>> {
    let map = class_weights(labels)?;
    let mut out = vec![0.0; classes];
    for (c, w) in map {
        if c >= classes {
            return Err(TrainError::Input(format!("label {c} out of range for {classes} classes")));
        }
        out[c] = w;
    }
    Ok(out)
}

/// Split sizes. `test == 0` describes a search split.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitSpec {
    pub const FINAL: SplitSpec = SplitSpec {
        train: 850,
        val: 75,
        test: 75,
    };
    pub const SEARCH: SplitSpec = SplitSpec {
        train: 850,
        val: 150,
        test: 0,
    };

    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }

    /// Rescales to a corpus of `n` items, keeping 85% for training.
    pub fn scaled(&self, n: usize) -> SplitSpec {
        let total = self.total().max(1) as f64;
        let val = ((self.val as f64) * n as f64 / total).round() as usize;
        let test = ((self.test as f64) * n as f64 / total).round() as usize;
        let (val, test) = if n >= 3 {
            (val.max(1), if self.test > 0 { test.max(1) } else { 0 })
        } else {
            (val, test)
        };
        SplitSpec {
            train: n.saturating_sub(val + test),
            val,
            test,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits<T> {
    pub train: Vec<T>,
    pub val: Vec<T>,
    pub test: Vec<T>,
}

/// Seeded shuffle of `items` cut into consecutive train, val and test blocks.
pub fn make_splits<T: Clone>(items: &[T], spec: SplitSpec, seed: u64) -> Result<Splits<T>> {
    if items.len() != spec.total() {
        return Err(TrainError::Spec(format!(
            "split {}/{}/{} needs {} items, corpus has {}",
            spec.train,
            spec.val,
            spec.test,
            spec.total(),
            items.len()
        )));
    }
    if spec.train == 0 || spec.val == 0 {
        return Err(TrainError::Spec("train and validation splits must be non-empty".into()));
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let take = |r: std::ops::Range<usize>| order[r].iter().map(|&i| items[i].clone()).collect();
    Ok(Splits {
        train: take(0..spec.train),
        val: take(spec.train..spec.train + spec.val),
        test: take(spec.train + spec.val..items.len()),
    })
}
