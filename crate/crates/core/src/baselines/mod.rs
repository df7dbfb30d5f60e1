//! Dummy and random-forest baselines over flat feature vectors.

mod forest;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use forest::{forest_fit, Forest, ForestConfig, Tree};

use crate::evaluation::{ConfusionMatrix, EvalError, RunResult};
use crate::gnn::TaskKind;
use crate::parallel::{map_indexed, Execution};
use crate::tensor::Tensor;
use crate::training::{make_splits, run_seed, Dataset, SplitSpec, TrainError};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

pub type Result<T> = std::result::Result<T, BaselineError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    Dummy,
    Rf,
}

impl Baseline {
    pub const ALL: [Baseline; 2] = [Baseline::Dummy, Baseline::Rf];

    pub fn as_str(self) -> &'static str {
        match self {
            Baseline::Dummy => "dummy",
            Baseline::Rf => "rf",
        }
    }

    /// Row label used in report tables.
    pub fn title(self) -> &'static str {
        match self {
            Baseline::Dummy => "Dummy",
            Baseline::Rf => "RF",
        }
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Baseline {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Baseline::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| format!("unknown baseline `{s}` (expected dummy or rf)"))
    }
}

/// Column means of a node feature matrix.
pub fn graph_mean_vector(embeddings: &Tensor) -> Result<Vec<f64>> {
    if embeddings.rows() == 0 {
        return Err(BaselineError::Contract("cannot average an empty graph".into()));
    }
    let n = embeddings.rows() as f64;
    let mut out = vec![0.0; embeddings.cols()];
    for r in 0..embeddings.rows() {
        for (o, v) in out.iter_mut().zip(embeddings.row(r)) {
            *o += v;
        }
    }
    out.iter_mut().for_each(|o| *o /= n);
    Ok(out)
}

/// Stratified dummy classifier: each prediction is a uniformly drawn
/// training label, i.e. a sample from the empirical class distribution.
pub fn dummy_fit_predict(train_labels: &[usize], n_test: usize, seed: u64) -> Result<Vec<usize>> {
    if train_labels.is_empty() {
        return Err(BaselineError::Input("dummy classifier needs training labels".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n_test)
        .map(|_| train_labels[rng.gen_range(0..train_labels.len())])
        .collect())
}

/// Flat rows and labels of a dataset, grouped by diagram. Node tasks yield
/// one row per node (layout features); graph tasks one mean vector per
/// diagram.
#[derive(Clone, Debug)]
pub struct FlatData {
    pub n_classes: usize,
    pub groups: Vec<(Vec<Vec<f64>>, Vec<usize>)>,
}

impl FlatData {
    pub fn from_dataset(data: &Dataset) -> Result<Self> {
        let groups = data
            .samples()
            .iter()
            .map(|s| match data.task().kind() {
                TaskKind::Node => Ok((s.features.to_rows(), s.node_labels.clone())),
                TaskKind::Graph => Ok((vec![graph_mean_vector(&s.features)?], vec![s.label.expect("graph labels")])),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n_classes: data.n_classes(),
            groups,
        })
    }

    fn gather(&self, ids: &[usize]) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for &i in ids {
            x.extend(self.groups[i].0.iter().cloned());
            y.extend(self.groups[i].1.iter().copied());
        }
        (x, y)
    }
}

/// Fits on the training part of a seeded split and scores on its test part.
pub fn evaluate_baseline(
    baseline: Baseline,
    data: &FlatData,
    config: &ForestConfig,
    run: usize,
    seed: u64,
    exec: Execution,
) -> Result<RunResult> {
    let ids: Vec<usize> = (0..data.groups.len()).collect();
    let splits = make_splits(&ids, SplitSpec::FINAL.scaled(ids.len()), seed)?;
    let (x_train, y_train) = data.gather(&splits.train);
    let (x_test, y_test) = data.gather(&splits.test);
    let pred = match baseline {
        Baseline::Dummy => dummy_fit_predict(&y_train, y_test.len(), seed)?,
        Baseline::Rf => forest_fit(&x_train, &y_train, data.n_classes, config, seed, exec)?.predict(&x_test),
    };
    let cm = ConfusionMatrix::from_predictions(&y_test, &pred, data.n_classes)?;
    Ok(RunResult {
        run,
        seed,
        accuracy: cm.accuracy()?,
        macro_f1: cm.macro_f1()?,
        weighted_f1: cm.weighted_f1()?,
        epochs: 0,
    })
}

/// `runs` baseline evaluations with the same per-run seeds and splits as
/// the neural protocol.
pub fn run_baseline(
    baseline: Baseline,
    data: &FlatData,
    config: &ForestConfig,
    runs: usize,
    master_seed: u64,
    exec: Execution,
) -> Result<Vec<RunResult>> {
    if runs == 0 {
        return Err(BaselineError::Input("at least one run is required".into()));
    }
    map_indexed(exec, runs, |r| {
        evaluate_baseline(baseline, data, config, r, run_seed(master_seed, r), Execution::Sequential)
    })
    .into_iter()
    .collect()
}
