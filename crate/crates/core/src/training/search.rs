use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{make_splits, train_model, Dataset, Hyperparams, Result, SplitSpec, TrainError, TrainOptions};
use crate::evaluation::RunResult;
use crate::gnn::Arch;
use crate::parallel::{derive_seed, map_indexed, Execution};

const STREAM_SAMPLE: u64 = 10;
const STREAM_SPLIT: u64 = 11;
const STREAM_INIT: u64 = 12;
const STREAM_RUN: u64 = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub hyperparams: Hyperparams,
    /// Best validation macro F1, or `None` when the trial failed.
    pub val_macro_f1: Option<f64>,
    pub epochs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub best: Hyperparams,
    pub best_trial: usize,
    pub best_val_macro_f1: f64,
    pub trials: Vec<Trial>,
}

/// Samples `budget` combinations from the task's search space, trains each on
/// its own shuffled train/validation split and keeps the one with the highest
/// validation macro F1 (lowest trial index on ties).
pub fn random_search(
    data: &Dataset,
    arch: Arch,
    budget: usize,
    seed: u64,
    opts: &TrainOptions,
    exec: Execution,
) -> Result<SearchOutcome> {
    if budget == 0 {
        return Err(TrainError::Spec("search budget must be at least 1".into()));
    }
    let space = data.task().search_space();
    let ids: Vec<usize> = (0..data.len()).collect();
    let spec = SplitSpec::SEARCH.scaled(data.len());
    let trials: Vec<Trial> = map_indexed(exec, budget, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_SAMPLE, i as u64));
        let hp = space.sample(&mut rng);
        let outcome = make_splits(&ids, spec, derive_seed(seed, STREAM_SPLIT, i as u64))
            .and_then(|s| train_model(data, &s, arch, &hp, opts, derive_seed(seed, STREAM_INIT, i as u64)));
        match outcome {
            Ok(o) => Trial {
                index: i,
                hyperparams: hp,
                val_macro_f1: Some(o.best_val_macro_f1),
                epochs: o.epochs_trained(),
                error: None,
            },
            Err(e) => Trial {
                index: i,
                hyperparams: hp,
                val_macro_f1: None,
                epochs: 0,
                error: Some(e.to_string()),
            },
        }
    });
    let best = trials
        .iter()
        .filter_map(|t| t.val_macro_f1.map(|f| (t, f)))
        .fold(None::<(&Trial, f64)>, |acc, (t, f)| match acc {
            Some((_, bf)) if f <= bf => acc,
            _ => Some((t, f)),
        });
    match best {
        Some((t, f)) => Ok(SearchOutcome {
            best: t.hyperparams.clone(),
            best_trial: t.index,
            best_val_macro_f1: f,
            trials: trials.clone(),
        }),
        None => Err(TrainError::Search(format!(
            "all {budget} trials failed; first error: {}",
            trials[0].error.as_deref().unwrap_or("unknown")
        ))),
    }
}

/// Seed of protocol run `run` under `master_seed`.
pub fn run_seed(master_seed: u64, run: usize) -> u64 {
    derive_seed(master_seed, STREAM_RUN, run as u64)
}

/// Trains `runs` models with fixed hyperparameters, each on a freshly
/// shuffled train/validation/test split, and scores them on their test split.
pub fn run_protocol(
    data: &Dataset,
    arch: Arch,
    hp: &Hyperparams,
    runs: usize,
    master_seed: u64,
    opts: &TrainOptions,
    exec: Execution,
) -> Result<Vec<RunResult>> {
    if runs == 0 {
        return Err(TrainError::Spec("at least one run is required".into()));
    }
    let ids: Vec<usize> = (0..data.len()).collect();
    let spec = SplitSpec::FINAL.scaled(data.len());
    map_indexed(exec, runs, |r| {
        let seed = run_seed(master_seed, r);
        let splits = make_splits(&ids, spec, seed)?;
        let outcome = train_model(data, &splits, arch, hp, opts, seed)?;
        Ok(outcome.run_result(r, seed).expect("final splits have a test part"))
    })
    .into_iter()
    .collect()
}
