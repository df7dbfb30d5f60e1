use std::rc::Rc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{class_weight_vector, default_patience, Dataset, Hyperparams, Result, Splits, Task, TrainError, MAX_EPOCHS};
use crate::evaluation::{ConfusionMatrix, RunResult};
use crate::gnn::{Arch, GnnError, GraphBatch, Model, ModelConfig, NeighborOrder};
use crate::parallel::derive_seed;
use crate::tensor::{adam_step, AdamConfig, TensorError};

/// Diagrams per forward pass when scoring a split.
const EVAL_CHUNK: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub max_epochs: usize,
    /// Non-improving epochs tolerated in a row; the next one ends training.
    pub patience: usize,
}

impl TrainOptions {
    pub fn for_task(task: Task) -> Self {
        Self {
            max_epochs: MAX_EPOCHS,
            patience: default_patience(task.kind()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean of the per-batch losses weighted by batch diagram count.
    pub train_loss: f64,
    pub val_macro_f1: f64,
    pub improved: bool,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters of the best validation epoch.
    pub model: Model,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_macro_f1: f64,
    /// Scores on the test split, when there is one.
    pub test: Option<Scores>,
}

impl TrainOutcome {
    pub fn epochs_trained(&self) -> usize {
        self.history.len()
    }

    pub fn run_result(&self, run: usize, seed: u64) -> Option<RunResult> {
        self.test.map(|s| RunResult {
            run,
            seed,
            accuracy: s.accuracy,
            macro_f1: s.macro_f1,
            weighted_f1: s.weighted_f1,
            epochs: self.epochs_trained(),
        })
    }
}

fn scores(truth: &[usize], pred: &[usize], classes: usize) -> Result<Scores> {
    let cm = ConfusionMatrix::from_predictions(truth, pred, classes)?;
    Ok(Scores {
        accuracy: cm.accuracy()?,
        macro_f1: cm.macro_f1()?,
        weighted_f1: cm.weighted_f1()?,
    })
}

fn predict_split(model: &Model, data: &Dataset, indices: &[usize]) -> Result<Vec<usize>> {
    let mut pred = Vec::new();
    for chunk in indices.chunks(EVAL_CHUNK) {
        pred.extend(model.predict(&data.batch(chunk)?, NeighborOrder::Index)?);
    }
    Ok(pred)
}

/// Scores `model` on the selected diagrams (neighbours in batch order).
pub fn evaluate(model: &Model, data: &Dataset, indices: &[usize]) -> Result<Scores> {
    if indices.is_empty() {
        return Err(TrainError::Input("cannot score an empty split".into()));
    }
    let pred = predict_split(model, data, indices)?;
    scores(&data.targets(indices), &pred, data.n_classes())
}

fn check_hyperparams(hp: &Hyperparams) -> Result<()> {
    if hp.batch_size == 0 || hp.hidden_size == 0 {
        return Err(TrainError::Spec("batch and hidden sizes must be positive".into()));
    }
    if !(hp.learning_rate.is_finite() && hp.learning_rate > 0.0) {
        return Err(TrainError::Spec(format!("learning rate {} must be positive", hp.learning_rate)));
    }
    if !(hp.l2_penalty.is_finite() && hp.l2_penalty >= 0.0) {
        return Err(TrainError::Spec(format!("L2 penalty {} must be non-negative", hp.l2_penalty)));
    }
    Ok(())
}

/// Adam with class-weighted cross-entropy over shuffled diagram batches,
/// early stopping on validation macro F1 and restoration of the best epoch.
/// Ties keep the earlier epoch.
pub fn train_model(
    data: &Dataset,
    splits: &Splits<usize>,
    arch: Arch,
    hp: &Hyperparams,
    opts: &TrainOptions,
    seed: u64,
) -> Result<TrainOutcome> {
    check_hyperparams(hp)?;
    if splits.train.is_empty() || splits.val.is_empty() {
        return Err(TrainError::Spec("train and validation splits must be non-empty".into()));
    }
    if opts.max_epochs == 0 {
        return Err(TrainError::Spec("max_epochs must be at least 1".into()));
    }
    let config = ModelConfig::new(arch, data.task().kind(), data.in_dim(), hp.hidden_size, data.n_classes());
    let mut model = Model::new(config, &mut ChaCha8Rng::seed_from_u64(derive_seed(seed, 0, 0)))?;
    let weights: Rc<[f64]> = class_weight_vector(&data.targets(&splits.train), data.n_classes())?.into();
    let mut shuffle = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1, 0));
    let val_truth = data.targets(&splits.val);
    let val_batches: Vec<GraphBatch> = splits
        .val
        .chunks(EVAL_CHUNK)
        .map(|c| data.batch(c))
        .collect::<Result<_>>()?;

    let mut order = splits.train.clone();
    let mut history = Vec::new();
    let mut best = (f64::NEG_INFINITY, 0usize, model.snapshot());
    let mut stale = 0usize;
    let mut step = 0u64;
    for epoch in 1..=opts.max_epochs {
        order.shuffle(&mut shuffle);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(hp.batch_size) {
            let batch = data.batch(chunk)?;
            let targets: Rc<[usize]> = data.targets(chunk).into();
            let neighbor_order = match arch {
                Arch::Sage => NeighborOrder::Seeded(derive_seed(seed, 2, step)),
                _ => NeighborOrder::Index,
            };
            step += 1;
            let (loss, grads) = model.loss_and_gradients(&batch, targets, weights.clone(), neighbor_order)?;
            if !loss.is_finite() {
                return Err(TrainError::Diverged { epoch });
            }
            match adam_step(model.params_mut(), &grads, hp.learning_rate, hp.l2_penalty, AdamConfig::default()) {
                Err(TensorError::NonFinite { .. }) => return Err(TrainError::Diverged { epoch }),
                other => other.map_err(GnnError::from)?,
            }
            loss_sum += loss * chunk.len() as f64;
        }

        let mut pred = Vec::with_capacity(val_truth.len());
        for b in &val_batches {
            pred.extend(model.predict(b, NeighborOrder::Index)?);
        }
        let val_f1 = scores(&val_truth, &pred, data.n_classes())?.macro_f1;
        let improved = val_f1 > best.0;
        if improved {
            best = (val_f1, epoch, model.snapshot());
            stale = 0;
        } else {
            stale += 1;
        }
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / order.len() as f64,
            val_macro_f1: val_f1,
            improved,
        });
        if stale > opts.patience {
            break;
        }
    }

    model.restore(&best.2);
    let test = if splits.test.is_empty() {
        None
    } else {
        Some(evaluate(&model, data, &splits.test)?)
    };
    Ok(TrainOutcome {
        model,
        history,
        best_epoch: best.1,
        best_val_macro_f1: best.0,
        test,
    })
}
