//! Manifest-driven experiment grid: searches, protocol runs, baselines,
//! tables and an execution log.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{run_baseline, Baseline, BaselineError, FlatData, ForestConfig};
use crate::evaluation::{build_report, write_runs_csv, Condition, EvalError, RunResult};
use crate::gnn::Arch;
use crate::graph::Scheme;
use crate::ingest::Diagram;
use crate::parallel::{derive_seed, map_indexed, with_jobs, Execution};
use crate::training::{
    random_search, run_protocol, run_seed, train_embedder, Dataset, Hyperparams, NodeEmbedder, SearchOutcome, Task,
    TrainError, TrainOptions, MAX_EPOCHS, PROTOCOL_RUNS, SEARCH_BUDGET,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("condition {condition}: {source}")]
    Condition {
        condition: String,
        #[source]
        source: Box<ExperimentError>,
    },
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

fn io_err(path: &Path, e: impl fmt::Display) -> ExperimentError {
    ExperimentError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelKind {
    Gnn(Arch),
    Baseline(Baseline),
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Gnn(a) => a.as_str(),
            ModelKind::Baseline(b) => b.as_str(),
        }
    }

    /// Row label in tables.
    pub fn title(self) -> String {
        match self {
            ModelKind::Gnn(a) => a.to_string(),
            ModelKind::Baseline(b) => b.title().to_string(),
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        s.parse::<Arch>()
            .map(ModelKind::Gnn)
            .or_else(|_| s.parse::<Baseline>().map(ModelKind::Baseline))
            .map_err(|_| format!("unknown model `{s}` (expected gcn, sgc, gat, sage, dummy or rf)"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionSpec {
    pub scheme: Scheme,
    pub task: Task,
    pub model: ModelKind,
    /// Search trials (ignored by baselines).
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_runs")]
    pub runs: usize,
    pub seed: u64,
}

fn default_budget() -> usize {
    SEARCH_BUDGET
}

fn default_runs() -> usize {
    PROTOCOL_RUNS
}

fn default_max_epochs() -> usize {
    MAX_EPOCHS
}

fn default_trees() -> usize {
    100
}

impl ConditionSpec {
    /// File stem for this condition's artifacts.
    pub fn key(&self) -> String {
        format!("{}_{}_{}", self.task, self.scheme, self.model.as_str())
    }
}

/// Node classifier used to embed nodes for the graph tasks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedderSpec {
    pub seed: u64,
    /// When absent, the searched hyperparameters of the manifest's SAGE
    /// node condition on the same scheme are used, or [`EmbedderSpec::fallback`].
    #[serde(default)]
    pub hyperparams: Option<Hyperparams>,
}

impl EmbedderSpec {
    pub fn fallback() -> Hyperparams {
        Hyperparams {
            learning_rate: 0.01,
            batch_size: 8,
            hidden_size: 16,
            l2_penalty: 1e-5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
    #[serde(default = "default_trees")]
    pub forest_trees: usize,
    pub embedder: EmbedderSpec,
    pub conditions: Vec<ConditionSpec>,
}

impl ExperimentManifest {
    /// Every scheme, task, architecture and baseline at full budget.
    pub fn full(seed: u64) -> Self {
        let mut conditions = Vec::new();
        let mut i = 0u64;
        for task in Task::ALL {
            for scheme in Scheme::ALL {
                let models = Arch::ALL
                    .into_iter()
                    .map(ModelKind::Gnn)
                    .chain(Baseline::ALL.into_iter().map(ModelKind::Baseline));
                for model in models {
                    conditions.push(ConditionSpec {
                        scheme,
                        task,
                        model,
                        budget: SEARCH_BUDGET,
                        runs: PROTOCOL_RUNS,
                        seed: derive_seed(seed, 100, i),
                    });
                    i += 1;
                }
            }
        }
        Self {
            output_dir: None,
            max_epochs: MAX_EPOCHS,
            forest_trees: 100,
            embedder: EmbedderSpec {
                seed: derive_seed(seed, 101, 0),
                hyperparams: None,
            },
            conditions,
        }
    }

    /// A reduced grid for smoke runs on a small synthetic corpus.
    pub fn small(seed: u64) -> Self {
        let mut m = Self::full(seed);
        m.max_epochs = 15;
        m.forest_trees = 20;
        m.embedder.hyperparams = Some(EmbedderSpec::fallback());
        m.conditions.retain(|c| {
            matches!(c.task, Task::Node | Task::GraphFine12)
                && matches!(
                    c.model,
                    ModelKind::Gnn(Arch::Gcn | Arch::Sage) | ModelKind::Baseline(_)
                )
        });
        for c in &mut m.conditions {
            c.budget = 2;
            c.runs = 3;
        }
        m
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let m: Self = serde_json::from_str(&text).map_err(|e| io_err(path, e))?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.conditions.is_empty() {
            return Err(ExperimentError::Manifest("no conditions".into()));
        }
        if self.max_epochs == 0 || self.forest_trees == 0 {
            return Err(ExperimentError::Manifest("max_epochs and forest_trees must be positive".into()));
        }
        let mut seen = BTreeSet::new();
        for c in &self.conditions {
            if !seen.insert(c.key()) {
                return Err(ExperimentError::Manifest(format!("duplicate condition {}", c.key())));
            }
            if c.runs == 0 || (matches!(c.model, ModelKind::Gnn(_)) && c.budget == 0) {
                return Err(ExperimentError::Manifest(format!("{}: runs and budget must be positive", c.key())));
            }
        }
        Ok(())
    }
}

/// What was done for one condition, for the execution log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionLog {
    pub key: String,
    pub spec: ConditionSpec,
    pub run_seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchOutcome>,
    pub runs_csv: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbedderLog {
    pub scheme: Scheme,
    pub seed: u64,
    pub hyperparams: Hyperparams,
    pub best_epoch: usize,
    pub best_val_macro_f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecutionLog {
    pub corpus: String,
    pub n_diagrams: usize,
    pub manifest: ExperimentManifest,
    pub embedders: Vec<EmbedderLog>,
    pub conditions: Vec<ConditionLog>,
    pub tables: Vec<PathBuf>,
}

struct Finished {
    log: ConditionLog,
    runs: Vec<RunResult>,
}

fn run_condition(
    spec: &ConditionSpec,
    data: &Dataset,
    manifest: &ExperimentManifest,
    out: &Path,
) -> Result<Finished> {
    let opts = TrainOptions {
        max_epochs: manifest.max_epochs,
        ..TrainOptions::for_task(spec.task)
    };
    let exec = Execution::available();
    let (runs, search) = match spec.model {
        ModelKind::Gnn(arch) => {
            let search = random_search(data, arch, spec.budget, derive_seed(spec.seed, 1, 0), &opts, exec)?;
            let runs = run_protocol(data, arch, &search.best, spec.runs, spec.seed, &opts, exec)?;
            (runs, Some(search))
        }
        ModelKind::Baseline(b) => {
            let forest = ForestConfig {
                n_trees: manifest.forest_trees,
                ..ForestConfig::default()
            };
            let flat = FlatData::from_dataset(data)?;
            (run_baseline(b, &flat, &forest, spec.runs, spec.seed, exec)?, None)
        }
    };
    let runs_csv = out.join("runs").join(format!("{}.csv", spec.key()));
    write_runs_csv(&runs_csv, &runs)?;
    Ok(Finished {
        log: ConditionLog {
            key: spec.key(),
            spec: spec.clone(),
            run_seeds: (0..spec.runs).map(|r| run_seed(spec.seed, r)).collect(),
            search,
            runs_csv: PathBuf::from("runs").join(format!("{}.csv", spec.key())),
        },
        runs,
    })
}

fn run_all(
    specs: &[&ConditionSpec],
    data: &BTreeMap<(Task, Scheme), Dataset>,
    manifest: &ExperimentManifest,
    out: &Path,
) -> Result<Vec<Finished>> {
    map_indexed(Execution::available(), specs.len(), |i| {
        let spec = specs[i];
        run_condition(spec, &data[&(spec.task, spec.scheme)], manifest, out).map_err(|e| {
            ExperimentError::Condition {
                condition: spec.key(),
                source: Box::new(e),
            }
        })
    })
    .into_iter()
    .collect()
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Runs every condition of `manifest` on `diagrams`, writing `runs/*.csv`,
/// `search/*.json`, `tables/*.{md,csv}` and `execution_log.json` under
/// `out`. At most `jobs` worker threads are used (0 = all cores).
pub fn reproduce(
    manifest: &ExperimentManifest,
    diagrams: &[Diagram],
    corpus: &str,
    out: &Path,
    jobs: usize,
) -> Result<ExecutionLog> {
    manifest.validate()?;
    for dir in ["runs", "search", "tables"] {
        std::fs::create_dir_all(out.join(dir)).map_err(|e| io_err(&out.join(dir), e))?;
    }
    with_jobs(jobs, || {
        let mut datasets: BTreeMap<(Task, Scheme), Dataset> = BTreeMap::new();
        for c in &manifest.conditions {
            if c.task == Task::Node && !datasets.contains_key(&(Task::Node, c.scheme)) {
                datasets.insert((Task::Node, c.scheme), Dataset::node(diagrams, c.scheme)?);
            }
        }
        let node_specs: Vec<&ConditionSpec> = manifest.conditions.iter().filter(|c| c.task == Task::Node).collect();
        let mut finished = run_all(&node_specs, &datasets, manifest, out)?;

        let graph_schemes: BTreeSet<Scheme> = manifest
            .conditions
            .iter()
            .filter(|c| c.task != Task::Node)
            .map(|c| c.scheme)
            .collect();
        let mut embedders = Vec::new();
        for scheme in graph_schemes {
            let hp = manifest.embedder.hyperparams.clone().unwrap_or_else(|| {
                finished
                    .iter()
                    .find(|f| f.log.spec.scheme == scheme && f.log.spec.model == ModelKind::Gnn(Arch::Sage))
                    .and_then(|f| f.log.search.as_ref().map(|s| s.best.clone()))
                    .unwrap_or_else(EmbedderSpec::fallback)
            });
            let seed = derive_seed(manifest.embedder.seed, 0, scheme as u64);
            let opts = TrainOptions {
                max_epochs: manifest.max_epochs,
                ..TrainOptions::for_task(Task::Node)
            };
            let (embedder, outcome): (NodeEmbedder, _) =
                train_embedder(diagrams, scheme, Arch::Sage, &hp, &opts, seed)?;
            for c in &manifest.conditions {
                if c.task != Task::Node && c.scheme == scheme && !datasets.contains_key(&(c.task, scheme)) {
                    datasets.insert((c.task, scheme), Dataset::graph(diagrams, scheme, c.task, &embedder)?);
                }
            }
            embedders.push(EmbedderLog {
                scheme,
                seed,
                hyperparams: hp,
                best_epoch: outcome.best_epoch,
                best_val_macro_f1: outcome.best_val_macro_f1,
            });
        }
        let graph_specs: Vec<&ConditionSpec> = manifest.conditions.iter().filter(|c| c.task != Task::Node).collect();
        finished.extend(run_all(&graph_specs, &datasets, manifest, out)?);

        for f in &finished {
            if let Some(s) = &f.log.search {
                let path = out.join("search").join(format!("{}.json", f.log.key));
                write(&path, &serde_json::to_string_pretty(s).expect("serializable"))?;
            }
        }
        let tables = write_tables(&finished, out)?;
        let log = ExecutionLog {
            corpus: corpus.to_string(),
            n_diagrams: diagrams.len(),
            manifest: manifest.clone(),
            embedders,
            conditions: finished.into_iter().map(|f| f.log).collect(),
            tables,
        };
        write(
            &out.join("execution_log.json"),
            &serde_json::to_string_pretty(&log).expect("serializable"),
        )?;
        Ok(log)
    })
}

fn task_title(task: Task) -> &'static str {
    match task {
        Task::Node => "Node classification",
        Task::GraphA17 => "Graph classification (AI2D categories)",
        Task::GraphCoarse5 => "Graph classification (coarse diagram types)",
        Task::GraphFine12 => "Graph classification (fine diagram types)",
    }
}

/// One neural and one baseline table per task present.
fn write_tables(finished: &[Finished], out: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for task in Task::ALL {
        for baseline in [false, true] {
            let conditions: Vec<Condition> = finished
                .iter()
                .filter(|f| f.log.spec.task == task && matches!(f.log.spec.model, ModelKind::Baseline(_)) == baseline)
                .map(|f| Condition {
                    model: f.log.spec.model.title(),
                    scheme: f.log.spec.scheme,
                    runs: f.runs.clone(),
                })
                .collect();
            if conditions.is_empty() {
                continue;
            }
            let title = if baseline {
                format!("{} baselines", task_title(task))
            } else {
                task_title(task).to_string()
            };
            let report = build_report(&title, &conditions)?;
            let stem = format!("{}{}", task, if baseline { "_baselines" } else { "" });
            for (ext, text) in [("md", report.to_markdown()), ("csv", report.to_csv())] {
                let rel = PathBuf::from("tables").join(format!("{stem}.{ext}"));
                write(&out.join(&rel), &text)?;
                written.push(rel);
            }
            let rel = PathBuf::from("tables").join(format!("{stem}_comparisons.json"));
            write(
                &out.join(&rel),
                &serde_json::to_string_pretty(&report.comparisons).expect("serializable"),
            )?;
            written.push(rel);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifests_validate() {
        assert!(ExperimentManifest::full(1).validate().is_ok());
        let small = ExperimentManifest::small(1);
        assert!(small.validate().is_ok());
        assert_eq!(small.conditions.len(), 2 * 3 * 4);
        let mut dup = small.clone();
        dup.conditions.push(dup.conditions[0].clone());
        assert!(dup.validate().is_err());
    }

    #[test]
    fn manifest_json_round_trip() {
        let m = ExperimentManifest::small(4);
        let text = serde_json::to_string(&m).unwrap();
        assert!(text.contains("\"model\":\"sage\""));
        assert!(text.contains("\"model\":\"rf\""));
        assert_eq!(serde_json::from_str::<ExperimentManifest>(&text).unwrap(), m);
    }

    #[test]
    fn model_names() {
        assert_eq!("sage".parse::<ModelKind>().unwrap(), ModelKind::Gnn(Arch::Sage));
        assert_eq!("dummy".parse::<ModelKind>().unwrap(), ModelKind::Baseline(Baseline::Dummy));
        assert!("svm".parse::<ModelKind>().is_err());
    }
}
