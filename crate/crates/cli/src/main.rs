//! `diagraph`: ingest diagram annotations, train graph networks and
//! baselines, and compare annotation schemes.

mod corpus;

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use diagraph::baselines::{run_baseline, Baseline, FlatData, ForestConfig};
use diagraph::evaluation::{
    compare_runs, mean, read_runs_csv, std_dev, write_runs_csv, Metric, ReportPlan, RunResult, ALPHA,
};
use diagraph::experiment::{reproduce, EmbedderSpec, ExperimentManifest};
use diagraph::gnn::Arch;
use diagraph::graph::{build_graph, Scheme};
use diagraph::ingest::{generate_synthetic_corpus, Diagram, SyntheticSpec};
use diagraph::parallel::{derive_seed, with_jobs, Execution};
use diagraph::training::{
    random_search, run_protocol, train_embedder, Dataset, Hyperparams, NodeEmbedder, Task, Trial, TrainOptions,
    MAX_EPOCHS,
};
use serde::{Deserialize, Serialize};

use corpus::{load_dir, CorpusArgs, CorpusSource};

#[derive(Parser, Debug)]
#[command(name = "diagraph", version, about = "Graph-based diagram classification experiments")]
struct Cli {
    /// Worker threads for parallel loops (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and check every document of a corpus directory.
    Validate {
        dir: PathBuf,
    },
    /// Write a generated corpus as canonical documents.
    Synth {
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Layout features of every element as CSV.
    Featurize {
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dump one diagram's model graph as `src dst kind` lines.
    Graph {
        #[arg(long)]
        scheme: Scheme,
        id: String,
        #[command(flatten)]
        corpus: CorpusArgs,
    },
    /// Random hyperparameter search; writes the best combination as JSON.
    Tune {
        #[arg(long)]
        scheme: Scheme,
        #[arg(long)]
        task: Task,
        #[arg(long)]
        arch: Arch,
        #[arg(long, default_value_t = 100)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = MAX_EPOCHS)]
        max_epochs: usize,
        /// Node embedder for graph tasks (trained from the seed when absent).
        #[arg(long)]
        embedder: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        corpus: CorpusArgs,
    },
    /// Repeated training with the tuned hyperparameters; writes runs.csv.
    Train {
        #[arg(long)]
        best: PathBuf,
        #[arg(long, default_value_t = 20)]
        runs: usize,
        /// Master seed of the runs [default: the tuning seed].
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dummy or random-forest runs; writes runs.csv.
    Baseline {
        #[arg(long)]
        model: Baseline,
        #[arg(long)]
        task: Task,
        #[arg(long)]
        scheme: Scheme,
        #[arg(long, default_value_t = 20)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trees: usize,
        #[arg(long, default_value_t = MAX_EPOCHS)]
        max_epochs: usize,
        #[arg(long)]
        embedder: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        corpus: CorpusArgs,
    },
    /// Mann-Whitney U test between two runs.csv files; prints JSON.
    Compare {
        runs_a: PathBuf,
        runs_b: PathBuf,
        #[arg(long, default_value = "macro_f1")]
        metric: Metric,
    },
    /// Markdown (and CSV) table from a report plan.
    Report {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment grid end to end.
    Reproduce {
        /// Manifest JSON [default: the full grid, or the small grid with --small].
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Reduced grid and corpus for smoke runs.
        #[arg(long)]
        small: bool,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output directory [default: the manifest's output_dir].
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the manifest that would be run and exit.
        #[arg(long)]
        print_manifest: bool,
        #[command(flatten)]
        corpus: CorpusArgs,
    },
}

/// How the node embedder of a graph task was obtained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum EmbedderRecord {
    File(PathBuf),
    Trained { seed: u64, hyperparams: Hyperparams },
}

/// Output of `tune`, input of `train`.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct BestFile {
    scheme: Scheme,
    task: Task,
    arch: Arch,
    seed: u64,
    budget: usize,
    max_epochs: usize,
    corpus: CorpusSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    embedder: Option<EmbedderRecord>,
    hyperparams: Hyperparams,
    best_trial: usize,
    best_val_macro_f1: f64,
    trials: Vec<Trial>,
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn node_options(max_epochs: usize) -> TrainOptions {
    TrainOptions {
        max_epochs,
        ..TrainOptions::for_task(Task::Node)
    }
}

fn embedder_for(
    diagrams: &[Diagram],
    scheme: Scheme,
    record: &EmbedderRecord,
    max_epochs: usize,
) -> Result<NodeEmbedder> {
    let embedder = match record {
        EmbedderRecord::File(path) => NodeEmbedder::load(path)?,
        EmbedderRecord::Trained { seed, hyperparams } => {
            eprintln!("training SAGE node embedder for scheme {scheme}");
            train_embedder(diagrams, scheme, Arch::Sage, hyperparams, &node_options(max_epochs), *seed)?.0
        }
    };
    if embedder.scheme != scheme {
        bail!("embedder was trained on scheme {}, not {scheme}", embedder.scheme);
    }
    Ok(embedder)
}

fn dataset_for(
    diagrams: &[Diagram],
    scheme: Scheme,
    task: Task,
    embedder: Option<&EmbedderRecord>,
    max_epochs: usize,
) -> Result<Dataset> {
    match (task, embedder) {
        (Task::Node, _) => Ok(Dataset::node(diagrams, scheme)?),
        (_, Some(record)) => {
            let e = embedder_for(diagrams, scheme, record, max_epochs)?;
            Ok(Dataset::graph(diagrams, scheme, task, &e)?)
        }
        (_, None) => Err(anyhow!("graph tasks need a node embedder")),
    }
}

fn embedder_record(task: Task, path: Option<PathBuf>, seed: u64) -> Option<EmbedderRecord> {
    (task != Task::Node).then(|| match path {
        Some(p) => EmbedderRecord::File(p),
        None => EmbedderRecord::Trained {
            seed: derive_seed(seed, 101, 0),
            hyperparams: EmbedderSpec::fallback(),
        },
    })
}

fn summarize(runs: &[RunResult]) {
    for m in Metric::ALL {
        let xs: Vec<f64> = runs.iter().map(|r| r.metric(m)).collect();
        eprintln!("{:<12} {:.4} ± {:.4}", m.as_str(), mean(&xs), std_dev(&xs));
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate { dir } => {
            let diagrams = load_dir(&dir)?;
            let mut expert = 0;
            for d in &diagrams {
                build_graph(Scheme::A, &d.raw, None, true).with_context(|| format!("diagram {}", d.id()))?;
                if d.rst.is_some() {
                    expert += 1;
                    for s in [Scheme::Grouping, Scheme::GroupingConnectivity] {
                        build_graph(s, &d.raw, d.rst.as_ref(), true).with_context(|| format!("diagram {}", d.id()))?;
                    }
                }
            }
            println!("{} diagrams valid ({expert} with expert layers)", diagrams.len());
        }
        Command::Synth { n, seed, out } => {
            let spec = SyntheticSpec {
                n_diagrams: n,
                ..SyntheticSpec::default()
            };
            let corpus = generate_synthetic_corpus(&spec, seed)?;
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let written = corpus.write_to(&out)?;
            println!("wrote {} documents to {}", written.len(), out.display());
        }
        Command::Featurize { dir, out } => {
            let diagrams = load_dir(&dir)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["diagram_id", "node_id", "kind", "cx", "cy", "area_ratio", "solidity"])?;
            for d in &diagrams {
                let g = build_graph(Scheme::A, &d.raw, None, true)?;
                let x = g.layout_matrix().with_context(|| format!("diagram {}", d.id()))?;
                for (i, node) in g.nodes().iter().enumerate() {
                    let mut row = vec![d.id().to_string(), node.id.clone(), node.kind.as_str().to_string()];
                    row.extend(x.row(i).iter().map(|v| v.to_string()));
                    w.write_record(&row)?;
                }
            }
            write_file(&out, &String::from_utf8(w.into_inner()?)?)?;
        }
        Command::Graph { scheme, id, corpus } => {
            let diagrams = corpus.source()?.load()?;
            let d = diagrams
                .iter()
                .find(|d| d.id() == id)
                .ok_or_else(|| anyhow!("no diagram `{id}` in the corpus"))?;
            let g = build_graph(scheme, &d.raw, d.rst.as_ref(), true)?;
            print!("{}", g.to_edge_list());
        }
        Command::Tune {
            scheme,
            task,
            arch,
            budget,
            seed,
            max_epochs,
            embedder,
            out,
            corpus,
        } => {
            let source = corpus.source()?;
            let diagrams = source.load()?;
            let embedder = embedder_record(task, embedder, seed);
            let data = dataset_for(&diagrams, scheme, task, embedder.as_ref(), max_epochs)?;
            let opts = TrainOptions {
                max_epochs,
                ..TrainOptions::for_task(task)
            };
            eprintln!("searching {budget} combinations for {arch} on {task}/{scheme} ({} diagrams)", data.len());
            let s = random_search(&data, arch, budget, seed, &opts, Execution::available())?;
            eprintln!("best trial {} with validation macro F1 {:.4}", s.best_trial, s.best_val_macro_f1);
            let best = BestFile {
                scheme,
                task,
                arch,
                seed,
                budget,
                max_epochs,
                corpus: source,
                embedder,
                hyperparams: s.best,
                best_trial: s.best_trial,
                best_val_macro_f1: s.best_val_macro_f1,
                trials: s.trials,
            };
            write_file(&out, &serde_json::to_string_pretty(&best)?)?;
        }
        Command::Train { best, runs, seed, out } => {
            let text = std::fs::read_to_string(&best).with_context(|| format!("reading {}", best.display()))?;
            let b: BestFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", best.display()))?;
            let diagrams = b.corpus.load()?;
            let data = dataset_for(&diagrams, b.scheme, b.task, b.embedder.as_ref(), b.max_epochs)?;
            let opts = TrainOptions {
                max_epochs: b.max_epochs,
                ..TrainOptions::for_task(b.task)
            };
            let results = run_protocol(
                &data,
                b.arch,
                &b.hyperparams,
                runs,
                seed.unwrap_or(b.seed),
                &opts,
                Execution::available(),
            )?;
            write_runs_csv(&out, &results)?;
            summarize(&results);
        }
        Command::Baseline {
            model,
            task,
            scheme,
            runs,
            seed,
            trees,
            max_epochs,
            embedder,
            out,
            corpus,
        } => {
            let diagrams = corpus.source()?.load()?;
            let record = embedder_record(task, embedder, seed);
            let data = dataset_for(&diagrams, scheme, task, record.as_ref(), max_epochs)?;
            let config = ForestConfig {
                n_trees: trees,
                ..ForestConfig::default()
            };
            let results = run_baseline(model, &FlatData::from_dataset(&data)?, &config, runs, seed, Execution::available())?;
            write_runs_csv(&out, &results)?;
            summarize(&results);
        }
        Command::Compare { runs_a, runs_b, metric } => {
            let a = read_runs_csv(&runs_a)?;
            let b = read_runs_csv(&runs_b)?;
            let c = compare_runs(&a, &b, metric, ALPHA)?;
            let json = serde_json::json!({ "u": c.u, "p": c.p, "significant": c.significant });
            println!("{json}");
        }
        Command::Report { plan, out } => {
            let report = ReportPlan::load(&plan)?.build()?;
            write_file(&out, &report.to_markdown())?;
            write_file(&out.with_extension("csv"), &report.to_csv())?;
        }
        Command::Reproduce {
            manifest,
            small,
            seed,
            out,
            print_manifest,
            corpus,
        } => {
            let manifest = match manifest {
                Some(p) => ExperimentManifest::load(&p)?,
                None if small => ExperimentManifest::small(seed),
                None => ExperimentManifest::full(seed),
            };
            if print_manifest {
                println!("{}", serde_json::to_string_pretty(&manifest)?);
                return Ok(());
            }
            let out = out
                .or_else(|| manifest.output_dir.clone())
                .ok_or_else(|| anyhow!("no output directory: pass --out or set output_dir in the manifest"))?;
            let source = corpus.source_with_default(if small { 60 } else { 200 })?;
            let diagrams = source.load()?;
            eprintln!(
                "running {} conditions on {} diagrams from {}",
                manifest.conditions.len(),
                diagrams.len(),
                source.describe()
            );
            let log = reproduce(&manifest, &diagrams, &source.describe(), &out, 0)?;
            let mut stdout = std::io::stdout().lock();
            for t in &log.tables {
                writeln!(stdout, "{}", out.join(t).display())?;
            }
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let jobs = cli.jobs;
    with_jobs(jobs, || run(cli))
}
