use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use diagraph::ingest::{build_corpus_index, generate_synthetic_corpus, load_corpus, Diagram, SyntheticSpec};
use serde::{Deserialize, Serialize};

pub const LAYOUT_HELP: &str = "expected either a directory of canonical *.json documents, or the public layout \
<root>/ai2d/categories.json, <root>/ai2d/annotations/<id>.png.json, <root>/ai2d/images/<id>.png and \
<root>/ai2d-rst/<id>.json";

#[derive(Args, Debug, Clone)]
pub struct CorpusArgs {
    /// Corpus root (canonical documents or the public dataset layout).
    #[arg(long, env = "DIAGRAPH_DATASET_ROOT")]
    pub dataset_root: Option<PathBuf>,
    /// Use a generated corpus instead of a dataset on disk.
    #[arg(long)]
    pub synthetic: bool,
    /// Diagrams in the generated corpus [default: 200, or 60 with --small].
    #[arg(long)]
    pub synthetic_n: Option<usize>,
    /// Seed of the generated corpus.
    #[arg(long, default_value_t = 1)]
    pub synthetic_seed: u64,
}

/// Where a command's diagrams came from, recorded in output files so later
/// commands can reload the same corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusSource {
    DatasetRoot(PathBuf),
    Synthetic { n: usize, seed: u64 },
}

impl CorpusSource {
    pub fn describe(&self) -> String {
        match self {
            CorpusSource::DatasetRoot(p) => p.display().to_string(),
            CorpusSource::Synthetic { n, seed } => format!("synthetic (n = {n}, seed = {seed})"),
        }
    }

    pub fn load(&self) -> Result<Vec<Diagram>> {
        match self {
            CorpusSource::Synthetic { n, seed } => {
                let spec = SyntheticSpec {
                    n_diagrams: *n,
                    ..SyntheticSpec::default()
                };
                Ok(generate_synthetic_corpus(&spec, *seed)?.into_diagrams())
            }
            CorpusSource::DatasetRoot(root) => load_dir(root),
        }
    }
}

pub fn load_dir(root: &Path) -> Result<Vec<Diagram>> {
    if !root.is_dir() {
        bail!("corpus directory {} does not exist; {LAYOUT_HELP}", root.display());
    }
    let index = build_corpus_index(root, None).with_context(|| format!("indexing {}", root.display()))?;
    if index.is_empty() {
        bail!("no diagrams found under {}; {LAYOUT_HELP}", root.display());
    }
    Ok(load_corpus(&index)?)
}

impl CorpusArgs {
    pub fn source(&self) -> Result<CorpusSource> {
        self.source_with_default(200)
    }

    pub fn source_with_default(&self, default_n: usize) -> Result<CorpusSource> {
        if self.synthetic {
            return Ok(CorpusSource::Synthetic {
                n: self.synthetic_n.unwrap_or(default_n),
                seed: self.synthetic_seed,
            });
        }
        match &self.dataset_root {
            Some(root) => Ok(CorpusSource::DatasetRoot(root.clone())),
            None => bail!(
                "no dataset given: pass --dataset-root <dir> (or set DIAGRAPH_DATASET_ROOT), or --synthetic; {LAYOUT_HELP}"
            ),
        }
    }
}
