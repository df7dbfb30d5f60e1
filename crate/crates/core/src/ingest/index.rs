use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::ai2d::{parse_ai2d_annotation, parse_rst_export, png_dimensions};
use super::canonical::parse_document;
use super::{Diagram, IngestError, Labels};
use crate::parallel::{map_indexed, Execution};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelSpace {
    Ai2d,
    RstFine,
    RstCoarse,
}

impl LabelSpace {
    pub const ALL: [LabelSpace; 3] = [LabelSpace::Ai2d, LabelSpace::RstFine, LabelSpace::RstCoarse];

    pub fn as_str(self) -> &'static str {
        match self {
            LabelSpace::Ai2d => "ai2d",
            LabelSpace::RstFine => "rst-fine",
            LabelSpace::RstCoarse => "rst-coarse",
        }
    }
}

impl fmt::Display for LabelSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LabelSpace {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LabelSpace::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| format!("unknown label space `{s}` (expected ai2d, rst-fine or rst-coarse)"))
    }
}

/// Where a diagram's annotations live.
#[derive(Clone, Debug, PartialEq)]
pub enum EntrySource {
    Canonical(PathBuf),
    Ai2d {
        annotation: PathBuf,
        image: PathBuf,
        rst: Option<PathBuf>,
    },
    /// Held in memory by the caller (synthetic corpora).
    InMemory,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusEntry {
    pub diagram_id: String,
    pub ai2d_label: String,
    pub rst_fine_label: Option<String>,
    pub rst_coarse_label: Option<String>,
    pub source: EntrySource,
}

impl CorpusEntry {
    pub fn label(&self, space: LabelSpace) -> Option<&str> {
        match space {
            LabelSpace::Ai2d => Some(&self.ai2d_label),
            LabelSpace::RstFine => self.rst_fine_label.as_deref(),
            LabelSpace::RstCoarse => self.rst_coarse_label.as_deref(),
        }
    }
}

/// Immutable list of entries plus the sorted label vocabularies.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CorpusIndex {
    entries: Vec<CorpusEntry>,
    ai2d_vocab: Vec<String>,
    fine_vocab: Vec<String>,
    coarse_vocab: Vec<String>,
}

impl CorpusIndex {
    pub fn from_entries(entries: Vec<CorpusEntry>) -> Self {
        let vocab = |space: LabelSpace| -> Vec<String> {
            entries
                .iter()
                .filter_map(|e| e.label(space))
                .map(str::to_string)
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect()
        };
        let (ai2d_vocab, fine_vocab, coarse_vocab) = (
            vocab(LabelSpace::Ai2d),
            vocab(LabelSpace::RstFine),
            vocab(LabelSpace::RstCoarse),
        );
        Self {
            entries,
            ai2d_vocab,
            fine_vocab,
            coarse_vocab,
        }
    }

    pub fn entries(&self) -> &[CorpusEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn vocabulary(&self, space: LabelSpace) -> &[String] {
        match space {
            LabelSpace::Ai2d => &self.ai2d_vocab,
            LabelSpace::RstFine => &self.fine_vocab,
            LabelSpace::RstCoarse => &self.coarse_vocab,
        }
    }

    pub fn ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.diagram_id.as_str()).collect()
    }

    pub fn get(&self, id: &str) -> Option<&CorpusEntry> {
        self.entries.iter().find(|e| e.diagram_id == id)
    }
}

fn read(path: &Path) -> Result<String, IngestError> {
    std::fs::read_to_string(path).map_err(|e| IngestError::io(path, e))
}

fn sorted_dir(dir: &Path, suffix: &str) -> Result<Vec<PathBuf>, IngestError> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| IngestError::io(dir, e))? {
        let path = entry.map_err(|e| IngestError::io(dir, e))?.path();
        if path.is_file() && path.to_string_lossy().ends_with(suffix) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Indexes a corpus directory. A root containing `ai2d/categories.json` is
/// read in the public dataset layout (see [`super::ai2d`]); otherwise every
/// `*.json` file directly under the root is a canonical document. With
/// `subset`, only the named diagrams are indexed, in the given order.
pub fn build_corpus_index(root: &Path, subset: Option<&[String]>) -> Result<CorpusIndex, IngestError> {
    if !root.is_dir() {
        return Err(IngestError::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "corpus directory not found"),
        ));
    }
    let mut entries = if root.join("ai2d").join("categories.json").is_file() {
        index_ai2d(root)?
    } else {
        index_canonical(root)?
    };
    if let Some(subset) = subset {
        let mut by_id: HashMap<String, CorpusEntry> =
            entries.into_iter().map(|e| (e.diagram_id.clone(), e)).collect();
        let missing: Vec<String> = subset.iter().filter(|id| !by_id.contains_key(*id)).cloned().collect();
        if !missing.is_empty() {
            return Err(IngestError::Index(missing));
        }
        entries = subset.iter().filter_map(|id| by_id.remove(id)).collect();
    }
    Ok(CorpusIndex::from_entries(entries))
}

fn index_canonical(root: &Path) -> Result<Vec<CorpusEntry>, IngestError> {
    let mut entries = Vec::new();
    let mut unlabeled = Vec::new();
    for path in sorted_dir(root, ".json")? {
        let doc = parse_document(&read(&path)?)?;
        let Labels { ai2d, rst_fine, rst_coarse } = doc.labels;
        match ai2d {
            Some(ai2d_label) => entries.push(CorpusEntry {
                diagram_id: doc.id,
                ai2d_label,
                rst_fine_label: rst_fine,
                rst_coarse_label: rst_coarse,
                source: EntrySource::Canonical(path),
            }),
            None => unlabeled.push(doc.id),
        }
    }
    if !unlabeled.is_empty() {
        return Err(IngestError::Index(unlabeled));
    }
    Ok(entries)
}

fn index_ai2d(root: &Path) -> Result<Vec<CorpusEntry>, IngestError> {
    let base = root.join("ai2d");
    let cats_path = base.join("categories.json");
    let categories: HashMap<String, String> = serde_json::from_str(&read(&cats_path)?)
        .map_err(|e| IngestError::Document(format!("{}: {e}", cats_path.display())))?;
    let rst_dir = root.join("ai2d-rst");
    let mut entries = Vec::new();
    let mut unlabeled = Vec::new();
    for annotation in sorted_dir(&base.join("annotations"), ".json")? {
        let name = annotation.file_name().unwrap().to_string_lossy().to_string();
        let image_name = name.trim_end_matches(".json").to_string();
        let id = image_name.trim_end_matches(".png").to_string();
        let rst_path = rst_dir.join(format!("{id}.json"));
        let (rst, fine, coarse) = if rst_path.is_file() {
            let v: Value = serde_json::from_str(&read(&rst_path)?)
                .map_err(|e| IngestError::Document(format!("{}: {e}", rst_path.display())))?;
            let types: Vec<String> = v
                .get("diagram_types")
                .and_then(|t| serde_json::from_value(t.clone()).ok())
                .unwrap_or_default();
            let fine = match types.len() {
                0 => None,
                1 => Some(types[0].clone()),
                _ => Some("mixed".to_string()),
            };
            let coarse = v.get("coarse_type").and_then(Value::as_str).map(str::to_string);
            (Some(rst_path), fine, coarse)
        } else {
            (None, None, None)
        };
        if rst.is_some() && (fine.is_none() || coarse.is_none()) {
            unlabeled.push(id.clone());
            continue;
        }
        match categories.get(&image_name).or_else(|| categories.get(&id)) {
            Some(label) => entries.push(CorpusEntry {
                diagram_id: id,
                ai2d_label: label.clone(),
                rst_fine_label: fine,
                rst_coarse_label: coarse,
                source: EntrySource::Ai2d {
                    annotation,
                    image: base.join("images").join(&image_name),
                    rst,
                },
            }),
            None => unlabeled.push(id),
        }
    }
    if !unlabeled.is_empty() {
        return Err(IngestError::Index(unlabeled));
    }
    Ok(entries)
}

fn load_entry(entry: &CorpusEntry) -> Result<Diagram, IngestError> {
    match &entry.source {
        EntrySource::Canonical(path) => parse_document(&read(path)?)?.into_diagram(),
        EntrySource::Ai2d { annotation, image, rst } => {
            let size = png_dimensions(image)?;
            let raw = parse_ai2d_annotation(&read(annotation)?, &entry.diagram_id, size)?;
            let rst = match rst {
                Some(p) => Some(parse_rst_export(&read(p)?, &raw)?),
                None => None,
            };
            Ok(Diagram {
                raw,
                rst,
                labels: Labels {
                    ai2d: Some(entry.ai2d_label.clone()),
                    rst_fine: entry.rst_fine_label.clone(),
                    rst_coarse: entry.rst_coarse_label.clone(),
                },
            })
        }
        EntrySource::InMemory => Err(IngestError::Document(format!(
            "diagram `{}` has no file source",
            entry.diagram_id
        ))),
    }
}

/// Parses every indexed diagram, in index order. Files are parsed in
/// parallel when the `parallel` feature is enabled.
pub fn load_corpus(index: &CorpusIndex) -> Result<Vec<Diagram>, IngestError> {
    map_indexed(Execution::default(), index.len(), |i| load_entry(&index.entries[i]))
        .into_iter()
        .collect()
}
