//! Annotation ingestion.
//!
//! Both schemes are parsed into [`RawAnnotation`] (layout elements and
//! semantic relations) and [`RstAnnotation`] (grouping and connectivity
//! layers). The canonical interchange format lives in [`canonical`]; adapters
//! for the public dataset layouts live in [`ai2d`].

pub mod ai2d;
pub mod canonical;
mod index;
pub mod synthetic;

use std::collections::HashSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use canonical::{parse_raw_annotation, parse_rst_annotation, CanonicalDocument};
pub use index::{build_corpus_index, load_corpus, CorpusEntry, CorpusIndex, EntrySource, LabelSpace};
pub use synthetic::{generate_synthetic_corpus, DiagramType, SyntheticCorpus, SyntheticSpec};

use crate::geometry::Polygon;
use crate::graph::{GraphError, NodeKind};

/// Id given to the image constant when a document does not declare one.
pub const IMPLICIT_IMAGE_CONST: &str = "I0";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("diagram `{diagram}`: malformed element `{element}`: {reason}")]
    Parse {
        diagram: String,
        element: String,
        reason: String,
    },
    #[error("malformed document: {0}")]
    Document(String),
    #[error("diagram `{diagram}`: reference to unknown id `{id}`")]
    Referential { diagram: String, id: String },
    #[error("diagram `{diagram}`: grouping layer is not a tree ({reason}): {nodes:?}")]
    Structure {
        diagram: String,
        reason: String,
        nodes: Vec<String>,
    },
    #[error("diagram `{diagram}`: missing {layer} layer")]
    MissingLayer { diagram: String, layer: &'static str },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing labels for diagrams: {0:?}")]
    Index(Vec<String>),
    #[error("invalid corpus settings: {0}")]
    Spec(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

impl IngestError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IngestError::Io {
            path: path.into(),
            source,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Element {
    pub id: String,
    pub kind: NodeKind,
    pub polygon: Option<Polygon>,
    pub text: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Relation {
    pub id: String,
    pub category: String,
    pub participants: Vec<String>,
}

/// Layout segmentation and semantic relations of one diagram. The element
/// list always holds exactly one image constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawAnnotation {
    pub diagram_id: String,
    pub image_width: f64,
    pub image_height: f64,
    pub elements: Vec<Element>,
    pub relations: Vec<Relation>,
}

impl RawAnnotation {
    pub fn image_const_id(&self) -> &str {
        self.elements
            .iter()
            .find(|e| e.kind == NodeKind::ImageConst)
            .map_or(IMPLICIT_IMAGE_CONST, |e| e.id.as_str())
    }

    pub fn element(&self, id: &str) -> Option<&Element> {
        self.elements.iter().find(|e| e.id == id)
    }

    /// Checks unique ids, one image constant, geometry on layout kinds,
    /// positive image size and resolvable relation participants.
    pub fn validate(&self) -> Result<(), IngestError> {
        let d = &self.diagram_id;
        if !(self.image_width > 0.0 && self.image_height > 0.0) {
            return Err(IngestError::Document(format!(
                "diagram `{d}`: image size {}x{} is not positive",
                self.image_width, self.image_height
            )));
        }
        let mut ids = HashSet::new();
        let mut consts = 0;
        for e in &self.elements {
            if !ids.insert(e.id.as_str()) {
                return Err(parse_err(d, &e.id, "duplicate element id"));
            }
            match e.kind {
                NodeKind::ImageConst => consts += 1,
                NodeKind::Group => {
                    return Err(parse_err(d, &e.id, "group nodes belong to the expert layer"))
                }
                _ => {}
            }
            match (&e.polygon, e.kind.has_geometry()) {
                (None, true) => return Err(parse_err(d, &e.id, "missing geometry")),
                (Some(_), false) => {
                    return Err(parse_err(d, &e.id, "image constant carries no geometry"))
                }
                (Some(p), true) if p.len() < 3 => {
                    return Err(parse_err(d, &e.id, "polygon needs at least 3 vertices"))
                }
                (Some(p), true) if p.vertices.iter().any(|v| !(v.x.is_finite() && v.y.is_finite())) => {
                    return Err(parse_err(d, &e.id, "non-finite coordinate"))
                }
                _ => {}
            }
        }
        if consts != 1 {
            return Err(IngestError::Document(format!(
                "diagram `{d}`: expected one image constant, found {consts}"
            )));
        }
        for r in &self.relations {
            for p in &r.participants {
                if !ids.contains(p.as_str()) {
                    return Err(IngestError::Referential {
                        diagram: d.clone(),
                        id: p.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn parse_err(diagram: &str, element: &str, reason: impl Into<String>) -> IngestError {
    IngestError::Parse {
        diagram: diagram.to_string(),
        element: element.to_string(),
        reason: reason.into(),
    }
}

/// Expert grouping and connectivity layers. Node ids are shared with the
/// paired [`RawAnnotation`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RstAnnotation {
    pub diagram_id: String,
    pub group_node_ids: Vec<String>,
    /// `(parent, child)`.
    pub grouping_edges: Vec<(String, String)>,
    /// `(source, target, category)`.
    pub connectivity_edges: Vec<(String, String, String)>,
    /// Fine-grained diagram types; more than one means the diagram is mixed.
    pub diagram_types: Vec<String>,
    pub coarse_type: Option<String>,
}

impl RstAnnotation {
    pub fn fine_label(&self) -> Option<String> {
        match self.diagram_types.len() {
            0 => None,
            1 => Some(self.diagram_types[0].clone()),
            _ => Some("mixed".to_string()),
        }
    }

    /// Checks that every id resolves against `raw` (arrowheads excluded) or
    /// the group list, and that grouping edges form a tree under the image
    /// constant.
    pub fn validate(&self, raw: &RawAnnotation) -> Result<(), IngestError> {
        let mut known: HashSet<&str> = raw
            .elements
            .iter()
            .filter(|e| e.kind != NodeKind::Arrowhead)
            .map(|e| e.id.as_str())
            .collect();
        for g in &self.group_node_ids {
            if !known.insert(g.as_str()) {
                return Err(parse_err(&self.diagram_id, g, "duplicate node id"));
            }
        }
        let check = |id: &String| {
            if known.contains(id.as_str()) {
                Ok(())
            } else {
                Err(IngestError::Referential {
                    diagram: self.diagram_id.clone(),
                    id: id.clone(),
                })
            }
        };
        for (p, c) in &self.grouping_edges {
            check(p)?;
            check(c)?;
        }
        for (s, t, _) in &self.connectivity_edges {
            check(s)?;
            check(t)?;
        }
        crate::graph::check_tree(&self.grouping_edges, raw.image_const_id()).map_err(
            |(reason, nodes)| IngestError::Structure {
                diagram: self.diagram_id.clone(),
                reason,
                nodes,
            },
        )
    }
}

/// Target labels for the three label spaces.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labels {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ai2d: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rst_fine: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rst_coarse: Option<String>,
}

/// Everything known about one diagram.
#[derive(Clone, Debug, PartialEq)]
pub struct Diagram {
    pub raw: RawAnnotation,
    pub rst: Option<RstAnnotation>,
    pub labels: Labels,
}

impl Diagram {
    pub fn id(&self) -> &str {
        &self.raw.diagram_id
    }

    pub fn label(&self, space: LabelSpace) -> Option<&str> {
        match space {
            LabelSpace::Ai2d => self.labels.ai2d.as_deref(),
            LabelSpace::RstFine => self.labels.rst_fine.as_deref(),
            LabelSpace::RstCoarse => self.labels.rst_coarse.as_deref(),
        }
    }
}
