//! Canonical interchange format: one JSON document per diagram.
//!
//! ```json
//! {
//!   "id": "4120",
//!   "image_size": [640, 480],
//!   "nodes": [
//!     {"id": "T0", "kind": "text", "polygon": [[10, 10], [80, 30]], "text": "larva"},
//!     {"id": "B0", "kind": "graphic", "polygon": [[100, 100], [180, 90], [170, 200]]},
//!     {"id": "I0", "kind": "image_const"},
//!     {"id": "G0", "kind": "group"}
//!   ],
//!   "edges": [
//!     {"src": "T0", "dst": "B0", "kind": "relation", "category": "intraObjectLabel", "id": "R0"},
//!     {"src": "I0", "dst": "G0", "kind": "grouping"},
//!     {"src": "G0", "dst": "T0", "kind": "grouping"},
//!     {"src": "G0", "dst": "B0", "kind": "connectivity", "category": "directional"}
//!   ],
//!   "labels": {"ai2d": "lifeCycles", "rst_fine": "cycle", "rst_coarse": "network"}
//! }
//! ```
//!
//! Node kinds are `text`, `graphic`, `arrow`, `arrowhead`, `image_const` and
//! `group`; edge kinds are `grouping`, `connectivity` and `relation`.
//! Coordinates are pixels with the origin at the top-left. A two-point
//! polygon is a rectangle given by opposite corners. Grouping edges point
//! from parent to child. Relation edges sharing an `id` and chaining
//! end-to-start form one multi-participant relation. Unknown top-level keys
//! (such as a `discourse` layer) are ignored.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{parse_err, Diagram, Element, IngestError, Labels, RawAnnotation, Relation, RstAnnotation, IMPLICIT_IMAGE_CONST};
use crate::geometry::{Point, Polygon};
use crate::graph::NodeKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeLayer {
    Grouping,
    Connectivity,
    Relation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CanonicalNode {
    pub id: String,
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub polygon: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CanonicalEdge {
    pub src: String,
    pub dst: String,
    pub kind: EdgeLayer,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CanonicalDocument {
    pub id: String,
    pub image_size: [f64; 2],
    pub nodes: Vec<CanonicalNode>,
    #[serde(default)]
    pub edges: Vec<CanonicalEdge>,
    #[serde(default)]
    pub labels: Labels,
}

fn polygon_from_coords(coords: &[[f64; 2]]) -> Polygon {
    if coords.len() == 2 {
        Polygon::rect(
            Point::new(coords[0][0], coords[0][1]),
            Point::new(coords[1][0], coords[1][1]),
        )
    } else {
        Polygon::new(coords.iter().map(|c| Point::new(c[0], c[1])).collect())
    }
}

fn coords_from_polygon(p: &Polygon) -> Vec<[f64; 2]> {
    p.vertices.iter().map(|v| [v.x, v.y]).collect()
}

/// Parses a document, naming the offending node or edge on schema errors.
pub fn parse_document(text: &str) -> Result<CanonicalDocument, IngestError> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| IngestError::Document(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| IngestError::Document("document is not an object".into()))?;
    let id = obj
        .get("id")
        .and_then(Value::as_str)
        .ok_or_else(|| IngestError::Document("missing string field `id`".into()))?
        .to_string();
    let image_size: [f64; 2] = obj
        .get("image_size")
        .cloned()
        .map(serde_json::from_value)
        .transpose()
        .map_err(|e| IngestError::Document(format!("diagram `{id}`: image_size: {e}")))?
        .ok_or_else(|| IngestError::Document(format!("diagram `{id}`: missing image_size")))?;
    let list = |key: &str| -> Result<Vec<Value>, IngestError> {
        match obj.get(key) {
            None => Ok(Vec::new()),
            Some(Value::Array(items)) => Ok(items.clone()),
            Some(_) => Err(IngestError::Document(format!(
                "diagram `{id}`: `{key}` must be a list"
            ))),
        }
    };
    let mut nodes = Vec::new();
    for (i, v) in list("nodes")?.into_iter().enumerate() {
        let name = v
            .get("id")
            .and_then(Value::as_str)
            .map_or_else(|| format!("#{i}"), str::to_string);
        nodes.push(
            serde_json::from_value::<CanonicalNode>(v)
                .map_err(|e| parse_err(&id, &name, e.to_string()))?,
        );
    }
    let mut edges = Vec::new();
    for (i, v) in list("edges")?.into_iter().enumerate() {
        let name = match (v.get("src").and_then(Value::as_str), v.get("dst").and_then(Value::as_str)) {
            (Some(s), Some(d)) => format!("{s}->{d}"),
            _ => format!("edge #{i}"),
        };
        edges.push(
            serde_json::from_value::<CanonicalEdge>(v)
                .map_err(|e| parse_err(&id, &name, e.to_string()))?,
        );
    }
    let labels = match obj.get("labels") {
        None => Labels::default(),
        Some(v) => serde_json::from_value(v.clone())
            .map_err(|e| IngestError::Document(format!("diagram `{id}`: labels: {e}")))?,
    };
    Ok(CanonicalDocument {
        id,
        image_size,
        nodes,
        edges,
        labels,
    })
}

/// Parses the crowd-sourced layer of a canonical document.
pub fn parse_raw_annotation(text: &str) -> Result<RawAnnotation, IngestError> {
    parse_document(text)?.raw_annotation()
}

/// Parses the expert layers of a canonical document.
pub fn parse_rst_annotation(text: &str) -> Result<RstAnnotation, IngestError> {
    let doc = parse_document(text)?;
    let raw = doc.raw_annotation()?;
    doc.rst_annotation(&raw)
}

impl CanonicalDocument {
    pub fn from_json(text: &str) -> Result<Self, IngestError> {
        parse_document(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("canonical documents always serialize")
    }

    pub fn has_expert_layers(&self) -> bool {
        self.nodes.iter().any(|n| n.kind == NodeKind::Group)
            || self.edges.iter().any(|e| e.kind == EdgeLayer::Grouping)
    }

    pub fn raw_annotation(&self) -> Result<RawAnnotation, IngestError> {
        let mut elements = Vec::new();
        for n in self.nodes.iter().filter(|n| n.kind != NodeKind::Group) {
            let polygon = match (n.kind.has_geometry(), n.polygon.len()) {
                (true, 0) => return Err(parse_err(&self.id, &n.id, "missing polygon")),
                (true, 1) => {
                    return Err(parse_err(&self.id, &n.id, "polygon needs at least 2 points"))
                }
                (true, _) => Some(polygon_from_coords(&n.polygon)),
                (false, 0) => None,
                (false, _) => {
                    return Err(parse_err(&self.id, &n.id, "image constant carries no polygon"))
                }
            };
            elements.push(Element {
                id: n.id.clone(),
                kind: n.kind,
                polygon,
                text: n.text.clone(),
            });
        }
        if !elements.iter().any(|e| e.kind == NodeKind::ImageConst) {
            elements.push(Element {
                id: IMPLICIT_IMAGE_CONST.to_string(),
                kind: NodeKind::ImageConst,
                polygon: None,
                text: None,
            });
        }
        let mut relations: Vec<Relation> = Vec::new();
        let mut auto = 0;
        for e in self.edges.iter().filter(|e| e.kind == EdgeLayer::Relation) {
            if let (Some(id), Some(last)) = (&e.id, relations.last_mut()) {
                if &last.id == id && last.participants.last() == Some(&e.src) {
                    last.participants.push(e.dst.clone());
                    continue;
                }
            }
            let id = e.id.clone().unwrap_or_else(|| {
                auto += 1;
                format!("R{}", auto - 1)
            });
            relations.push(Relation {
                id,
                category: e.category.clone().unwrap_or_default(),
                participants: vec![e.src.clone(), e.dst.clone()],
            });
        }
        let raw = RawAnnotation {
            diagram_id: self.id.clone(),
            image_width: self.image_size[0],
            image_height: self.image_size[1],
            elements,
            relations,
        };
        raw.validate()?;
        Ok(raw)
    }

    pub fn rst_annotation(&self, raw: &RawAnnotation) -> Result<RstAnnotation, IngestError> {
        if !self.has_expert_layers() {
            return Err(IngestError::MissingLayer {
                diagram: self.id.clone(),
                layer: "grouping",
            });
        }
        let mut connectivity_edges = Vec::new();
        for e in self.edges.iter().filter(|e| e.kind == EdgeLayer::Connectivity) {
            let category = e.category.clone().ok_or_else(|| {
                parse_err(
                    &self.id,
                    &format!("{}->{}", e.src, e.dst),
                    "connectivity edge without category",
                )
            })?;
            connectivity_edges.push((e.src.clone(), e.dst.clone(), category));
        }
        let rst = RstAnnotation {
            diagram_id: self.id.clone(),
            group_node_ids: self
                .nodes
                .iter()
                .filter(|n| n.kind == NodeKind::Group)
                .map(|n| n.id.clone())
                .collect(),
            grouping_edges: self
                .edges
                .iter()
                .filter(|e| e.kind == EdgeLayer::Grouping)
                .map(|e| (e.src.clone(), e.dst.clone()))
                .collect(),
            connectivity_edges,
            diagram_types: self.labels.rst_fine.iter().cloned().collect(),
            coarse_type: self.labels.rst_coarse.clone(),
        };
        rst.validate(raw)?;
        Ok(rst)
    }

    pub fn into_diagram(self) -> Result<Diagram, IngestError> {
        let raw = self.raw_annotation()?;
        let rst = if self.has_expert_layers() {
            Some(self.rst_annotation(&raw)?)
        } else {
            None
        };
        Ok(Diagram {
            raw,
            rst,
            labels: self.labels,
        })
    }

    /// Serializes parsed annotations. Nodes are emitted as the elements in
    /// order followed by the groups; edges as relations, grouping, then
    /// connectivity.
    pub fn from_parts(raw: &RawAnnotation, rst: Option<&RstAnnotation>, labels: &Labels) -> Self {
        let mut nodes: Vec<CanonicalNode> = raw
            .elements
            .iter()
            .map(|e| CanonicalNode {
                id: e.id.clone(),
                kind: e.kind,
                polygon: e.polygon.as_ref().map(coords_from_polygon).unwrap_or_default(),
                text: e.text.clone(),
            })
            .collect();
        let mut edges = Vec::new();
        for r in &raw.relations {
            for pair in r.participants.windows(2) {
                edges.push(CanonicalEdge {
                    src: pair[0].clone(),
                    dst: pair[1].clone(),
                    kind: EdgeLayer::Relation,
                    category: Some(r.category.clone()),
                    id: Some(r.id.clone()),
                });
            }
        }
        if let Some(rst) = rst {
            nodes.extend(rst.group_node_ids.iter().map(|g| CanonicalNode {
                id: g.clone(),
                kind: NodeKind::Group,
                polygon: Vec::new(),
                text: None,
            }));
            edges.extend(rst.grouping_edges.iter().map(|(p, c)| CanonicalEdge {
                src: p.clone(),
                dst: c.clone(),
                kind: EdgeLayer::Grouping,
                category: None,
                id: None,
            }));
            edges.extend(rst.connectivity_edges.iter().map(|(s, d, c)| CanonicalEdge {
                src: s.clone(),
                dst: d.clone(),
                kind: EdgeLayer::Connectivity,
                category: Some(c.clone()),
                id: None,
            }));
        }
        CanonicalDocument {
            id: raw.diagram_id.clone(),
            image_size: [raw.image_width, raw.image_height],
            nodes,
            edges,
            labels: labels.clone(),
        }
    }

    pub fn from_diagram(d: &Diagram) -> Self {
        Self::from_parts(&d.raw, d.rst.as_ref(), &d.labels)
    }
}
