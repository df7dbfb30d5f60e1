//! Adapters for the public dataset layouts.
//!
//! Crowd-sourced annotations are JSON objects keyed by element category:
//!
//! ```json
//! {
//!   "text": {"T0": {"id": "T0", "rectangle": [[10, 10], [80, 30]], "value": "larva"}},
//!   "blobs": {"B0": {"id": "B0", "polygon": [[100, 100], [180, 90], [170, 200]]}},
//!   "arrows": {"A0": {"id": "A0", "polygon": [[...], ...]}},
//!   "arrowHeads": {"H0": {"id": "H0", "rectangle": [[...], [...]]}},
//!   "imageConsts": {"CI": {"id": "CI"}},
//!   "relationships": {"R0": {"id": "R0", "category": "intraObjectLabel",
//!                            "origin": "T0", "destination": "B0", "connector": "A0"}}
//! }
//! ```
//!
//! Expert annotations are JSON objects with a `grouping` layer
//! (`{"nodes": [group ids], "edges": [[parent, child], ...]}`), an optional
//! `connectivity` layer (`{"edges": [[src, dst, category], ...]}`), an
//! ignored `discourse` layer, and the `diagram_types` / `coarse_type` labels.
//!
//! Expected directory layout under the dataset root:
//!
//! ```text
//! ai2d/annotations/<id>.png.json
//! ai2d/images/<id>.png
//! ai2d/categories.json          {"<id>.png": "<topic>", ...}
//! ai2d-rst/<id>.json            optional; presence selects the expert subset
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::Value;

use super::{parse_err, Element, IngestError, RawAnnotation, Relation, RstAnnotation, IMPLICIT_IMAGE_CONST};
use crate::geometry::{Point, Polygon};
use crate::graph::NodeKind;

const CATEGORIES: [(&str, NodeKind); 4] = [
    ("text", NodeKind::Text),
    ("blobs", NodeKind::Graphic),
    ("arrows", NodeKind::Arrow),
    ("arrowHeads", NodeKind::Arrowhead),
];

fn coords(diagram: &str, id: &str, v: &Value) -> Result<Vec<Point>, IngestError> {
    let pts: Vec<[f64; 2]> = serde_json::from_value(v.clone())
        .map_err(|e| parse_err(diagram, id, format!("bad coordinates: {e}")))?;
    Ok(pts.into_iter().map(|[x, y]| Point::new(x, y)).collect())
}

fn element_polygon(diagram: &str, id: &str, body: &Value) -> Result<Polygon, IngestError> {
    if let Some(r) = body.get("rectangle") {
        let pts = coords(diagram, id, r)?;
        if pts.len() != 2 {
            return Err(parse_err(diagram, id, "rectangle needs two corners"));
        }
        Ok(Polygon::rect(pts[0], pts[1]))
    } else if let Some(p) = body.get("polygon") {
        let pts = coords(diagram, id, p)?;
        if pts.len() == 2 {
            Ok(Polygon::rect(pts[0], pts[1]))
        } else {
            Ok(Polygon::new(pts))
        }
    } else {
        Err(parse_err(diagram, id, "missing rectangle or polygon"))
    }
}

fn section<'a>(
    diagram: &str,
    obj: &'a serde_json::Map<String, Value>,
    key: &str,
) -> Result<BTreeMap<&'a str, &'a Value>, IngestError> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(BTreeMap::new()),
        Some(Value::Object(m)) => Ok(m.iter().map(|(k, v)| (k.as_str(), v)).collect()),
        Some(_) => Err(IngestError::Document(format!(
            "diagram `{diagram}`: `{key}` must be an object"
        ))),
    }
}

/// Parses one crowd-sourced annotation. Elements are ordered by category
/// (text, blobs, arrows, arrowheads, image constant) and by id within each.
pub fn parse_ai2d_annotation(
    text: &str,
    diagram_id: &str,
    image_size: (f64, f64),
) -> Result<RawAnnotation, IngestError> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| IngestError::Document(format!("diagram `{diagram_id}`: {e}")))?;
    let obj = value.as_object().ok_or_else(|| {
        IngestError::Document(format!("diagram `{diagram_id}`: annotation is not an object"))
    })?;
    let mut elements = Vec::new();
    for (key, kind) in CATEGORIES {
        for (id, body) in section(diagram_id, obj, key)? {
            elements.push(Element {
                id: id.to_string(),
                kind,
                polygon: Some(element_polygon(diagram_id, id, body)?),
                text: body.get("value").and_then(Value::as_str).map(str::to_string),
            });
        }
    }
    let consts = section(diagram_id, obj, "imageConsts")?;
    let const_id = consts.keys().next().copied().unwrap_or(IMPLICIT_IMAGE_CONST);
    elements.push(Element {
        id: const_id.to_string(),
        kind: NodeKind::ImageConst,
        polygon: None,
        text: None,
    });
    let mut relations = Vec::new();
    for (id, body) in section(diagram_id, obj, "relationships")? {
        let field = |name: &str| body.get(name).and_then(Value::as_str).map(str::to_string);
        let category = field("category")
            .ok_or_else(|| parse_err(diagram_id, id, "relation without category"))?;
        let origin = field("origin").ok_or_else(|| parse_err(diagram_id, id, "relation without origin"))?;
        let destination = field("destination")
            .ok_or_else(|| parse_err(diagram_id, id, "relation without destination"))?;
        let mut participants = vec![origin];
        participants.extend(field("connector"));
        participants.push(destination);
        relations.push(Relation {
            id: id.to_string(),
            category,
            participants,
        });
    }
    let raw = RawAnnotation {
        diagram_id: diagram_id.to_string(),
        image_width: image_size.0,
        image_height: image_size.1,
        elements,
        relations,
    };
    raw.validate()?;
    Ok(raw)
}

fn string_pairs(diagram: &str, v: Option<&Value>, what: &str) -> Result<Vec<Vec<String>>, IngestError> {
    match v {
        None | Some(Value::Null) => Ok(Vec::new()),
        Some(v) => serde_json::from_value(v.clone())
            .map_err(|e| IngestError::Document(format!("diagram `{diagram}`: {what}: {e}"))),
    }
}

/// Parses one expert annotation against its paired crowd-sourced layer.
pub fn parse_rst_export(text: &str, raw: &RawAnnotation) -> Result<RstAnnotation, IngestError> {
    let d = raw.diagram_id.as_str();
    let value: Value = serde_json::from_str(text)
        .map_err(|e| IngestError::Document(format!("diagram `{d}`: {e}")))?;
    let grouping = value.get("grouping").ok_or_else(|| IngestError::MissingLayer {
        diagram: d.to_string(),
        layer: "grouping",
    })?;
    let group_node_ids: Vec<String> = match grouping.get("nodes") {
        None => Vec::new(),
        Some(v) => serde_json::from_value(v.clone())
            .map_err(|e| IngestError::Document(format!("diagram `{d}`: grouping nodes: {e}")))?,
    };
    let mut grouping_edges = Vec::new();
    for e in string_pairs(d, grouping.get("edges"), "grouping edges")? {
        match e.as_slice() {
            [p, c] => grouping_edges.push((p.clone(), c.clone())),
            _ => return Err(parse_err(d, &e.join("->"), "grouping edge needs two ids")),
        }
    }
    let mut connectivity_edges = Vec::new();
    let conn = value.get("connectivity").and_then(|c| c.get("edges"));
    for e in string_pairs(d, conn, "connectivity edges")? {
        match e.as_slice() {
            [s, t, c] => connectivity_edges.push((s.clone(), t.clone(), c.clone())),
            _ => return Err(parse_err(d, &e.join("->"), "connectivity edge needs src, dst, category")),
        }
    }
    let diagram_types: Vec<String> = match value.get("diagram_types") {
        None | Some(Value::Null) => Vec::new(),
        Some(v) => serde_json::from_value(v.clone())
            .map_err(|e| IngestError::Document(format!("diagram `{d}`: diagram_types: {e}")))?,
    };
    let rst = RstAnnotation {
        diagram_id: d.to_string(),
        group_node_ids,
        grouping_edges,
        connectivity_edges,
        diagram_types,
        coarse_type: value.get("coarse_type").and_then(Value::as_str).map(str::to_string),
    };
    rst.validate(raw)?;
    Ok(rst)
}

/// Width and height from a PNG header.
pub fn png_dimensions(path: &Path) -> Result<(f64, f64), IngestError> {
    use std::io::Read;
    let mut head = [0u8; 24];
    std::fs::File::open(path)
        .and_then(|mut f| f.read_exact(&mut head))
        .map_err(|e| IngestError::io(path, e))?;
    if &head[..8] != b"\x89PNG\r\n\x1a\n" || &head[12..16] != b"IHDR" {
        return Err(IngestError::Document(format!("{}: not a PNG image", path.display())));
    }
    let w = u32::from_be_bytes(head[16..20].try_into().unwrap());
    let h = u32::from_be_bytes(head[20..24].try_into().unwrap());
    Ok((w as f64, h as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    const ANNOTATION: &str = r#"{
      "text": {"T1": {"id": "T1", "rectangle": [[50, 5], [90, 15]]},
               "T0": {"id": "T0", "rectangle": [[5, 5], [40, 15]], "value": "sun"}},
      "blobs": {"B0": {"id": "B0", "polygon": [[10, 30], [60, 30], [40, 80]]}},
      "arrows": {"A0": {"id": "A0", "polygon": [[60, 50], [90, 50], [90, 54], [60, 54]]}},
      "arrowHeads": {"H0": {"id": "H0", "rectangle": [[90, 48], [96, 56]]}},
      "imageConsts": {"CI": {"id": "CI"}},
      "relationships": {
        "R0": {"id": "R0", "category": "intraObjectLabel", "origin": "T0", "destination": "B0"},
        "R1": {"id": "R1", "category": "interObjectLinkage", "origin": "B0", "connector": "A0", "destination": "T1"}
      }
    }"#;

    #[test]
    fn elements_ordered_by_category() {
        let raw = parse_ai2d_annotation(ANNOTATION, "17", (100.0, 100.0)).unwrap();
        let ids: Vec<&str> = raw.elements.iter().map(|e| e.id.as_str()).collect();
        assert_eq!(ids, ["T0", "T1", "B0", "A0", "H0", "CI"]);
        assert_eq!(raw.relations[1].participants, ["B0", "A0", "T1"]);
        assert_eq!(raw.image_const_id(), "CI");
        assert_eq!(raw.element("T0").unwrap().text.as_deref(), Some("sun"));
    }

    #[test]
    fn dangling_destination() {
        let bad = ANNOTATION.replace("\"destination\": \"T1\"", "\"destination\": \"T9\"");
        assert!(matches!(
            parse_ai2d_annotation(&bad, "17", (100.0, 100.0)),
            Err(IngestError::Referential { id, .. }) if id == "T9"
        ));
    }

    #[test]
    fn rst_export_parses_and_skips_discourse() {
        let raw = parse_ai2d_annotation(ANNOTATION, "17", (100.0, 100.0)).unwrap();
        let export = r#"{
          "grouping": {"nodes": ["G0"], "edges": [["CI", "G0"], ["G0", "T0"], ["G0", "B0"], ["CI", "A0"], ["CI", "T1"]]},
          "connectivity": {"edges": [["G0", "T1", "directional"]]},
          "discourse": {"nodes": ["r1"], "edges": [["r1", "T0"]]},
          "diagram_types": ["network"],
          "coarse_type": "network"
        }"#;
        let rst = parse_rst_export(export, &raw).unwrap();
        assert_eq!(rst.grouping_edges.len(), 5);
        assert_eq!(rst.connectivity_edges.len(), 1);
        assert_eq!(rst.fine_label().as_deref(), Some("network"));
    }

    #[test]
    fn rst_export_rejects_arrowhead_reference() {
        let raw = parse_ai2d_annotation(ANNOTATION, "17", (100.0, 100.0)).unwrap();
        let export = r#"{"grouping": {"nodes": [], "edges": [["CI", "H0"]]}}"#;
        assert!(matches!(
            parse_rst_export(export, &raw),
            Err(IngestError::Referential { .. })
        ));
    }

    #[test]
    fn png_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.png");
        let mut bytes = b"\x89PNG\r\n\x1a\n\0\0\0\x0dIHDR".to_vec();
        bytes.extend(640u32.to_be_bytes());
        bytes.extend(480u32.to_be_bytes());
        std::fs::write(&path, bytes).unwrap();
        assert_eq!(png_dimensions(&path).unwrap(), (640.0, 480.0));
        std::fs::write(&path, b"GIF89a").unwrap();
        assert!(png_dimensions(&path).is_err());
    }
}
