//! Typed per-diagram graphs for both annotation schemes.
//!
//! Scheme A is the crowd-sourced parse graph: layout elements plus the image
//! constant, linked by semantic relations. Scheme B is the expert layering: a
//! grouping tree rooted at the image constant, optionally merged with the
//! connectivity layer. Model-facing graphs are finalized with one self-loop
//! per node and, by default, symmetrized.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{layout_features, GeometryError, LayoutFeatures, Polygon};
use crate::ingest::{RawAnnotation, RstAnnotation};
use crate::tensor::Tensor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("diagram `{diagram}`: unknown node id `{node}`")]
    Referential { diagram: String, node: String },
    #[error("diagram `{diagram}`: grouping layer is not a tree ({reason}): {nodes:?}")]
    Structure {
        diagram: String,
        reason: String,
        nodes: Vec<String>,
    },
    #[error("usage error: {0}")]
    Usage(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Text,
    Graphic,
    Arrow,
    Arrowhead,
    ImageConst,
    Group,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Text => "text",
            NodeKind::Graphic => "graphic",
            NodeKind::Arrow => "arrow",
            NodeKind::Arrowhead => "arrowhead",
            NodeKind::ImageConst => "image_const",
            NodeKind::Group => "group",
        }
    }

    /// Kinds that carry element geometry.
    pub fn has_geometry(self) -> bool {
        matches!(
            self,
            NodeKind::Text | NodeKind::Graphic | NodeKind::Arrow | NodeKind::Arrowhead
        )
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which annotation graph a [`TypedGraph`] was built from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    /// Crowd-sourced parse graph.
    #[serde(rename = "a")]
    A,
    /// Expert grouping tree.
    #[serde(rename = "b-g")]
    Grouping,
    /// Expert grouping tree merged with connectivity.
    #[serde(rename = "b-gc")]
    GroupingConnectivity,
}

const SCHEME_A_KINDS: [NodeKind; 5] = [
    NodeKind::Text,
    NodeKind::Graphic,
    NodeKind::Arrow,
    NodeKind::Arrowhead,
    NodeKind::ImageConst,
];
const SCHEME_B_KINDS: [NodeKind; 5] = [
    NodeKind::Text,
    NodeKind::Graphic,
    NodeKind::Arrow,
    NodeKind::ImageConst,
    NodeKind::Group,
];

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::A, Scheme::Grouping, Scheme::GroupingConnectivity];

    /// The five node classes of this scheme, in class-index order.
    pub fn node_kinds(self) -> &'static [NodeKind; 5] {
        match self {
            Scheme::A => &SCHEME_A_KINDS,
            _ => &SCHEME_B_KINDS,
        }
    }

    pub fn class_index(self, kind: NodeKind) -> Option<usize> {
        self.node_kinds().iter().position(|&k| k == kind)
    }

    pub fn is_expert(self) -> bool {
        !matches!(self, Scheme::A)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::A => "a",
            Scheme::Grouping => "b-g",
            Scheme::GroupingConnectivity => "b-gc",
        }
    }

    /// Column header used in report tables.
    pub fn short_label(self) -> &'static str {
        match self {
            Scheme::A => "A",
            Scheme::Grouping => "G",
            Scheme::GroupingConnectivity => "G+C",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "a" => Ok(Scheme::A),
            "b-g" => Ok(Scheme::Grouping),
            "b-gc" => Ok(Scheme::GroupingConnectivity),
            other => Err(format!("unknown scheme `{other}` (expected a, b-g or b-gc)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Grouping,
    Connectivity,
    Relation,
    SelfLoop,
}

impl EdgeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::Grouping => "grouping",
            EdgeKind::Connectivity => "connectivity",
            EdgeKind::Relation => "relation",
            EdgeKind::SelfLoop => "self_loop",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphNode {
    pub id: String,
    pub kind: NodeKind,
    pub polygon: Option<Polygon>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphEdge {
    pub src: usize,
    pub dst: usize,
    pub kind: EdgeKind,
    /// Relation or connection category; kept as metadata, never fed to models.
    pub category: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TypedGraph {
    pub diagram_id: String,
    pub scheme: Scheme,
    pub image_size: (f64, f64),
    nodes: Vec<GraphNode>,
    edges: Vec<GraphEdge>,
    symmetric: bool,
    finalized: bool,
}

impl TypedGraph {
    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[GraphEdge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_finalized(&self) -> bool {
        self.finalized
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn non_loop_edges(&self) -> impl Iterator<Item = &GraphEdge> {
        self.edges.iter().filter(|e| e.kind != EdgeKind::SelfLoop)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    /// `(src, dst)` pairs; message passing sends features from `src` to `dst`.
    pub fn adjacency_pairs(&self) -> Vec<(usize, usize)> {
        self.edges.iter().map(|e| (e.src, e.dst)).collect()
    }

    /// Dense 0/1 adjacency with `a[src][dst] = 1`.
    pub fn dense_adjacency(&self) -> Tensor {
        let n = self.nodes.len();
        let mut a = Tensor::zeros(n, n);
        for e in &self.edges {
            a.set(e.src, e.dst, 1.0);
        }
        a
    }

    /// `N x 4` layout feature matrix in node order.
    pub fn layout_matrix(&self) -> Result<Tensor, GeometryError> {
        let (w, h) = self.image_size;
        let mut data = Vec::with_capacity(self.nodes.len() * LayoutFeatures::DIM);
        for n in &self.nodes {
            data.extend(layout_features(&n.id, n.polygon.as_ref(), w, h)?.to_array());
        }
        Ok(Tensor::from_vec(self.nodes.len(), LayoutFeatures::DIM, data)
            .expect("row length matches feature width"))
    }

    /// Class index of every node under this graph's scheme.
    pub fn node_classes(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .map(|n| {
                self.scheme
                    .class_index(n.kind)
                    .expect("graph builders only admit scheme kinds")
            })
            .collect()
    }

    /// Adds self-loops exactly once per node and, when `symmetrize` is set,
    /// the reverse of every edge. Duplicate `(src, dst)` pairs collapse to the
    /// first occurrence.
    pub fn finalize(mut self, symmetrize: bool) -> Result<TypedGraph, GraphError> {
        if self.finalized {
            return Err(GraphError::Usage(format!(
                "graph `{}` is already finalized",
                self.diagram_id
            )));
        }
        let mut seen = HashSet::new();
        let mut edges = Vec::with_capacity(self.edges.len() * 2 + self.nodes.len());
        for e in self.edges.drain(..) {
            if e.src != e.dst && seen.insert((e.src, e.dst)) {
                edges.push(e);
            }
        }
        if symmetrize {
            let forward: Vec<GraphEdge> = edges.clone();
            for e in forward {
                if seen.insert((e.dst, e.src)) {
                    edges.push(GraphEdge {
                        src: e.dst,
                        dst: e.src,
                        kind: e.kind,
                        category: e.category,
                    });
                }
            }
        }
        for i in 0..self.nodes.len() {
            edges.push(GraphEdge {
                src: i,
                dst: i,
                kind: EdgeKind::SelfLoop,
                category: None,
            });
        }
        self.edges = edges;
        self.symmetric = symmetrize;
        self.finalized = true;
        Ok(self)
    }

    /// One `src dst kind` line per edge, using node ids.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for e in &self.edges {
            out.push_str(&format!(
                "{} {} {}\n",
                self.nodes[e.src].id,
                self.nodes[e.dst].id,
                e.kind.as_str()
            ));
        }
        out
    }
}

/// Parse graph: one node per element (image constant included) and one edge
/// per consecutive pair of relation participants.
pub fn build_scheme_a_graph(raw: &RawAnnotation) -> TypedGraph {
    let nodes: Vec<GraphNode> = raw
        .elements
        .iter()
        .map(|e| GraphNode {
            id: e.id.clone(),
            kind: e.kind,
            polygon: e.polygon.clone(),
        })
        .collect();
    let index: HashMap<&str, usize> = nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.id.as_str(), i))
        .collect();
    let mut edges = Vec::new();
    for rel in &raw.relations {
        for pair in rel.participants.windows(2) {
            // RawAnnotation guarantees participants resolve.
            let (Some(&s), Some(&d)) = (index.get(pair[0].as_str()), index.get(pair[1].as_str()))
            else {
                continue;
            };
            edges.push(GraphEdge {
                src: s,
                dst: d,
                kind: EdgeKind::Relation,
                category: Some(rel.category.clone()),
            });
        }
    }
    TypedGraph {
        diagram_id: raw.diagram_id.clone(),
        scheme: Scheme::A,
        image_size: (raw.image_width, raw.image_height),
        nodes,
        edges,
        symmetric: false,
        finalized: false,
    }
}

/// Verifies that `edges` (parent, child) form a forest whose edge-bearing
/// component is rooted at `root`. Returns `(reason, offending node ids)`.
pub(crate) fn check_tree(
    edges: &[(String, String)],
    root: &str,
) -> Result<(), (String, Vec<String>)> {
    let mut parent: HashMap<&str, &str> = HashMap::new();
    for (p, c) in edges {
        if p == c {
            return Err(("cycle".into(), vec![p.clone()]));
        }
        if let Some(prev) = parent.insert(c.as_str(), p.as_str()) {
            if prev != p {
                return Err((
                    "multiple parents".into(),
                    vec![c.clone(), prev.to_string(), p.clone()],
                ));
            }
        }
    }
    for start in parent.keys() {
        let mut path = vec![*start];
        let mut on_path: HashSet<&str> = HashSet::from([*start]);
        let mut cur = *start;
        while let Some(&p) = parent.get(cur) {
            if !on_path.insert(p) {
                let pos = path.iter().position(|&x| x == p).unwrap_or(0);
                let mut cycle: Vec<String> = path[pos..].iter().map(|s| s.to_string()).collect();
                cycle.sort();
                return Err(("cycle".into(), cycle));
            }
            path.push(p);
            cur = p;
        }
        if cur != root {
            return Err((
                format!("root is `{cur}`, expected the image constant"),
                vec![start.to_string()],
            ));
        }
    }
    Ok(())
}

/// Grouping tree: all non-arrowhead elements plus group nodes (no geometry),
/// edges from parent to child.
pub fn build_grouping_graph(
    raw: &RawAnnotation,
    rst: &RstAnnotation,
) -> Result<TypedGraph, GraphError> {
    let mut nodes: Vec<GraphNode> = raw
        .elements
        .iter()
        .filter(|e| e.kind != NodeKind::Arrowhead)
        .map(|e| GraphNode {
            id: e.id.clone(),
            kind: e.kind,
            polygon: e.polygon.clone(),
        })
        .collect();
    for g in &rst.group_node_ids {
        nodes.push(GraphNode {
            id: g.clone(),
            kind: NodeKind::Group,
            polygon: None,
        });
    }
    let index: HashMap<String, usize> = nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.id.clone(), i))
        .collect();
    let lookup = |id: &String| {
        index.get(id).copied().ok_or_else(|| GraphError::Referential {
            diagram: raw.diagram_id.clone(),
            node: id.clone(),
        })
    };
    let mut edges = Vec::with_capacity(rst.grouping_edges.len());
    for (p, c) in &rst.grouping_edges {
        edges.push(GraphEdge {
            src: lookup(p)?,
            dst: lookup(c)?,
            kind: EdgeKind::Grouping,
            category: None,
        });
    }
    check_tree(&rst.grouping_edges, raw.image_const_id()).map_err(|(reason, nodes)| {
        GraphError::Structure {
            diagram: raw.diagram_id.clone(),
            reason,
            nodes,
        }
    })?;
    Ok(TypedGraph {
        diagram_id: raw.diagram_id.clone(),
        scheme: Scheme::Grouping,
        image_size: (raw.image_width, raw.image_height),
        nodes,
        edges,
        symmetric: false,
        finalized: false,
    })
}

/// Appends the connectivity layer to an unfinalized grouping graph. Repeated
/// connections collapse to one edge.
pub fn merge_connectivity(
    grouping: &TypedGraph,
    rst: &RstAnnotation,
) -> Result<TypedGraph, GraphError> {
    if grouping.finalized {
        return Err(GraphError::Usage(
            "connectivity must be merged before finalization".into(),
        ));
    }
    if grouping.scheme != Scheme::Grouping {
        return Err(GraphError::Usage(format!(
            "expected a grouping graph, got scheme {}",
            grouping.scheme
        )));
    }
    let mut out = grouping.clone();
    out.scheme = Scheme::GroupingConnectivity;
    let mut seen: HashSet<(usize, usize)> = HashSet::new();
    for (s, d, category) in &rst.connectivity_edges {
        let resolve = |id: &String| {
            grouping.index_of(id).ok_or_else(|| GraphError::Referential {
                diagram: grouping.diagram_id.clone(),
                node: id.clone(),
            })
        };
        let (si, di) = (resolve(s)?, resolve(d)?);
        if seen.insert((si, di)) {
            out.edges.push(GraphEdge {
                src: si,
                dst: di,
                kind: EdgeKind::Connectivity,
                category: Some(category.clone()),
            });
        }
    }
    Ok(out)
}

/// Builds and finalizes the model-facing graph for `scheme`.
pub fn build_graph(
    scheme: Scheme,
    raw: &RawAnnotation,
    rst: Option<&RstAnnotation>,
    symmetrize: bool,
) -> Result<TypedGraph, GraphError> {
    let need_rst = || {
        rst.ok_or_else(|| {
            GraphError::Usage(format!(
                "diagram `{}` has no expert annotation for scheme {scheme}",
                raw.diagram_id
            ))
        })
    };
    let graph = match scheme {
        Scheme::A => build_scheme_a_graph(raw),
        Scheme::Grouping => build_grouping_graph(raw, need_rst()?)?,
        Scheme::GroupingConnectivity => {
            let rst = need_rst()?;
            merge_connectivity(&build_grouping_graph(raw, rst)?, rst)?
        }
    };
    graph.finalize(symmetrize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{Element, Relation};

    fn element(id: &str, kind: NodeKind) -> Element {
        let polygon = kind.has_geometry().then(|| {
            Polygon::rect(
                crate::geometry::Point::new(0.0, 0.0),
                crate::geometry::Point::new(10.0, 10.0),
            )
        });
        Element {
            id: id.into(),
            kind,
            polygon,
            text: None,
        }
    }

    fn raw_fixture(n_elements: usize, relations: &[(&str, &str)]) -> RawAnnotation {
        let kinds = [NodeKind::Text, NodeKind::Graphic, NodeKind::Arrow, NodeKind::Arrowhead];
        let mut elements: Vec<Element> = (0..n_elements)
            .map(|i| element(&format!("E{i}"), kinds[i % 4]))
            .collect();
        elements.push(element("I0", NodeKind::ImageConst));
        RawAnnotation {
            diagram_id: "d1".into(),
            image_width: 100.0,
            image_height: 100.0,
            elements,
            relations: relations
                .iter()
                .enumerate()
                .map(|(i, (a, b))| Relation {
                    id: format!("R{i}"),
                    category: "intraObjectLabel".into(),
                    participants: vec![a.to_string(), b.to_string()],
                })
                .collect(),
        }
    }

    fn rst_fixture() -> (RawAnnotation, RstAnnotation) {
        // six elements without arrowheads: kinds text/graphic/arrow cycle
        let mut raw = raw_fixture(0, &[]);
        let kinds = [NodeKind::Text, NodeKind::Graphic, NodeKind::Arrow];
        for i in 0..6 {
            raw.elements.push(element(&format!("X{i}"), kinds[i % 3]));
        }
        let edges = [
            ("I0", "G1"),
            ("I0", "G2"),
            ("G1", "X0"),
            ("G1", "X1"),
            ("G2", "X2"),
            ("G2", "X3"),
            ("I0", "X4"),
            ("I0", "X5"),
        ];
        let rst = RstAnnotation {
            diagram_id: "d1".into(),
            group_node_ids: vec!["G1".into(), "G2".into()],
            grouping_edges: edges.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
            connectivity_edges: vec![
                ("G1".into(), "G2".into(), "directional".into()),
                ("X4".into(), "X5".into(), "undirectional".into()),
                ("X5".into(), "G1".into(), "directional".into()),
            ],
            diagram_types: vec!["cycle".into()],
            coarse_type: None,
        };
        (raw, rst)
    }

    #[test]
    fn scheme_a_counts() {
        let raw = raw_fixture(10, &[("E0", "E1"), ("E2", "E3"), ("E4", "E5"), ("E6", "I0")]);
        let g = build_scheme_a_graph(&raw);
        assert_eq!(g.node_count(), 11);
        assert_eq!(g.non_loop_edges().count(), 4);
        let f = g.finalize(true).unwrap();
        assert_eq!(
            f.edges().iter().filter(|e| e.kind == EdgeKind::SelfLoop).count(),
            11
        );
    }

    #[test]
    fn empty_raw_is_single_loop() {
        let raw = raw_fixture(0, &[]);
        let g = build_scheme_a_graph(&raw).finalize(true).unwrap();
        assert_eq!(g.node_count(), 1);
        assert_eq!(g.adjacency_pairs(), vec![(0, 0)]);
    }

    #[test]
    fn isolated_elements_stay_isolated() {
        let raw = raw_fixture(4, &[("E0", "E1")]);
        let g = build_scheme_a_graph(&raw).finalize(true).unwrap();
        let e2 = g.index_of("E2").unwrap();
        let touching: Vec<_> = g.edges().iter().filter(|e| e.src == e2 || e.dst == e2).collect();
        assert_eq!(touching.len(), 1);
        assert_eq!(touching[0].kind, EdgeKind::SelfLoop);
    }

    #[test]
    fn grouping_counts_and_merge() {
        let (raw, rst) = rst_fixture();
        let g = build_grouping_graph(&raw, &rst).unwrap();
        assert_eq!(g.node_count(), 9);
        assert_eq!(g.non_loop_edges().count(), 8);
        assert!(g.nodes().iter().filter(|n| n.kind == NodeKind::Group).all(|n| n.polygon.is_none()));
        let gc = merge_connectivity(&g, &rst).unwrap();
        assert_eq!(gc.node_count(), 9);
        assert_eq!(gc.non_loop_edges().count(), 11);
    }

    #[test]
    fn grouping_has_no_arrowheads() {
        let (mut raw, rst) = rst_fixture();
        raw.elements.push(element("H0", NodeKind::Arrowhead));
        let g = build_grouping_graph(&raw, &rst).unwrap();
        assert!(g.nodes().iter().all(|n| n.kind != NodeKind::Arrowhead));
    }

    #[test]
    fn empty_connectivity_is_identity() {
        let (raw, mut rst) = rst_fixture();
        rst.connectivity_edges.clear();
        let g = build_grouping_graph(&raw, &rst).unwrap();
        let mut gc = merge_connectivity(&g, &rst).unwrap();
        gc.scheme = Scheme::Grouping;
        assert_eq!(gc, g);
    }

    #[test]
    fn duplicate_connectivity_kept_once() {
        let (raw, mut rst) = rst_fixture();
        let dup = rst.connectivity_edges[0].clone();
        rst.connectivity_edges.push(dup);
        let g = build_grouping_graph(&raw, &rst).unwrap();
        assert_eq!(merge_connectivity(&g, &rst).unwrap().non_loop_edges().count(), 11);
    }

    #[test]
    fn connectivity_unknown_endpoint() {
        let (raw, mut rst) = rst_fixture();
        rst.connectivity_edges.push(("G1".into(), "nope".into(), "x".into()));
        let g = build_grouping_graph(&raw, &rst).unwrap();
        assert!(matches!(
            merge_connectivity(&g, &rst),
            Err(GraphError::Referential { node, .. }) if node == "nope"
        ));
    }

    #[test]
    fn grouping_cycle_rejected() {
        let (raw, mut rst) = rst_fixture();
        rst.grouping_edges = vec![("G1".into(), "G2".into()), ("G2".into(), "G1".into())];
        match build_grouping_graph(&raw, &rst) {
            Err(GraphError::Structure { nodes, reason, .. }) => {
                assert_eq!(reason, "cycle");
                assert_eq!(nodes, vec!["G1".to_string(), "G2".to_string()]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn two_node_symmetric_adjacency() {
        let raw = raw_fixture(1, &[("E0", "I0")]);
        let g = build_scheme_a_graph(&raw).finalize(true).unwrap();
        assert_eq!(g.dense_adjacency(), Tensor::filled(2, 2, 1.0));
    }

    #[test]
    fn edgeless_adjacency_is_identity() {
        let raw = raw_fixture(4, &[]);
        let g = build_scheme_a_graph(&raw).finalize(true).unwrap();
        assert_eq!(g.dense_adjacency(), Tensor::identity(5));
    }

    #[test]
    fn finalize_twice_is_usage_error() {
        let raw = raw_fixture(2, &[]);
        let g = build_scheme_a_graph(&raw).finalize(false).unwrap();
        assert!(matches!(g.finalize(false), Err(GraphError::Usage(_))));
    }

    #[test]
    fn finalize_without_symmetrize_keeps_direction() {
        let raw = raw_fixture(1, &[("E0", "I0")]);
        let g = build_scheme_a_graph(&raw).finalize(false).unwrap();
        let a = g.dense_adjacency();
        assert_eq!(a.get(0, 1), 1.0);
        assert_eq!(a.get(1, 0), 0.0);
    }

    #[test]
    fn edge_list_dump() {
        let raw = raw_fixture(1, &[("E0", "I0")]);
        let g = build_scheme_a_graph(&raw).finalize(false).unwrap();
        assert_eq!(g.to_edge_list(), "E0 I0 relation\nE0 E0 self_loop\nI0 I0 self_loop\n");
    }

    #[test]
    fn scheme_class_indices() {
        assert_eq!(Scheme::A.class_index(NodeKind::Arrowhead), Some(3));
        assert_eq!(Scheme::Grouping.class_index(NodeKind::Arrowhead), None);
        assert_eq!(Scheme::Grouping.class_index(NodeKind::Group), Some(4));
        assert_eq!("b-gc".parse::<Scheme>().unwrap(), Scheme::GroupingConnectivity);
    }
}
