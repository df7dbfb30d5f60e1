//! Seeded generator of annotated diagrams with type-dependent structure.
//!
//! * `cycle`: units (a graphic with its label) placed on a ring, each linked
//!   to the next by an arrow; connectivity forms one directed ring.
//! * `network`: units at random positions joined by a random spanning tree
//!   plus extra arrows; about half the units are labelled.
//! * `illustration`: one large graphic surrounded by labels; no arrows and no
//!   connectivity.
//! * `cross-section`: one large graphic whose labels point into it through
//!   headless arrows.
//!
//! Element kinds differ in size and shape: labels are small rectangles,
//! arrowheads tiny squares, arrows thin concave outlines, graphics large
//! concave blobs.

use std::f64::consts::TAU;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::canonical::CanonicalDocument;
use super::index::{CorpusEntry, CorpusIndex, EntrySource};
use super::{Diagram, Element, IngestError, Labels, RawAnnotation, Relation, RstAnnotation};
use crate::geometry::{Point, Polygon};
use crate::graph::NodeKind;
use crate::parallel::derive_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagramType {
    Cycle,
    Network,
    Illustration,
    CrossSection,
}

impl DiagramType {
    pub const ALL: [DiagramType; 4] = [
        DiagramType::Cycle,
        DiagramType::Network,
        DiagramType::Illustration,
        DiagramType::CrossSection,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DiagramType::Cycle => "cycle",
            DiagramType::Network => "network",
            DiagramType::Illustration => "illustration",
            DiagramType::CrossSection => "cross-section",
        }
    }

    fn topics(self) -> [&'static str; 2] {
        match self {
            DiagramType::Cycle => ["lifeCycles", "waterCNPCycle"],
            DiagramType::Network => ["foodChainsWebs", "circuits"],
            DiagramType::Illustration => ["partsOfA", "typesOf"],
            DiagramType::CrossSection => ["volcano", "partsOfTheEarth"],
        }
    }

    fn coarse(self) -> &'static str {
        match self {
            DiagramType::Cycle | DiagramType::Network => "network",
            DiagramType::Illustration => "illustration",
            DiagramType::CrossSection => "diagrammatic",
        }
    }
}

impl fmt::Display for DiagramType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DiagramType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DiagramType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown diagram type `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_diagrams: usize,
    /// Relative weight of each diagram type.
    pub type_mix: Vec<(DiagramType, f64)>,
    /// Inclusive range for the number of units (ring stages, network nodes,
    /// labels) per diagram.
    pub min_units: usize,
    pub max_units: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_diagrams: 200,
            type_mix: DiagramType::ALL.iter().map(|&t| (t, 1.0)).collect(),
            min_units: 3,
            max_units: 7,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), IngestError> {
        let fail = |m: &str| Err(IngestError::Spec(m.to_string()));
        if self.n_diagrams == 0 {
            return fail("n_diagrams must be at least 1");
        }
        if self.min_units > self.max_units {
            return fail("element range is empty");
        }
        if self.min_units < 2 {
            return fail("diagrams need at least 2 units");
        }
        if self.type_mix.iter().any(|(_, w)| !(w.is_finite() && *w >= 0.0))
            || self.type_mix.iter().map(|(_, w)| w).sum::<f64>() <= 0.0
        {
            return fail("type mix needs a positive total weight");
        }
        Ok(())
    }

    fn sample_type(&self, rng: &mut ChaCha8Rng) -> DiagramType {
        let total: f64 = self.type_mix.iter().map(|(_, w)| w).sum();
        let mut u = rng.gen::<f64>() * total;
        for &(t, w) in &self.type_mix {
            if u < w {
                return t;
            }
            u -= w;
        }
        self.type_mix.iter().rev().find(|(_, w)| *w > 0.0).unwrap().0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCorpus {
    diagrams: Vec<Diagram>,
    types: Vec<DiagramType>,
    index: CorpusIndex,
}

impl SyntheticCorpus {
    pub fn diagrams(&self) -> &[Diagram] {
        &self.diagrams
    }

    pub fn into_diagrams(self) -> Vec<Diagram> {
        self.diagrams
    }

    pub fn types(&self) -> &[DiagramType] {
        &self.types
    }

    pub fn raw_annotations(&self) -> Vec<&RawAnnotation> {
        self.diagrams.iter().map(|d| &d.raw).collect()
    }

    pub fn rst_annotations(&self) -> Vec<&RstAnnotation> {
        self.diagrams.iter().filter_map(|d| d.rst.as_ref()).collect()
    }

    pub fn index(&self) -> &CorpusIndex {
        &self.index
    }

    pub fn documents(&self) -> Vec<CanonicalDocument> {
        self.diagrams.iter().map(CanonicalDocument::from_diagram).collect()
    }

    /// Writes one canonical document per diagram as `<id>.json`.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>, IngestError> {
        std::fs::create_dir_all(dir).map_err(|e| IngestError::io(dir, e))?;
        let mut paths = Vec::new();
        for doc in self.documents() {
            let path = dir.join(format!("{}.json", doc.id));
            std::fs::write(&path, doc.to_json()).map_err(|e| IngestError::io(&path, e))?;
            paths.push(path);
        }
        Ok(paths)
    }
}

pub fn generate_synthetic_corpus(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticCorpus, IngestError> {
    spec.validate()?;
    let mut diagrams = Vec::with_capacity(spec.n_diagrams);
    let mut types = Vec::with_capacity(spec.n_diagrams);
    for i in 0..spec.n_diagrams {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0, i as u64));
        let ty = spec.sample_type(&mut rng);
        let units = rng.gen_range(spec.min_units..=spec.max_units);
        let id = format!("syn{i:04}");
        diagrams.push(Builder::new(&id, rng).build(ty, units));
        types.push(ty);
    }
    let entries = diagrams
        .iter()
        .map(|d: &Diagram| CorpusEntry {
            diagram_id: d.id().to_string(),
            ai2d_label: d.labels.ai2d.clone().unwrap_or_default(),
            rst_fine_label: d.labels.rst_fine.clone(),
            rst_coarse_label: d.labels.rst_coarse.clone(),
            source: EntrySource::InMemory,
        })
        .collect();
    Ok(SyntheticCorpus {
        diagrams,
        types,
        index: CorpusIndex::from_entries(entries),
    })
}

const ROOT: &str = "I0";

struct Builder {
    rng: ChaCha8Rng,
    id: String,
    w: f64,
    h: f64,
    elements: Vec<Element>,
    relations: Vec<Relation>,
    groups: Vec<String>,
    grouping: Vec<(String, String)>,
    connectivity: Vec<(String, String, String)>,
    counts: [usize; 4],
}

impl Builder {
    fn new(id: &str, mut rng: ChaCha8Rng) -> Self {
        let w = rng.gen_range(500..=900) as f64;
        let h = rng.gen_range(400..=700) as f64;
        Self {
            rng,
            id: id.to_string(),
            w,
            h,
            elements: Vec::new(),
            relations: Vec::new(),
            groups: Vec::new(),
            grouping: Vec::new(),
            connectivity: Vec::new(),
            counts: [0; 4],
        }
    }

    fn clamp(&self, p: Point) -> Point {
        Point::new(p.x.clamp(1.0, self.w - 1.0), p.y.clamp(1.0, self.h - 1.0))
    }

    fn add(&mut self, kind: NodeKind, polygon: Polygon, text: Option<String>) -> String {
        let (slot, prefix) = match kind {
            NodeKind::Text => (0, "T"),
            NodeKind::Graphic => (1, "B"),
            NodeKind::Arrow => (2, "A"),
            _ => (3, "H"),
        };
        let id = format!("{prefix}{}", self.counts[slot]);
        self.counts[slot] += 1;
        let vertices = polygon.vertices.into_iter().map(|p| self.clamp(p)).collect();
        self.elements.push(Element {
            id: id.clone(),
            kind,
            polygon: Some(Polygon::new(vertices)),
            text,
        });
        id
    }

    fn relate(&mut self, category: &str, participants: &[&str]) {
        self.relations.push(Relation {
            id: format!("R{}", self.relations.len()),
            category: category.to_string(),
            participants: participants.iter().map(|s| s.to_string()).collect(),
        });
    }

    fn attach(&mut self, parent: &str, child: &str) {
        self.grouping.push((parent.to_string(), child.to_string()));
    }

    fn group(&mut self, children: &[&str]) -> String {
        let g = format!("G{}", self.groups.len());
        self.groups.push(g.clone());
        self.attach(ROOT, &g);
        for c in children {
            self.attach(&g, c);
        }
        g
    }

    fn connect(&mut self, src: &str, dst: &str, category: &str) {
        self.connectivity
            .push((src.to_string(), dst.to_string(), category.to_string()));
    }

    fn text_box(&mut self, c: Point) -> String {
        let hw = self.rng.gen_range(20.0..55.0);
        let hh = self.rng.gen_range(7.0..13.0);
        let c = Point::new(c.x.clamp(hw + 2.0, self.w - hw - 2.0), c.y.clamp(hh + 2.0, self.h - hh - 2.0));
        let word = format!("label{}", self.counts[0]);
        self.add(
            NodeKind::Text,
            Polygon::rect(Point::new(c.x - hw, c.y - hh), Point::new(c.x + hw, c.y + hh)),
            Some(word),
        )
    }

    /// Star-like blob: alternating outer and inner radii make it concave.
    fn blob(&mut self, c: Point, r: f64) -> String {
        let n = 2 * self.rng.gen_range(4..=6);
        let phase = self.rng.gen_range(0.0..TAU);
        let vertices = (0..n)
            .map(|k| {
                let a = phase + TAU * k as f64 / n as f64;
                let rr = if k % 2 == 0 {
                    r * self.rng.gen_range(0.85..1.0)
                } else {
                    r * self.rng.gen_range(0.55..0.75)
                };
                Point::new(c.x + rr * a.cos(), c.y + rr * a.sin())
            })
            .collect();
        self.add(NodeKind::Graphic, Polygon::new(vertices), None)
    }

    /// Arrow outline from `p` to `q`: a thin shaft and a wider triangular tip.
    fn arrow(&mut self, p: Point, q: Point) -> String {
        let (dx, dy) = (q.x - p.x, q.y - p.y);
        let len = (dx * dx + dy * dy).sqrt().max(1e-9);
        let (ux, uy) = (dx / len, dy / len);
        let (nx, ny) = (-uy, ux);
        let shaft = self.rng.gen_range(1.5..3.0);
        let tip_w = self.rng.gen_range(6.0..9.0);
        let tip_l = (len * 0.35).min(self.rng.gen_range(10.0..16.0));
        let b = Point::new(q.x - ux * tip_l, q.y - uy * tip_l);
        let off = |o: Point, s: f64| Point::new(o.x + nx * s, o.y + ny * s);
        let vertices = vec![
            off(p, shaft),
            off(b, shaft),
            off(b, tip_w),
            q,
            off(b, -tip_w),
            off(b, -shaft),
            off(p, -shaft),
        ];
        self.add(NodeKind::Arrow, Polygon::new(vertices), None)
    }

    fn arrowhead(&mut self, q: Point) -> String {
        let s = self.rng.gen_range(4.0..6.0);
        self.add(
            NodeKind::Arrowhead,
            Polygon::rect(Point::new(q.x - s, q.y - s), Point::new(q.x + s, q.y + s)),
            None,
        )
    }

    /// Arrow with a separate head, shortened by `gap` at both ends.
    fn link(&mut self, from: Point, to: Point, gap: f64) -> (String, String) {
        let (dx, dy) = (to.x - from.x, to.y - from.y);
        let len = (dx * dx + dy * dy).sqrt().max(1e-9);
        let (ux, uy) = (dx / len, dy / len);
        let gap = gap.min((len - 30.0).max(0.0) / 2.0);
        let p = Point::new(from.x + ux * gap, from.y + uy * gap);
        let q = Point::new(to.x - ux * gap, to.y - uy * gap);
        (self.arrow(p, q), self.arrowhead(q))
    }

    fn title(&mut self) {
        let c = Point::new(self.w / 2.0 + self.rng.gen_range(-60.0..60.0), 18.0);
        let t = self.text_box(c);
        self.relate("imageTitle", &[&t, ROOT]);
        self.attach(ROOT, &t);
    }

    fn build(mut self, ty: DiagramType, units: usize) -> Diagram {
        if self.rng.gen_bool(0.7) {
            self.title();
        }
        match ty {
            DiagramType::Cycle => self.cycle(units),
            DiagramType::Network => self.network(units),
            DiagramType::Illustration => self.illustration(units),
            DiagramType::CrossSection => self.cross_section(units),
        }
        if self.rng.gen_bool(0.3) {
            let c = Point::new(self.rng.gen_range(40.0..self.w - 40.0), self.h - 16.0);
            let t = self.text_box(c);
            self.attach(ROOT, &t);
        }
        self.elements.push(Element {
            id: ROOT.to_string(),
            kind: NodeKind::ImageConst,
            polygon: None,
            text: None,
        });
        let topic = ty.topics()[self.rng.gen_range(0..2)];
        let raw = RawAnnotation {
            diagram_id: self.id.clone(),
            image_width: self.w,
            image_height: self.h,
            elements: self.elements,
            relations: self.relations,
        };
        let rst = RstAnnotation {
            diagram_id: self.id,
            group_node_ids: self.groups,
            grouping_edges: self.grouping,
            connectivity_edges: self.connectivity,
            diagram_types: vec![ty.as_str().to_string()],
            coarse_type: Some(ty.coarse().to_string()),
        };
        debug_assert!(raw.validate().is_ok() && rst.validate(&raw).is_ok());
        Diagram {
            raw,
            rst: Some(rst),
            labels: Labels {
                ai2d: Some(topic.to_string()),
                rst_fine: Some(ty.as_str().to_string()),
                rst_coarse: Some(ty.coarse().to_string()),
            },
        }
    }

    fn unit(&mut self, c: Point, r: f64, labelled: bool) -> (String, String) {
        let b = self.blob(c, r);
        if !labelled {
            self.attach(ROOT, &b);
            return (b.clone(), b);
        }
        let t = self.text_box(Point::new(c.x, c.y + r + 14.0));
        self.relate("intraObjectLabel", &[&t, &b]);
        let g = self.group(&[&b, &t]);
        (b, g)
    }

    fn cycle(&mut self, k: usize) {
        let centre = Point::new(self.w / 2.0, self.h / 2.0 + 10.0);
        let ring = 0.32 * self.w.min(self.h);
        let phase = self.rng.gen_range(0.0..TAU);
        let mut pos = Vec::new();
        let mut units = Vec::new();
        for i in 0..k {
            let a = phase + TAU * i as f64 / k as f64;
            let c = Point::new(centre.x + ring * a.cos(), centre.y + ring * a.sin());
            let r = self.rng.gen_range(22.0..34.0);
            units.push(self.unit(c, r, true));
            pos.push((c, r));
        }
        for i in 0..k {
            let j = (i + 1) % k;
            let (arrow, head) = self.link(pos[i].0, pos[j].0, pos[i].1.max(pos[j].1) + 6.0);
            self.relate("interObjectLinkage", &[&units[i].0, &arrow, &units[j].0]);
            self.relate("arrowHeadTail", &[&head, &arrow]);
            self.attach(ROOT, &arrow);
            let (src, dst) = (units[i].1.clone(), units[j].1.clone());
            self.connect(&src, &dst, "directional");
        }
    }

    fn network(&mut self, k: usize) {
        let cols = (k as f64).sqrt().ceil() as usize;
        let rows = k.div_ceil(cols);
        let mut cells: Vec<usize> = (0..cols * (rows + 1)).collect();
        cells.shuffle(&mut self.rng);
        let (cw, ch) = ((self.w - 80.0) / cols as f64, (self.h - 100.0) / (rows + 1) as f64);
        let mut pos = Vec::new();
        let mut units = Vec::new();
        for &cell in cells.iter().take(k) {
            let (cx, cy) = ((cell % cols) as f64, (cell / cols) as f64);
            let c = Point::new(
                40.0 + cw * (cx + self.rng.gen_range(0.3..0.7)),
                50.0 + ch * (cy + self.rng.gen_range(0.3..0.7)),
            );
            let r = self.rng.gen_range(18.0..28.0);
            let labelled = self.rng.gen_bool(0.5);
            units.push(self.unit(c, r, labelled));
            pos.push((c, r));
        }
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for i in 1..k {
            let j = self.rng.gen_range(0..i);
            edges.push(if self.rng.gen_bool(0.5) { (i, j) } else { (j, i) });
        }
        let extra = k / 2 + self.rng.gen_range(0..=k / 2);
        for _ in 0..extra * 4 {
            if edges.len() >= k - 1 + extra {
                break;
            }
            let (a, b) = (self.rng.gen_range(0..k), self.rng.gen_range(0..k));
            if a != b && !edges.iter().any(|&(s, t)| (s, t) == (a, b) || (s, t) == (b, a)) {
                edges.push((a, b));
            }
        }
        for (s, t) in edges {
            let (arrow, head) = self.link(pos[s].0, pos[t].0, pos[s].1.max(pos[t].1) + 6.0);
            self.relate("interObjectLinkage", &[&units[s].0, &arrow, &units[t].0]);
            self.relate("arrowHeadTail", &[&head, &arrow]);
            self.attach(ROOT, &arrow);
            let category = if self.rng.gen_bool(0.2) { "bidirectional" } else { "directional" };
            let (src, dst) = (units[s].1.clone(), units[t].1.clone());
            self.connect(&src, &dst, category);
        }
    }

    fn illustration(&mut self, k: usize) {
        let centre = Point::new(self.w / 2.0, self.h / 2.0 + 15.0);
        let r = 0.28 * self.w.min(self.h);
        let b = self.blob(centre, r);
        let mut members = vec![b.clone()];
        let phase = self.rng.gen_range(0.0..TAU);
        for i in 0..k {
            let a = phase + TAU * i as f64 / k as f64;
            let d = r + self.rng.gen_range(35.0..60.0);
            let t = self.text_box(Point::new(centre.x + d * a.cos(), centre.y + d * a.sin()));
            self.relate("intraObjectLabel", &[&t, &b]);
            members.push(t);
        }
        let refs: Vec<&str> = members.iter().map(String::as_str).collect();
        self.group(&refs);
    }

    fn cross_section(&mut self, k: usize) {
        let centre = Point::new(self.w / 2.0, self.h / 2.0 + 15.0);
        let r = 0.3 * self.w.min(self.h);
        let b = self.blob(centre, r);
        self.attach(ROOT, &b);
        for i in 0..k {
            let left = i % 2 == 0;
            let y = 70.0 + (self.h - 120.0) * ((i / 2) as f64 + 0.5) / k.div_ceil(2) as f64;
            let x = if left { 70.0 } else { self.w - 70.0 };
            let t = self.text_box(Point::new(x, y));
            let target = Point::new(
                centre.x + self.rng.gen_range(-0.3..0.3) * r,
                centre.y + self.rng.gen_range(-0.3..0.3) * r,
            );
            let start = Point::new(if left { x + 60.0 } else { x - 60.0 }, y);
            let a = self.arrow(start, target);
            self.relate("intraObjectLabel", &[&t, &a, &b]);
            let g = self.group(&[&t, &a]);
            self.connect(&g, &b, "undirectional");
        }
    }
}
