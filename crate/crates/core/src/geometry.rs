//! Element geometry and the 4-d layout feature vector.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("degenerate geometry on node `{node}`: {reason}")]
    Node { node: String, reason: String },
    #[error("image dimensions must be positive, got {0}x{1}")]
    ImageSize(f64, f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Ordered vertex list in pixel coordinates, origin top-left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub vertices: Vec<Point>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point>) -> Self {
        Self { vertices }
    }

    pub fn from_coords(coords: &[(f64, f64)]) -> Self {
        Self::new(coords.iter().map(|&(x, y)| Point::new(x, y)).collect())
    }

    /// Axis-aligned rectangle from two opposite corners, as four vertices.
    pub fn rect(a: Point, b: Point) -> Self {
        let (x0, x1) = (a.x.min(b.x), a.x.max(b.x));
        let (y0, y1) = (a.y.min(b.y), a.y.max(b.y));
        Self::from_coords(&[(x0, y0), (x1, y0), (x1, y1), (x0, y1)])
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// `(min, max)` corners of the bounding box.
    pub fn bounding_box(&self) -> Option<(Point, Point)> {
        let first = *self.vertices.first()?;
        let mut lo = first;
        let mut hi = first;
        for p in &self.vertices[1..] {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        Some((lo, hi))
    }

    pub fn scaled(&self, factor: f64) -> Polygon {
        Polygon::new(
            self.vertices
                .iter()
                .map(|p| Point::new(p.x * factor, p.y * factor))
                .collect(),
        )
    }
}

/// Absolute shoelace area.
pub fn polygon_area(p: &Polygon) -> Result<f64, GeometryError> {
    let v = &p.vertices;
    if v.len() < 3 {
        return Err(GeometryError::Degenerate(format!(
            "polygon has {} vertices, need at least 3",
            v.len()
        )));
    }
    let twice: f64 = (0..v.len())
        .map(|i| {
            let (a, b) = (v[i], v[(i + 1) % v.len()]);
            a.x * b.y - b.x * a.y
        })
        .sum();
    Ok(twice.abs() / 2.0)
}

/// Counter-clockwise (in a y-up frame) convex hull without collinear vertices,
/// via the monotone chain.
pub fn convex_hull(points: &[Point]) -> Result<Polygon, GeometryError> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return Err(GeometryError::Degenerate(format!(
            "{} distinct points cannot span a hull",
            pts.len()
        )));
    }
    let mut lower: Vec<Point> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.len() < 3 {
        return Err(GeometryError::Degenerate("points are collinear".into()));
    }
    Ok(Polygon::new(lower))
}

/// Polygon area over convex hull area.
pub fn solidity(p: &Polygon) -> Result<f64, GeometryError> {
    let area = polygon_area(p)?;
    let hull_area = polygon_area(&convex_hull(&p.vertices)?)?;
    if hull_area <= 0.0 {
        return Err(GeometryError::Degenerate("convex hull has zero area".into()));
    }
    Ok((area / hull_area).min(1.0))
}

/// Position, size and shape of one element relative to its image.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LayoutFeatures {
    pub cx: f64,
    pub cy: f64,
    pub area_ratio: f64,
    pub solidity: f64,
}

impl LayoutFeatures {
    pub const DIM: usize = 4;

    pub fn to_array(self) -> [f64; 4] {
        [self.cx, self.cy, self.area_ratio, self.solidity]
    }
}

/// Features for a node. `None` geometry (groups, image constants) yields the
/// all-zero vector. The centre is the bounding-box centre.
pub fn layout_features(
    node_id: &str,
    geometry: Option<&Polygon>,
    image_w: f64,
    image_h: f64,
) -> Result<LayoutFeatures, GeometryError> {
    if !(image_w > 0.0 && image_h > 0.0) {
        return Err(GeometryError::ImageSize(image_w, image_h));
    }
    let Some(poly) = geometry else {
        return Ok(LayoutFeatures::default());
    };
    let wrap = |e: GeometryError| GeometryError::Node {
        node: node_id.to_string(),
        reason: match e {
            GeometryError::Degenerate(r) => r,
            other => other.to_string(),
        },
    };
    let area = polygon_area(poly).map_err(wrap)?;
    let sol = solidity(poly).map_err(wrap)?;
    let (lo, hi) = poly.bounding_box().expect("area check ensures vertices");
    Ok(LayoutFeatures {
        cx: (lo.x + hi.x) / 2.0 / image_w,
        cy: (lo.y + hi.y) / 2.0 / image_h,
        area_ratio: area / (image_w * image_h),
        solidity: sol,
    })
}
