//! Planar primitives in pixel coordinates.
//!
//! The frame is the raster one: origin at the top-left pixel center, +X to
//! the right, +Y downward. Every function here is pure.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Distance under which a point is treated as lying on a polygon edge.
pub const BOUNDARY_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Self::new(self.x + dx, self.y + dy)
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Closed axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BBox {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self, GeometryError> {
        if ![x0, y0, x1, y1].iter().all(|v| v.is_finite()) {
            return Err(GeometryError::InvalidGeometry(format!(
                "non-finite box ({x0}, {y0}, {x1}, {y1})"
            )));
        }
        if x0 > x1 || y0 > y1 {
            return Err(GeometryError::InvalidGeometry(format!(
                "inverted box ({x0}, {y0}, {x1}, {y1})"
            )));
        }
        Ok(Self { x0, y0, x1, y1 })
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }

    /// True when `other` lies entirely within `self`.
    pub fn contains_box(&self, other: &BBox) -> bool {
        other.x0 >= self.x0 && other.x1 <= self.x1 && other.y0 >= self.y0 && other.y1 <= self.y1
    }

    /// Intersection with another box, `None` when they are disjoint.
    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        if !bbox_intersects(self, other) {
            return None;
        }
        Some(BBox {
            x0: self.x0.max(other.x0),
            y0: self.y0.max(other.y0),
            x1: self.x1.min(other.x1),
            y1: self.y1.min(other.y1),
        })
    }
}

/// Simple closed polygon; the closing edge from the last vertex back to the
/// first is implicit.
///
/// Construction drops consecutive duplicate vertices and normalizes the
/// winding so the vertices run counter-clockwise as drawn on screen (+Y down),
/// which makes the shoelace sum [`Polygon::signed_area`] non-positive. Fewer
/// than three vertices are accepted so that degenerate contours (a lone pixel,
/// a one-pixel-wide line) can still be carried around and boxed; area and
/// containment queries reject them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point>) -> Result<Self, GeometryError> {
        if let Some(bad) = vertices.iter().find(|p| !p.is_finite()) {
            return Err(GeometryError::InvalidGeometry(format!(
                "non-finite vertex ({}, {})",
                bad.x, bad.y
            )));
        }
        let mut vertices = dedup_closed(vertices);
        if vertices.is_empty() {
            return Err(GeometryError::InvalidGeometry("polygon has no vertices".into()));
        }
        if shoelace(&vertices) > 0.0 {
            vertices.reverse();
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Shoelace sum `½ Σ (x_i·y_{i+1} − x_{i+1}·y_i)`; never positive after
    /// construction.
    pub fn signed_area(&self) -> f64 {
        shoelace(&self.vertices)
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    /// Mean of the vertices.
    pub fn vertex_centroid(&self) -> Point {
        let n = self.vertices.len() as f64;
        let (sx, sy) = self
            .vertices
            .iter()
            .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
        Point::new(sx / n, sy / n)
    }

    /// Directed edges `(v_i, v_{i+1})`, including the closing edge.
    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Euclidean distance from `p` to the nearest point of the boundary.
    pub fn boundary_distance(&self, p: &Point) -> f64 {
        if self.vertices.len() == 1 {
            return p.distance(&self.vertices[0]);
        }
        self.edges()
            .map(|(a, b)| segment_distance(p, &a, &b))
            .fold(f64::INFINITY, f64::min)
    }

    fn require_area(&self) -> Result<(), GeometryError> {
        if self.vertices.len() < 3 {
            return Err(GeometryError::InvalidGeometry(format!(
                "polygon has {} vertices, at least 3 required",
                self.vertices.len()
            )));
        }
        Ok(())
    }
}

fn dedup_closed(mut vertices: Vec<Point>) -> Vec<Point> {
    vertices.dedup();
    while vertices.len() > 1 && vertices.first() == vertices.last() {
        vertices.pop();
    }
    vertices
}

fn shoelace(vertices: &[Point]) -> f64 {
    let n = vertices.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        acc += a.x * b.y - b.x * a.y;
    }
    acc / 2.0
}

fn segment_distance(p: &Point, a: &Point, b: &Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.distance(&Point::new(a.x + t * dx, a.y + t * dy))
}

/// Inside-or-on-boundary test.
///
/// Points within [`BOUNDARY_EPS`] of an edge count as inside. Everything else
/// is decided by the nonzero winding rule, so the self-overlapping outlines
/// produced by [`expand_contour`] on non-convex input still cover everything
/// they sweep.
pub fn point_in_polygon(p: &Point, poly: &Polygon) -> Result<bool, GeometryError> {
    poly.require_area()?;
    if poly.boundary_distance(p) <= BOUNDARY_EPS {
        return Ok(true);
    }
    let mut winding = 0i32;
    for (a, b) in poly.edges() {
        let cross = (b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y);
        if a.y <= p.y {
            if b.y > p.y && cross > 0.0 {
                winding += 1;
            }
        } else if b.y <= p.y && cross < 0.0 {
            winding -= 1;
        }
    }
    Ok(winding != 0)
}

/// Smallest axis-aligned box containing every vertex.
pub fn bbox_of(poly: &Polygon) -> BBox {
    let first = poly.vertices[0];
    poly.vertices.iter().skip(1).fold(
        BBox {
            x0: first.x,
            y0: first.y,
            x1: first.x,
            y1: first.y,
        },
        |b, p| BBox {
            x0: b.x0.min(p.x),
            y0: b.y0.min(p.y),
            x1: b.x1.max(p.x),
            y1: b.y1.max(p.y),
        },
    )
}

/// Closed-set intersection test; touching edges count.
pub fn bbox_intersects(a: &BBox, b: &BBox) -> bool {
    a.x0 <= b.x1 && b.x0 <= a.x1 && a.y0 <= b.y1 && b.y0 <= a.y1
}

/// Square box of side `2·half_extent` centered on `p`. No clamping.
pub fn point_to_box(p: &Point, half_extent: f64) -> Result<BBox, GeometryError> {
    if !(half_extent > 0.0) || !half_extent.is_finite() {
        return Err(GeometryError::InvalidArgument(format!(
            "half_extent must be positive, got {half_extent}"
        )));
    }
    BBox::new(
        p.x - half_extent,
        p.y - half_extent,
        p.x + half_extent,
        p.y + half_extent,
    )
}

/// Directional contour growth: pushes the left-facing side of the outline by
/// `dx_minus_x` toward −X, then the downward-facing side by `dy_plus_y`
/// toward +Y.
///
/// Each step translates the vertices of the edges facing the push direction
/// and keeps the opposite side in place; where a moved run meets a fixed run
/// the vertex is emitted twice (fixed and moved) so the outline stays closed
/// and the swept band is included. Under the nonzero winding rule the result
/// covers the input swept over the rectangle `[−dx, 0] × [0, dy]`, so it
/// always contains the input and grows monotonically with both displacements.
/// For convex input the extreme vertices move by exactly the displacement, so
/// the bounding box widens by `dx_minus_x` and deepens by `dy_plus_y`.
pub fn expand_contour(
    poly: &Polygon,
    dx_minus_x: f64,
    dy_plus_y: f64,
) -> Result<Polygon, GeometryError> {
    for (name, v) in [("dx_minus_x", dx_minus_x), ("dy_plus_y", dy_plus_y)] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(GeometryError::InvalidArgument(format!(
                "{name} must be a finite non-negative displacement, got {v}"
            )));
        }
    }
    if dx_minus_x == 0.0 && dy_plus_y == 0.0 {
        return Ok(poly.clone());
    }
    if poly.len() == 1 {
        let p = poly.vertices[0];
        return Polygon::new(vec![
            p,
            p.translate(-dx_minus_x, 0.0),
            p.translate(-dx_minus_x, dy_plus_y),
            p.translate(0.0, dy_plus_y),
        ]);
    }
    let mut outline = poly.vertices.clone();
    if dx_minus_x > 0.0 {
        // Screen-counter-clockwise outlines face left along downward edges.
        outline = sweep(&outline, |a, b| b.y > a.y, (-dx_minus_x, 0.0));
    }
    if dy_plus_y > 0.0 {
        // ... and face down along rightward edges.
        outline = sweep(&outline, |a, b| b.x > a.x, (0.0, dy_plus_y));
    }
    Polygon::new(outline)
}

fn sweep(
    outline: &[Point],
    faces: impl Fn(&Point, &Point) -> bool,
    (dx, dy): (f64, f64),
) -> Vec<Point> {
    let n = outline.len();
    let facing: Vec<bool> = (0..n)
        .map(|i| faces(&outline[i], &outline[(i + 1) % n]))
        .collect();
    let mut out = Vec::with_capacity(n * 2);
    for i in 0..n {
        let v = outline[i];
        let moved = v.translate(dx, dy);
        let incoming = facing[(i + n - 1) % n];
        let outgoing = facing[i];
        match (incoming, outgoing) {
            (true, true) => out.push(moved),
            (false, false) => out.push(v),
            (true, false) => {
                out.push(moved);
                out.push(v);
            }
            (false, true) => {
                out.push(v);
                out.push(moved);
            }
        }
    }
    out
}

/// Proper or touching intersection between segments `ab` and `cd`.
pub fn segments_intersect(a: &Point, b: &Point, c: &Point, d: &Point) -> bool {
    fn orient(p: &Point, q: &Point, r: &Point) -> f64 {
        (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x)
    }
    fn on_segment(p: &Point, q: &Point, r: &Point) -> bool {
        r.x >= p.x.min(q.x) && r.x <= p.x.max(q.x) && r.y >= p.y.min(q.y) && r.y <= p.y.max(q.y)
    }
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

/// True when the polygon region (nonzero rule) and the closed box share a point.
pub fn polygon_intersects_box(poly: &Polygon, b: &BBox) -> Result<bool, GeometryError> {
    poly.require_area()?;
    if poly.vertices.iter().any(|p| b.contains(p)) {
        return Ok(true);
    }
    let corners = [
        Point::new(b.x0, b.y0),
        Point::new(b.x1, b.y0),
        Point::new(b.x1, b.y1),
        Point::new(b.x0, b.y1),
    ];
    for c in &corners {
        if point_in_polygon(c, poly)? {
            return Ok(true);
        }
    }
    for (a, e) in poly.edges() {
        for k in 0..4 {
            if segments_intersect(&a, &e, &corners[k], &corners[(k + 1) % 4]) {
                return Ok(true);
            }
        }
    }
    Ok(false)
}
