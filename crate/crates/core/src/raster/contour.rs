//! Moore-neighbour boundary tracing over pixel centers.

use super::{BinaryMask, ImageError};
use crate::geometry::{bbox_of, point_in_polygon, Point, Polygon};
use std::collections::VecDeque;

/// Moore neighbourhood in clockwise screen order, starting west.
const RING: [(i64, i64); 8] = [
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
];

fn ring_index(dx: i64, dy: i64) -> usize {
    RING.iter()
        .position(|&d| d == (dx, dy))
        .expect("offset is a Moore neighbour")
}

/// Largest 4-connected foreground component; ties go to the component whose
/// first pixel comes first in raster order.
pub fn largest_component(mask: &BinaryMask) -> Option<BinaryMask> {
    let (w, h) = (mask.width(), mask.height());
    let mut label = vec![0u32; w * h];
    let mut best: Option<(usize, u32)> = None;
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !mask.get(start % w, start / w) || label[start] != 0 {
            continue;
        }
        next += 1;
        label[start] = next;
        queue.push_back(start);
        let mut size = 0;
        while let Some(i) = queue.pop_front() {
            size += 1;
            let (x, y) = (i % w, i / w);
            let mut visit = |nx: usize, ny: usize| {
                let j = ny * w + nx;
                if mask.get(nx, ny) && label[j] == 0 {
                    label[j] = next;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(x - 1, y);
            }
            if x + 1 < w {
                visit(x + 1, y);
            }
            if y > 0 {
                visit(x, y - 1);
            }
            if y + 1 < h {
                visit(x, y + 1);
            }
        }
        if best.is_none_or(|(s, _)| size > s) {
            best = Some((size, next));
        }
    }
    let (_, keep) = best?;
    let data = label.iter().map(|&l| l == keep).collect();
    Some(BinaryMask::new(w, h, data).expect("same shape"))
}

/// Ordered boundary of the largest 4-connected component, as pixel centers.
///
/// Tracing starts at the component's first pixel in raster order and walks
/// the Moore neighbourhood clockwise on screen; it stops when the first move
/// would repeat. A lone pixel yields a one-vertex polygon.
pub fn trace_mask_contour(mask: &BinaryMask) -> Result<Polygon, ImageError> {
    let component = largest_component(mask).ok_or(ImageError::EmptyMask)?;
    let w = component.width();
    let first = (0..w * component.height())
        .find(|&i| component.get(i % w, i / w))
        .expect("component is non-empty");
    let start = ((first % w) as i64, (first / w) as i64);

    // Find the next boundary pixel clockwise from the backtrack direction.
    let step = |pos: (i64, i64), back: usize| -> Option<((i64, i64), usize)> {
        for k in 1..=8 {
            let d = (back + k) % 8;
            let n = (pos.0 + RING[d].0, pos.1 + RING[d].1);
            if component.get_signed(n.0, n.1) {
                let prev = (back + k - 1) % 8;
                let b = (pos.0 + RING[prev].0, pos.1 + RING[prev].1);
                return Some((n, ring_index(b.0 - n.0, b.1 - n.1)));
            }
        }
        None
    };

    let mut contour = vec![start];
    // The raster-order first pixel always has background to its west.
    let Some((second, mut back)) = step(start, 0) else {
        return Ok(Polygon::new(vec![to_point(start)]).expect("finite"));
    };
    let mut pos = second;
    let limit = 4 * w * component.height() + 8;
    for _ in 0..limit {
        let (next, next_back) = step(pos, back).expect("connected pixel has a neighbour");
        if pos == start && next == second {
            break;
        }
        contour.push(pos);
        pos = next;
        back = next_back;
    }
    Polygon::new(contour.into_iter().map(to_point).collect())
        .map_err(|_| ImageError::EmptyMask)
}

fn to_point((x, y): (i64, i64)) -> Point {
    Point::new(x as f64, y as f64)
}

/// Rasterizes a polygon: a pixel is set when its center is inside or on the
/// boundary. Degenerate polygons set the pixels their vertices and edges pass
/// through exactly.
pub fn fill_polygon(poly: &Polygon, width: usize, height: usize) -> BinaryMask {
    let mut mask = BinaryMask::empty(width, height);
    let b = bbox_of(poly);
    let x0 = b.x0.ceil().max(0.0) as usize;
    let y0 = b.y0.ceil().max(0.0) as usize;
    if b.x1 < 0.0 || b.y1 < 0.0 {
        return mask;
    }
    let x1 = (b.x1.floor() as usize).min(width.saturating_sub(1));
    let y1 = (b.y1.floor() as usize).min(height.saturating_sub(1));
    for y in y0..=y1 {
        for x in x0..=x1 {
            let p = Point::new(x as f64, y as f64);
            let inside = if poly.len() >= 3 {
                point_in_polygon(&p, poly).expect("checked vertex count")
            } else {
                poly.boundary_distance(&p) <= crate::geometry::BOUNDARY_EPS
            };
            if inside {
                mask.set(x, y, true);
            }
        }
    }
    mask
}
