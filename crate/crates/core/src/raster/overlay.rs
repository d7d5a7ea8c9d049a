use super::io::{encode_png, write_atomic};
use super::{GrayImage, ImageError};
use crate::geometry::{BBox, Point, Polygon};
use std::path::Path;

pub const CONTOUR_COLOR: [u8; 3] = [0, 255, 0];
pub const DOT_COLOR: [u8; 3] = [255, 0, 0];
pub const BOX_COLOR: [u8; 3] = [255, 255, 0];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn from_gray(img: &GrayImage) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            data: img.data().iter().flat_map(|&v| [v, v, v]).collect(),
        }
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    fn put(&mut self, x: i64, y: i64, c: [u8; 3]) {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            return;
        }
        let i = 3 * (y as usize * self.width + x as usize);
        self.data[i..i + 3].copy_from_slice(&c);
    }

    fn line(&mut self, a: &Point, b: &Point, c: [u8; 3]) {
        let (mut x0, mut y0) = (a.x.round() as i64, a.y.round() as i64);
        let (x1, y1) = (b.x.round() as i64, b.y.round() as i64);
        let dx = (x1 - x0).abs();
        let dy = -(y1 - y0).abs();
        let sx = if x0 < x1 { 1 } else { -1 };
        let sy = if y0 < y1 { 1 } else { -1 };
        let mut err = dx + dy;
        loop {
            self.put(x0, y0, c);
            if x0 == x1 && y0 == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x0 += sx;
            }
            if e2 <= dx {
                err += dx;
                y0 += sy;
            }
        }
    }
}

/// What to burn into an overlay: contours, annotation dots and patch boxes.
#[derive(Debug, Clone, Default)]
pub struct Overlay {
    pub polygons: Vec<Polygon>,
    pub points: Vec<Point>,
    pub boxes: Vec<BBox>,
    pub dot_radius: f64,
}

/// Boxes first, then contours, then dots on top.
pub fn render_overlay(img: &GrayImage, overlay: &Overlay) -> RgbImage {
    let mut out = RgbImage::from_gray(img);
    for b in &overlay.boxes {
        let (x0, y0) = (b.x0.round() as i64, b.y0.round() as i64);
        let (x1, y1) = (b.x1.round() as i64, b.y1.round() as i64);
        for x in x0..=x1 {
            out.put(x, y0, BOX_COLOR);
            out.put(x, y1, BOX_COLOR);
        }
        for y in y0..=y1 {
            out.put(x0, y, BOX_COLOR);
            out.put(x1, y, BOX_COLOR);
        }
    }
    for poly in &overlay.polygons {
        let vs = poly.vertices();
        for i in 0..vs.len() {
            out.line(&vs[i], &vs[(i + 1) % vs.len()], CONTOUR_COLOR);
        }
    }
    let r = overlay.dot_radius.max(0.0);
    let reach = r.ceil() as i64;
    for p in &overlay.points {
        let (cx, cy) = (p.x.round() as i64, p.y.round() as i64);
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                if ((dx * dx + dy * dy) as f64) <= r * r {
                    out.put(cx + dx, cy + dy, DOT_COLOR);
                }
            }
        }
    }
    out
}

pub fn save_overlay(rgb: &RgbImage, path: impl AsRef<Path>) -> Result<(), ImageError> {
    let path = path.as_ref();
    let bytes = encode_png(&rgb.data, rgb.width, rgb.height, png::ColorType::Rgb, path)?;
    write_atomic(path, &bytes)
}
