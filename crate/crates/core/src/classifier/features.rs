use crate::raster::{equalize_histogram, resize_bilinear, BinaryMask, GrayImage};
use std::sync::OnceLock;

pub const INPUT_SIZE: usize = 224;
pub const GRID: usize = 16;
pub const EDGE_BINS: usize = 16;
pub const BORDER_SEGMENTS: usize = 4;
pub const BORDER_DEPTH: usize = 28;
pub const FEATURE_LEN: usize = GRID * GRID + EDGE_BINS + 4 * BORDER_SEGMENTS;

/// Largest central-difference gradient magnitude on 8-bit input.
pub const MAX_GRADIENT: f64 = 180.312_229_202_232_6; // 127.5·√2

/// Fixed-length descriptor of a patch: block means, an edge-strength
/// histogram and border-strip means.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
    pub fn blocks(&self) -> &[f64] {
        &self.0[..GRID * GRID]
    }
    pub fn edge_histogram(&self) -> &[f64] {
        &self.0[GRID * GRID..GRID * GRID + EDGE_BINS]
    }
    pub fn border(&self) -> &[f64] {
        &self.0[GRID * GRID + EDGE_BINS..]
    }
}

/// Magnitude and bin for every possible squared difference sum, where the
/// gradient is half the raw neighbor difference along each axis.
fn magnitude_table() -> &'static [(f64, u8)] {
    static TABLE: OnceLock<Vec<(f64, u8)>> = OnceLock::new();
    TABLE.get_or_init(|| {
        (0..=2 * 255 * 255)
            .map(|s: u32| {
                let m = (s as f64).sqrt() / 2.0;
                let bin = ((m / MAX_GRADIENT * EDGE_BINS as f64) as usize).min(EDGE_BINS - 1);
                (m, bin as u8)
            })
            .collect()
    })
}

fn mean_of(sum: u64, count: u64) -> f64 {
    if count == 0 {
        0.0
    } else {
        sum as f64 / count as f64 / 255.0
    }
}

/// Resizes to the classifier input size unless already there.
pub fn to_input(img: &GrayImage) -> GrayImage {
    resize_bilinear(img, INPUT_SIZE, INPUT_SIZE)
}

pub fn extract_features(patch: &GrayImage) -> FeatureVector {
    let img = to_input(patch);
    features_of_input(&img)
}

/// Features of an image that is already `INPUT_SIZE` square. The image is
/// histogram-equalized first so exposure differences between scans do not
/// dominate; equalization is close to idempotent, so already-equalized
/// inputs are barely affected.
pub fn features_of_input(img: &GrayImage) -> FeatureVector {
    features_of_covered(img, None)
}

/// As [`features_of_input`], but pixels outside `coverage` (rotation fill)
/// are left out of every statistic. A block or strip with no covered pixel
/// reads as 0.
pub fn features_of_covered(img: &GrayImage, coverage: Option<&BinaryMask>) -> FeatureVector {
    debug_assert_eq!((img.width(), img.height()), (INPUT_SIZE, INPUT_SIZE));
    let n = INPUT_SIZE;
    let img = equalize_histogram(img);
    let valid = |x: usize, y: usize| coverage.is_none_or(|m| m.get(x, y));
    let px = img.data();
    let mut out = Vec::with_capacity(FEATURE_LEN);

    let cell = n / GRID;
    let mut sums = [0u32; GRID * GRID];
    let mut counts = [0u32; GRID * GRID];
    for y in 0..n {
        let row = &px[y * n..(y + 1) * n];
        let base = (y / cell) * GRID;
        for (x, &v) in row.iter().enumerate() {
            if valid(x, y) {
                sums[base + x / cell] += v as u32;
                counts[base + x / cell] += 1;
            }
        }
    }
    out.extend(sums.iter().zip(&counts).map(|(&s, &c)| mean_of(s as u64, c as u64)));

    // each interior pixel adds its gradient magnitude to its magnitude bin
    let table = magnitude_table();
    let mut hist = [0.0f64; EDGE_BINS];
    for y in 1..n - 1 {
        let up = &px[(y - 1) * n..y * n];
        let mid = &px[y * n..(y + 1) * n];
        let down = &px[(y + 1) * n..(y + 2) * n];
        for (i, ((w, &u), &d)) in mid.windows(3).zip(&up[1..n - 1]).zip(&down[1..n - 1]).enumerate() {
            let x = i + 1;
            if coverage.is_some() && !(valid(x - 1, y) && valid(x + 1, y) && valid(x, y - 1) && valid(x, y + 1)) {
                continue;
            }
            let (l, r) = (w[0], w[2]);
            let dx = r as i32 - l as i32;
            let dy = d as i32 - u as i32;
            let (m, bin) = table[(dx * dx + dy * dy) as usize];
            hist[bin as usize] += m;
        }
    }
    let total: f64 = hist.iter().sum();
    if total > 0.0 {
        out.extend(hist.iter().map(|h| h / total));
    } else {
        out.push(1.0);
        out.extend(std::iter::repeat_n(0.0, EDGE_BINS - 1));
    }

    // top, bottom, left, right strips, each cut into equal segments
    let seg = n / BORDER_SEGMENTS;
    let strip_mean = |x0: usize, x1: usize, y0: usize, y1: usize| {
        let (mut s, mut c) = (0u64, 0u64);
        for y in y0..y1 {
            for x in x0..x1 {
                if valid(x, y) {
                    s += px[y * n + x] as u64;
                    c += 1;
                }
            }
        }
        mean_of(s, c)
    };
    for k in 0..BORDER_SEGMENTS {
        out.push(strip_mean(k * seg, (k + 1) * seg, 0, BORDER_DEPTH));
    }
    for k in 0..BORDER_SEGMENTS {
        out.push(strip_mean(k * seg, (k + 1) * seg, n - BORDER_DEPTH, n));
    }
    for k in 0..BORDER_SEGMENTS {
        out.push(strip_mean(0, BORDER_DEPTH, k * seg, (k + 1) * seg));
    }
    for k in 0..BORDER_SEGMENTS {
        out.push(strip_mean(n - BORDER_DEPTH, n, k * seg, (k + 1) * seg));
    }
    debug_assert_eq!(out.len(), FEATURE_LEN);
    FeatureVector(out)
}
