use super::{BinaryMask, GrayImage, ImageError};
use crate::geometry::BBox;

/// Crops the half-open pixel window `[x0, x1) × [y0, y1)` after clamping the
/// box to the image. Fractional edges round outward.
pub fn crop(img: &GrayImage, b: &BBox) -> Result<GrayImage, ImageError> {
    let clamp = |v: f64, hi: usize| v.max(0.0).min(hi as f64) as usize;
    let x0 = clamp(b.x0.floor(), img.width());
    let y0 = clamp(b.y0.floor(), img.height());
    let x1 = clamp(b.x1.ceil(), img.width());
    let y1 = clamp(b.y1.ceil(), img.height());
    if x1 <= x0 || y1 <= y0 {
        return Err(ImageError::EmptyCrop);
    }
    let w = x1 - x0;
    let mut data = Vec::with_capacity(w * (y1 - y0));
    for y in y0..y1 {
        let row = y * img.width();
        data.extend_from_slice(&img.data()[row + x0..row + x1]);
    }
    GrayImage::new(w, y1 - y0, data)
}

/// Half-open pixel window covering every pixel whose center lies in the
/// closed box `b`.
pub fn pixel_span(b: &BBox) -> BBox {
    BBox {
        x0: b.x0.ceil(),
        y0: b.y0.ceil(),
        x1: b.x1.floor() + 1.0,
        y1: b.y1.floor() + 1.0,
    }
}

/// Crops the pixels whose centers fall inside the closed box `b`, which is
/// how patch rectangles (expressed in pixel-center coordinates) map to pixels.
pub fn crop_pixels(img: &GrayImage, b: &BBox) -> Result<GrayImage, ImageError> {
    crop(img, &pixel_span(b))
}

#[inline]
fn bilinear(img: &GrayImage, sx: f64, sy: f64) -> f64 {
    let x0 = sx.floor();
    let y0 = sy.floor();
    let fx = sx - x0;
    let fy = sy - y0;
    let x0 = x0 as usize;
    let y0 = y0 as usize;
    let x1 = (x0 + 1).min(img.width() - 1);
    let y1 = (y0 + 1).min(img.height() - 1);
    let p00 = img.get(x0, y0) as f64;
    let p10 = img.get(x1, y0) as f64;
    let p01 = img.get(x0, y1) as f64;
    let p11 = img.get(x1, y1) as f64;
    let top = p00 + (p10 - p00) * fx;
    let bottom = p01 + (p11 - p01) * fx;
    top + (bottom - top) * fy
}

/// Bilinear resize with corner-aligned sampling: output pixel `i` samples the
/// source at `i·(in−1)/(out−1)`, so the four corner pixels map onto each other.
pub fn resize_bilinear(img: &GrayImage, out_w: usize, out_h: usize) -> GrayImage {
    assert!(out_w >= 1 && out_h >= 1, "output dimensions must be positive");
    if out_w == img.width() && out_h == img.height() {
        return img.clone();
    }
    let coords = |out: usize, inp: usize| -> Vec<f64> {
        (0..out)
            .map(|i| {
                if out == 1 {
                    (inp - 1) as f64 / 2.0
                } else {
                    (i * (inp - 1)) as f64 / (out - 1) as f64
                }
            })
            .collect()
    };
    let xs = coords(out_w, img.width());
    let ys = coords(out_h, img.height());
    let mut data = Vec::with_capacity(out_w * out_h);
    for &sy in &ys {
        for &sx in &xs {
            data.push(bilinear(img, sx, sy).round().clamp(0.0, 255.0) as u8);
        }
    }
    GrayImage::new(out_w, out_h, data).expect("dimensions checked")
}

/// Classic CDF remap: `round(255·(cdf(v) − cdf_min) / (N − cdf_min))`.
/// A single-level image has no spread to redistribute and is returned as is.
pub fn equalize_histogram(img: &GrayImage) -> GrayImage {
    let mut hist = [0usize; 256];
    for &v in img.data() {
        hist[v as usize] += 1;
    }
    let n = img.data().len();
    let mut cdf = [0usize; 256];
    let mut acc = 0;
    for (i, &h) in hist.iter().enumerate() {
        acc += h;
        cdf[i] = acc;
    }
    let cdf_min = hist
        .iter()
        .position(|&h| h > 0)
        .map(|i| cdf[i])
        .unwrap_or(0);
    if n == cdf_min {
        return img.clone();
    }
    let denom = (n - cdf_min) as f64;
    let mut lut = [0u8; 256];
    for v in 0..256 {
        if hist[v] > 0 {
            lut[v] = (255.0 * (cdf[v] - cdf_min) as f64 / denom).round() as u8;
        }
    }
    let data = img.data().iter().map(|&v| lut[v as usize]).collect();
    GrayImage::new(img.width(), img.height(), data).expect("same shape")
}

/// Rotation about the image center by `degrees`, counter-clockwise as seen on
/// screen. Bilinear sampling; samples falling outside the source are 0.
///
/// Source coordinates are stepped along each row in 32.32 fixed point and
/// blended with 8-bit weights, which keeps every sample within one intensity
/// level of the exact bilinear value.
pub fn rotate(img: &GrayImage, degrees: f64) -> GrayImage {
    rotate_with_coverage(img, degrees).0
}

/// [`rotate`] plus a mask of the output pixels whose source lies inside the
/// input, i.e. everything that is not zero fill.
pub fn rotate_with_coverage(img: &GrayImage, degrees: f64) -> (GrayImage, BinaryMask) {
    let (w, h) = (img.width(), img.height());
    let mut covered = vec![true; w * h];
    if degrees == 0.0 {
        return (img.clone(), BinaryMask::new(w, h, covered).expect("same shape"));
    }
    const ONE: f64 = (1u64 << 32) as f64;
    let cx = (w - 1) as f64 / 2.0;
    let cy = (h - 1) as f64 / 2.0;
    let (sin, cos) = degrees.to_radians().sin_cos();
    let fixed = |v: f64| (v * ONE).round() as i64;
    let eps = fixed(1e-6);
    let (max_x, max_y) = (fixed((w - 1) as f64), fixed((h - 1) as f64));
    let (step_x, step_y) = (fixed(cos), fixed(sin));
    let src = img.data();
    let mut data = vec![0u8; w * h];
    for y in 0..h {
        let dy = y as f64 - cy;
        let mut sx = fixed(cx - cx * cos - dy * sin);
        let mut sy = fixed(cy - cx * sin + dy * cos);
        let row = &mut data[y * w..(y + 1) * w];
        let row_cov = &mut covered[y * w..(y + 1) * w];
        for (out, cov) in row.iter_mut().zip(row_cov) {
            let (px, py) = (sx, sy);
            sx += step_x;
            sy += step_y;
            if px < -eps || py < -eps || px > max_x + eps || py > max_y + eps {
                *cov = false;
                continue;
            }
            let (px, py) = (px.clamp(0, max_x), py.clamp(0, max_y));
            let (x0, y0) = ((px >> 32) as usize, (py >> 32) as usize);
            let fx = ((px >> 24) & 0xFF) as u32;
            let fy = ((py >> 24) & 0xFF) as u32;
            let x1 = (x0 + 1).min(w - 1);
            let y1 = (y0 + 1).min(h - 1);
            let (r0, r1) = (y0 * w, y1 * w);
            let top = src[r0 + x0] as u32 * (256 - fx) + src[r0 + x1] as u32 * fx;
            let bottom = src[r1 + x0] as u32 * (256 - fx) + src[r1 + x1] as u32 * fx;
            *out = ((top * (256 - fy) + bottom * fy + (1 << 15)) >> 16) as u8;
        }
    }
    (
        GrayImage::new(w, h, data).expect("same shape"),
        BinaryMask::new(w, h, covered).expect("same shape"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> GrayImage {
        GrayImage::from_fn(w, h, |x, y| ((x * 7 + y * 13) % 256) as u8)
    }

    #[test]
    fn crop_window() {
        let img = ramp(10, 10);
        let c = crop(&img, &BBox::new(2.0, 2.0, 5.0, 5.0).unwrap()).unwrap();
        assert_eq!((c.width(), c.height()), (3, 3));
        for y in 0..3 {
            for x in 0..3 {
                assert_eq!(c.get(x, y), img.get(x + 2, y + 2));
            }
        }
    }

    #[test]
    fn crop_clamps_to_bounds() {
        let img = ramp(10, 10);
        let c = crop(&img, &BBox::new(-5.0, -5.0, 3.0, 3.0).unwrap()).unwrap();
        assert_eq!(c, crop(&img, &BBox::new(0.0, 0.0, 3.0, 3.0).unwrap()).unwrap());
        assert_eq!((c.width(), c.height()), (3, 3));
    }

    #[test]
    fn crop_outside_is_error() {
        let img = ramp(10, 10);
        let r = crop(&img, &BBox::new(20.0, 20.0, 30.0, 30.0).unwrap());
        assert!(matches!(r, Err(ImageError::EmptyCrop)));
        let r = crop(&img, &BBox::new(3.0, 3.0, 3.0, 8.0).unwrap());
        assert!(matches!(r, Err(ImageError::EmptyCrop)));
    }

    #[test]
    fn crop_pixels_is_inclusive() {
        let img = ramp(10, 10);
        let c = crop_pixels(&img, &BBox::new(0.0, 0.0, 2.0, 2.0).unwrap()).unwrap();
        assert_eq!((c.width(), c.height()), (3, 3));
        let c = crop_pixels(&img, &BBox::new(0.5, 0.2, 2.7, 2.0).unwrap()).unwrap();
        assert_eq!((c.width(), c.height()), (2, 2));
        assert_eq!(c.get(0, 0), img.get(1, 1));
    }

    #[test]
    fn resize_constant() {
        let img = GrayImage::filled(7, 5, 50);
        let out = resize_bilinear(&img, 224, 224);
        assert!(out.data().iter().all(|&v| v == 50));
    }

    #[test]
    fn resize_identity() {
        let img = ramp(9, 4);
        assert_eq!(resize_bilinear(&img, 9, 4), img);
    }

    #[test]
    fn resize_two_by_two_matches_closed_form() {
        let img = GrayImage::new(2, 2, vec![0, 100, 100, 200]).unwrap();
        let out = resize_bilinear(&img, 4, 4);
        // f(u, v) = 100u + 100v on the unit square with u = j/3, v = i/3.
        for i in 0..4 {
            for j in 0..4 {
                let u = j as f64 / 3.0;
                let v = i as f64 / 3.0;
                let expected = (0.0 * (1.0 - u) * (1.0 - v)
                    + 100.0 * u * (1.0 - v)
                    + 100.0 * (1.0 - u) * v
                    + 200.0 * u * v)
                    .round() as u8;
                assert_eq!(out.get(j, i), expected, "({j}, {i})");
            }
        }
        assert_eq!(out.data()[..4], [0, 33, 67, 100]);
    }

    #[test]
    fn resize_to_single_pixel_samples_center() {
        let img = GrayImage::new(3, 1, vec![0, 90, 180]).unwrap();
        assert_eq!(resize_bilinear(&img, 1, 1).data(), &[90]);
    }

    #[test]
    fn equalize_constant() {
        let img = GrayImage::filled(4, 4, 77);
        assert_eq!(equalize_histogram(&img), img);
    }

    #[test]
    fn equalize_two_levels() {
        // 4 of 16 pixels at 10, 12 at 200: cdf(10) = 4 = cdf_min, cdf(200) = 16.
        let img = GrayImage::from_fn(4, 4, |_, y| if y == 0 { 10 } else { 200 });
        let out = equalize_histogram(&img);
        for y in 0..4 {
            for x in 0..4 {
                let expected = if y == 0 { 0 } else { 255 };
                assert_eq!(out.get(x, y), expected);
            }
        }
    }

    #[test]
    fn equalize_uniform_ramp_is_stable() {
        let img = GrayImage::from_fn(16, 16, |x, y| (y * 16 + x) as u8);
        let out = equalize_histogram(&img);
        for (a, b) in img.data().iter().zip(out.data()) {
            // cdf(v) = v + 1, cdf_min = 1: out = round(255·v/255) = v.
            assert!((*a as i32 - *b as i32).abs() <= 1);
        }
    }

    #[test]
    fn rotate_zero_is_identity() {
        let img = ramp(6, 5);
        assert_eq!(rotate(&img, 0.0), img);
    }

    #[test]
    fn rotate_half_turn_of_symmetric_image() {
        let img = GrayImage::from_fn(7, 5, |x, y| {
            let dx = (x as i32 - 3).unsigned_abs() as u8;
            let dy = (y as i32 - 2).unsigned_abs() as u8;
            dx * 20 + dy * 30
        });
        assert_eq!(rotate(&img, 180.0), img);
    }

    #[test]
    fn rotate_quarter_turn_matches_permutation() {
        let img = GrayImage::from_fn(5, 5, |x, y| (x * 50 + y * 3) as u8);
        let out = rotate(&img, 90.0);
        for y in 0..5 {
            for x in 0..5 {
                // Counter-clockwise on screen: output (x, y) reads source (4 − y, x).
                let expected = img.get(4 - y, x) as i32;
                assert!((out.get(x, y) as i32 - expected).abs() <= 1, "({x}, {y})");
            }
        }
    }

    #[test]
    fn rotate_fills_corners_with_zero() {
        let img = GrayImage::filled(21, 21, 100);
        let out = rotate(&img, 45.0);
        assert_eq!(out.get(0, 0), 0);
        assert_eq!(out.get(10, 10), 100);
    }

    proptest::proptest! {
        #[test]
        fn nested_crops_compose(
            ax in 0usize..10, ay in 0usize..10, aw in 1usize..10, ah in 1usize..10,
            bx in 0usize..10, by in 0usize..10, bw in 1usize..10, bh in 1usize..10,
        ) {
            let img = ramp(20, 20);
            let bx = bx.min(aw - 1);
            let by = by.min(ah - 1);
            let bw = bw.min(aw - bx);
            let bh = bh.min(ah - by);
            let outer = BBox::new(ax as f64, ay as f64, (ax + aw) as f64, (ay + ah) as f64).unwrap();
            let inner = BBox::new(bx as f64, by as f64, (bx + bw) as f64, (by + bh) as f64).unwrap();
            let composed = BBox::new(
                (ax + bx) as f64, (ay + by) as f64, (ax + bx + bw) as f64, (ay + by + bh) as f64,
            ).unwrap();
            let twice = crop(&crop(&img, &outer).unwrap(), &inner).unwrap();
            proptest::prop_assert_eq!(twice, crop(&img, &composed).unwrap());
        }

        #[test]
        fn equalization_is_nearly_idempotent(w in 2usize..24, h in 2usize..24, data in proptest::collection::vec(0u8..=255, 576)) {
            let img = GrayImage::new(w, h, data[..w * h].to_vec()).unwrap();
            let once = equalize_histogram(&img);
            let twice = equalize_histogram(&once);
            for (a, b) in once.data().iter().zip(twice.data()) {
                proptest::prop_assert!((*a as i32 - *b as i32).abs() <= 1);
            }
        }

        #[test]
        fn resize_to_same_size_is_identity(w in 1usize..30, h in 1usize..30) {
            let img = ramp(w, h);
            proptest::prop_assert_eq!(resize_bilinear(&img, w, h), img);
        }
    }

    #[test]
    fn coverage_marks_zero_fill() {
        let img = GrayImage::filled(40, 30, 200);
        let (rot, cov) = rotate_with_coverage(&img, 45.0);
        assert!(!cov.get(0, 0) && !cov.get(39, 29));
        assert!(cov.get(20, 15));
        for y in 0..30 {
            for x in 0..40 {
                if !cov.get(x, y) {
                    assert_eq!(rot.get(x, y), 0);
                }
            }
        }
        assert_eq!(rotate_with_coverage(&img, 0.0).1.count(), 40 * 30);
    }
}
