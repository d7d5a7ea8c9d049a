use super::features::{features_of_input, to_input, INPUT_SIZE};
use super::model::Model;
use super::ClassifierError;
use crate::geometry::BBox;
use crate::raster::{render_overlay, GrayImage, Overlay, RgbImage};
use serde::Serialize;

/// `values[i * size + j]` is the probability drop when the window whose
/// top-left corner is `(j·stride, i·stride)` is grayed out.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SaliencyMap {
    pub size: usize,
    pub window: usize,
    pub stride: usize,
    pub base_probability: f64,
    pub values: Vec<f64>,
}

impl SaliencyMap {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size + j]
    }

    /// Cell with the largest |value|; ties go to the first in row-major order.
    pub fn argmax_abs(&self) -> (usize, usize) {
        let mut best = 0;
        for (k, v) in self.values.iter().enumerate() {
            if v.abs() > self.values[best].abs() {
                best = k;
            }
        }
        (best / self.size, best % self.size)
    }

    pub fn window_box(&self, i: usize, j: usize) -> BBox {
        let (x0, y0) = ((j * self.stride) as f64, (i * self.stride) as f64);
        let w = (self.window - 1) as f64;
        BBox::new(x0, y0, x0 + w, y0 + w).expect("window is ordered")
    }
}

pub fn occlusion_saliency(
    model: &Model,
    patch: &GrayImage,
    window: usize,
    stride: usize,
) -> Result<SaliencyMap, ClassifierError> {
    if window == 0 || window > INPUT_SIZE {
        return Err(ClassifierError::InvalidArgument(format!(
            "window {window} must be between 1 and the {INPUT_SIZE}px input"
        )));
    }
    if stride == 0 {
        return Err(ClassifierError::InvalidArgument("stride must be positive".into()));
    }
    let img = to_input(patch);
    let fill = img.mean().round() as u8;
    let base = model.predict_proba(features_of_input(&img).values());
    let size = (INPUT_SIZE - window) / stride + 1;
    let mut values = Vec::with_capacity(size * size);
    for i in 0..size {
        for j in 0..size {
            let mut occluded = img.clone();
            for y in i * stride..i * stride + window {
                for x in j * stride..j * stride + window {
                    occluded.set(x, y, fill);
                }
            }
            values.push(base - model.predict_proba(features_of_input(&occluded).values()));
        }
    }
    Ok(SaliencyMap {
        size,
        window,
        stride,
        base_probability: base,
        values,
    })
}

/// Boxes the windows whose |saliency| reaches `fraction` of the peak.
pub fn render_saliency(patch: &GrayImage, map: &SaliencyMap, fraction: f64) -> RgbImage {
    let img = to_input(patch);
    let peak = map.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut overlay = Overlay::default();
    if peak > 0.0 {
        for i in 0..map.size {
            for j in 0..map.size {
                if map.get(i, j).abs() >= fraction * peak {
                    overlay.boxes.push(map.window_box(i, j));
                }
            }
        }
    }
    render_overlay(&img, &overlay)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::features::{BORDER_SEGMENTS, EDGE_BINS, FEATURE_LEN, GRID};

    fn textured() -> GrayImage {
        GrayImage::from_fn(224, 224, |x, y| ((x * 31 + y * 17) % 200 + 20) as u8)
    }

    #[test]
    fn zero_model_gives_zero_map() {
        let map = occlusion_saliency(&Model::zeros(FEATURE_LEN), &textured(), 56, 56).unwrap();
        assert!(map.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dimensions() {
        let m = Model::zeros(FEATURE_LEN);
        for (w, s) in [(56, 56), (32, 16), (224, 1), (50, 30)] {
            let map = occlusion_saliency(&m, &textured(), w, s).unwrap();
            assert_eq!(map.size, (224 - w) / s + 1);
            assert_eq!(map.values.len(), map.size * map.size);
        }
    }

    #[test]
    fn oversized_window_rejected() {
        assert!(matches!(
            occlusion_saliency(&Model::zeros(FEATURE_LEN), &textured(), 225, 8),
            Err(ClassifierError::InvalidArgument(_))
        ));
    }

    /// A model reading only the first left-strip segment (x < 28, y < 56)
    /// reacts most to windows over that corner of the left border.
    #[test]
    fn border_keyed_model_peaks_at_that_border() {
        let idx = GRID * GRID + EDGE_BINS + 2 * BORDER_SEGMENTS;
        let mut m = Model::zeros(FEATURE_LEN);
        m.weights[idx] = 8.0;
        m.bias = -4.0;
        let img = GrayImage::from_fn(224, 224, |x, y| if x < 28 && y < 56 { 240 } else { 60 });
        let map = occlusion_saliency(&m, &img, 28, 28).unwrap();
        let (i, j) = map.argmax_abs();
        let b = map.window_box(i, j);
        assert_eq!(j, 0, "peak at column {j}");
        assert!(b.y0 < 56.0);
        // windows away from the strip leave the prediction untouched
        assert_eq!(map.get(7, 7), 0.0);
    }

    #[test]
    fn render_marks_peak() {
        let mut m = Model::zeros(FEATURE_LEN);
        m.weights[GRID * GRID + EDGE_BINS] = 5.0;
        let map = occlusion_saliency(&m, &textured(), 56, 56).unwrap();
        let rgb = render_saliency(&textured(), &map, 0.99);
        assert_eq!((rgb.width, rgb.height), (224, 224));
        assert!(rgb.data.chunks(3).any(|c| c == crate::raster::BOX_COLOR));
    }
}
