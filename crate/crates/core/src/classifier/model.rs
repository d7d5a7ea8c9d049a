use super::loss::sigmoid;
use super::ClassifierError;
use std::path::Path;

pub const MODEL_HEADER: &str = "spinepatch-logreg v1";

/// Logistic regression: p(present) = σ(bias + w·x).
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl Model {
    pub fn zeros(dim: usize) -> Self {
        Self {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.weights.len());
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }

    pub fn is_finite(&self) -> bool {
        self.bias.is_finite() && self.weights.iter().all(|w| w.is_finite())
    }

    /// Header, dimension, bias, then one weight per line. `{:.16e}` keeps
    /// every f64 exactly.
    pub fn to_text(&self) -> String {
        let mut out = format!("{MODEL_HEADER}\ndim {}\n", self.weights.len());
        out.push_str(&format!("{:.16e}\n", self.bias));
        for w in &self.weights {
            out.push_str(&format!("{w:.16e}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, ClassifierError> {
        let bad = |msg: String| ClassifierError::ModelFormat(msg);
        let mut lines = text.lines();
        if lines.next() != Some(MODEL_HEADER) {
            return Err(bad(format!("expected header {MODEL_HEADER:?}")));
        }
        let dim: usize = lines
            .next()
            .and_then(|l| l.strip_prefix("dim "))
            .and_then(|d| d.trim().parse().ok())
            .ok_or_else(|| bad("missing dim line".into()))?;
        let mut values = Vec::with_capacity(dim + 1);
        for (i, line) in lines.enumerate() {
            let v: f64 = line
                .trim()
                .parse()
                .map_err(|_| bad(format!("line {}: not a number: {line:?}", i + 3)))?;
            values.push(v);
        }
        if values.len() != dim + 1 {
            return Err(bad(format!("expected {} values, found {}", dim + 1, values.len())));
        }
        let model = Model {
            bias: values[0],
            weights: values[1..].to_vec(),
        };
        if !model.is_finite() {
            return Err(bad("non-finite parameter".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ClassifierError> {
        crate::raster::write_atomic(path.as_ref(), self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ClassifierError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| {
            if source.kind() == std::io::ErrorKind::NotFound {
                ClassifierError::ModelNotFound(path.to_path_buf())
            } else {
                ClassifierError::Io {
                    path: path.to_path_buf(),
                    source,
                }
            }
        })?;
        Self::from_text(&text)
    }
}
