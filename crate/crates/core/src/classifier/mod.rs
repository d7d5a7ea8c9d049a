//! Logistic-regression patch classifier trained with SGD and momentum.
//!
//! Patches are resized to 224×224 and summarized by a 288-value feature
//! vector. Training follows a step learning-rate schedule with on-the-fly
//! rotation and histogram-equalization augmentation, and is bitwise
//! deterministic for a given seed regardless of thread count.

mod augment;
mod data;
mod features;
mod loss;
mod metrics;
mod model;
mod saliency;
mod train;

pub use augment::{augment, augment_with_coverage, sample_rng};
pub use data::{load_patch_samples, PatchSample};
pub use features::{
    extract_features, features_of_covered, features_of_input, to_input, FeatureVector, FEATURE_LEN, INPUT_SIZE,
};
pub use loss::{loss_and_grad, sigmoid, Objective, PROB_CLAMP};
pub use metrics::{evaluate, metrics_from, predict, Confusion, Metrics, THRESHOLD};
pub use model::{Model, MODEL_HEADER};
pub use saliency::{occlusion_saliency, render_saliency, SaliencyMap};
pub use train::{fit, log_csv, lr_at, train, EpochLog, TrainOutcome};

use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("training set needs both classes, got {present} present of {n}")]
    SingleClass { n: usize, present: usize },
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("model file not found: {}", .0.display())]
    ModelNotFound(PathBuf),
    #[error("malformed model file: {0}")]
    ModelFormat(String),
    #[error("{0}")]
    Data(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Image(#[from] crate::raster::ImageError),
    #[error(transparent)]
    Pipeline(#[from] crate::pipeline::PipelineError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

impl ClassifierError {
    pub fn is_io(&self) -> bool {
        match self {
            ClassifierError::Io { .. } => true,
            ClassifierError::Image(e) => matches!(e, crate::raster::ImageError::Io { .. }),
            ClassifierError::Pipeline(p) => p.is_io(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    CrossEntropy,
    WeightedCrossEntropy,
    Focal,
}

impl LossKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LossKind::CrossEntropy => "cross_entropy",
            LossKind::WeightedCrossEntropy => "weighted_cross_entropy",
            LossKind::Focal => "focal",
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "cross_entropy" => Ok(LossKind::CrossEntropy),
            "weighted_cross_entropy" => Ok(LossKind::WeightedCrossEntropy),
            "focal" => Ok(LossKind::Focal),
            _ => Err(format!("unknown loss {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub scheduler_step: usize,
    pub scheduler_gamma: f64,
    pub epochs: usize,
    pub loss: LossKind,
    pub focal_gamma: f64,
    pub rotation_max_deg: f64,
    pub equalize_prob: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.002,
            momentum: 0.9,
            scheduler_step: 7,
            scheduler_gamma: 0.1,
            epochs: 50,
            loss: LossKind::WeightedCrossEntropy,
            focal_gamma: 2.0,
            rotation_max_deg: 30.0,
            equalize_prob: 0.5,
            batch_size: 4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        let bad = |m: &str| Err(ClassifierError::Config(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must be in [0, 1)");
        }
        if self.scheduler_step == 0 {
            return bad("scheduler_step must be at least 1");
        }
        if !(self.scheduler_gamma > 0.0 && self.scheduler_gamma <= 1.0) {
            return bad("scheduler_gamma must be in (0, 1]");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.focal_gamma >= 0.0 && self.focal_gamma.is_finite()) {
            return bad("focal_gamma must be non-negative");
        }
        if !(0.0..=180.0).contains(&self.rotation_max_deg) {
            return bad("rotation_max_deg must be in [0, 180]");
        }
        if !(0.0..=1.0).contains(&self.equalize_prob) {
            return bad("equalize_prob must be in [0, 1]");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        Ok(())
    }
}
