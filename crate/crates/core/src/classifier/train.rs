use super::augment::{augment_with_coverage, sample_rng};
use super::data::PatchSample;
use super::features::{features_of_covered, features_of_input};
use super::loss::{loss_and_grad, Objective};
use super::model::Model;
use super::{ClassifierError, TrainConfig};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub loss: f64,
    pub train_acc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub log: Vec<EpochLog>,
    pub objective: Objective,
}

/// Step schedule over 1-based epochs.
pub fn lr_at(cfg: &TrainConfig, epoch: usize) -> f64 {
    let drops = (epoch.saturating_sub(1) / cfg.scheduler_step) as i32;
    cfg.learning_rate * cfg.scheduler_gamma.powi(drops)
}

pub fn log_csv(log: &[EpochLog]) -> String {
    let mut out = String::from("epoch,lr,loss,train_acc\n");
    for e in log {
        writeln!(out, "{},{:.6e},{:.6},{:.4}", e.epoch, e.lr, e.loss, e.train_acc).unwrap();
    }
    out
}

/// Per-feature mean and spread of the un-augmented training features.
/// Constant features keep unit spread.
fn standardizer(base: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let dim = base[0].len();
    let n = base.len() as f64;
    let mut mean = vec![0.0; dim];
    for x in base {
        mean.iter_mut().zip(x).for_each(|(m, v)| *m += v / n);
    }
    let mut var = vec![0.0; dim];
    for x in base {
        var.iter_mut()
            .zip(x.iter().zip(&mean))
            .for_each(|(s, (v, m))| *s += (v - m) * (v - m) / n);
    }
    let std = var.into_iter().map(|v| if v > 1e-18 { v.sqrt() } else { 1.0 }).collect();
    (mean, std)
}

/// SGD over precomputed or on-the-fly features.
///
/// `augmented(epoch, index)` supplies the features seen in a given epoch; when
/// it is `None` the base features are reused. The model is fitted on
/// standardized inputs and folded back to raw feature space at the end.
pub fn fit<F>(
    base: &[Vec<f64>],
    labels: &[bool],
    cfg: &TrainConfig,
    jobs: usize,
    augmented: Option<F>,
) -> Result<TrainOutcome, ClassifierError>
where
    F: Fn(usize, usize) -> Vec<f64> + Sync,
{
    cfg.validate()?;
    assert_eq!(base.len(), labels.len());
    let pos = labels.iter().filter(|&&l| l).count();
    if pos == 0 || pos == labels.len() {
        return Err(ClassifierError::SingleClass {
            n: labels.len(),
            present: pos,
        });
    }
    let dim = base[0].len();
    let (mean, std) = standardizer(base);
    let standardize = |x: &[f64]| -> Vec<f64> {
        x.iter().zip(mean.iter().zip(&std)).map(|(v, (m, s))| (v - m) / s).collect()
    };
    let fixed: Vec<Vec<f64>> = base.iter().map(|x| standardize(x)).collect();
    let objective = Objective::from_config(cfg, labels);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| ClassifierError::ThreadPool(e.to_string()))?;

    let mut model = Model::zeros(dim);
    let mut velocity = vec![0.0; dim + 1];
    let mut order: Vec<usize> = (0..labels.len()).collect();
    let mut shuffler = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut log = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        let lr = lr_at(cfg, epoch);
        let epoch_features: Option<Vec<Vec<f64>>> = augmented.as_ref().map(|f| {
            pool.install(|| {
                (0..labels.len())
                    .into_par_iter()
                    .map(|i| standardize(&f(epoch, i)))
                    .collect()
            })
        });
        let feats = epoch_features.as_deref().unwrap_or(&fixed);
        order.shuffle(&mut shuffler);

        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&[f64], bool)> = chunk.iter().map(|&i| (feats[i].as_slice(), labels[i])).collect();
            correct += batch
                .iter()
                .filter(|(x, y)| (model.predict_proba(x) >= 0.5) == *y)
                .count();
            let (loss, grad) = loss_and_grad(&model, &batch, &objective);
            loss_sum += loss * batch.len() as f64;
            for (v, g) in velocity.iter_mut().zip(&grad) {
                *v = cfg.momentum * *v - lr * g;
            }
            model.weights.iter_mut().zip(&velocity).for_each(|(w, v)| *w += v);
            model.bias += velocity[dim];
        }
        if !model.is_finite() {
            return Err(ClassifierError::Diverged { epoch });
        }
        log.push(EpochLog {
            epoch,
            lr,
            loss: loss_sum / labels.len() as f64,
            train_acc: correct as f64 / labels.len() as f64,
        });
    }

    // w·(x−μ)/σ + b  =  (w/σ)·x + (b − Σ wμ/σ)
    let mut folded = Model::zeros(dim);
    folded.bias = model.bias;
    for k in 0..dim {
        folded.weights[k] = model.weights[k] / std[k];
        folded.bias -= model.weights[k] * mean[k] / std[k];
    }
    Ok(TrainOutcome {
        model: folded,
        log,
        objective,
    })
}

/// Trains on 224×224 patch inputs with on-the-fly augmentation.
pub fn train(samples: &[PatchSample], cfg: &TrainConfig, jobs: usize) -> Result<TrainOutcome, ClassifierError> {
    if samples.is_empty() {
        return Err(ClassifierError::SingleClass { n: 0, present: 0 });
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| ClassifierError::ThreadPool(e.to_string()))?;
    let base: Vec<Vec<f64>> = pool.install(|| {
        samples
            .par_iter()
            .map(|s| features_of_input(&s.image).0)
            .collect()
    });
    let labels: Vec<bool> = samples.iter().map(|s| s.label).collect();
    let augmenting = cfg.rotation_max_deg > 0.0 || cfg.equalize_prob > 0.0;
    let provider = |epoch: usize, i: usize| {
        let mut rng = sample_rng(cfg.seed, epoch, i);
        let (img, coverage) = augment_with_coverage(&samples[i].image, cfg.rotation_max_deg, cfg.equalize_prob, &mut rng);
        features_of_covered(&img, Some(&coverage)).0
    };
    fit(&base, &labels, cfg, jobs, augmenting.then_some(provider))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::LossKind;
    use rand::Rng;

    type NoAug = fn(usize, usize) -> Vec<f64>;

    fn toy(seed: u64) -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        while xs.len() < 60 {
            let a: f64 = rng.random_range(-1.0..1.0);
            let b: f64 = rng.random_range(-1.0..1.0);
            let m = a + 2.0 * b - 0.3;
            if m.abs() < 0.15 {
                continue;
            }
            xs.push(vec![a, b]);
            ys.push(m > 0.0);
        }
        (xs, ys)
    }

    fn toy_cfg() -> TrainConfig {
        TrainConfig {
            learning_rate: 0.1,
            loss: LossKind::CrossEntropy,
            rotation_max_deg: 0.0,
            equalize_prob: 0.0,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn separable_toy_reaches_full_accuracy() {
        let (xs, ys) = toy(1);
        let out = fit::<NoAug>(&xs, &ys, &toy_cfg(), 1, None).unwrap();
        assert_eq!(out.log.len(), 50);
        let acc = xs
            .iter()
            .zip(&ys)
            .filter(|(x, y)| (out.model.predict_proba(x) >= 0.5) == **y)
            .count();
        assert_eq!(acc, xs.len());
    }

    #[test]
    fn schedule_steps() {
        let cfg = TrainConfig::default();
        assert_eq!(lr_at(&cfg, 1), 0.002);
        assert_eq!(lr_at(&cfg, 7), 0.002);
        assert!((lr_at(&cfg, 8) - 0.002 * 0.1).abs() < 1e-18);
        assert!((lr_at(&cfg, 15) - 0.002 * 0.01).abs() < 1e-18);
        let (xs, ys) = toy(2);
        let out = fit::<NoAug>(&xs, &ys, &cfg, 1, None).unwrap();
        assert_eq!(out.log[7].lr, lr_at(&cfg, 8));
        assert_eq!(out.log[14].lr, lr_at(&cfg, 15));
    }

    #[test]
    fn same_seed_same_weights() {
        let (xs, ys) = toy(3);
        let a = fit::<NoAug>(&xs, &ys, &toy_cfg(), 1, None).unwrap().model;
        let b = fit::<NoAug>(&xs, &ys, &toy_cfg(), 4, None).unwrap().model;
        assert_eq!(a.to_text(), b.to_text());
        let other = TrainConfig { seed: 99, ..toy_cfg() };
        let c = fit::<NoAug>(&xs, &ys, &other, 1, None).unwrap().model;
        assert_ne!(a.to_text(), c.to_text());
    }

    #[test]
    fn single_class_rejected() {
        let xs = vec![vec![0.0, 1.0]; 5];
        let ys = vec![true; 5];
        assert!(matches!(
            fit::<NoAug>(&xs, &ys, &toy_cfg(), 1, None),
            Err(ClassifierError::SingleClass { .. })
        ));
    }

    #[test]
    fn image_training_is_deterministic_across_jobs() {
        use crate::raster::GrayImage;
        let samples: Vec<PatchSample> = (0..12)
            .map(|i| PatchSample {
                patch_id: format!("p{i}"),
                label: i % 3 == 0,
                image: GrayImage::from_fn(224, 224, |x, y| {
                    if i % 3 == 0 && x < 40 && y > 100 { 220 } else { ((x + y + i * 13) % 90) as u8 }
                }),
            })
            .collect();
        let cfg = TrainConfig {
            epochs: 3,
            ..TrainConfig::default()
        };
        let a = train(&samples, &cfg, 1).unwrap();
        let b = train(&samples, &cfg, 3).unwrap();
        assert_eq!(a.model.to_text(), b.model.to_text());
        assert_eq!(log_csv(&a.log), log_csv(&b.log));
    }
}
