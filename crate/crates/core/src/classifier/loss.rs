use super::model::Model;
use super::{LossKind, TrainConfig};

pub const PROB_CLAMP: f64 = 1e-12;

/// A loss together with the class weights frozen from the training split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub loss: LossKind,
    pub focal_gamma: f64,
    /// Indexed by label: `[absent, present]`.
    pub class_weights: [f64; 2],
}

impl Objective {
    pub fn new(loss: LossKind, focal_gamma: f64) -> Self {
        Self {
            loss,
            focal_gamma,
            class_weights: [1.0, 1.0],
        }
    }

    /// Weights are `n / (2·n_c)`, so balanced data gets weight 1 per class.
    pub fn from_config(cfg: &TrainConfig, labels: &[bool]) -> Self {
        let mut obj = Self::new(cfg.loss, cfg.focal_gamma);
        if cfg.loss == LossKind::WeightedCrossEntropy {
            let pos = labels.iter().filter(|&&l| l).count();
            let neg = labels.len() - pos;
            if pos > 0 && neg > 0 {
                let n = labels.len() as f64;
                obj.class_weights = [n / (2.0 * neg as f64), n / (2.0 * pos as f64)];
            }
        }
        obj
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Loss and d(loss)/d(logit) for one example.
fn pointwise(z: f64, y: bool, obj: &Objective) -> (f64, f64) {
    let p = sigmoid(z).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    match obj.loss {
        LossKind::CrossEntropy | LossKind::WeightedCrossEntropy => {
            let w = obj.class_weights[y as usize];
            let yf = if y { 1.0 } else { 0.0 };
            let loss = -(yf * p.ln() + (1.0 - yf) * (1.0 - p).ln());
            (w * loss, w * (p - yf))
        }
        LossKind::Focal => {
            let g = obj.focal_gamma;
            let (pt, sign) = if y { (p, 1.0) } else { (1.0 - p, -1.0) };
            let q = 1.0 - pt;
            let loss = -q.powf(g) * pt.ln();
            // dℓ/dp_t · dp_t/dz with dp_t/dz = ±p_t(1−p_t)
            let focus = if g == 0.0 { 0.0 } else { g * pt * q.powf(g) * pt.ln() };
            (loss, sign * (focus - q.powf(g + 1.0)))
        }
    }
}

/// Mean loss over the batch and its gradient, weights first and bias last.
pub fn loss_and_grad(model: &Model, batch: &[(&[f64], bool)], obj: &Objective) -> (f64, Vec<f64>) {
    assert!(!batch.is_empty(), "loss over an empty batch");
    let dim = model.weights.len();
    let mut grad = vec![0.0; dim + 1];
    let mut total = 0.0;
    for &(x, y) in batch {
        let z = model.logit(x);
        let (l, dz) = pointwise(z, y, obj);
        total += l;
        for (g, xi) in grad[..dim].iter_mut().zip(x) {
            *g += dz * xi;
        }
        grad[dim] += dz;
    }
    let n = batch.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    (total / n, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use proptest::prelude::*;

    fn random_case(rng: &mut ChaCha8Rng, dim: usize, n: usize) -> (Model, Vec<(Vec<f64>, bool)>) {
        let model = Model {
            weights: (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            bias: rng.random_range(-1.0..1.0),
        };
        let batch = (0..n)
            .map(|_| ((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(), rng.random_bool(0.4)))
            .collect();
        (model, batch)
    }

    fn view(batch: &[(Vec<f64>, bool)]) -> Vec<(&[f64], bool)> {
        batch.iter().map(|(x, y)| (x.as_slice(), *y)).collect()
    }

    #[test]
    fn half_probability_is_ln2() {
        let m = Model::zeros(3);
        let x = [0.3, -1.0, 2.0];
        let (l, _) = loss_and_grad(&m, &[(&x, true)], &Objective::new(LossKind::CrossEntropy, 0.0));
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn focal_gamma_zero_is_cross_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let (m, b) = random_case(&mut rng, 8, 12);
            let (l1, g1) = loss_and_grad(&m, &view(&b), &Objective::new(LossKind::CrossEntropy, 0.0));
            let (l2, g2) = loss_and_grad(&m, &view(&b), &Objective::new(LossKind::Focal, 0.0));
            assert!((l1 - l2).abs() < 1e-12);
            for (a, b) in g1.iter().zip(&g2) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn weighted_with_balanced_counts_is_plain() {
        let cfg = TrainConfig {
            loss: LossKind::WeightedCrossEntropy,
            ..TrainConfig::default()
        };
        let obj = Objective::from_config(&cfg, &[true, false, true, false]);
        assert_eq!(obj.class_weights, [1.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (m, b) = random_case(&mut rng, 4, 6);
        let plain = loss_and_grad(&m, &view(&b), &Objective::new(LossKind::CrossEntropy, 0.0));
        assert_eq!(loss_and_grad(&m, &view(&b), &obj), plain);
    }

    #[test]
    fn weights_are_inverse_frequency() {
        let cfg = TrainConfig {
            loss: LossKind::WeightedCrossEntropy,
            ..TrainConfig::default()
        };
        let labels = [true, false, false, false];
        let obj = Objective::from_config(&cfg, &labels);
        assert!((obj.class_weights[1] / obj.class_weights[0] - 3.0).abs() < 1e-12);
    }

    /// Central differences with h = 1e-6; relative error is measured against
    /// max(|analytic|, |numeric|, 1e-6).
    pub(crate) fn max_relative_error(obj: &Objective, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for _ in 0..50 {
            let dim = rng.random_range(1..10);
            let n = rng.random_range(1..16);
            let (m, b) = random_case(&mut rng, dim, n);
            let batch = view(&b);
            let (_, grad) = loss_and_grad(&m, &batch, obj);
            for k in 0..=dim {
                let mut plus = m.clone();
                let mut minus = m.clone();
                if k < dim {
                    plus.weights[k] += h;
                    minus.weights[k] -= h;
                } else {
                    plus.bias += h;
                    minus.bias -= h;
                }
                let num = (loss_and_grad(&plus, &batch, obj).0 - loss_and_grad(&minus, &batch, obj).0) / (2.0 * h);
                let rel = (grad[k] - num).abs() / grad[k].abs().max(num.abs()).max(1e-6);
                worst = worst.max(rel);
            }
        }
        worst
    }

    #[test]
    fn gradients_match_finite_differences() {
        let losses = [
            Objective::new(LossKind::CrossEntropy, 0.0),
            Objective {
                loss: LossKind::WeightedCrossEntropy,
                focal_gamma: 0.0,
                class_weights: [0.7, 1.9],
            },
            Objective::new(LossKind::Focal, 2.0),
        ];
        for (i, obj) in losses.iter().enumerate() {
            let e = max_relative_error(obj, 100 + i as u64);
            assert!(e < 1e-4, "{:?}: {e}", obj.loss);
        }
    }

    fn arb_case() -> impl Strategy<Value = (Model, Vec<(Vec<f64>, bool)>)> {
        (1usize..12).prop_flat_map(|dim| {
            (
                proptest::collection::vec(-3.0..3.0f64, dim),
                -3.0..3.0f64,
                proptest::collection::vec((proptest::collection::vec(-2.0..2.0f64, dim), any::<bool>()), 1..20),
            )
                .prop_map(|(weights, bias, batch)| (Model { weights, bias }, batch))
        })
    }

    proptest! {
        #[test]
        fn focal_gamma_zero_equals_cross_entropy_prop((m, b) in arb_case()) {
            let ce = loss_and_grad(&m, &view(&b), &Objective::new(LossKind::CrossEntropy, 0.0));
            let focal = loss_and_grad(&m, &view(&b), &Objective::new(LossKind::Focal, 0.0));
            prop_assert!((ce.0 - focal.0).abs() < 1e-12);
            for (a, b) in ce.1.iter().zip(&focal.1) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn balanced_weighting_is_plain_prop((m, b) in arb_case(), pairs in 1usize..20) {
            let labels: Vec<bool> = (0..2 * pairs).map(|i| i % 2 == 0).collect();
            let cfg = TrainConfig { loss: LossKind::WeightedCrossEntropy, ..TrainConfig::default() };
            let weighted = Objective::from_config(&cfg, &labels);
            let plain = Objective::new(LossKind::CrossEntropy, 0.0);
            prop_assert_eq!(loss_and_grad(&m, &view(&b), &weighted), loss_and_grad(&m, &view(&b), &plain));
        }
    }
}
