use super::data::PatchSample;
use super::features::features_of_input;
use super::model::Model;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

/// Rates with an empty denominator are reported as 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub confusion: Confusion,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn metrics_from(predicted: &[bool], actual: &[bool]) -> Metrics {
    assert_eq!(predicted.len(), actual.len());
    let mut c = Confusion::default();
    for (&p, &a) in predicted.iter().zip(actual) {
        match (p, a) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    let n = predicted.len();
    Metrics {
        n,
        accuracy: ratio(c.tp + c.tn, n),
        sensitivity: ratio(c.tp, c.tp + c.fn_),
        specificity: ratio(c.tn, c.tn + c.fp),
        confusion: c,
    }
}

pub fn predict(model: &Model, samples: &[PatchSample], jobs: usize) -> Vec<f64> {
    let run = || {
        samples
            .par_iter()
            .map(|s| model.predict_proba(features_of_input(&s.image).values()))
            .collect()
    };
    match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
        Ok(pool) => pool.install(run),
        Err(_) => run(),
    }
}

pub fn evaluate(model: &Model, samples: &[PatchSample], jobs: usize) -> Metrics {
    let predicted: Vec<bool> = predict(model, samples, jobs).into_iter().map(|p| p >= THRESHOLD).collect();
    let actual: Vec<bool> = samples.iter().map(|s| s.label).collect();
    metrics_from(&predicted, &actual)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_correct() {
        let y = [true, false, true, true];
        let m = metrics_from(&y, &y);
        assert_eq!((m.accuracy, m.specificity, m.sensitivity), (1.0, 1.0, 1.0));
    }

    #[test]
    fn all_negative_on_balanced() {
        let y = [true, false, true, false];
        let m = metrics_from(&[false; 4], &y);
        assert_eq!((m.accuracy, m.specificity, m.sensitivity), (0.5, 1.0, 0.0));
    }

    /// Twenty cases tallied by hand: 7 TP, 2 FN, 3 FP, 8 TN.
    #[test]
    fn hand_counted_twenty() {
        let actual = "11111111100000000000";
        let predicted = "11111110011100000000";
        let a: Vec<bool> = actual.chars().map(|c| c == '1').collect();
        let p: Vec<bool> = predicted.chars().map(|c| c == '1').collect();
        let m = metrics_from(&p, &a);
        assert_eq!(m.confusion, Confusion { tp: 7, fp: 3, tn: 8, fn_: 2 });
        assert!((m.accuracy - 15.0 / 20.0).abs() < 1e-15);
        assert!((m.sensitivity - 7.0 / 9.0).abs() < 1e-15);
        assert!((m.specificity - 8.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn confusion_serializes_fn_key() {
        let json = serde_json::to_string(&Confusion { tp: 1, fp: 2, tn: 3, fn_: 4 }).unwrap();
        assert_eq!(json, r#"{"tp":1,"fp":2,"tn":3,"fn":4}"#);
    }
}
