//! Per-method metrics documents and the side-by-side comparison.

use crate::error::CliError;
use serde::{Deserialize, Serialize};
use spinepatch::annotations::{DatasetManifest, Method, Split};
use spinepatch::classifier::{Metrics, TrainConfig};
use spinepatch::pipeline::ClassCounts;
use std::collections::BTreeMap;
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Balance {
    pub present: usize,
    pub absent: usize,
    pub positive_fraction: f64,
}

impl From<ClassCounts> for Balance {
    fn from(c: ClassCounts) -> Self {
        Self {
            present: c.present,
            absent: c.absent,
            positive_fraction: c.positive_fraction(),
        }
    }
}

/// Patch balance of one method, optionally restricted to a split.
pub fn balance_of(manifest: &DatasetManifest, method: Method, split: Option<Split>) -> Balance {
    ClassCounts::of(
        manifest
            .patches_for(method)
            .filter(|p| split.is_none() || p.split == split),
    )
    .into()
}

/// What `train` writes to `metrics/{method}.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodMetrics {
    pub method: Method,
    pub config: TrainConfig,
    pub final_loss: f64,
    pub train: Metrics,
    pub test: Metrics,
    pub train_balance: Balance,
    pub test_balance: Balance,
}

impl MethodMetrics {
    fn split(&self, s: Split) -> (&Metrics, &Balance) {
        match s {
            Split::Train => (&self.train, &self.train_balance),
            Split::Test => (&self.test, &self.test_balance),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub method: Method,
    pub split: Split,
    pub n: usize,
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub positive_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
    /// Positive share over every patch of each method.
    pub class_balance: BTreeMap<Method, Balance>,
    /// segpatch test accuracy minus tiling test accuracy.
    pub gap: f64,
}

pub fn compare_report(
    manifest: &DatasetManifest,
    tiling: &MethodMetrics,
    segpatch: &MethodMetrics,
) -> Result<CompareReport, CliError> {
    for (want, got) in [(Method::Tiling, tiling), (Method::Segpatch, segpatch)] {
        if got.method != want {
            return Err(CliError::validation(format!(
                "expected {want} metrics, got {} metrics",
                got.method
            )));
        }
    }
    let mut rows = Vec::new();
    for m in [tiling, segpatch] {
        for s in [Split::Train, Split::Test] {
            let (metrics, balance) = m.split(s);
            rows.push(CompareRow {
                method: m.method,
                split: s,
                n: metrics.n,
                accuracy: metrics.accuracy,
                sensitivity: metrics.sensitivity,
                specificity: metrics.specificity,
                positive_fraction: balance.positive_fraction,
            });
        }
    }
    rows.sort_by_key(|r| (r.method, r.split));
    Ok(CompareReport {
        rows,
        class_balance: [Method::Tiling, Method::Segpatch]
            .into_iter()
            .map(|m| (m, balance_of(manifest, m, None)))
            .collect(),
        gap: segpatch.test.accuracy - tiling.test.accuracy,
    })
}

impl CompareReport {
    pub fn to_markdown(&self) -> String {
        let mut s = String::from(
            "| method | split | n | accuracy | sensitivity | specificity | positive fraction |\n\
             |---|---|---:|---:|---:|---:|---:|\n",
        );
        for r in &self.rows {
            writeln!(
                s,
                "| {} | {} | {} | {:.3} | {:.3} | {:.3} | {:.3} |",
                r.method,
                r.split.as_str(),
                r.n,
                r.accuracy,
                r.sensitivity,
                r.specificity,
                r.positive_fraction
            )
            .unwrap();
        }
        s.push('\n');
        for (m, b) in &self.class_balance {
            writeln!(
                s,
                "- {m}: {} present / {} absent ({:.3} positive)",
                b.present, b.absent, b.positive_fraction
            )
            .unwrap();
        }
        writeln!(s, "\nTest accuracy gap (segpatch - tiling): {:+.3}", self.gap).unwrap();
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use spinepatch::classifier::metrics_from;

    fn metrics(method: Method, train: (&[bool], &[bool]), test: (&[bool], &[bool])) -> MethodMetrics {
        let bal = |y: &[bool]| {
            Balance::from(ClassCounts {
                present: y.iter().filter(|&&v| v).count(),
                absent: y.iter().filter(|&&v| !v).count(),
            })
        };
        MethodMetrics {
            method,
            config: TrainConfig::default(),
            final_loss: 0.3,
            train: metrics_from(train.0, train.1),
            test: metrics_from(test.0, test.1),
            train_balance: bal(train.1),
            test_balance: bal(test.1),
        }
    }

    const Y: [bool; 8] = [true, true, false, false, false, true, false, false];

    #[test]
    fn identical_metrics_have_zero_gap() {
        let t = metrics(Method::Tiling, (&Y, &Y), (&Y, &Y));
        let mut s = t.clone();
        s.method = Method::Segpatch;
        let r = compare_report(&DatasetManifest::new(vec![]), &t, &s).unwrap();
        assert_eq!(r.gap, 0.0);
    }

    #[test]
    fn gap_matches_recomputation() {
        let pred_t = [true, false, false, true, false, false, true, false];
        let pred_s = [true, true, false, false, true, true, false, false];
        let t = metrics(Method::Tiling, (&Y, &Y), (&pred_t, &Y));
        let s = metrics(Method::Segpatch, (&Y, &Y), (&pred_s, &Y));
        let correct = |p: &[bool]| p.iter().zip(Y).filter(|(a, b)| **a == *b).count() as f64 / 8.0;
        // tiling 4/8, segpatch 7/8
        let expected = correct(&pred_s) - correct(&pred_t);
        assert_eq!(expected, 0.375);
        let r = compare_report(&DatasetManifest::new(vec![]), &t, &s).unwrap();
        assert!((r.gap - expected).abs() < 1e-15);
    }

    #[test]
    fn rows_sorted_and_stable() {
        let t = metrics(Method::Tiling, (&Y, &Y), (&Y, &Y));
        let s = metrics(Method::Segpatch, (&Y, &Y), (&Y, &Y));
        let m = DatasetManifest::new(vec![]);
        let a = compare_report(&m, &t, &s).unwrap();
        let order: Vec<_> = a.rows.iter().map(|r| (r.method, r.split)).collect();
        assert_eq!(
            order,
            [
                (Method::Tiling, Split::Train),
                (Method::Tiling, Split::Test),
                (Method::Segpatch, Split::Train),
                (Method::Segpatch, Split::Test)
            ]
        );
        let b = compare_report(&m, &t, &s).unwrap();
        assert_eq!(a.to_markdown(), b.to_markdown());
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn swapped_inputs_rejected() {
        let t = metrics(Method::Tiling, (&Y, &Y), (&Y, &Y));
        let s = metrics(Method::Segpatch, (&Y, &Y), (&Y, &Y));
        assert!(compare_report(&DatasetManifest::new(vec![]), &s, &t).is_err());
    }
}
