//! Balanced GZSL accuracy, exact accuracy in discrete worlds and the Jensen
//! bound chain behind the adjusted decision rule.

mod bounds;
mod report;

pub use bounds::{exact_accuracy, jensen_bounds, one_hot_rule, rule_comparison, BoundReport, ExactAccuracy, RuleRow};
pub use report::{ReportRow, CSV_HEADER};

use crate::datagen::{GzslDataset, SplitKind};
use crate::zla::{Predict, ZlaError};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("{0} test split is empty")]
    EmptySplit(SplitKind),
    #[error("classifier predicted class {class}, but only {classes} exist")]
    PredictionRange { class: usize, classes: usize },
    #[error("{what}: {found} rows, expected {expected}")]
    RowCount {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("q row {row} sums to {sum}, expected 1")]
    NotNormalized { row: usize, sum: f64 },
    #[error("q row {row} has an invalid entry")]
    InvalidEntry { row: usize },
    #[error("class {0} has zero mass in the world; its accuracy is undefined")]
    EmptyClass(usize),
    #[error("q({class}|x{row}) is zero; the bounds need a strictly positive classifier")]
    ZeroQ { row: usize, class: usize },
    #[error("priors give class {class} mass {prior}, the world has {world}")]
    PriorMismatch { class: usize, prior: f64, world: f64 },
    #[error(transparent)]
    Classifier(#[from] ZlaError),
}

/// `2/(1/a + 1/b)`, or 0 when either accuracy is 0.
pub fn harmonic_mean(seen: f64, unseen: f64) -> f64 {
    if seen <= 0.0 || unseen <= 0.0 {
        0.0
    } else {
        2.0 / (1.0 / seen + 1.0 / unseen)
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 { 0.0 } else { sum / n as f64 }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GzslReport {
    /// `A(y)`, `None` for classes without test rows.
    pub per_class: Vec<Option<f64>>,
    pub correct: Vec<usize>,
    pub total: Vec<usize>,
    pub acc_seen: f64,
    pub acc_unseen: f64,
    pub acc_h: f64,
    pub warnings: Vec<String>,
}

impl GzslReport {
    /// Builds the report from per-class correct/total counts.
    pub fn from_counts(is_seen: &[bool], correct: Vec<usize>, total: Vec<usize>) -> Self {
        let mut warnings = Vec::new();
        let per_class: Vec<Option<f64>> = correct
            .iter()
            .zip(&total)
            .enumerate()
            .map(|(y, (&c, &t))| {
                if t == 0 {
                    warnings.push(format!("class {y} has no test rows and is excluded"));
                    None
                } else {
                    Some(c as f64 / t as f64)
                }
            })
            .collect();
        let domain = |seen: bool| {
            mean(per_class.iter().zip(is_seen).filter(|(_, &s)| s == seen).filter_map(|(a, _)| *a))
        };
        let (acc_seen, acc_unseen) = (domain(true), domain(false));
        Self {
            per_class,
            correct,
            total,
            acc_seen,
            acc_unseen,
            acc_h: harmonic_mean(acc_seen, acc_unseen),
            warnings,
        }
    }
}

/// Per-class top-1 accuracy on the two test splits.
pub fn evaluate<P: Predict + ?Sized>(classifier: &P, dataset: &GzslDataset) -> Result<GzslReport, MetricsError> {
    let k = dataset.classes().len();
    let mut correct = vec![0usize; k];
    let mut total = vec![0usize; k];
    for kind in [SplitKind::TestSeen, SplitKind::TestUnseen] {
        let split = dataset.split(kind);
        if split.is_empty() {
            return Err(MetricsError::EmptySplit(kind));
        }
        let predicted = classifier.predict_rows(&split.features)?;
        if predicted.len() != split.len() {
            return Err(MetricsError::RowCount {
                what: "predictions",
                expected: split.len(),
                found: predicted.len(),
            });
        }
        for (&p, &y) in predicted.iter().zip(&split.labels) {
            if p >= k {
                return Err(MetricsError::PredictionRange { class: p, classes: k });
            }
            total[y] += 1;
            correct[y] += usize::from(p == y);
        }
    }
    Ok(GzslReport::from_counts(&dataset.classes().seen_flags(), correct, total))
}
