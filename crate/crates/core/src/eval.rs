//! Confusion matrix, overall/average accuracy and wall-clock timing.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("no samples to evaluate")]
    Empty,
    #[error("length mismatch: {truth} true labels vs {predicted} predictions")]
    LengthMismatch { truth: usize, predicted: usize },
    #[error("unknown label {0}")]
    UnknownLabel(u16),
    #[error("need at least two classes, got {0}")]
    TooFewClasses(usize),
    #[error("class {0} never appears in test set")]
    EmptyClass(u16),
}

pub type Result<T, E = EvalError> = std::result::Result<T, E>;

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub class_labels: Vec<u16>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    /// Recall of each class; `None` for classes with no test samples.
    pub fn per_class(&self) -> Vec<Option<f64>> {
        self.counts
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let total: u64 = row.iter().sum();
                (total > 0).then(|| row[i] as f64 / total as f64)
            })
            .collect()
    }
}

pub fn confusion(truth: &[u16], predicted: &[u16], class_labels: &[u16]) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(EvalError::LengthMismatch {
            truth: truth.len(),
            predicted: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut labels = class_labels.to_vec();
    labels.sort_unstable();
    labels.dedup();
    if labels.len() < 2 {
        return Err(EvalError::TooFewClasses(labels.len()));
    }
    let index = |l: u16| labels.binary_search(&l).map_err(|_| EvalError::UnknownLabel(l));
    let c = labels.len();
    let mut counts = vec![vec![0u64; c]; c];
    for (&t, &p) in truth.iter().zip(predicted) {
        counts[index(t)?][index(p)?] += 1;
    }
    Ok(ConfusionMatrix {
        class_labels: labels,
        counts,
    })
}

/// Correct predictions over all evaluated samples.
pub fn overall_accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::Empty);
    }
    Ok(cm.correct() as f64 / total as f64)
}

/// Unweighted mean of per-class accuracies.
pub fn average_accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let per_class = cm.per_class();
    let mut sum = 0.0;
    for (i, acc) in per_class.iter().enumerate() {
        sum += acc.ok_or(EvalError::EmptyClass(cm.class_labels[i]))?;
    }
    Ok(sum / per_class.len() as f64)
}

/// Runs `task` and returns its result with the elapsed monotonic time.
pub fn run_timed<T>(task: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = task();
    (out, start.elapsed().as_secs_f64())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub oa: f64,
    pub aa: f64,
    pub per_class: Vec<f64>,
    pub class_labels: Vec<u16>,
    pub elapsed_seconds: f64,
    pub selected_band_count: usize,
    pub train_fraction: f64,
    pub confusion: ConfusionMatrix,
}

impl EvalReport {
    /// Requires every class to appear among the true labels.
    pub fn from_confusion(
        confusion: ConfusionMatrix,
        elapsed_seconds: f64,
        selected_band_count: usize,
        train_fraction: f64,
    ) -> Result<Self> {
        let oa = overall_accuracy(&confusion)?;
        let aa = average_accuracy(&confusion)?;
        let per_class = confusion.per_class().into_iter().map(|a| a.unwrap_or(0.0)).collect();
        Ok(EvalReport {
            oa,
            aa,
            per_class,
            class_labels: confusion.class_labels.clone(),
            elapsed_seconds,
            selected_band_count,
            train_fraction,
            confusion,
        })
    }
}

/// Fraction as a percentage with two decimals, e.g. `0.75 -> "75.00"`.
pub fn percent(fraction: f64) -> String {
    format!("{:.2}", fraction * 100.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(rows: Vec<Vec<u64>>) -> ConfusionMatrix {
        ConfusionMatrix {
            class_labels: (1..=rows.len() as u16).collect(),
            counts: rows,
        }
    }

    #[test]
    fn confusion_examples() {
        let perfect = confusion(&[1, 2, 2, 3], &[1, 2, 2, 3], &[1, 2, 3]).unwrap();
        assert_eq!(perfect.counts, vec![vec![1, 0, 0], vec![0, 2, 0], vec![0, 0, 1]]);

        let m = confusion(&[1, 1, 2, 2], &[1, 2, 2, 2], &[1, 2]).unwrap();
        assert_eq!(m.counts, vec![vec![1, 1], vec![0, 2]]);

        assert_eq!(confusion(&[], &[], &[1, 2]), Err(EvalError::Empty));
        assert_eq!(confusion(&[1, 4], &[1, 2], &[1, 2]), Err(EvalError::UnknownLabel(4)));
        assert_eq!(
            confusion(&[1], &[1, 2], &[1, 2]),
            Err(EvalError::LengthMismatch { truth: 1, predicted: 2 })
        );
    }

    #[test]
    fn accuracy_examples() {
        let diag = cm(vec![vec![3, 0], vec![0, 5]]);
        assert_eq!(overall_accuracy(&diag).unwrap(), 1.0);
        assert_eq!(average_accuracy(&diag).unwrap(), 1.0);

        let m = cm(vec![vec![1, 1], vec![0, 2]]);
        assert_eq!(overall_accuracy(&m).unwrap(), 0.75);
        assert_eq!(average_accuracy(&m).unwrap(), 0.75);

        let wrong = cm(vec![vec![0, 4], vec![6, 0]]);
        assert_eq!(overall_accuracy(&wrong).unwrap(), 0.0);

        let imbalanced = cm(vec![vec![9, 1], vec![0, 1]]);
        assert_eq!(average_accuracy(&imbalanced).unwrap(), 0.95);
        assert_eq!(overall_accuracy(&imbalanced).unwrap(), 10.0 / 11.0);

        let missing = cm(vec![vec![2, 0], vec![0, 0]]);
        assert_eq!(average_accuracy(&missing), Err(EvalError::EmptyClass(2)));
    }

    #[test]
    fn timing_is_non_negative() {
        let ((), t1) = run_timed(|| ());
        let (v, t2) = run_timed(|| (0..1000u64).sum::<u64>());
        assert!(t1 >= 0.0 && t2 >= 0.0);
        assert_eq!(v, 499_500);
        let report = EvalReport::from_confusion(cm(vec![vec![1, 1], vec![0, 2]]), t2, 3, 0.1).unwrap();
        assert_eq!(report.elapsed_seconds, t2);
        assert_eq!(percent(report.oa), "75.00");
    }
}
