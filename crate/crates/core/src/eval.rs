//! Classification metrics: confusion matrices, accuracy, per-class
//! precision/recall/F1, macro F1, and subject-averaged confusion matrices.
//!
//! Conventions: rows are true classes, columns are predictions. Macro F1
//! averages over all five classes, including classes with no support (their
//! F1 counts as zero). Degenerate ratios (0/0) are defined as zero rather
//! than NaN so downstream CSV output stays finite.

use thiserror::Error;

use crate::NUM_CLASSES;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("confusion matrix {index} has an all-zero row for class {class}")]
    EmptyRow { index: usize, class: usize },
    #[error("no matrices to average")]
    NoMatrices,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Counts of (true class, predicted class) pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, true_class: usize, predicted: usize) {
        self.counts[true_class][predicted] += 1;
    }

    pub fn count(&self, true_class: usize, predicted: usize) -> u64 {
        self.counts[true_class][predicted]
    }

    pub fn counts(&self) -> &[[u64; NUM_CLASSES]; NUM_CLASSES] {
        &self.counts
    }

    pub fn from_counts(counts: [[u64; NUM_CLASSES]; NUM_CLASSES]) -> Self {
        ConfusionMatrix { counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (row, orow) in self.counts.iter_mut().zip(&other.counts) {
            for (c, oc) in row.iter_mut().zip(orow) {
                *c += oc;
            }
        }
    }

    /// Fraction of correct predictions; zero for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let correct: u64 = (0..NUM_CLASSES).map(|c| self.counts[c][c]).sum();
        correct as f64 / total as f64
    }

    /// Per-class recall (the row-normalized diagonal); zero for classes
    /// with no support.
    pub fn per_class_accuracy(&self) -> [f64; NUM_CLASSES] {
        let mut acc = [0.0; NUM_CLASSES];
        for c in 0..NUM_CLASSES {
            let support: u64 = self.counts[c].iter().sum();
            if support > 0 {
                acc[c] = self.counts[c][c] as f64 / support as f64;
            }
        }
        acc
    }

    pub fn per_class(&self) -> [ClassScore; NUM_CLASSES] {
        let mut scores = [ClassScore {
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
        }; NUM_CLASSES];
        for c in 0..NUM_CLASSES {
            let tp = self.counts[c][c] as f64;
            let row: u64 = self.counts[c].iter().sum();
            let col: u64 = (0..NUM_CLASSES).map(|r| self.counts[r][c]).sum();
            let precision = if col > 0 { tp / col as f64 } else { 0.0 };
            let recall = if row > 0 { tp / row as f64 } else { 0.0 };
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            scores[c] = ClassScore {
                precision,
                recall,
                f1,
            };
        }
        scores
    }

    /// Mean F1 over all classes, zero-support classes included.
    pub fn macro_f1(&self) -> f64 {
        let scores = self.per_class();
        scores.iter().map(|s| s.f1).sum::<f64>() / NUM_CLASSES as f64
    }

    /// Each row as percentages of its own total. Rows with no support
    /// come back as all zeros.
    pub fn row_normalized_pct(&self) -> [[f64; NUM_CLASSES]; NUM_CLASSES] {
        let mut out = [[0.0; NUM_CLASSES]; NUM_CLASSES];
        for (r, row) in self.counts.iter().enumerate() {
            let total: u64 = row.iter().sum();
            if total > 0 {
                for (c, &v) in row.iter().enumerate() {
                    out[r][c] = 100.0 * v as f64 / total as f64;
                }
            }
        }
        out
    }
}

/// Row-normalize each subject's matrix to percentages, then average
/// entrywise across subjects. Every matrix must have full support: a
/// missing class row means the per-subject percentages are undefined.
pub fn average_subjectwise(
    matrices: &[ConfusionMatrix],
) -> Result<[[f64; NUM_CLASSES]; NUM_CLASSES], EvalError> {
    if matrices.is_empty() {
        return Err(EvalError::NoMatrices);
    }
    let mut mean = [[0.0; NUM_CLASSES]; NUM_CLASSES];
    for (i, m) in matrices.iter().enumerate() {
        for (c, row) in m.counts.iter().enumerate() {
            if row.iter().sum::<u64>() == 0 {
                return Err(EvalError::EmptyRow { index: i, class: c });
            }
        }
        let pct = m.row_normalized_pct();
        for r in 0..NUM_CLASSES {
            for c in 0..NUM_CLASSES {
                mean[r][c] += pct[r][c];
            }
        }
    }
    let n = matrices.len() as f64;
    for row in mean.iter_mut() {
        for v in row.iter_mut() {
            *v /= n;
        }
    }
    Ok(mean)
}
