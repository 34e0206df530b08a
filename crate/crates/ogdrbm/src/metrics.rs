//! Classification evaluation: confusion matrix, overall/average efficiency,
//! TPR/TNR/Gmean for the binary case, and the imbalance factor.
//!
//! Binary convention: class 1 is the positive class. The ingestion layer
//! maps the minority (bad-credit) class to label 1 for the credit datasets,
//! so TPR reads as minority-class recall.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// s-by-s count matrix; `counts[i][k]` is the number of samples of true
/// class i+1 predicted as class k+1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<usize>>,
    pub class_totals: Vec<usize>,
    pub total: usize,
}

/// Tally predictions against labels (both in 1..=s).
pub fn confusion(predictions: &[usize], labels: &[usize], s: usize) -> Result<ConfusionMatrix> {
    if predictions.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            context: "confusion",
            expected: labels.len(),
            actual: predictions.len(),
        });
    }
    let mut counts = vec![vec![0usize; s]; s];
    for (&p, &l) in predictions.iter().zip(labels) {
        if p < 1 || p > s {
            return Err(Error::LabelOutOfRange { label: p, s });
        }
        if l < 1 || l > s {
            return Err(Error::LabelOutOfRange { label: l, s });
        }
        counts[l - 1][p - 1] += 1;
    }
    let class_totals: Vec<usize> = counts.iter().map(|row| row.iter().sum()).collect();
    let total = class_totals.iter().sum();
    Ok(ConfusionMatrix {
        counts,
        class_totals,
        total,
    })
}

impl ConfusionMatrix {
    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    fn diagonal_sum(&self) -> usize {
        self.counts.iter().enumerate().map(|(i, row)| row[i]).sum()
    }
}

/// Overall efficiency: 100 * (correct / total), in percent.
pub fn overall_efficiency(cm: &ConfusionMatrix) -> Result<f64> {
    if cm.total == 0 {
        return Err(Error::EmptyInput("overall_efficiency"));
    }
    Ok(100.0 * cm.diagonal_sum() as f64 / cm.total as f64)
}

/// Average efficiency: mean of per-class recalls, in percent.
pub fn average_efficiency(cm: &ConfusionMatrix) -> Result<f64> {
    let s = cm.classes();
    let mut acc = 0.0;
    for i in 0..s {
        if cm.class_totals[i] == 0 {
            return Err(Error::DegenerateClass { class: i + 1 });
        }
        acc += cm.counts[i][i] as f64 / cm.class_totals[i] as f64;
    }
    Ok(100.0 * acc / s as f64)
}

/// True positive rate, binary only (class 1 positive).
pub fn tpr(cm: &ConfusionMatrix) -> Result<f64> {
    binary_rate(cm, 0)
}

/// True negative rate, binary only (class 2 negative).
pub fn tnr(cm: &ConfusionMatrix) -> Result<f64> {
    binary_rate(cm, 1)
}

fn binary_rate(cm: &ConfusionMatrix, class: usize) -> Result<f64> {
    if cm.classes() != 2 {
        return Err(Error::BinaryOnly { s: cm.classes() });
    }
    if cm.class_totals[class] == 0 {
        return Err(Error::DegenerateClass { class: class + 1 });
    }
    Ok(cm.counts[class][class] as f64 / cm.class_totals[class] as f64)
}

/// Geometric mean of the two rates.
pub fn gmean(tpr: f64, tnr: f64) -> f64 {
    (tpr * tnr).sqrt()
}

/// Imbalance factor: 1 - (s/N) * min_i N_i. Zero for balanced data.
pub fn imbalance_factor(class_counts: &[usize]) -> Result<f64> {
    if class_counts.is_empty() {
        return Err(Error::EmptyInput("imbalance_factor"));
    }
    let mut min = usize::MAX;
    for (i, &c) in class_counts.iter().enumerate() {
        if c == 0 {
            return Err(Error::DegenerateClass { class: i + 1 });
        }
        min = min.min(c);
    }
    let s = class_counts.len() as f64;
    let n: usize = class_counts.iter().sum();
    Ok(1.0 - s * min as f64 / n as f64)
}

/// Flat metrics report, one per evaluated split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub eta_o: f64,
    pub eta_a: f64,
    /// Binary-only rates; None for multi-class runs.
    pub tpr: Option<f64>,
    pub tnr: Option<f64>,
    pub gmean: Option<f64>,
    pub confusion: ConfusionMatrix,
}

impl MetricsReport {
    pub fn from_confusion(cm: ConfusionMatrix) -> Result<Self> {
        let eta_o = overall_efficiency(&cm)?;
        let eta_a = average_efficiency(&cm)?;
        let (tpr_v, tnr_v, gmean_v) = if cm.classes() == 2 {
            let t = tpr(&cm)?;
            let n = tnr(&cm)?;
            (Some(t), Some(n), Some(gmean(t, n)))
        } else {
            (None, None, None)
        };
        Ok(MetricsReport {
            eta_o,
            eta_a,
            tpr: tpr_v,
            tnr: tnr_v,
            gmean: gmean_v,
            confusion: cm,
        })
    }
}
