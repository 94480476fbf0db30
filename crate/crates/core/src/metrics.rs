//! Imputation error metrics and ranking metrics for the outcome.

use alloc::vec::Vec;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImputationMetrics {
    pub mae: f64,
    pub mre: f64,
    pub mse: f64,
}

/// MAE, MRE (total absolute error over total absolute truth) and MSE over
/// aligned `(truth, estimate)` pairs.
pub fn imputation_metrics(truth: &[f64], estimate: &[f64]) -> Result<ImputationMetrics> {
    if truth.is_empty() {
        return Err(Error::EmptyRecord);
    }
    if truth.len() != estimate.len() {
        return Err(Error::ShapeMismatch {
            op: "imputation_metrics",
            left: alloc::vec![truth.len()],
            right: alloc::vec![estimate.len()],
        });
    }
    let n = truth.len() as f64;
    let (mut abs, mut sq, mut mag) = (0.0, 0.0, 0.0);
    for (&x, &e) in truth.iter().zip(estimate) {
        let r = e - x;
        abs += libm::fabs(r);
        sq += r * r;
        mag += libm::fabs(x);
    }
    let mre = if mag > 0.0 {
        abs / mag
    } else if abs == 0.0 {
        0.0
    } else {
        return Err(Error::ZeroDenominator);
    };
    Ok(ImputationMetrics {
        mae: abs / n,
        mre,
        mse: sq / n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassificationMetrics {
    pub auc: f64,
    pub auprc: f64,
}

/// Area under the ROC curve as the Mann-Whitney statistic: the probability
/// that a random positive outranks a random negative, ties counting one half.
pub fn roc_auc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let pos = labels.iter().filter(|&&y| y == 1.0).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    // Sum of positive ranks with tied groups sharing their average rank.
    let order = ascending(scores);
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        let group_pos = order[i..=j].iter().filter(|&&k| labels[k] == 1.0).count();
        rank_sum += avg_rank * group_pos as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Average precision: `Σ (R_k - R_{k-1}) P_k` over distinct score thresholds,
/// from the highest down.
pub fn average_precision(scores: &[f64], labels: &[f64]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let pos = labels.iter().filter(|&&y| y == 1.0).count();
    if pos == 0 {
        return Err(Error::NoPositives);
    }
    let mut order = ascending(scores);
    order.reverse();
    let (mut tp, mut seen, mut ap, mut prev_recall) = (0usize, 0usize, 0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        tp += order[i..=j].iter().filter(|&&k| labels[k] == 1.0).count();
        seen += j - i + 1;
        let recall = tp as f64 / pos as f64;
        ap += (recall - prev_recall) * (tp as f64 / seen as f64);
        prev_recall = recall;
        i = j + 1;
    }
    Ok(ap)
}

pub fn classification_metrics(scores: &[f64], labels: &[f64]) -> Result<ClassificationMetrics> {
    Ok(ClassificationMetrics {
        auc: roc_auc(scores, labels)?,
        auprc: average_precision(scores, labels)?,
    })
}

fn check_lengths(scores: &[f64], labels: &[f64]) -> Result<()> {
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(Error::ShapeMismatch {
            op: "classification_metrics",
            left: alloc::vec![scores.len()],
            right: alloc::vec![labels.len()],
        });
    }
    Ok(())
}

fn ascending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    order
}

/// `mean ± sample std` of a series of fold results.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, libm::sqrt(var))
}
