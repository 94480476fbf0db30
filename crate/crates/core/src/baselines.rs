//! Non-learned imputers used as comparison floors.

use alloc::vec::Vec;

use crate::data::MaskedBatch;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FillMethod {
    /// Per-variable training mean.
    Mean,
    /// Last observation carried forward; the training mean before the first one.
    Forward,
    /// Leave the zero fill in place.
    Zero,
}

/// Per-variable mean over observed entries; 0 for a variable never observed.
pub fn observed_means(batch: &MaskedBatch) -> Vec<f64> {
    let d = batch.features;
    let mut sum = alloc::vec![0.0; d];
    let mut count = alloc::vec![0usize; d];
    for (i, (&v, &m)) in batch.values.iter().zip(&batch.mask).enumerate() {
        if m == 1.0 {
            sum[i % d] += v;
            count[i % d] += 1;
        }
    }
    sum.iter()
        .zip(&count)
        .map(|(&s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
        .collect()
}

/// Returns a copy of `batch` whose missing entries are filled; mask and
/// observed values are unchanged. `train_means` is required for `Mean` and
/// `Forward`.
pub fn fill(batch: &MaskedBatch, method: FillMethod, train_means: Option<&[f64]>) -> Result<MaskedBatch> {
    let d = batch.features;
    let means = match (method, train_means) {
        (FillMethod::Zero, _) => None,
        (_, Some(m)) if m.len() == d => Some(m),
        (_, Some(m)) => {
            return Err(Error::ShapeMismatch {
                op: "fill",
                left: alloc::vec![d],
                right: alloc::vec![m.len()],
            })
        }
        (_, None) => return Err(Error::Invalid("mean and forward fill need training means".into())),
    };
    let mut out = batch.clone();
    let Some(means) = means else {
        return Ok(out);
    };
    for n in 0..batch.samples {
        for j in 0..d {
            let mut carry = means[j];
            for t in 0..batch.steps {
                let i = batch.idx(n, t, j);
                if batch.mask[i] == 1.0 {
                    if method == FillMethod::Forward {
                        carry = batch.values[i];
                    }
                } else {
                    out.values[i] = carry;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn batch(values: Vec<f64>, mask: Vec<f64>, steps: usize, features: usize) -> MaskedBatch {
        let times = (0..steps).map(|t| t as f64).collect();
        MaskedBatch::from_grid(steps, features, values, mask, times, vec![0.0]).unwrap()
    }

    #[test]
    fn zero_fill_is_identity() {
        let b = batch(vec![1.0, 0.0, 2.0, 0.0], vec![1.0, 0.0, 1.0, 0.0], 2, 2);
        assert_eq!(fill(&b, FillMethod::Zero, None).unwrap().values, b.values);
    }

    #[test]
    fn mean_fill_example() {
        let b = batch(vec![5.0, 0.0], vec![1.0, 0.0], 2, 1);
        let out = fill(&b, FillMethod::Mean, Some(&[3.0])).unwrap();
        assert_eq!(out.values, vec![5.0, 3.0]);
        assert_eq!(fill(&out, FillMethod::Mean, Some(&[3.0])).unwrap(), out);
    }

    #[test]
    fn forward_fill_cold_start_uses_mean() {
        let b = batch(vec![0.0, 4.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0], 4, 1);
        let out = fill(&b, FillMethod::Forward, Some(&[1.5])).unwrap();
        assert_eq!(out.values, vec![1.5, 4.0, 4.0, 4.0]);
    }

    #[test]
    fn means_need_stats() {
        let b = batch(vec![5.0, 0.0], vec![1.0, 0.0], 2, 1);
        assert!(fill(&b, FillMethod::Mean, None).is_err());
        assert_eq!(observed_means(&b), vec![5.0]);
    }
}
