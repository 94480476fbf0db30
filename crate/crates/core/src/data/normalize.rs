use alloc::vec;
use alloc::vec::Vec;

use super::MaskedBatch;

/// Per-variable mean and population standard deviation of observed entries.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn from_batch(batch: &MaskedBatch) -> Self {
        let d = batch.features;
        let mut sum = vec![0.0; d];
        let mut count = vec![0usize; d];
        for (i, (&v, &m)) in batch.values.iter().zip(&batch.mask).enumerate() {
            if m == 1.0 {
                sum[i % d] += v;
                count[i % d] += 1;
            }
        }
        let mean: Vec<f64> = (0..d)
            .map(|j| if count[j] > 0 { sum[j] / count[j] as f64 } else { 0.0 })
            .collect();
        let mut sq = vec![0.0; d];
        for (i, (&v, &m)) in batch.values.iter().zip(&batch.mask).enumerate() {
            if m == 1.0 {
                let r = v - mean[i % d];
                sq[i % d] += r * r;
            }
        }
        let std = (0..d)
            .map(|j| if count[j] > 0 { libm::sqrt(sq[j] / count[j] as f64) } else { 0.0 })
            .collect();
        NormStats { mean, std }
    }

    /// Divisor used for variable `d`; constant variables are only shifted.
    pub fn scale(&self, d: usize) -> f64 {
        if self.std[d] > 0.0 {
            self.std[d]
        } else {
            1.0
        }
    }

    pub fn apply(&self, d: usize, raw: f64) -> f64 {
        (raw - self.mean[d]) / self.scale(d)
    }

    pub fn invert(&self, d: usize, z: f64) -> f64 {
        z * self.scale(d) + self.mean[d]
    }
}

/// Z-scores observed entries. Missing entries stay exactly zero. When `stats`
/// is `None` they are computed from this batch's observed entries.
pub fn normalize(batch: &MaskedBatch, stats: Option<&NormStats>) -> (MaskedBatch, NormStats) {
    let stats = stats.cloned().unwrap_or_else(|| NormStats::from_batch(batch));
    let mut out = batch.clone();
    let d = batch.features;
    for (i, (v, &m)) in out.values.iter_mut().zip(&batch.mask).enumerate() {
        *v = if m == 1.0 { stats.apply(i % d, *v) } else { 0.0 };
    }
    (out, stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(values: Vec<f64>, mask: Vec<f64>) -> MaskedBatch {
        let t = values.len();
        MaskedBatch::from_grid(t, 1, values, mask, (0..t).map(|i| i as f64).collect(), vec![0.0])
            .unwrap()
    }

    #[test]
    fn two_values_map_to_unit_scores() {
        let (n, s) = normalize(&batch(vec![0.0, 2.0, 0.0], vec![1.0, 1.0, 0.0]), None);
        assert_eq!(n.values, [-1.0, 1.0, 0.0]);
        assert_eq!((s.mean[0], s.std[0]), (1.0, 1.0));
    }

    #[test]
    fn constant_variable_is_only_shifted() {
        let (n, s) = normalize(&batch(vec![5.0, 5.0], vec![1.0, 1.0]), None);
        assert_eq!(n.values, [0.0, 0.0]);
        assert_eq!(s.scale(0), 1.0);
    }
}
