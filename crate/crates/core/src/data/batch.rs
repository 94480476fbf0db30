use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::series::{bin_to_grid, IrregularSeries};
use crate::{Error, Result};

/// `N x T x D` grid tensors for a set of samples, stored sample-major
/// (`index = (n*T + t)*D + d`).
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedBatch {
    pub samples: usize,
    pub steps: usize,
    pub features: usize,
    /// Observed values, exactly zero where missing.
    pub values: Vec<f64>,
    /// 1 where observed, 0 where missing.
    pub mask: Vec<f64>,
    /// Time since the variable was last observed.
    pub delta: Vec<f64>,
    /// `N x T` timestamps, strictly increasing per sample.
    pub times: Vec<f64>,
    pub labels: Vec<f64>,
    pub ids: Vec<String>,
}

/// Time-gap matrix for one sample. `mask` is `T x D`, `times` has length `T`.
///
/// `Δ_0 = 1`; afterwards `Δ_t = s_t - s_{t-1}` when the variable was observed
/// at `t-1`, else `s_t - s_{t-1} + Δ_{t-1}`.
pub fn build_delta(mask: &[f64], times: &[f64], features: usize) -> Result<Vec<f64>> {
    let steps = times.len();
    if mask.len() != steps * features {
        return Err(Error::ShapeMismatch {
            op: "build_delta",
            left: vec![mask.len()],
            right: vec![steps, features],
        });
    }
    let mut delta = vec![1.0; steps * features];
    for t in 1..steps {
        let gap = times[t] - times[t - 1];
        if !(gap > 0.0) {
            return Err(Error::NonIncreasingTimestamps { sample: 0, step: t });
        }
        for d in 0..features {
            let prev = (t - 1) * features + d;
            delta[t * features + d] = if mask[prev] == 1.0 {
                gap
            } else {
                gap + delta[prev]
            };
        }
    }
    Ok(delta)
}

impl MaskedBatch {
    /// Assembles a batch from sample-major grids and recomputes `delta`.
    pub fn from_grid(
        steps: usize,
        features: usize,
        values: Vec<f64>,
        mask: Vec<f64>,
        times: Vec<f64>,
        labels: Vec<f64>,
    ) -> Result<Self> {
        let samples = labels.len();
        let cells = samples * steps * features;
        if values.len() != cells || mask.len() != cells || times.len() != samples * steps {
            return Err(Error::ShapeMismatch {
                op: "masked_batch",
                left: vec![values.len(), mask.len(), times.len()],
                right: vec![samples, steps, features],
            });
        }
        let ids = (0..samples).map(|i| alloc::format!("{i}")).collect();
        let mut batch = MaskedBatch {
            samples,
            steps,
            features,
            values,
            mask,
            delta: Vec::new(),
            times,
            labels,
            ids,
        };
        for (v, &m) in batch.values.iter_mut().zip(&batch.mask) {
            if m == 0.0 {
                *v = 0.0;
            }
        }
        batch.rebuild_delta()?;
        Ok(batch)
    }

    /// Bins each series onto a `steps`-long grid with `window_hours` bins.
    /// Returns the batch and the number of events dropped past the horizon.
    pub fn from_series(
        series: &[IrregularSeries],
        features: usize,
        window_hours: f64,
        steps: usize,
    ) -> Result<(Self, usize)> {
        let mut values = Vec::with_capacity(series.len() * steps * features);
        let mut mask = Vec::with_capacity(values.capacity());
        let mut times = Vec::with_capacity(series.len() * steps);
        let mut labels = Vec::with_capacity(series.len());
        let mut dropped = 0;
        for s in series {
            if s.events.is_empty() {
                return Err(Error::Invalid(alloc::format!("patient {} has no events", s.patient_id)));
            }
            let g = bin_to_grid(s, features, window_hours, steps)?;
            values.extend(g.values);
            mask.extend(g.mask);
            times.extend(g.times);
            labels.push(f64::from(s.label));
            dropped += g.dropped;
        }
        let mut batch = Self::from_grid(steps, features, values, mask, times, labels)?;
        batch.ids = series.iter().map(|s| s.patient_id.clone()).collect();
        Ok((batch, dropped))
    }

    #[inline]
    pub fn idx(&self, n: usize, t: usize, d: usize) -> usize {
        (n * self.steps + t) * self.features + d
    }

    pub fn cells(&self) -> usize {
        self.samples * self.steps * self.features
    }

    pub fn observed(&self) -> usize {
        self.mask.iter().filter(|&&m| m == 1.0).count()
    }

    pub fn rebuild_delta(&mut self) -> Result<()> {
        let block = self.steps * self.features;
        let mut delta = Vec::with_capacity(self.cells());
        for n in 0..self.samples {
            let m = &self.mask[n * block..(n + 1) * block];
            let s = &self.times[n * self.steps..(n + 1) * self.steps];
            let d = build_delta(m, s, self.features).map_err(|e| match e {
                Error::NonIncreasingTimestamps { step, .. } => {
                    Error::NonIncreasingTimestamps { sample: n, step }
                }
                other => other,
            })?;
            delta.extend(d);
        }
        self.delta = delta;
        Ok(())
    }

    /// The samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let block = self.steps * self.features;
        let mut out = MaskedBatch {
            samples: indices.len(),
            steps: self.steps,
            features: self.features,
            values: Vec::with_capacity(indices.len() * block),
            mask: Vec::with_capacity(indices.len() * block),
            delta: Vec::with_capacity(indices.len() * block),
            times: Vec::with_capacity(indices.len() * self.steps),
            labels: Vec::with_capacity(indices.len()),
            ids: Vec::with_capacity(indices.len()),
        };
        for &n in indices {
            out.values.extend_from_slice(&self.values[n * block..(n + 1) * block]);
            out.mask.extend_from_slice(&self.mask[n * block..(n + 1) * block]);
            out.delta.extend_from_slice(&self.delta[n * block..(n + 1) * block]);
            out.times
                .extend_from_slice(&self.times[n * self.steps..(n + 1) * self.steps]);
            out.labels.push(self.labels[n]);
            out.ids.push(self.ids[n].clone());
        }
        out
    }

    /// The same samples with time reversed. Timestamps become
    /// `s'_t = s_{T-1} - s_{T-1-t}` (still increasing) and `delta` is
    /// recomputed on them.
    pub fn reversed(&self) -> Result<Self> {
        let (steps, features) = (self.steps, self.features);
        let mut out = self.clone();
        for n in 0..self.samples {
            let last = self.times[n * steps + steps - 1];
            for t in 0..steps {
                let src = steps - 1 - t;
                out.times[n * steps + t] = last - self.times[n * steps + src];
                for d in 0..features {
                    out.values[self.idx(n, t, d)] = self.values[self.idx(n, src, d)];
                    out.mask[self.idx(n, t, d)] = self.mask[self.idx(n, src, d)];
                }
            }
        }
        out.rebuild_delta()?;
        Ok(out)
    }

    /// Checks zero-fill, positivity of `delta` and the delta recurrence.
    pub fn validate(&self) -> Result<()> {
        for (i, (&v, &m)) in self.values.iter().zip(&self.mask).enumerate() {
            if m != 0.0 && m != 1.0 {
                return Err(Error::Invalid(alloc::format!("mask entry {i} is {m}")));
            }
            if m == 0.0 && v != 0.0 {
                return Err(Error::Invalid(alloc::format!("missing entry {i} holds {v}")));
            }
        }
        let mut check = self.clone();
        check.rebuild_delta()?;
        if check.delta != self.delta || self.delta.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::Invalid("delta does not match the mask".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_hand_recurrence() {
        let d = build_delta(&[1.0, 0.0, 1.0], &[0.0, 2.0, 5.0], 1).unwrap();
        assert_eq!(d, [1.0, 2.0, 5.0]);
    }

    #[test]
    fn delta_fully_observed_hourly() {
        let d = build_delta(&[1.0; 4], &[0.0, 1.0, 2.0, 3.0], 1).unwrap();
        assert_eq!(d, [1.0; 4]);
    }

    #[test]
    fn delta_accumulates_over_gaps() {
        let d = build_delta(&[1.0, 0.0, 0.0, 0.0], &[0.0, 1.0, 2.0, 3.0], 1).unwrap();
        assert_eq!(d, [1.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn delta_rejects_non_increasing_times() {
        assert_eq!(
            build_delta(&[1.0, 1.0], &[0.0, 0.0], 1).unwrap_err(),
            Error::NonIncreasingTimestamps { sample: 0, step: 1 }
        );
    }

    #[test]
    fn reversal_recomputes_delta() {
        let b = MaskedBatch::from_grid(
            3,
            1,
            vec![4.0, 0.0, 6.0],
            vec![1.0, 0.0, 1.0],
            vec![0.0, 2.0, 5.0],
            vec![1.0],
        )
        .unwrap();
        let r = b.reversed().unwrap();
        assert_eq!(r.values, [6.0, 0.0, 4.0]);
        assert_eq!(r.times, [0.0, 3.0, 5.0]);
        assert_eq!(r.delta, [1.0, 3.0, 5.0]);
        assert_eq!(r.reversed().unwrap(), b);
    }
}
