use alloc::vec::Vec;

use rand::seq::index;

use super::MaskedBatch;
use crate::rng::stream;
use crate::Result;

/// An observed entry hidden from the model, with its original value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemovedEntry {
    pub sample: usize,
    pub step: usize,
    pub feature: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RemovalRecord {
    pub entries: Vec<RemovedEntry>,
}

impl RemovalRecord {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries whose sample is in `samples`, re-indexed to positions in that list.
    pub fn restrict(&self, samples: &[usize]) -> RemovalRecord {
        let entries = self
            .entries
            .iter()
            .filter_map(|e| {
                samples
                    .iter()
                    .position(|&s| s == e.sample)
                    .map(|pos| RemovedEntry { sample: pos, ..*e })
            })
            .collect();
        RemovalRecord { entries }
    }
}

/// Which samples removal may touch.
#[derive(Debug, Clone, Copy)]
pub enum RemovalScope<'a> {
    /// Every sample (imputation ground truth).
    AllSplits,
    /// Only the listed (training) samples; evaluation samples stay intact.
    TrainOnly(&'a [usize]),
}

/// Hides exactly `floor(fraction * #observed)` uniformly chosen observed
/// entries within `scope`, zeroing value and mask and rebuilding `delta`.
pub fn remove_values(
    batch: &MaskedBatch,
    fraction: f64,
    scope: RemovalScope<'_>,
    seed: u64,
) -> Result<(MaskedBatch, RemovalRecord)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(crate::Error::Invalid(alloc::format!(
            "removal fraction must be in [0, 1), got {fraction}"
        )));
    }
    let block = batch.steps * batch.features;
    let eligible: Vec<usize> = match scope {
        RemovalScope::AllSplits => (0..batch.cells()).filter(|&i| batch.mask[i] == 1.0).collect(),
        RemovalScope::TrainOnly(samples) => {
            let mut s = samples.to_vec();
            s.sort_unstable();
            s.dedup();
            s.iter()
                .flat_map(|&n| n * block..(n + 1) * block)
                .filter(|&i| batch.mask[i] == 1.0)
                .collect()
        }
    };
    let count = libm::floor(fraction * eligible.len() as f64) as usize;
    let mut out = batch.clone();
    if count == 0 {
        return Ok((out, RemovalRecord::default()));
    }
    let mut rng = stream(seed, 7);
    let mut chosen: Vec<usize> = index::sample(&mut rng, eligible.len(), count)
        .into_iter()
        .map(|k| eligible[k])
        .collect();
    chosen.sort_unstable();
    let entries = chosen
        .iter()
        .map(|&i| {
            let value = out.values[i];
            out.values[i] = 0.0;
            out.mask[i] = 0.0;
            RemovedEntry {
                sample: i / block,
                step: (i % block) / batch.features,
                feature: i % batch.features,
                value,
            }
        })
        .collect();
    out.rebuild_delta()?;
    Ok((out, RemovalRecord { entries }))
}

/// Puts removed values back, undoing [`remove_values`].
pub fn restore(batch: &MaskedBatch, record: &RemovalRecord) -> Result<MaskedBatch> {
    let mut out = batch.clone();
    for e in &record.entries {
        let i = out.idx(e.sample, e.step, e.feature);
        out.values[i] = e.value;
        out.mask[i] = 1.0;
    }
    out.rebuild_delta()?;
    Ok(out)
}
