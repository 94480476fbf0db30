use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// One timestamped reading of one variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    /// Hours since admission, non-negative.
    pub time: f64,
    pub variable: usize,
    pub value: f64,
}

/// Raw event stream of one patient plus the binary outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct IrregularSeries {
    pub patient_id: String,
    pub events: Vec<Event>,
    pub label: u8,
}

/// One patient binned onto a `steps x features` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSample {
    pub values: Vec<f64>,
    pub mask: Vec<f64>,
    pub times: Vec<f64>,
    /// Events at or beyond the horizon, which were discarded.
    pub dropped: usize,
}

/// Averages every event for variable `d` falling in `[t*w, (t+1)*w)` into cell
/// `(t, d)`. Cells without events stay zero with mask zero. The timestamp of
/// step `t` is `t*w`.
pub fn bin_to_grid(
    series: &IrregularSeries,
    features: usize,
    window_hours: f64,
    steps: usize,
) -> Result<GridSample> {
    if !(window_hours > 0.0) || steps == 0 {
        return Err(Error::Invalid(alloc::format!(
            "window must be positive and steps non-zero (got {window_hours}, {steps})"
        )));
    }
    let horizon = window_hours * steps as f64;
    let mut sums = vec![0.0; steps * features];
    let mut counts = vec![0usize; steps * features];
    let mut dropped = 0;
    for e in &series.events {
        if !(e.time >= 0.0) || !e.value.is_finite() {
            return Err(Error::Invalid(alloc::format!(
                "patient {}: bad event at time {} value {}",
                series.patient_id,
                e.time,
                e.value
            )));
        }
        if e.variable >= features {
            return Err(Error::Invalid(alloc::format!(
                "patient {}: variable index {} out of range (D = {features})",
                series.patient_id,
                e.variable
            )));
        }
        if e.time >= horizon {
            dropped += 1;
            continue;
        }
        let t = ((e.time / window_hours) as usize).min(steps - 1);
        sums[t * features + e.variable] += e.value;
        counts[t * features + e.variable] += 1;
    }
    let mut values = vec![0.0; steps * features];
    let mut mask = vec![0.0; steps * features];
    for i in 0..steps * features {
        if counts[i] > 0 {
            values[i] = sums[i] / counts[i] as f64;
            mask[i] = 1.0;
        }
    }
    let times = (0..steps).map(|t| t as f64 * window_hours).collect();
    Ok(GridSample {
        values,
        mask,
        times,
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn series(events: &[(f64, usize, f64)]) -> IrregularSeries {
        IrregularSeries {
            patient_id: "p".to_string(),
            events: events
                .iter()
                .map(|&(time, variable, value)| Event { time, variable, value })
                .collect(),
            label: 0,
        }
    }

    #[test]
    fn averages_within_window() {
        let g = bin_to_grid(&series(&[(0.2, 0, 2.0), (0.8, 0, 4.0)]), 2, 1.0, 6).unwrap();
        assert_eq!(g.values[0], 3.0);
        assert_eq!(g.mask[0], 1.0);
        // hour 5, variable 0 has nothing
        assert_eq!((g.values[5 * 2], g.mask[5 * 2]), (0.0, 0.0));
        assert_eq!(g.times, [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn single_event_is_copied() {
        let g = bin_to_grid(&series(&[(3.5, 1, -7.25)]), 2, 1.0, 4).unwrap();
        assert_eq!(g.values[3 * 2 + 1], -7.25);
    }

    #[test]
    fn events_past_horizon_are_counted_and_dropped() {
        let g = bin_to_grid(&series(&[(1.0, 0, 1.0), (4.0, 0, 9.0), (17.0, 1, 2.0)]), 2, 2.0, 2).unwrap();
        assert_eq!(g.dropped, 2);
        assert_eq!(g.mask.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn rejects_unknown_variable() {
        assert!(bin_to_grid(&series(&[(0.0, 5, 1.0)]), 2, 1.0, 2).is_err());
    }
}
