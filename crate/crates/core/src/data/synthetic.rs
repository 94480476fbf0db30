use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use super::series::{Event, IrregularSeries};
use crate::rng::stream;
use crate::{Error, Result};

/// Knobs of the synthetic cohort generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub patients: usize,
    pub steps: usize,
    pub features: usize,
    /// Probability that a `(step, feature)` cell has no reading.
    pub missing_rate: f64,
    /// Target fraction of positive labels.
    pub positive_rate: f64,
    pub window_hours: f64,
    pub latent_dim: usize,
    /// AR(1) coefficient of the latent process.
    pub ar_coef: f64,
    /// Observation noise, in units of the channel's signal scale.
    pub noise: f64,
    /// Probability that an observed cell gets a second reading in the same window.
    pub repeat_rate: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(patients: usize, steps: usize, features: usize, seed: u64) -> Self {
        SyntheticSpec {
            patients,
            steps,
            features,
            missing_rate: 0.5,
            positive_rate: 0.15,
            window_hours: 1.0,
            latent_dim: 3,
            ar_coef: 0.9,
            noise: 0.1,
            repeat_rate: 0.1,
            seed,
        }
    }
}

/// Draws a cohort whose channels are noisy linear mixtures of a per-patient
/// latent AR(1) trajectory. Each cell is observed independently with
/// probability `1 - missing_rate` at a uniform time inside its window. The
/// label is 1 iff the time-average of a fixed projection of the latent
/// trajectory exceeds the threshold that yields `positive_rate` positives.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Vec<IrregularSeries>> {
    if !(0.0..1.0).contains(&spec.missing_rate) || !(0.0..=1.0).contains(&spec.positive_rate) {
        return Err(Error::Invalid(alloc::format!(
            "missing_rate must be in [0, 1) and positive_rate in [0, 1] (got {}, {})",
            spec.missing_rate,
            spec.positive_rate
        )));
    }
    if spec.patients == 0 || spec.steps == 0 || spec.features == 0 || spec.latent_dim == 0 {
        return Err(Error::Invalid("patients, steps, features and latent_dim must be positive".into()));
    }
    let (d, l) = (spec.features, spec.latent_dim);
    let mut structure = stream(spec.seed, 21);
    let mut rng = stream(spec.seed, 22);

    let inv_sqrt_l = 1.0 / libm::sqrt(l as f64);
    let mixing: Vec<f64> = (0..d * l)
        .map(|_| structure.sample::<f64, _>(StandardNormal) * inv_sqrt_l)
        .collect();
    let offsets: Vec<f64> = (0..d).map(|_| structure.random_range(0.0..10.0)).collect();
    let scales: Vec<f64> = (0..d).map(|_| structure.random_range(0.5..2.0)).collect();
    let readout: Vec<f64> = (0..l).map(|j| if j == 0 { 1.0 } else { -0.5 / j as f64 }).collect();

    let innovation = libm::sqrt(1.0 - spec.ar_coef * spec.ar_coef);
    let mut scores = Vec::with_capacity(spec.patients);
    let mut cohort = Vec::with_capacity(spec.patients);
    for p in 0..spec.patients {
        let mut z: Vec<f64> = (0..l).map(|_| rng.sample(StandardNormal)).collect();
        let mut score = 0.0;
        let mut events = Vec::new();
        for t in 0..spec.steps {
            if t > 0 {
                for zj in z.iter_mut() {
                    let e: f64 = rng.sample(StandardNormal);
                    *zj = spec.ar_coef * *zj + innovation * e;
                }
            }
            score += readout.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>();
            for j in 0..d {
                let signal: f64 = (0..l).map(|k| mixing[j * l + k] * z[k]).sum();
                let readings = if rng.random::<f64>() < spec.missing_rate {
                    0
                } else if rng.random::<f64>() < spec.repeat_rate {
                    2
                } else {
                    1
                };
                for _ in 0..readings {
                    let eps: f64 = rng.sample(StandardNormal);
                    let offset_in_window = rng.random::<f64>() * 0.999 * spec.window_hours;
                    events.push(Event {
                        time: t as f64 * spec.window_hours + offset_in_window,
                        variable: j,
                        value: offsets[j] + scales[j] * (signal + spec.noise * eps),
                    });
                }
            }
        }
        if events.is_empty() {
            let t = rng.random_range(0..spec.steps);
            let j = rng.random_range(0..d);
            events.push(Event {
                time: t as f64 * spec.window_hours,
                variable: j,
                value: offsets[j],
            });
        }
        scores.push(score / spec.steps as f64);
        cohort.push(IrregularSeries {
            patient_id: alloc::format!("p{p:05}"),
            events,
            label: 0,
        });
    }

    let positives = libm::round(spec.positive_rate * spec.patients as f64) as usize;
    if positives > 0 {
        let mut sorted = scores.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let threshold = sorted[positives - 1];
        for (s, c) in scores.iter().zip(cohort.iter_mut()) {
            c.label = u8::from(*s >= threshold);
        }
    }
    Ok(cohort)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::MaskedBatch;

    #[test]
    fn observed_fraction_tracks_missing_rate() {
        let mut spec = SyntheticSpec::new(100, 24, 6, 3);
        spec.missing_rate = 0.5;
        let cohort = generate_synthetic(&spec).unwrap();
        let (b, _) = MaskedBatch::from_series(&cohort, 6, 1.0, 24).unwrap();
        let frac = b.observed() as f64 / b.cells() as f64;
        assert!((frac - 0.5).abs() < 0.03, "{frac}");
    }

    #[test]
    fn no_missingness_gives_full_mask() {
        let mut spec = SyntheticSpec::new(10, 8, 4, 1);
        spec.missing_rate = 0.0;
        let (b, dropped) =
            MaskedBatch::from_series(&generate_synthetic(&spec).unwrap(), 4, 1.0, 8).unwrap();
        assert!(b.mask.iter().all(|&m| m == 1.0));
        assert_eq!(dropped, 0);
    }

    #[test]
    fn positive_rate_is_calibrated() {
        let mut spec = SyntheticSpec::new(200, 12, 4, 9);
        spec.positive_rate = 0.15;
        let cohort = generate_synthetic(&spec).unwrap();
        let rate = cohort.iter().filter(|c| c.label == 1).count() as f64 / 200.0;
        assert!((rate - 0.15).abs() <= 0.05, "{rate}");
    }

    #[test]
    fn deterministic_under_seed() {
        let spec = SyntheticSpec::new(5, 6, 3, 42);
        assert_eq!(generate_synthetic(&spec).unwrap(), generate_synthetic(&spec).unwrap());
    }
}
