//! Mini-batch training loop, evaluation and k-fold orchestration.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::baselines::{fill, observed_means, FillMethod};
use crate::config::{Task, TrainConfig};
use crate::data::{kfold_split, normalize, remove_values, NormStats, RemovalScope};
use crate::metrics::{classification_metrics, imputation_metrics, mean_std, ClassificationMetrics, ImputationMetrics};
use crate::model::{ForwardSettings, Model, ModelDims};
use crate::objectives::LossBreakdown;
use crate::optim::{AdamConfig, AdamState};
use crate::rng::RngStreams;
use crate::vae::{Noise, Stochasticity};
use crate::{Error, MaskedBatch, RemovalRecord, Result};

/// Evaluation results of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metrics {
    Classification(ClassificationMetrics),
    Imputation {
        model: ImputationMetrics,
        /// Mean-fill floor on the same entries.
        mean_fill: ImputationMetrics,
    },
}

impl Metrics {
    /// `(name, value)` pairs in report order.
    pub fn named(&self) -> Vec<(&'static str, f64)> {
        match *self {
            Metrics::Classification(c) => alloc::vec![("auc", c.auc), ("auprc", c.auprc)],
            Metrics::Imputation { model, mean_fill } => alloc::vec![
                ("mae", model.mae),
                ("mre", model.mre),
                ("mse", model.mse),
                ("mean_fill_mae", mean_fill.mae),
                ("mean_fill_mre", mean_fill.mre),
                ("mean_fill_mse", mean_fill.mse),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub seed: u64,
    pub config: TrainConfig,
    /// Mean loss breakdown over the batches of each epoch.
    pub epochs: Vec<LossBreakdown>,
    pub early_stopped: bool,
    pub metrics: Option<Metrics>,
    /// Filled in by callers that have a clock.
    pub wall_time_secs: Option<f64>,
}

/// Trains a fresh model on an already normalized `batch`.
pub fn train(batch: &MaskedBatch, config: &TrainConfig) -> Result<(Model, RunReport)> {
    config.validate()?;
    batch.validate()?;
    if batch.features != config.features || batch.steps != config.steps {
        return Err(Error::ShapeMismatch {
            op: "train",
            left: alloc::vec![config.steps, config.features],
            right: alloc::vec![batch.steps, batch.features],
        });
    }
    if batch.samples == 0 {
        return Err(Error::Invalid("cannot train on an empty dataset".into()));
    }
    let mut streams = RngStreams::from_seed(config.seed);
    let mut model = Model::new(ModelDims::from_config(config), &mut streams.init);
    let mut adam = AdamState::new(AdamConfig::new(config.learning_rate, config.weight_decay), &model.store);
    let settings = ForwardSettings::from_config(config);

    let mut order: Vec<usize> = (0..batch.samples).collect();
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut best = f64::INFINITY;
    let mut stale = 0;
    let mut early_stopped = false;
    for epoch in 0..config.epochs {
        order.shuffle(&mut streams.shuffle);
        let mut parts = Vec::new();
        for (bi, chunk) in order.chunks(config.batch_size).enumerate() {
            let mb = batch.subset(chunk);
            let stoch = Stochasticity {
                dropout: Some(&mut streams.dropout),
                noise: Noise::Sample(&mut streams.noise),
            };
            let (graph, fwd) = model.forward(&mb, &settings, stoch).map_err(|e| match e {
                Error::NonFinite { op } => Error::NonFiniteLoss {
                    term: op,
                    epoch: epoch + 1,
                    batch: bi + 1,
                },
                other => other,
            })?;
            if let Some(term) = fwd.breakdown.first_non_finite() {
                return Err(Error::NonFiniteLoss {
                    term,
                    epoch: epoch + 1,
                    batch: bi + 1,
                });
            }
            let grads = graph.backward(fwd.loss)?.param_grads(&graph, &model.store);
            adam.step(&mut model.store, &grads);
            parts.push(fwd.breakdown);
        }
        let mean = LossBreakdown::mean(&parts);
        epochs.push(mean);
        if config.early_stop_patience > 0 {
            if mean.l_total < best {
                best = mean.l_total;
                stale = 0;
            } else {
                stale += 1;
                if stale >= config.early_stop_patience {
                    early_stopped = true;
                    break;
                }
            }
        }
    }
    let report = RunReport {
        seed: config.seed,
        config: config.clone(),
        epochs,
        early_stopped,
        metrics: None,
        wall_time_secs: None,
    };
    Ok((model, report))
}

/// AUC and AUPRC of the deterministic predictions on `batch`.
pub fn evaluate_classification(model: &Model, config: &TrainConfig, batch: &MaskedBatch) -> Result<ClassificationMetrics> {
    let out = model.predict(batch, &ForwardSettings::from_config(config), config.batch_size)?;
    classification_metrics(&out.probs, &batch.labels)
}

/// Imputation error at the removed entries, in original units. `batch` is the
/// normalized batch the removal was applied to; `record` holds raw values.
pub fn evaluate_imputation(
    model: &Model,
    config: &TrainConfig,
    batch: &MaskedBatch,
    record: &RemovalRecord,
    stats: &NormStats,
) -> Result<ImputationMetrics> {
    if record.is_empty() {
        return Err(Error::EmptyRecord);
    }
    let out = model.predict(batch, &ForwardSettings::from_config(config), config.batch_size)?;
    let (truth, est): (Vec<f64>, Vec<f64>) = record
        .entries
        .iter()
        .map(|e| {
            let i = batch.idx(e.sample, e.step, e.feature);
            (e.value, stats.invert(e.feature, out.completed[i]))
        })
        .unzip();
    imputation_metrics(&truth, &est)
}

/// Mean-fill floor on the removed entries of a raw batch.
pub fn evaluate_mean_fill(raw: &MaskedBatch, record: &RemovalRecord, train_means: &[f64]) -> Result<ImputationMetrics> {
    if record.is_empty() {
        return Err(Error::EmptyRecord);
    }
    let filled = fill(raw, FillMethod::Mean, Some(train_means))?;
    let (truth, est): (Vec<f64>, Vec<f64>) = record
        .entries
        .iter()
        .map(|e| (e.value, filled.values[raw.idx(e.sample, e.step, e.feature)]))
        .unzip();
    imputation_metrics(&truth, &est)
}

/// Seed of the removal draw for a run seeded with `seed`; kept apart from the
/// training streams so the hidden entries do not depend on model settings.
pub fn removal_seed(seed: u64) -> u64 {
    seed ^ 0x5eed
}

/// A trained model plus what is needed to evaluate it on held-out samples.
#[derive(Debug, Clone)]
pub struct Run {
    pub model: Model,
    pub stats: NormStats,
    pub report: RunReport,
}

/// Applies the task's removal protocol to raw data, normalizes with
/// training-split statistics, trains on `train_idx` and evaluates on
/// `test_idx`. Imputation removes from every split and scores the test
/// entries; classification removes from the training split only.
pub fn train_and_evaluate(raw: &MaskedBatch, train_idx: &[usize], test_idx: &[usize], config: &TrainConfig) -> Result<Run> {
    let scope = match config.task {
        Task::Imputation => RemovalScope::AllSplits,
        Task::Classification => RemovalScope::TrainOnly(train_idx),
    };
    let (removed, record) = remove_values(raw, config.removal, scope, removal_seed(config.seed))?;
    let train_raw = removed.subset(train_idx);
    let test_raw = removed.subset(test_idx);
    let (train_batch, stats) = normalize(&train_raw, None);
    let (test_batch, _) = normalize(&test_raw, Some(&stats));
    let (model, mut report) = train(&train_batch, config)?;
    let metrics = match config.task {
        Task::Classification => Metrics::Classification(evaluate_classification(&model, config, &test_batch)?),
        Task::Imputation => {
            let test_record = record.restrict(test_idx);
            Metrics::Imputation {
                model: evaluate_imputation(&model, config, &test_batch, &test_record, &stats)?,
                mean_fill: evaluate_mean_fill(&test_raw, &test_record, &observed_means(&train_raw))?,
            }
        }
    };
    report.metrics = Some(metrics);
    Ok(Run { model, stats, report })
}

/// One metric aggregated over folds.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSummary {
    pub name: &'static str,
    pub mean: f64,
    /// Sample standard deviation.
    pub std: f64,
}

impl MetricSummary {
    /// `"0.8347 ± 0.0125"`.
    pub fn formatted(&self) -> String {
        alloc::format!("{:.4} ± {:.4}", self.mean, self.std)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossValidation {
    pub folds: Vec<RunReport>,
    pub summary: Vec<MetricSummary>,
}

/// Aggregates per-fold metrics (all folds must share a task).
pub fn summarize(metrics: &[Metrics]) -> Vec<MetricSummary> {
    let Some(first) = metrics.first() else {
        return Vec::new();
    };
    first
        .named()
        .iter()
        .enumerate()
        .map(|(i, &(name, _))| {
            let values: Vec<f64> = metrics.iter().map(|m| m.named()[i].1).collect();
            let (mean, std) = mean_std(&values);
            MetricSummary { name, mean, std }
        })
        .collect()
}

/// k-fold cross-validation; each fold trains a fresh model.
pub fn crossvalidate(raw: &MaskedBatch, config: &TrainConfig, k: usize) -> Result<CrossValidation> {
    if k < 2 {
        return Err(Error::Invalid(alloc::format!("cross-validation needs k >= 2, got {k}")));
    }
    let folds = kfold_split(raw.samples, k, config.seed)?;
    let mut reports = Vec::with_capacity(k);
    for (i, test) in folds.iter().enumerate() {
        let train: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        let mut train_sorted = train;
        train_sorted.sort_unstable();
        reports.push(train_and_evaluate(raw, &train_sorted, test, config)?.report);
    }
    let metrics: Vec<Metrics> = reports.iter().filter_map(|r| r.metrics).collect();
    Ok(CrossValidation {
        summary: summarize(&metrics),
        folds: reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticSpec};

    fn toy(task: Task) -> (MaskedBatch, TrainConfig) {
        let series = generate_synthetic(&SyntheticSpec::new(12, 5, 3, 4)).unwrap();
        let (batch, _) = MaskedBatch::from_series(&series, 3, 1.0, 5).unwrap();
        let mut c = TrainConfig::for_task(task, 5, 3);
        c.epochs = 2;
        c.batch_size = 5;
        c.hidden = 6;
        c.latent = 2;
        c.vae_hidden = alloc::vec![5];
        (batch, c)
    }

    #[test]
    fn one_epoch_smoke() {
        let (raw, mut c) = toy(Task::Classification);
        c.epochs = 1;
        let (b, _) = normalize(&raw.subset(&[0, 1, 2, 3]), None);
        let (_, report) = train(&b, &c).unwrap();
        assert_eq!(report.epochs.len(), 1);
        assert!(report.epochs[0].l_total.is_finite());
    }

    #[test]
    fn same_seed_same_bits() {
        let (raw, c) = toy(Task::Imputation);
        let (b, _) = normalize(&raw, None);
        let a = train(&b, &c).unwrap().1;
        let again = train(&b, &c).unwrap().1;
        assert_eq!(a.epochs, again.epochs);
    }

    #[test]
    fn summary_format_and_zero_std() {
        let m = Metrics::Classification(ClassificationMetrics { auc: 0.83474, auprc: 0.5 });
        let s = summarize(&[m, m, m]);
        assert_eq!(s[0].formatted(), "0.8347 ± 0.0000");
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn crossvalidation_runs_every_fold() {
        let (raw, mut c) = toy(Task::Imputation);
        c.epochs = 1;
        c.removal = 0.2;
        let cv = crossvalidate(&raw, &c, 3).unwrap();
        assert_eq!(cv.folds.len(), 3);
        assert!(cv.summary.iter().any(|s| s.name == "mae"));
        assert!(crossvalidate(&raw, &c, 1).is_err());
    }

    #[test]
    fn early_stopping_truncates() {
        let (raw, mut c) = toy(Task::Imputation);
        let (b, _) = normalize(&raw, None);
        c.epochs = 50;
        c.learning_rate = 1e-9;
        c.early_stop_patience = 1;
        let r = train(&b, &c).unwrap().1;
        assert!(r.early_stopped && r.epochs.len() < 50);
    }
}
