//! Command-line definitions and the four subcommands.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use vrin_core::baselines::observed_means;
use vrin_core::data::{generate_synthetic, normalize, remove_values, RemovalScope, SyntheticSpec};
use vrin_core::model::ForwardSettings;
use vrin_core::trainer::{
    crossvalidate, evaluate_classification, evaluate_imputation, evaluate_mean_fill, removal_seed, train, Metrics,
    RunReport,
};
use vrin_core::{Direction, Task, TrainConfig, Variant};

use crate::checkpoint::Checkpoint;
use crate::config_file::ConfigFile;
use crate::error::{CliError, CliResult};
use crate::io::{read_dataset, write_dataset, write_imputed, write_predictions, Dataset};
use crate::report;

#[derive(Debug, Parser)]
#[command(name = "vrin", version, about = "Uncertainty-aware imputation and outcome prediction for sparse clinical time series")]
pub struct Cli {
    /// Seed for every random draw (overrides the config file).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic cohort as long-format files.
    Generate(GenerateArgs),
    /// Train a model and write a checkpoint plus report.
    Train(TrainArgs),
    /// Score a checkpoint, or cross-validate its configuration.
    Evaluate(EvaluateArgs),
    /// Write the completed series and outcome probabilities.
    Impute(ImputeArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 500)]
    pub patients: usize,
    #[arg(long, default_value_t = 48)]
    pub time_steps: usize,
    #[arg(long, default_value_t = 8)]
    pub features: usize,
    #[arg(long, default_value_t = 0.5)]
    pub missing_rate: f64,
    #[arg(long, default_value_t = 0.15)]
    pub positive_rate: f64,
    #[arg(long, default_value_t = 1.0)]
    pub window_hours: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    /// Flat `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
    /// Report path (default: `<out>.report.txt`).
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub task: Option<Task>,
    #[arg(long)]
    pub direction: Option<Direction>,
    #[arg(long)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub time_steps: Option<usize>,
    #[arg(long)]
    pub window_hours: Option<f64>,
    /// Fraction of observed values hidden before training.
    #[arg(long)]
    pub removal: Option<f64>,
    /// Record wall time in the report (breaks byte-identical reruns).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Fraction of observed values hidden as ground truth (required for imputation).
    #[arg(long)]
    pub removal: Option<f64>,
    /// With more than one fold, retrain the checkpoint's configuration per fold.
    #[arg(long, default_value_t = 1)]
    pub folds: usize,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ImputeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Completed-series CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Outcome probabilities CSV (default: `<out>.predictions.csv`).
    #[arg(long)]
    pub predictions: Option<PathBuf>,
}

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Generate(a) => cmd_generate(cli.seed, a),
        Command::Train(a) => cmd_train(cli.seed, a),
        Command::Evaluate(a) => cmd_evaluate(cli.seed, a),
        Command::Impute(a) => cmd_impute(a),
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn cmd_generate(seed: Option<u64>, a: &GenerateArgs) -> CliResult<()> {
    let mut spec = SyntheticSpec::new(a.patients, a.time_steps, a.features, seed.unwrap_or(0));
    spec.missing_rate = a.missing_rate;
    spec.positive_rate = a.positive_rate;
    spec.window_hours = a.window_hours;
    let series = generate_synthetic(&spec).map_err(|e| CliError::Usage(e.to_string()))?;
    write_dataset(&a.out, &Dataset::with_default_names(series, a.features))?;
    println!("wrote {} patients to {}", a.patients, a.out.display());
    Ok(())
}

/// Preset for the task, then the config file, then command-line flags.
pub fn resolve_config(seed: Option<u64>, a: &TrainArgs, features: usize) -> CliResult<TrainConfig> {
    let file = match &a.config {
        Some(p) => ConfigFile::parse(&fs::read_to_string(p).map_err(|e| CliError::io(p, e))?)?,
        None => ConfigFile::default(),
    };
    let task = match (a.task, file.get("task")) {
        (Some(t), _) => t,
        (None, Some(t)) => t.parse().map_err(|e: vrin_core::Error| CliError::Config(e.to_string()))?,
        (None, None) => Task::Classification,
    };
    let mut c = file.apply(TrainConfig::for_task(task, 48, features))?;
    if c.features != features {
        return Err(CliError::Mismatch(format!(
            "config declares {} features but the data has {features}",
            c.features
        )));
    }
    c.task = task;
    if let Some(v) = a.direction {
        c.direction = v;
    }
    if let Some(v) = a.variant {
        c.variant = v;
    }
    if let Some(v) = a.epochs {
        c.epochs = v;
    }
    if let Some(v) = a.time_steps {
        c.steps = v;
    }
    if let Some(v) = a.window_hours {
        c.window_hours = v;
    }
    if let Some(v) = a.removal {
        c.removal = v;
    }
    if let Some(s) = seed {
        c.seed = s;
    }
    c.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(c)
}

pub fn cmd_train(seed: Option<u64>, a: &TrainArgs) -> CliResult<()> {
    let data = read_dataset(&a.data)?;
    let config = resolve_config(seed, a, data.variables.len())?;
    let raw = data.to_batch(config.window_hours, config.steps)?;

    let start = Instant::now();
    let (removed, record) = remove_values(&raw, config.removal, RemovalScope::AllSplits, removal_seed(config.seed))?;
    let (batch, stats) = normalize(&removed, None);
    log::info!(
        "training {} on {} patients ({} hidden values)",
        config.variant,
        batch.samples,
        record.len()
    );
    let (model, mut run) = train(&batch, &config)?;
    if config.task == Task::Imputation && !record.is_empty() {
        run.metrics = Some(Metrics::Imputation {
            model: evaluate_imputation(&model, &config, &batch, &record, &stats)?,
            mean_fill: evaluate_mean_fill(&removed, &record, &observed_means(&removed))?,
        });
    }
    run.wall_time_secs = Some(start.elapsed().as_secs_f64());
    log::info!("trained in {:.1}s", start.elapsed().as_secs_f64());

    let ckpt = Checkpoint {
        config,
        variables: data.variables,
        stats,
        model,
    };
    ckpt.save(&a.out)?;
    let report_path = a.report.clone().unwrap_or_else(|| with_suffix(&a.out, ".report.txt"));
    write_text(&report_path, &report::render_run(&run, a.timing))?;
    if let Some(last) = run.epochs.last() {
        println!("final l_total = {:.6}", last.l_total);
    }
    if let Some(m) = &run.metrics {
        print!("{}", report::metrics_table(&m.named()));
    }
    Ok(())
}

fn load_matching(checkpoint: &Path, data: &Path) -> CliResult<(Checkpoint, Dataset)> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let data = read_dataset(data)?;
    if data.variables != ckpt.variables {
        return Err(CliError::Mismatch(format!(
            "checkpoint was trained on variables [{}] but the data has [{}]",
            ckpt.variables.join(", "),
            data.variables.join(", ")
        )));
    }
    Ok((ckpt, data))
}

pub fn cmd_evaluate(seed: Option<u64>, a: &EvaluateArgs) -> CliResult<()> {
    let (ckpt, data) = load_matching(&a.checkpoint, &a.data)?;
    let mut config = ckpt.config.clone();
    if config.task == Task::Imputation && a.removal.is_none() {
        return Err(CliError::Usage("imputation evaluation needs --removal (e.g. 0.05 or 0.10)".into()));
    }
    if a.folds == 0 {
        return Err(CliError::Usage("--folds must be at least 1".into()));
    }
    if let Some(r) = a.removal {
        config.removal = r;
    }
    if let Some(s) = seed {
        config.seed = s;
    }
    config.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let raw = data.to_batch(config.window_hours, config.steps)?;

    let text = if a.folds > 1 {
        let cv = crossvalidate(&raw, &config, a.folds)?;
        print!("{}", report::summary_table(&cv.summary));
        report::render_crossvalidation(&cv)
    } else {
        let metrics = match config.task {
            Task::Classification => {
                let (batch, _) = normalize(&raw, Some(&ckpt.stats));
                Metrics::Classification(evaluate_classification(&ckpt.model, &config, &batch)?)
            }
            Task::Imputation => {
                let (removed, record) =
                    remove_values(&raw, config.removal, RemovalScope::AllSplits, removal_seed(config.seed))?;
                let (batch, _) = normalize(&removed, Some(&ckpt.stats));
                Metrics::Imputation {
                    model: evaluate_imputation(&ckpt.model, &config, &batch, &record, &ckpt.stats)?,
                    mean_fill: evaluate_mean_fill(&removed, &record, &observed_means(&removed))?,
                }
            }
        };
        print!("{}", report::metrics_table(&metrics.named()));
        report::render_run(
            &RunReport {
                seed: config.seed,
                config,
                epochs: Vec::new(),
                early_stopped: false,
                metrics: Some(metrics),
                wall_time_secs: None,
            },
            false,
        )
    };
    if let Some(p) = &a.report {
        write_text(p, &text)?;
    }
    Ok(())
}

pub fn cmd_impute(a: &ImputeArgs) -> CliResult<()> {
    let (ckpt, data) = load_matching(&a.checkpoint, &a.data)?;
    let config = &ckpt.config;
    let raw = data.to_batch(config.window_hours, config.steps)?;
    let (batch, _) = normalize(&raw, Some(&ckpt.stats));
    let out = ckpt
        .model
        .predict(&batch, &ForwardSettings::from_config(config), config.batch_size)?;
    write_imputed(&a.out, &batch, &raw, &out, &ckpt.stats, &ckpt.variables)?;
    let pred_path = a.predictions.clone().unwrap_or_else(|| with_suffix(&a.out, ".predictions.csv"));
    write_predictions(&pred_path, &batch.ids, &out.probs)?;
    println!(
        "wrote {} cells to {} and {} predictions to {}",
        batch.cells(),
        a.out.display(),
        batch.samples,
        pred_path.display()
    );
    Ok(())
}
