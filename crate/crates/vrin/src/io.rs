//! Long-format data files.
//!
//! A dataset directory holds three files:
//!
//! * `observations.csv`: `patient_id,timestamp,variable,value`, one row per event
//! * `labels.csv`: `patient_id,label` with labels 0 or 1; defines the cohort and its order
//! * `variables.txt`: one variable name per line; line order fixes the feature index

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use vrin_core::data::{Event, NormStats};
use vrin_core::model::Outputs;
use vrin_core::{IrregularSeries, MaskedBatch};

use crate::error::{CliError, CliResult};

pub const OBSERVATIONS: &str = "observations.csv";
pub const LABELS: &str = "labels.csv";
pub const VARIABLES: &str = "variables.txt";

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub variables: Vec<String>,
    pub series: Vec<IrregularSeries>,
}

impl Dataset {
    /// Generated cohorts name their channels `var0`, `var1`, ...
    pub fn with_default_names(series: Vec<IrregularSeries>, features: usize) -> Self {
        Dataset {
            variables: (0..features).map(|j| format!("var{j}")).collect(),
            series,
        }
    }

    pub fn to_batch(&self, window_hours: f64, steps: usize) -> CliResult<MaskedBatch> {
        let (batch, dropped) = MaskedBatch::from_series(&self.series, self.variables.len(), window_hours, steps)?;
        if dropped > 0 {
            log::warn!("{dropped} events fall past the {steps}-step horizon and were ignored");
        }
        Ok(batch)
    }
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::format(path, format!("{other:?}")),
    }
}

pub fn write_dataset(dir: &Path, data: &Dataset) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;

    let path = dir.join(OBSERVATIONS);
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    w.write_record(["patient_id", "timestamp", "variable", "value"])
        .map_err(|e| csv_err(&path, e))?;
    for s in &data.series {
        for ev in &s.events {
            w.write_record([
                s.patient_id.as_str(),
                &ev.time.to_string(),
                &data.variables[ev.variable],
                &ev.value.to_string(),
            ])
            .map_err(|e| csv_err(&path, e))?;
        }
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;

    let path = dir.join(LABELS);
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    w.write_record(["patient_id", "label"]).map_err(|e| csv_err(&path, e))?;
    for s in &data.series {
        w.write_record([s.patient_id.as_str(), &s.label.to_string()])
            .map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;

    let path = dir.join(VARIABLES);
    let mut text = data.variables.join("\n");
    text.push('\n');
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: u64, what: &str, raw: &str) -> CliResult<T> {
    raw.trim()
        .parse()
        .map_err(|_| CliError::format(path, format!("line {line}: bad {what} `{raw}`")))
}

pub fn read_dataset(dir: &Path) -> CliResult<Dataset> {
    let path = dir.join(VARIABLES);
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let variables: Vec<String> = text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect();
    if variables.is_empty() {
        return Err(CliError::format(&path, "no variables listed"));
    }
    let index: HashMap<&str, usize> = variables.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
    if index.len() != variables.len() {
        return Err(CliError::format(&path, "duplicate variable names"));
    }

    let path = dir.join(LABELS);
    let mut r = csv::Reader::from_path(&path).map_err(|e| csv_err(&path, e))?;
    let mut series = Vec::new();
    let mut by_id = HashMap::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(&path, e))?;
        let line = i as u64 + 2;
        let (Some(id), Some(label)) = (rec.get(0), rec.get(1)) else {
            return Err(CliError::format(&path, format!("line {line}: expected patient_id,label")));
        };
        let label: u8 = parse_field(&path, line, "label", label)?;
        if label > 1 {
            return Err(CliError::format(&path, format!("line {line}: label must be 0 or 1")));
        }
        if by_id.insert(id.to_string(), series.len()).is_some() {
            return Err(CliError::format(&path, format!("line {line}: duplicate patient `{id}`")));
        }
        series.push(IrregularSeries {
            patient_id: id.to_string(),
            events: Vec::new(),
            label,
        });
    }

    let path = dir.join(OBSERVATIONS);
    let mut r = csv::Reader::from_path(&path).map_err(|e| csv_err(&path, e))?;
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(&path, e))?;
        let line = i as u64 + 2;
        if rec.len() != 4 {
            return Err(CliError::format(&path, format!("line {line}: expected 4 fields")));
        }
        let Some(&n) = by_id.get(&rec[0]) else {
            return Err(CliError::format(&path, format!("line {line}: patient `{}` has no label", &rec[0])));
        };
        let Some(&variable) = index.get(rec[2].trim()) else {
            return Err(CliError::format(&path, format!("line {line}: unknown variable `{}`", &rec[2])));
        };
        let time: f64 = parse_field(&path, line, "timestamp", &rec[1])?;
        let value: f64 = parse_field(&path, line, "value", &rec[3])?;
        if !time.is_finite() || !value.is_finite() {
            return Err(CliError::format(&path, format!("line {line}: non-finite number")));
        }
        series[n].events.push(Event { time, variable, value });
    }
    Ok(Dataset { variables, series })
}

/// Writes every `(patient, step, variable)` cell of the completed series in
/// original units, tagged observed or imputed, with the VAE standard deviation.
pub fn write_imputed(
    path: &Path,
    batch: &MaskedBatch,
    raw: &MaskedBatch,
    outputs: &Outputs,
    stats: &NormStats,
    variables: &[String],
) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["patient_id", "step", "time", "variable", "value", "source", "uncertainty"])
        .map_err(|e| csv_err(path, e))?;
    for n in 0..batch.samples {
        for t in 0..batch.steps {
            let time = batch.times[n * batch.steps + t].to_string();
            for (d, name) in variables.iter().enumerate() {
                let i = batch.idx(n, t, d);
                let (value, source, unc) = if batch.mask[i] == 1.0 {
                    (raw.values[i], "observed", 0.0)
                } else {
                    (
                        stats.invert(d, outputs.completed[i]),
                        "imputed",
                        outputs.uncertainty[i] * stats.scale(d),
                    )
                };
                w.write_record([
                    batch.ids[n].as_str(),
                    &t.to_string(),
                    &time,
                    name,
                    &value.to_string(),
                    source,
                    &unc.to_string(),
                ])
                .map_err(|e| csv_err(path, e))?;
            }
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_predictions(path: &Path, ids: &[String], probs: &[f64]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["patient_id", "probability"]).map_err(|e| csv_err(path, e))?;
    for (id, p) in ids.iter().zip(probs) {
        w.write_record([id.as_str(), &p.to_string()]).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
