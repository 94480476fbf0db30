//! Flat `key = value` configuration files, one key per [`TrainConfig`] field.
//!
//! Blank lines and `#` comments are ignored. Unknown keys, duplicate keys and
//! unparsable values are all reported together.

use std::fmt::Write as _;
use std::str::FromStr;

use vrin_core::TrainConfig;

use crate::error::{CliError, CliResult};

pub const KEYS: &[&str] = &[
    "task",
    "alpha",
    "beta",
    "xi",
    "l1",
    "learning_rate",
    "weight_decay",
    "epochs",
    "batch_size",
    "hidden",
    "latent",
    "vae_hidden",
    "direction",
    "variant",
    "dropout",
    "seed",
    "steps",
    "features",
    "window_hours",
    "removal",
    "recon_on_missing",
    "batch_norm",
    "early_stop_patience",
];

/// Parsed `(key, value)` pairs, validated against [`KEYS`] but not yet applied.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub entries: Vec<(String, String)>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut entries: Vec<(String, String)> = Vec::new();
        let mut problems = Vec::new();
        let mut scratch = TrainConfig::imputation(1, 1);
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                problems.push(format!("line {}: expected `key = value`", i + 1));
                continue;
            };
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                problems.push(format!("unknown key `{k}`"));
            } else if entries.iter().any(|(e, _)| e == k) {
                problems.push(format!("duplicate key `{k}`"));
            } else if set(&mut scratch, k, v).is_err() {
                problems.push(format!("unparsable value for `{k}` (`{v}`)"));
            } else {
                entries.push((k.to_string(), v.to_string()));
            }
        }
        if problems.is_empty() {
            Ok(ConfigFile { entries })
        } else {
            Err(CliError::Config(problems.join("; ")))
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Overwrites the fields named in the file, then validates the result.
    pub fn apply(&self, mut c: TrainConfig) -> CliResult<TrainConfig> {
        let mut bad = Vec::new();
        for (k, v) in &self.entries {
            if set(&mut c, k, v).is_err() {
                bad.push(format!("{k} (`{v}`)"));
            }
        }
        if !bad.is_empty() {
            return Err(CliError::Config(format!("unparsable values for: {}", bad.join(", "))));
        }
        c.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(c)
    }
}

fn parse<T: FromStr>(v: &str) -> Result<T, ()> {
    v.parse().map_err(|_| ())
}

fn set(c: &mut TrainConfig, key: &str, v: &str) -> Result<(), ()> {
    match key {
        "task" => c.task = parse(v)?,
        "alpha" => c.alpha = parse(v)?,
        "beta" => c.beta = parse(v)?,
        "xi" => c.xi = parse(v)?,
        "l1" => c.l1 = parse(v)?,
        "learning_rate" => c.learning_rate = parse(v)?,
        "weight_decay" => c.weight_decay = parse(v)?,
        "epochs" => c.epochs = parse(v)?,
        "batch_size" => c.batch_size = parse(v)?,
        "hidden" => c.hidden = parse(v)?,
        "latent" => c.latent = parse(v)?,
        "vae_hidden" => {
            c.vae_hidden = v
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| parse(s.trim()))
                .collect::<Result<_, _>>()?
        }
        "direction" => c.direction = parse(v)?,
        "variant" => c.variant = parse(v)?,
        "dropout" => c.dropout = parse(v)?,
        "seed" => c.seed = parse(v)?,
        "steps" => c.steps = parse(v)?,
        "features" => c.features = parse(v)?,
        "window_hours" => c.window_hours = parse(v)?,
        "removal" => c.removal = parse(v)?,
        "recon_on_missing" => c.recon_on_missing = parse(v)?,
        "batch_norm" => c.batch_norm = parse(v)?,
        "early_stop_patience" => c.early_stop_patience = parse(v)?,
        _ => return Err(()),
    }
    Ok(())
}

/// Every field, in [`KEYS`] order; floats use shortest round-trip form.
pub fn render(c: &TrainConfig) -> String {
    let hidden: Vec<String> = c.vae_hidden.iter().map(|h| h.to_string()).collect();
    let values = [
        c.task.to_string(),
        c.alpha.to_string(),
        c.beta.to_string(),
        c.xi.to_string(),
        c.l1.to_string(),
        c.learning_rate.to_string(),
        c.weight_decay.to_string(),
        c.epochs.to_string(),
        c.batch_size.to_string(),
        c.hidden.to_string(),
        c.latent.to_string(),
        hidden.join(","),
        c.direction.to_string(),
        c.variant.to_string(),
        c.dropout.to_string(),
        c.seed.to_string(),
        c.steps.to_string(),
        c.features.to_string(),
        c.window_hours.to_string(),
        c.removal.to_string(),
        c.recon_on_missing.to_string(),
        c.batch_norm.to_string(),
        c.early_stop_patience.to_string(),
    ];
    let mut out = String::new();
    for (k, v) in KEYS.iter().zip(values) {
        let _ = writeln!(out, "{k} = {v}");
    }
    out
}

/// Parses a complete rendered config (every key must be present).
pub fn parse_full(text: &str) -> CliResult<TrainConfig> {
    let file = ConfigFile::parse(text)?;
    let missing: Vec<&str> = KEYS.iter().copied().filter(|k| file.get(k).is_none()).collect();
    if !missing.is_empty() {
        return Err(CliError::Config(format!("missing keys: {}", missing.join(", "))));
    }
    file.apply(TrainConfig::classification(1, 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use vrin_core::{Direction, Variant};

    #[test]
    fn render_then_parse_is_identity() {
        let mut c = TrainConfig::imputation(24, 8);
        c.direction = Direction::Bi;
        c.variant = Variant::VRin;
        c.learning_rate = 3e-4;
        assert_eq!(parse_full(&render(&c)).unwrap(), c);
    }

    #[test]
    fn unknown_and_bad_keys_are_all_listed() {
        let err = ConfigFile::parse("alpha = 0.5\nbogus = 1\nlearning_rat = 2\nepochs = -3\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bogus") && msg.contains("learning_rat") && msg.contains("epochs"), "{msg}");
        assert_eq!(err.exit_code(), 2);

        let msg = ConfigFile::parse("alpha = lots\nepochs = -3\n# comment\n").unwrap_err().to_string();
        assert!(msg.contains("alpha") && msg.contains("epochs"), "{msg}");
    }

    #[test]
    fn range_violations_are_config_errors() {
        let file = ConfigFile::parse("alpha = 0.05\nbatch_norm = true").unwrap();
        let msg = file.apply(TrainConfig::imputation(4, 2)).unwrap_err().to_string();
        assert!(msg.contains("alpha") && msg.contains("batch_norm"), "{msg}");
    }
}
