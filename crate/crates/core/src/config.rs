//! Training hyperparameters and the two per-task presets.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Classification,
    Imputation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Uni,
    Bi,
}

/// `VRin` drops the uncertainty gate (υ ≡ 1); `VRinFull` keeps it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    VRin,
    VRinFull,
}

macro_rules! named_enum {
    ($ty:ident { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub fn name(self) -> &'static str {
                match self {
                    $($ty::$variant => $name),+
                }
            }
        }

        impl core::fmt::Display for $ty {
            fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
                f.write_str(self.name())
            }
        }

        impl core::str::FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($ty::$variant),)+
                    other => Err(Error::Invalid(alloc::format!(
                        concat!("unknown ", stringify!($ty), " `{}` (expected one of: ", $($name, " "),+, ")"),
                        other
                    ))),
                }
            }
        }
    };
}

named_enum!(Task { Classification => "classification", Imputation => "imputation" });
named_enum!(Direction { Uni => "uni", Bi => "bi" });
named_enum!(Variant { VRin => "v-rin", VRinFull => "v-rin-full" });

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub task: Task,
    /// Weight of the VAE loss.
    pub alpha: f64,
    /// Weight of the regression (masked MAE) loss.
    pub beta: f64,
    /// Weight of the bidirectional consistency loss.
    pub xi: f64,
    /// ℓ1 coefficient on VAE parameters.
    pub l1: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Recurrent hidden size.
    pub hidden: usize,
    /// VAE latent size.
    pub latent: usize,
    /// VAE encoder hidden widths; the decoder mirrors them.
    pub vae_hidden: Vec<usize>,
    pub direction: Direction,
    pub variant: Variant,
    /// Dropout rate on VAE hidden layers.
    pub dropout: f64,
    pub seed: u64,
    pub steps: usize,
    pub features: usize,
    pub window_hours: f64,
    /// Fraction of observed entries hidden as ground truth / augmentation.
    pub removal: f64,
    /// Score the reconstruction likelihood on zero-filled missing entries too.
    pub recon_on_missing: bool,
    /// Reserved; batch normalization is not implemented.
    pub batch_norm: bool,
    /// Stop when the epoch loss has not improved for this many epochs (0 = off).
    pub early_stop_patience: usize,
}

impl TrainConfig {
    /// Imputation regime: learning rate 5e-4, dropout 0.3.
    pub fn imputation(steps: usize, features: usize) -> Self {
        TrainConfig {
            task: Task::Imputation,
            alpha: 0.75,
            beta: 0.25,
            xi: 0.1,
            l1: 1e-5,
            learning_rate: 5e-4,
            weight_decay: 1e-5,
            epochs: 100,
            batch_size: 64,
            hidden: 64,
            latent: 10,
            vae_hidden: vec![64, 24],
            direction: Direction::Uni,
            variant: Variant::VRinFull,
            dropout: 0.3,
            seed: 0,
            steps,
            features,
            window_hours: 1.0,
            removal: 0.1,
            recon_on_missing: false,
            batch_norm: false,
            early_stop_patience: 0,
        }
    }

    /// Classification regime: learning rate 5e-3, dropout 0.1.
    pub fn classification(steps: usize, features: usize) -> Self {
        TrainConfig {
            task: Task::Classification,
            learning_rate: 5e-3,
            dropout: 0.1,
            removal: 0.0,
            ..Self::imputation(steps, features)
        }
    }

    pub fn for_task(task: Task, steps: usize, features: usize) -> Self {
        match task {
            Task::Classification => Self::classification(steps, features),
            Task::Imputation => Self::imputation(steps, features),
        }
    }

    pub fn gated(&self) -> bool {
        self.variant == Variant::VRinFull
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(0.1..=1.0).contains(&self.alpha) {
            bad.push("alpha");
        }
        if !(0.1..=1.0).contains(&self.beta) {
            bad.push("beta");
        }
        if !(self.xi >= 0.0) {
            bad.push("xi");
        }
        if !(self.l1 >= 0.0) {
            bad.push("l1");
        }
        if !(self.learning_rate > 0.0) {
            bad.push("learning_rate");
        }
        if !(self.weight_decay >= 0.0) {
            bad.push("weight_decay");
        }
        if self.epochs == 0 {
            bad.push("epochs");
        }
        if self.batch_size == 0 {
            bad.push("batch_size");
        }
        if self.hidden == 0 {
            bad.push("hidden");
        }
        if self.latent == 0 {
            bad.push("latent");
        }
        if self.vae_hidden.contains(&0) {
            bad.push("vae_hidden");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            bad.push("dropout");
        }
        if self.steps == 0 {
            bad.push("steps");
        }
        if self.features == 0 {
            bad.push("features");
        }
        if !(self.window_hours > 0.0) {
            bad.push("window_hours");
        }
        if !(0.0..1.0).contains(&self.removal) {
            bad.push("removal");
        }
        if self.batch_norm {
            bad.push("batch_norm");
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(alloc::format!("invalid config keys: {}", bad.join(", "))))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_differ_only_where_tasks_do() {
        let c = TrainConfig::classification(48, 35);
        let i = TrainConfig::imputation(48, 35);
        assert_eq!((c.learning_rate, c.dropout), (5e-3, 0.1));
        assert_eq!((i.learning_rate, i.dropout), (5e-4, 0.3));
        assert_eq!((c.epochs, c.batch_size, c.xi, c.l1, c.weight_decay), (100, 64, 0.1, 1e-5, 1e-5));
        assert_eq!((c.hidden, c.latent, &c.vae_hidden[..]), (64, 10, &[64, 24][..]));
        c.validate().unwrap();
        i.validate().unwrap();
    }

    #[test]
    fn validation_lists_every_offending_key() {
        let mut c = TrainConfig::imputation(4, 3);
        c.alpha = 0.0;
        c.batch_size = 0;
        let msg = alloc::format!("{}", c.validate().unwrap_err());
        assert!(msg.contains("alpha") && msg.contains("batch_size"), "{msg}");
    }

    #[test]
    fn enum_names_round_trip() {
        for v in [Variant::VRin, Variant::VRinFull] {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert_eq!("bi".parse::<Direction>().unwrap(), Direction::Bi);
        assert!("sideways".parse::<Direction>().is_err());
    }
}
