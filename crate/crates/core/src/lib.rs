//! Joint imputation and outcome prediction for sparse, irregularly sampled
//! multivariate time series.
//!
//! A per-timestep variational autoencoder fills missing entries and reports a
//! heteroscedastic standard deviation for each fill. A recurrent imputation
//! network then decays those fills by their uncertainty, combines them with
//! history-based regressions, and predicts a binary outcome from the final
//! hidden state. Everything is trained end-to-end through a small reverse-mode
//! differentiation engine ([`graph`]).
//!
//! The crate is `no_std` and only needs `alloc`. File formats, checkpoints and
//! the command-line driver live in the `vrin` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod baselines;
pub mod config;
pub mod data;
mod error;
pub mod gradcheck;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod objectives;
pub mod optim;
pub mod params;
pub mod recurrent;
pub mod rng;
pub mod tensor;
pub mod trainer;
pub mod vae;

pub use config::{Direction, Task, TrainConfig, Variant};
pub use data::{IrregularSeries, MaskedBatch, RemovalRecord};
pub use error::{Error, Result};
pub use graph::{Graph, Var};
pub use model::Model;
pub use params::{Gradients, ParamId, ParameterStore};
pub use tensor::Tensor;
