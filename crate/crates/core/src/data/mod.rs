//! From irregular event streams to the regular-grid tensors the model reads:
//! zero-filled values, observation mask, time gaps since the last
//! observation, timestamps and labels.

mod batch;
mod folds;
mod normalize;
mod removal;
mod series;
mod synthetic;

pub use batch::{build_delta, MaskedBatch};
pub use folds::kfold_split;
pub use normalize::{normalize, NormStats};
pub use removal::{remove_values, restore, RemovalRecord, RemovalScope, RemovedEntry};
pub use series::{bin_to_grid, Event, GridSample, IrregularSeries};
pub use synthetic::{generate_synthetic, SyntheticSpec};
