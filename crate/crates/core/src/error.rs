use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("{op}: produced a non-finite value (numeric overflow)")]
    NonFinite { op: &'static str },
    #[error("backward needs a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("non-finite loss term `{term}` at epoch {epoch}, batch {batch}")]
    NonFiniteLoss {
        term: &'static str,
        epoch: usize,
        batch: usize,
    },
    #[error("timestamps must be strictly increasing (sample {sample}, step {step})")]
    NonIncreasingTimestamps { sample: usize, step: usize },
    #[error("AUC is undefined when only one class is present")]
    SingleClass,
    #[error("average precision needs at least one positive label")]
    NoPositives,
    #[error("imputation metrics need a non-empty removal record")]
    EmptyRecord,
    #[error("relative error undefined: ground truth magnitude is zero but error is not")]
    ZeroDenominator,
    #[error("invalid argument: {0}")]
    Invalid(String),
}
