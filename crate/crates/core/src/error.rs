use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("malformed cell {value:?} at row {row}, column {col}")]
    MalformedCell { row: usize, col: usize, value: String },

    #[error("ragged row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("at least 2 items are required, found {0}")]
    TooFewItems(usize),

    #[error("empty response file")]
    Empty,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The symmetric support graph of the differential matrix is not connected,
    /// so the item parameters are not identifiable.
    #[error("Markov chain is reducible: support graph has {components} connected components")]
    ReducibleChain { components: usize },

    #[error("power iteration stalled after {iterations} iterations (gap {gap:.3e})")]
    NonConvergence { iterations: usize, gap: f64 },

    #[error("sampling graph still disconnected after {attempts} attempts")]
    DisconnectedGraph { attempts: usize },

    #[error("rejection sampler exceeded {0} attempts")]
    SamplerExhausted(usize),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config: {0}")]
    Config(String),
}
