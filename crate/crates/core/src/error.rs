use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A regressor with more columns than rows has no unique least-squares solution.
    #[error("condition violated: T >= N must hold, got T = {rows} pixels and N = {cols} gallery images")]
    TooFewPixels { rows: usize, cols: usize },

    #[error(
        "regressor for class {class_id} is singular (rank {rank} < {cols} columns); \
         apply the perturbation remedy or use the QR basic solution"
    )]
    Singular { class_id: u32, rank: usize, cols: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("voting strategy `{0}` cannot be evaluated incrementally")]
    UnsupportedStreaming(&'static str),

    #[error("gallery container: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
