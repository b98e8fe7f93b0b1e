use thiserror::Error;

/// Errors produced by the simulator and analysis layers.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (bad modulation order, mismatched bit lengths, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Input outside the operation's domain (rank out of range, empty curve, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A matrix handed to the demapper is not a codebook member.
    #[error("detection error: {0}")]
    Detection(String),

    /// Numerical failure (singular system, non-finite intermediate).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Geometry degenerates (receiver on top of a pinching position).
    #[error("geometry singularity: {0}")]
    Singularity(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
