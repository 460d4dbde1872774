use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("vector of length {0} is not a column string (length must be a perfect square)")]
    NotPerfectSquare(usize),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not skew-symmetric (max asymmetry {0:e})")]
    NotSkew(f64),

    #[error("matrix is not orthogonal (||C'C - I||_F = {0:e})")]
    NotOrthogonal(f64),

    #[error("rank-deficient matrix (smallest singular value {0:e})")]
    RankDeficient(f64),

    #[error("rank-deficient data: covariance eigenvalues span [{min:e}, {max:e}]")]
    RankDeficientData { min: f64, max: f64 },

    #[error("degenerate channel {channel}: second moment {moment:e}")]
    DegenerateChannel { channel: usize, moment: f64 },

    #[error("non-finite cost statistic {0}")]
    NonFiniteStatistic(&'static str),

    #[error("ill-conditioned Newton system (condition estimate {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("invalid wav data: {0}")]
    Wav(String),

    #[error("invalid matrix file: {0}")]
    MatrixFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
