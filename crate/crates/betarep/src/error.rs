use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A box or paired-box constraint was violated (zero width, empty
    /// full/visible intersection, non-finite coordinate).
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    /// Normalized moments admit no beta distribution (nu <= 0).
    #[error("infeasible moments: mu_bar={mu_bar}, sigma_bar_sq={sigma_bar_sq}")]
    InfeasibleMoments { mu_bar: f64, sigma_bar_sq: f64 },

    /// An argument fell outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Two grids that must be aligned differ in origin, cell size, or shape.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// The discretization region does not cover the pedestrian boundary.
    #[error("region does not cover boundary: {0}")]
    Coverage(String),

    /// A configuration value violates its invariant.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// A metric is undefined for the given input (e.g. empty ground truth).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// Synthetic scene generation could not satisfy the config.
    #[error("generation failed: {0}")]
    Generation(String),

    /// Malformed input line.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A record violated the detection/annotation schema.
    #[error("schema violation at record {record}: {msg}")]
    Schema { record: usize, msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
