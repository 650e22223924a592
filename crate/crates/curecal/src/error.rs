use thiserror::Error;

/// Everything that can go wrong across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("column {0:?} not found in header")]
    MissingColumn(String),

    #[error("row {row}: cannot parse {column:?} value {value:?} as a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}: {message}")]
    InvalidRecord { row: usize, message: String },

    #[error("cohort is empty after exclusions")]
    EmptyCohort,

    #[error("jackknife needs at least two records, got {0}")]
    TooFewRecords(usize),

    #[error("length mismatch: {left} weights vs {right} records")]
    LengthMismatch { left: usize, right: usize },

    #[error("weighted risk set is zero at event time {0}")]
    ZeroRiskSet(f64),

    #[error("balance target is infeasible: {0}")]
    Infeasible(String),

    #[error("solver did not converge: {0}")]
    NoConvergence(String),

    #[error("design matrix is rank deficient ({0})")]
    RankDeficient(String),

    #[error("weighted pseudo-observation mean {0} is outside (0,1); logit-scale estimate undefined, use the plain PO estimator")]
    LogitBoundary(f64),

    #[error("propensity {0} too close to 1; odds weight overflows")]
    PropensityOverflow(f64),

    #[error("{failed} of {total} replicates failed (> 20%); first failure: {first}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        first: String,
    },

    #[error("invalid specification: {0}")]
    InvalidSpec(String),
}

pub type Result<T> = std::result::Result<T, Error>;
