use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("row {row}: cannot parse {field} value `{value}`")]
    BadValue {
        row: usize,
        field: String,
        value: String,
    },

    #[error("group configuration: {0}")]
    Groups(String),

    #[error("insufficient distinct scores: {distinct} distinct values for {levels} levels")]
    InsufficientDistinctScores { distinct: usize, levels: usize },

    #[error("group `{0}` not present in the data")]
    GroupAbsent(String),

    #[error("no classification available: supply a prediction column or a threshold")]
    NoPrediction,

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("infeasible noise: {0}")]
    InfeasibleNoise(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "logistic fit did not converge after {iterations} iterations (gradient {gradient:.3e})"
    )]
    NonConvergence { iterations: usize, gradient: f64 },

    #[error("perfect separation detected: coefficient diverged to {0}")]
    Separation(f64),

    #[error("singular information matrix")]
    Singular,

    #[error("degenerate input: {0}")]
    Degenerate(String),
}

impl Error {
    /// Numerical failures as opposed to bad input or configuration.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. } | Error::Separation(_) | Error::Singular
        )
    }
}
