use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid config: {key}: {reason}")]
    InvalidConfig { key: String, reason: String },

    #[error("invalid range: [{start}, {end})")]
    InvalidRange { start: i64, end: i64 },

    #[error("intercept calibration failed: target ctr {target} not bracketed within [-30, 30] logits")]
    CalibrationBracket { target: f64 },

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("series length mismatch: run has {run} windows, baseline has {baseline}")]
    SeriesMismatch { run: usize, baseline: usize },

    #[error("cannot prune {days} timestamps: start {start} would reach historical end {hist_end}")]
    PrunePastEnd { start: u64, days: u64, hist_end: u64 },

    #[error("distillation enabled but no teacher track available")]
    TeacherMissing,

    #[error("teacher track does not cover timestamps [{start}, {end})")]
    TeacherCoverage { start: u64, end: u64 },

    #[error("budget too small: size with {params} params gets {examples} examples, minimum is {minimum}")]
    BudgetTooSmall { params: u64, examples: u64, minimum: u64 },

    #[error("budget too large: size with {params} params needs {examples} examples, stream has {available}")]
    BudgetTooLarge { params: u64, examples: u64, available: u64 },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("trial `{name}` failed: {source}")]
    Trial {
        name: String,
        #[source]
        source: Box<Error>,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
