use std::path::PathBuf;

use serde_json::json;
use thiserror::Error;

use ctrlab_core::output::SCHEMA_VERSION;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    /// A run failed after validation succeeded.
    pub const RUNTIME: i32 = 1;
    /// The config document failed to parse or validate.
    pub const CONFIG: i32 = 2;
    /// The output directory exists and `--force` was not given.
    pub const OUTPUT_EXISTS: i32 = 3;
    /// `report` was pointed at a missing or incomplete run directory.
    pub const REPORT_INPUT: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Parse {
        path: PathBuf,
        message: String,
        key: Option<String>,
        line: Option<usize>,
    },
    #[error("invalid config key `{key}`: {reason}")]
    Config { key: String, reason: String },
    #[error("output {0} already exists; pass --force to replace it")]
    OutputExists(PathBuf),
    #[error("{path}: {reason}")]
    ReportInput { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] ctrlab_core::Error),
}

impl CliError {
    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn report(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        CliError::ReportInput {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Config { .. } => exit::CONFIG,
            CliError::OutputExists(_) => exit::OUTPUT_EXISTS,
            CliError::ReportInput { .. } => exit::REPORT_INPUT,
            CliError::Io { .. } => exit::RUNTIME,
            CliError::Core(e) => {
                if is_config_error(e) {
                    exit::CONFIG
                } else {
                    exit::RUNTIME
                }
            }
        }
    }

    fn kind(&self) -> &'static str {
        match self.exit_code() {
            exit::CONFIG => "config",
            exit::OUTPUT_EXISTS => "output_exists",
            exit::REPORT_INPUT => "report_input",
            _ => "runtime",
        }
    }

    fn key(&self) -> Option<String> {
        match self {
            CliError::Parse { key, .. } => key.clone(),
            CliError::Config { key, .. } => Some(key.clone()),
            CliError::Core(e) => core_key(e),
            _ => None,
        }
    }

    /// Machine-readable form printed on stderr.
    pub fn to_json(&self) -> serde_json::Value {
        let line = match self {
            CliError::Parse { line, .. } => *line,
            _ => None,
        };
        json!({
            "schema_version": SCHEMA_VERSION,
            "error": {
                "kind": self.kind(),
                "exit_code": self.exit_code(),
                "message": self.to_string(),
                "key": self.key(),
                "line": line,
            }
        })
    }
}

fn is_config_error(e: &ctrlab_core::Error) -> bool {
    use ctrlab_core::Error as E;
    match e {
        E::InvalidConfig { .. }
        | E::InvalidRange { .. }
        | E::PrunePastEnd { .. }
        | E::TeacherMissing
        | E::TeacherCoverage { .. }
        | E::BudgetTooSmall { .. }
        | E::BudgetTooLarge { .. }
        | E::CalibrationBracket { .. } => true,
        E::Trial { source, .. } => is_config_error(source),
        _ => false,
    }
}

fn core_key(e: &ctrlab_core::Error) -> Option<String> {
    use ctrlab_core::Error as E;
    match e {
        E::InvalidConfig { key, .. } => Some(key.clone()),
        E::BudgetTooSmall { .. } | E::BudgetTooLarge { .. } => Some("isocompute.budget".into()),
        E::Trial { source, .. } => core_key(source),
        _ => None,
    }
}
