//! Library half of the `ctrlab` command: experiment documents, execution
//! with atomic output publication, and report generation.

pub mod config;
pub mod error;
pub mod report;
pub mod run;

use std::path::Path;
use std::sync::Arc;

use ctrlab_core::datagen::{write_examples, Stream};
use ctrlab_core::output::write_atomic;
use ctrlab_core::GroundTruth;

pub use config::{ExperimentFile, Kind, KindSpec};
pub use error::{exit, CliError};
pub use report::report;
pub use run::{run_experiment, RunOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenStats {
    pub examples: u64,
    pub positives: u64,
}

impl GenStats {
    pub fn positive_rate(&self) -> f64 {
        self.positives as f64 / self.examples.max(1) as f64
    }
}

/// Exports the trial range `[hist_start, online_end)` of the document's
/// stream, hashed with the trial's hash config.
pub fn generate_stream(exp: &ExperimentFile, out: &Path, force: bool) -> Result<GenStats, CliError> {
    if out.exists() && !force {
        return Err(CliError::OutputExists(out.to_path_buf()));
    }
    let truth = Arc::new(GroundTruth::new(&exp.trial.stream)?);
    let stream = Stream::new(truth, exp.trial.hash)?;
    let mut positives = 0;
    let mut bytes = Vec::new();
    write_examples(
        &mut bytes,
        stream.iter(exp.trial.hist_start, exp.trial.online_end).map(|(x, _)| {
            positives += u64::from(x.label);
            x
        }),
    )
    .map_err(|e| CliError::io(out, e))?;
    write_atomic(out, &bytes)?;
    Ok(GenStats {
        examples: exp.trial.online_end - exp.trial.hist_start,
        positives,
    })
}
