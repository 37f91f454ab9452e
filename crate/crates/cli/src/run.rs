//! Executes an experiment document and writes its artifacts.
//!
//! Everything is written into a hidden staging directory next to the
//! destination, which is renamed into place only after every file is
//! complete, so a failed run never leaves a partial output directory.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::json;

use ctrlab_core::harness::{baseline_config, run_trial_with};
use ctrlab_core::model::checkpoint;
use ctrlab_core::output::{csv_bytes, opt_cell, write_atomic, write_json, SCHEMA_VERSION};
use ctrlab_core::sweep::{
    count_positives, plan_iso, run_distill_experiment, run_downsampling_experiment, run_sweep,
};
use ctrlab_core::{DistillSchedule, GroundTruth, RunRecord};

use crate::config::{ExperimentFile, KindSpec};
use crate::error::CliError;

pub const EXPERIMENT_FILE: &str = "experiment.json";
pub const SUMMARY_FILE: &str = "summary.json";

pub struct RunOptions {
    pub force: bool,
    /// Overrides the document's parallelism.
    pub parallelism: Option<usize>,
}

/// Runs `exp` and publishes its outputs at `out`.
pub fn run_experiment(exp: &ExperimentFile, out: &Path, opts: &RunOptions) -> Result<(), CliError> {
    if out.exists() && !opts.force {
        return Err(CliError::OutputExists(out.to_path_buf()));
    }
    let parallelism = opts.parallelism.unwrap_or(exp.parallelism);
    if parallelism == 0 {
        return Err(CliError::config("parallelism", "must be >= 1"));
    }
    let staging = staging_dir(out);
    if staging.exists() {
        std::fs::remove_dir_all(&staging).map_err(|e| CliError::io(&staging, e))?;
    }
    std::fs::create_dir_all(&staging).map_err(|e| CliError::io(&staging, e))?;

    let result = execute(exp, &staging, parallelism).and_then(|()| publish(&staging, out));
    if result.is_err() {
        let _ = std::fs::remove_dir_all(&staging);
    }
    result
}

fn staging_dir(out: &Path) -> PathBuf {
    let name = out
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    out.with_file_name(format!(".{name}.partial-{}", std::process::id()))
}

fn publish(staging: &Path, out: &Path) -> Result<(), CliError> {
    if out.exists() {
        std::fs::remove_dir_all(out).map_err(|e| CliError::io(out, e))?;
    }
    std::fs::rename(staging, out).map_err(|e| CliError::io(out, e))
}

fn execute(exp: &ExperimentFile, dir: &Path, parallelism: usize) -> Result<(), CliError> {
    write_json(&dir.join(EXPERIMENT_FILE), &exp.echo())?;
    let truth = Arc::new(GroundTruth::new(&exp.trial.stream)?);
    let runs = dir.join("runs");
    let summary = match &exp.spec {
        KindSpec::Single(spec) => {
            let mut record = run_trial_with(&exp.trial, &truth, None)?;
            let baseline = match spec.baseline_start {
                Some(start) => {
                    let base = run_trial_with(&baseline_config(&exp.trial, start), &truth, None)?;
                    record.attach_baseline(&base)?;
                    base.write_to(&runs.join("baseline"))?;
                    Some(base)
                }
                None => None,
            };
            record.write_to(&runs.join("trial"))?;
            json!({
                "runs": ["trial"],
                "convergence": record.convergence,
                "final_metrics": record.summary.final_metrics,
                "total_cost": record.summary.total_cost,
                "examples_kept": record.summary.examples_kept,
                "baseline_final_metrics": baseline.map(|b| b.summary.final_metrics),
            })
        }
        KindSpec::Downsampling(spec) => {
            let outcome = run_downsampling_experiment(spec, &exp.trial, &truth, parallelism)?;
            write_atomic(&dir.join("downsampling.csv"), &outcome.csv()?)?;
            outcome.reference.write_to(&runs.join("reference"))?;
            write_runs(&runs, &outcome.runs)?;
            json!({
                "runs": names(&outcome.runs),
                "reference_final_metrics": outcome.reference.summary.final_metrics,
                "rows": outcome.rows,
            })
        }
        KindSpec::Distill(spec) => {
            let outcome = run_distill_experiment(spec, &exp.trial, &truth, parallelism)?;
            write_atomic(&dir.join("distill.csv"), &outcome.csv()?)?;
            write_runs(&runs, &outcome.runs)?;
            let teacher_dir = dir.join("teacher");
            checkpoint::save(&outcome.teacher.hist_end_checkpoint, &teacher_dir.join("hist_end.ckpt"))?;
            checkpoint::save(&outcome.teacher.final_checkpoint, &teacher_dir.join("final.ckpt"))?;
            let teacher_rows = csv_bytes(
                &["window", "examples", "logloss", "ranking_loss", "bias"],
                outcome.teacher.window_metrics.iter().map(|(w, m)| {
                    vec![
                        w.to_string(),
                        m.examples.to_string(),
                        m.logloss.to_string(),
                        opt_cell(m.ranking_loss),
                        opt_cell(m.bias),
                    ]
                }),
            )?;
            write_atomic(&teacher_dir.join("metrics.csv"), &teacher_rows)?;
            let saving = outcome.saving_percent(
                &DistillSchedule::Continuous,
                &DistillSchedule::Cutover { fraction: 0.8 },
            );
            json!({
                "runs": names(&outcome.runs),
                "rows": outcome.rows,
                "schedules": outcome.schedules,
                "saving_continuous_vs_cutover_0.8_percent": saving,
            })
        }
        KindSpec::Isocompute(spec) => {
            let positives = count_positives(&truth, exp.trial.hist_start, exp.trial.online_end);
            let planned = plan_iso(spec, &exp.trial, positives)?;
            let (result, records) = run_sweep(&planned, &truth, parallelism)?;
            write_atomic(&dir.join("sweep.csv"), &result.csv()?)?;
            let named: Vec<(String, RunRecord)> = planned.iter().map(|p| p.name.clone()).zip(records).collect();
            write_runs(&runs, &named)?;
            let argmin = &result.rows[result.argmin];
            json!({
                "runs": names(&named),
                "budget": spec.budget,
                "positives": positives,
                "planned": planned.iter().map(|p| json!({
                    "name": p.name,
                    "params": p.params,
                    "planned_examples": p.planned_examples,
                    "rate": p.rate,
                    "planned_cost": p.planned_cost,
                })).collect::<Vec<_>>(),
                "rows": result.rows,
                "argmin": argmin.name,
                "argmin_params": argmin.params,
                "boundary": result.boundary,
            })
        }
    };
    write_json(
        &dir.join(SUMMARY_FILE),
        &json!({
            "schema_version": SCHEMA_VERSION,
            "kind": exp.kind,
            "seed": exp.seed,
            "result": summary,
        }),
    )?;
    Ok(())
}

fn write_runs(root: &Path, runs: &[(String, RunRecord)]) -> Result<(), CliError> {
    for (name, record) in runs {
        record.write_to(&root.join(name))?;
    }
    Ok(())
}

fn names(runs: &[(String, RunRecord)]) -> Vec<&str> {
    runs.iter().map(|(n, _)| n.as_str()).collect()
}
