//! Plot-ready tables and a text summary from a completed output directory.
//!
//! Every figure table is long format with columns `series, x, y`:
//!
//! * `fig1.csv` — accuracy as the dataset grows: relative logloss (or raw
//!   logloss without a baseline) against examples seen;
//! * `fig2.csv` — downsampling runs: relative logloss against kept examples,
//!   one series per rate and schedule;
//! * `fig3.csv` — distillation sets: relative Ranking Loss against training
//!   volume, one series per schedule;
//! * `fig4.csv` — iso-compute curve: final loss against parameter count.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

use ctrlab_core::output::{csv_bytes, write_atomic};
use ctrlab_core::sweep::{DistillRow, DownsamplingRow, SweepRow};

use crate::config::Kind;
use crate::error::CliError;
use crate::run::{EXPERIMENT_FILE, SUMMARY_FILE};

/// Published production-scale data saving of continuous distillation over the
/// later cutover, shown next to the measured value.
pub const PUBLISHED_DISTILL_SAVING_PERCENT: f64 = 35.0;

#[derive(Debug, Deserialize)]
struct MetricsRow {
    examples_seen: u64,
    examples_kept: u64,
    logloss: f64,
    rel_logloss_vs_baseline: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    /// Files written, relative to the output directory.
    pub files: Vec<String>,
    pub text: String,
}

pub fn report(dir: &Path) -> Result<Report, CliError> {
    let experiment = read_json(&dir.join(EXPERIMENT_FILE))?;
    let summary = read_json(&dir.join(SUMMARY_FILE))?;
    let kind: Kind = serde_json::from_value(summary["kind"].clone())
        .map_err(|e| CliError::report(dir.join(SUMMARY_FILE), format!("bad kind: {e}")))?;
    let result = &summary["result"];
    let runs: Vec<String> = result["runs"]
        .as_array()
        .ok_or_else(|| CliError::report(dir.join(SUMMARY_FILE), "missing run list"))?
        .iter()
        .filter_map(|v| v.as_str().map(String::from))
        .collect();
    for run in &runs {
        let metrics = dir.join("runs").join(run).join("metrics.csv");
        if !metrics.is_file() {
            return Err(CliError::report(metrics, "run output missing; the directory is incomplete"));
        }
    }

    let mut text = String::new();
    let mut files = Vec::new();
    let eps = experiment["trial"]["eps_conv"].as_f64().unwrap_or(f64::NAN);
    writeln!(text, "ctrlab report").ok();
    writeln!(text, "kind: {}", kind.section()).ok();
    writeln!(text, "seed: {}", summary["seed"]).ok();
    writeln!(text, "convergence tolerance eps_conv: {eps}").ok();

    match kind {
        Kind::Single => {
            let rows: Vec<MetricsRow> = read_csv(&run_metrics(dir, "trial"))?;
            emit(dir, "fig1.csv", fig1_series("trial", &rows), &mut files)?;
            writeln!(text, "\nconvergence point:").ok();
            writeln!(text, "  trial: {}", convergence_text(&result["convergence"])).ok();
            writeln!(text, "\nfinal metrics (pooled evaluation region):").ok();
            writeln!(text, "  trial: {}", metrics_text(&result["final_metrics"])).ok();
            if !result["baseline_final_metrics"].is_null() {
                writeln!(text, "  baseline: {}", metrics_text(&result["baseline_final_metrics"])).ok();
            }
        }
        Kind::Downsampling => {
            let table: Vec<DownsamplingRow> = read_csv(&dir.join("downsampling.csv"))?;
            let mut fig1 = Vec::new();
            let mut fig2 = Vec::new();
            for row in &table {
                let metrics: Vec<MetricsRow> = read_csv(&run_metrics(dir, &row.name))?;
                if row.rate == 1.0 && row.schedule == "continuous" {
                    fig1 = fig1_series(&row.name, &metrics);
                }
                fig2.extend(metrics.iter().filter_map(|m| {
                    m.rel_logloss_vs_baseline
                        .map(|y| vec![row.name.clone(), m.examples_kept.to_string(), y.to_string()])
                }));
            }
            emit(dir, "fig1.csv", fig1, &mut files)?;
            emit(dir, "fig2.csv", fig2, &mut files)?;

            writeln!(text, "\nconvergence points (examples seen / kept):").ok();
            for row in &table {
                let point = match (row.convergence_examples_seen, row.convergence_examples_kept) {
                    (Some(s), Some(k)) => format!("seen {s}, kept {k}"),
                    _ => "not converged".into(),
                };
                writeln!(text, "  {}: {point}", row.name).ok();
            }
            writeln!(text, "\nfinal relative logloss vs rate 1.0 on the same schedule:").ok();
            for row in &table {
                writeln!(text, "  {}: {:+.3}%", row.name, 100.0 * row.final_rel_logloss).ok();
            }
            writeln!(text, "\ndata saving to convergence in kept examples:").ok();
            let find = |rate: f64, schedule: &str| table.iter().find(|r| r.rate == rate && r.schedule == schedule);
            for row in table.iter().filter(|r| r.rate < 1.0 && r.schedule == "continuous") {
                let cont = row.convergence_examples_kept;
                let cut = find(row.rate, "cutoff").and_then(|r| r.convergence_examples_kept);
                let full = find(1.0, "continuous").and_then(|r| r.convergence_examples_kept);
                writeln!(
                    text,
                    "  continuous r={} vs cutoff r={}: {}",
                    row.rate,
                    row.rate,
                    saving_text(cont, cut)
                )
                .ok();
                writeln!(text, "  continuous r={} vs r=1: {}", row.rate, saving_text(cont, full)).ok();
            }
        }
        Kind::Distill => {
            let table: Vec<DistillRow> = read_csv(&dir.join("distill.csv"))?;
            let mut fig3: Vec<Vec<String>> = table
                .iter()
                .map(|r| vec![r.schedule.clone(), r.volume.to_string(), r.rel_ranking_loss.to_string()])
                .collect();
            fig3.sort_by(|a, b| {
                a[0].cmp(&b[0])
                    .then(a[1].parse::<u64>().unwrap_or(0).cmp(&b[1].parse::<u64>().unwrap_or(0)))
            });
            emit(dir, "fig3.csv", fig3, &mut files)?;

            writeln!(text, "\nminimal converged volume (relative Ranking Loss <= eps_conv):").ok();
            let mut volumes = Vec::new();
            for s in result["schedules"].as_array().into_iter().flatten() {
                let name = s["schedule"].as_str().unwrap_or("?").to_string();
                let v = s["min_converged_volume"].as_u64();
                writeln!(text, "  {name}: {}", v.map_or("none".into(), |v| v.to_string())).ok();
                volumes.push((name, v));
            }
            writeln!(text, "\nrelative Ranking Loss by volume:").ok();
            for r in &table {
                writeln!(text, "  {} (volume {}): {:+.3}%", r.name, r.volume, 100.0 * r.rel_ranking_loss).ok();
            }
            let get = |n: &str| volumes.iter().find(|(name, _)| name == n).and_then(|(_, v)| *v);
            writeln!(
                text,
                "\ndata saving, continuous vs cutover 0.8: {} (published, production scale: {PUBLISHED_DISTILL_SAVING_PERCENT}%)",
                saving_text(get("continuous"), get("cutover_0.8"))
            )
            .ok();
            if get("cutover_0.6").is_some() {
                writeln!(
                    text,
                    "data saving, continuous vs cutover 0.6: {}",
                    saving_text(get("continuous"), get("cutover_0.6"))
                )
                .ok();
            }
        }
        Kind::Isocompute => {
            let table: Vec<SweepRow> = read_csv(&dir.join("sweep.csv"))?;
            let budget = result["budget"].as_f64().unwrap_or(f64::NAN);
            let series = format!("budget_{budget}");
            let fig4 = table
                .iter()
                .map(|r| vec![series.clone(), r.params.to_string(), r.final_loss.to_string()])
                .collect();
            emit(dir, "fig4.csv", fig4, &mut files)?;
            writeln!(text, "\niso-compute budget: {budget}").ok();
            for r in &table {
                writeln!(
                    text,
                    "  {}: params {}, negative rate {:.5}, kept {}, cost/budget {:.4}, final loss {:.6}",
                    r.name,
                    r.params,
                    r.rate,
                    r.kept_examples,
                    r.cost / budget,
                    r.final_loss
                )
                .ok();
            }
            let boundary = result["boundary"].as_bool().unwrap_or(true);
            writeln!(
                text,
                "argmin: {} ({} params){}",
                result["argmin"].as_str().unwrap_or("?"),
                result["argmin_params"],
                if boundary { " — at the boundary, no valley" } else { " — interior, valley found" }
            )
            .ok();
        }
    }
    write_atomic(&dir.join("report.txt"), text.as_bytes())?;
    files.push("report.txt".into());
    Ok(Report { files, text })
}

fn run_metrics(dir: &Path, run: &str) -> PathBuf {
    dir.join("runs").join(run).join("metrics.csv")
}

fn fig1_series(name: &str, rows: &[MetricsRow]) -> Vec<Vec<String>> {
    let relative = rows.iter().all(|r| r.rel_logloss_vs_baseline.is_some());
    rows.iter()
        .map(|r| {
            let y = if relative {
                r.rel_logloss_vs_baseline.expect("checked")
            } else {
                r.logloss
            };
            vec![name.to_string(), r.examples_seen.to_string(), y.to_string()]
        })
        .collect()
}

fn emit(dir: &Path, name: &str, rows: Vec<Vec<String>>, files: &mut Vec<String>) -> Result<(), CliError> {
    write_atomic(&dir.join(name), &csv_bytes(&["series", "x", "y"], rows)?)?;
    files.push(name.into());
    Ok(())
}

fn saving_text(a: Option<u64>, b: Option<u64>) -> String {
    match (a, b) {
        (Some(a), Some(b)) if b > 0 => format!("{:.1}%", 100.0 * (1.0 - a as f64 / b as f64)),
        _ => "n/a (a run did not converge)".into(),
    }
}

fn convergence_text(c: &Value) -> String {
    if c.is_null() {
        return "not converged (or no baseline)".into();
    }
    format!(
        "window {}, examples seen {}, kept {}, cost {}",
        c["window"], c["examples_seen"], c["examples_kept"], c["cost"]
    )
}

fn metrics_text(m: &Value) -> String {
    format!(
        "logloss {}, ranking loss {}, bias {}",
        m["logloss"], m["ranking_loss"], m["bias"]
    )
}

fn read_json(path: &Path) -> Result<Value, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::report(path, format!("cannot read: {e}")))?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::report(path, format!("malformed: {e}")))
}

fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::report(path, e.to_string()))?;
    reader
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| CliError::report(path, e.to_string()))
}
