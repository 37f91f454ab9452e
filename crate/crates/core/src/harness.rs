//! One training trial: a single chronological pass over history followed by
//! online training, with progressive validation on the raw stream.
//!
//! For every example the harness predicts first, records the prediction in
//! the evaluation window, and only then lets the sampler decide whether to
//! train on it. Downsampling therefore changes what the model learns from,
//! never what it is scored on.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::datagen::{GroundTruth, Stream, StreamSpec};
use crate::distill::{distill_active, distill_target, DistillPolicy, TeacherTrack};
use crate::error::{Error, Result};
use crate::hashing::HashConfig;
use crate::model::{relative_metric, Arch, CtrModel, MetricWindow, OptimizerConfig, WindowMetrics};
use crate::output::{csv_bytes, opt_cell, write_atomic, write_json, SCHEMA_VERSION};
use crate::rng::Rng;
use crate::sampling::{self, SamplerPolicy, SamplerState, Schedule, TraceRecord};

pub const DEFAULT_WINDOW: u64 = 10_000;
pub const DEFAULT_EPS_CONV: f64 = 0.002;
pub const DEFAULT_PATIENCE: usize = 5;

pub const METRICS_HEADER: [&str; 9] = [
    "window",
    "t_end",
    "examples_seen",
    "examples_kept",
    "logloss",
    "ranking_loss",
    "bias",
    "rel_logloss_vs_baseline",
    "cum_cost",
];

/// Modeled compute: every trained example costs `kappa * param_count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostModel {
    pub kappa: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel { kappa: 1.0 }
    }
}

impl CostModel {
    pub fn accumulate_cost(&self, param_count: u64, examples_kept: u64) -> f64 {
        self.kappa * param_count as f64 * examples_kept as f64
    }
}

fn default_window() -> u64 {
    DEFAULT_WINDOW
}
fn default_eps_conv() -> f64 {
    DEFAULT_EPS_CONV
}
fn default_patience() -> usize {
    DEFAULT_PATIENCE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialConfig {
    pub stream: StreamSpec,
    pub hash: HashConfig,
    pub arch: Arch,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    /// Historical range `[hist_start, hist_end)`.
    pub hist_start: u64,
    pub hist_end: u64,
    /// Online range `[hist_end, online_end)`; may be empty.
    pub online_end: u64,
    #[serde(default)]
    pub sampler: SamplerPolicy,
    #[serde(default)]
    pub distill: DistillPolicy,
    /// Evaluation window length; windows are aligned to multiples of it.
    #[serde(default = "default_window")]
    pub window: u64,
    #[serde(default = "default_eps_conv")]
    pub eps_conv: f64,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default)]
    pub cost: CostModel,
    /// Seeds model initialisation and keep decisions.
    #[serde(default)]
    pub seed: u64,
    /// Start of the pooled final-evaluation region. Defaults to the online
    /// range, or the last tenth of history when there is no online range.
    #[serde(default)]
    pub eval_from: Option<u64>,
    #[serde(default)]
    pub trace_decisions: bool,
}

impl TrialConfig {
    pub fn validate(&self) -> Result<()> {
        self.stream.validate()?;
        self.hash.validate()?;
        self.arch.validate()?;
        self.optimizer.validate()?;
        self.sampler.validate()?;
        self.distill.validate()?;
        if self.hist_start >= self.hist_end {
            return Err(Error::config(
                "hist_start",
                format!("historical range [{}, {}) is empty", self.hist_start, self.hist_end),
            ));
        }
        if self.online_end < self.hist_end {
            return Err(Error::config("online_end", "must be >= hist_end"));
        }
        if self.window == 0 {
            return Err(Error::config("window", "must be >= 1"));
        }
        if !(self.eps_conv > 0.0) {
            return Err(Error::config("eps_conv", "must be > 0"));
        }
        if self.patience == 0 {
            return Err(Error::config("patience", "must be >= 1"));
        }
        if !(self.cost.kappa > 0.0) {
            return Err(Error::config("cost.kappa", "must be > 0"));
        }
        if let Schedule::Cutoff { t_cut } = self.sampler.schedule {
            if t_cut < self.hist_start || t_cut > self.hist_end {
                return Err(Error::config(
                    "sampler.schedule.t_cut",
                    format!("{t_cut} outside historical range [{}, {}]", self.hist_start, self.hist_end),
                ));
            }
        }
        if let Some(e) = self.eval_from {
            if e < self.hist_start || e >= self.online_end {
                return Err(Error::config("eval_from", "must lie inside the trial range"));
            }
        }
        Ok(())
    }

    pub fn param_count(&self) -> u64 {
        self.arch.param_count(self.hash.dim)
    }

    pub fn eval_start(&self) -> u64 {
        self.eval_from.unwrap_or(if self.online_end > self.hist_end {
            self.hist_end
        } else {
            self.hist_end - (self.hist_end - self.hist_start) / 10
        })
    }

    /// The same trial with its first `days` historical timestamps dropped.
    pub fn prune_start_date(&self, days: u64) -> Result<TrialConfig> {
        let start = self.hist_start.saturating_add(days);
        if start >= self.hist_end {
            return Err(Error::PrunePastEnd {
                start: self.hist_start,
                days,
                hist_end: self.hist_end,
            });
        }
        let mut cfg = self.clone();
        cfg.hist_start = start;
        if let Some(e) = cfg.eval_from {
            cfg.eval_from = Some(e.max(start));
        }
        if let Schedule::Cutoff { t_cut } = cfg.sampler.schedule {
            cfg.sampler.schedule = Schedule::Cutoff { t_cut: t_cut.max(start) };
        }
        Ok(cfg)
    }
}

/// Free-function form of [`TrialConfig::prune_start_date`].
pub fn prune_start_date(cfg: &TrialConfig, days_since_last_launch: u64) -> Result<TrialConfig> {
    cfg.prune_start_date(days_since_last_launch)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRow {
    /// Absolute window index `t / window`.
    pub window: u64,
    /// Exclusive end timestamp.
    pub t_end: u64,
    pub examples_seen: u64,
    pub examples_kept: u64,
    /// Examples scored in this window.
    pub count: u64,
    pub logloss: f64,
    pub ranking_loss: Option<f64>,
    pub bias: Option<f64>,
    pub rel_logloss_vs_baseline: Option<f64>,
    pub cum_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub window: u64,
    pub row: usize,
    pub examples_seen: u64,
    pub examples_kept: u64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub examples_seen: u64,
    pub examples_kept: u64,
    pub param_count: u64,
    pub total_cost: f64,
    /// Pooled metrics over `[eval_from, online_end)`.
    pub eval_from: u64,
    pub final_metrics: WindowMetrics,
    /// Mean windowed logloss over the last tenth of windows.
    pub tail_logloss: f64,
    pub sampler_signal_decisions_hist: u64,
    pub sampler_signal_decisions_online: u64,
    pub distilled_examples: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: TrialConfig,
    pub rows: Vec<WindowRow>,
    pub convergence: Option<Convergence>,
    pub summary: RunSummary,
    #[serde(skip)]
    pub trace: Vec<TraceRecord>,
}

/// First window `w` such that each of the next `patience` values differs
/// from `series[w]` by less than `eps` in absolute value.
pub fn detect_convergence(series: &[f64], eps: f64, patience: usize) -> Option<usize> {
    (0..series.len().saturating_sub(patience)).find(|&w| {
        series[w + 1..=w + patience]
            .iter()
            .all(|v| (v - series[w]).abs() < eps)
    })
}

/// Element-wise `relative_metric(run, baseline)`.
pub fn relative_series(run: &[f64], baseline: &[f64]) -> Result<Vec<f64>> {
    if run.len() != baseline.len() {
        return Err(Error::SeriesMismatch {
            run: run.len(),
            baseline: baseline.len(),
        });
    }
    run.iter()
        .zip(baseline)
        .map(|(&r, &b)| relative_metric(r, b))
        .collect()
}

/// Mean of the last tenth (at least one) of `values`.
pub fn tail_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let n = values.len().div_ceil(10);
    values[values.len() - n..].iter().sum::<f64>() / n as f64
}

impl RunRecord {
    /// Fills `rel_logloss_vs_baseline` by joining on window index and runs
    /// convergence detection on the resulting series. Every window of this
    /// run must appear in the baseline with the same extent.
    pub fn attach_baseline(&mut self, baseline: &RunRecord) -> Result<()> {
        let mut run_ll = Vec::with_capacity(self.rows.len());
        let mut base_ll = Vec::with_capacity(self.rows.len());
        for row in &self.rows {
            match baseline
                .rows
                .binary_search_by_key(&row.window, |b| b.window)
                .ok()
                .map(|i| &baseline.rows[i])
            {
                Some(b) if b.count == row.count && b.t_end == row.t_end => {
                    run_ll.push(row.logloss);
                    base_ll.push(b.logloss);
                }
                _ => {
                    return Err(Error::SeriesMismatch {
                        run: self.rows.len(),
                        baseline: baseline.rows.len(),
                    })
                }
            }
        }
        let rel = relative_series(&run_ll, &base_ll)?;
        for (row, r) in self.rows.iter_mut().zip(&rel) {
            row.rel_logloss_vs_baseline = Some(*r);
        }
        self.convergence = detect_convergence(&rel, self.config.eps_conv, self.config.patience).map(|i| {
            let row = &self.rows[i];
            Convergence {
                window: row.window,
                row: i,
                examples_seen: row.examples_seen,
                examples_kept: row.examples_kept,
                cost: row.cum_cost,
            }
        });
        Ok(())
    }

    pub fn relative_series(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.rel_logloss_vs_baseline).collect()
    }

    pub fn metrics_csv(&self) -> Result<Vec<u8>> {
        csv_bytes(
            &METRICS_HEADER,
            self.rows.iter().map(|r| {
                vec![
                    r.window.to_string(),
                    r.t_end.to_string(),
                    r.examples_seen.to_string(),
                    r.examples_kept.to_string(),
                    r.logloss.to_string(),
                    opt_cell(r.ranking_loss),
                    opt_cell(r.bias),
                    opt_cell(r.rel_logloss_vs_baseline),
                    r.cum_cost.to_string(),
                ]
            }),
        )
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "config": self.config,
            "convergence": self.convergence,
            "summary": self.summary,
        })
    }

    pub fn trace_csv(&self) -> Result<Vec<u8>> {
        csv_bytes(
            &["t", "label", "keep_prob", "kept"],
            self.trace.iter().map(|d| {
                vec![
                    d.t.to_string(),
                    u8::from(d.label).to_string(),
                    d.keep_prob.to_string(),
                    u8::from(d.kept).to_string(),
                ]
            }),
        )
    }

    /// Writes `metrics.csv`, `summary.json` and, when traced,
    /// `decisions.csv` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        write_atomic(&dir.join("metrics.csv"), &self.metrics_csv()?)?;
        write_json(&dir.join("summary.json"), &self.summary_json())?;
        if self.config.trace_decisions {
            write_atomic(&dir.join("decisions.csv"), &self.trace_csv()?)?;
        }
        Ok(())
    }
}

/// Runs `cfg`, building the ground truth from its stream spec.
pub fn run_trial(cfg: &TrialConfig, teacher: Option<&TeacherTrack>) -> Result<RunRecord> {
    cfg.validate()?;
    let truth = Arc::new(GroundTruth::new(&cfg.stream)?);
    run_trial_with(cfg, &truth, teacher)
}

/// Runs `cfg` against a prebuilt ground truth (which must match
/// `cfg.stream`).
pub fn run_trial_with(
    cfg: &TrialConfig,
    truth: &Arc<GroundTruth>,
    teacher: Option<&TeacherTrack>,
) -> Result<RunRecord> {
    cfg.validate()?;
    if truth.spec() != &cfg.stream {
        return Err(Error::config("stream", "ground truth built from a different stream spec"));
    }
    let teacher = if cfg.distill.enabled() {
        let track = teacher.ok_or(Error::TeacherMissing)?;
        if !track.covers(cfg.hist_start, cfg.online_end) {
            return Err(Error::TeacherCoverage {
                start: cfg.hist_start,
                end: cfg.online_end,
            });
        }
        Some(track)
    } else {
        None
    };

    let stream = Stream::new(Arc::clone(truth), cfg.hash)?;
    let mut model = CtrModel::new(cfg.arch, cfg.hash, cfg.optimizer, cfg.seed)?;
    let params = model.param_count();
    let lr = cfg.optimizer.lr;
    let keep_rng = Rng::new(cfg.seed, "sampler");
    let mut state = SamplerState::for_policy(&cfg.sampler, cfg.hash.dim);
    let sampling_off = cfg.sampler.is_off() && !cfg.trace_decisions;

    let eval_from = cfg.eval_start();
    let mut window = MetricWindow::new(cfg.window as usize);
    let mut pooled = MetricWindow::new((cfg.online_end - eval_from).max(1) as usize);
    let mut rows = Vec::new();
    let mut trace = Vec::new();
    let (mut seen, mut kept, mut distilled) = (0u64, 0u64, 0u64);
    let mut signal_hist = None;
    let mut current_window = cfg.hist_start / cfg.window;

    let flush = |window: &mut MetricWindow, rows: &mut Vec<WindowRow>, index: u64, t_end: u64, seen: u64, kept: u64| {
        if window.is_empty() {
            return;
        }
        let m = window.metrics();
        rows.push(WindowRow {
            window: index,
            t_end,
            examples_seen: seen,
            examples_kept: kept,
            count: m.examples,
            logloss: m.logloss,
            ranking_loss: m.ranking_loss,
            bias: m.bias,
            rel_logloss_vs_baseline: None,
            cum_cost: cfg.cost.accumulate_cost(params, kept),
        });
        window.clear();
    };

    for (x, _) in stream.iter(cfg.hist_start, cfg.online_end) {
        let t = x.t;
        if t / cfg.window != current_window {
            flush(&mut window, &mut rows, current_window, t, seen, kept);
            current_window = t / cfg.window;
        }
        if t == cfg.hist_end {
            signal_hist = Some(state.signal_decisions);
        }

        let p = model.predict(&x);
        window.push(p, x.label, 1.0);
        if t >= eval_from {
            pooled.push(p, x.label, 1.0);
        }
        seen += 1;

        let train_on = if sampling_off {
            Some(x)
        } else {
            let decision = sampling::apply(&cfg.sampler, &mut state, &x, p, t, &keep_rng);
            if cfg.trace_decisions {
                trace.push(TraceRecord {
                    t,
                    label: x.label,
                    keep_prob: decision.keep_prob,
                    kept: decision.kept.is_some(),
                });
            }
            decision.kept
        };
        if let Some(k) = train_on {
            let target = match teacher {
                Some(track) if distill_active(&cfg.distill, t, cfg.hist_start, cfg.hist_end) => {
                    distilled += 1;
                    distill_target(k.y(), track.prediction(t), cfg.distill.alpha)
                }
                _ => k.y(),
            };
            model.grad_step(&k, target, lr);
            kept += 1;
        }
    }
    flush(&mut window, &mut rows, current_window, cfg.online_end, seen, kept);

    let signal_hist = signal_hist.unwrap_or(state.signal_decisions);
    let tail: Vec<f64> = rows.iter().map(|r| r.logloss).collect();
    Ok(RunRecord {
        config: cfg.clone(),
        convergence: None,
        summary: RunSummary {
            examples_seen: seen,
            examples_kept: kept,
            param_count: params,
            total_cost: cfg.cost.accumulate_cost(params, kept),
            eval_from,
            final_metrics: pooled.metrics(),
            tail_logloss: tail_mean(&tail),
            sampler_signal_decisions_hist: signal_hist,
            sampler_signal_decisions_online: state.signal_decisions - signal_hist,
            distilled_examples: distilled,
        },
        rows,
        trace,
    })
}

/// The relative-metric reference for `cfg`: same model, sampler and
/// distillation off, history starting at `start`.
pub fn baseline_config(cfg: &TrialConfig, start: u64) -> TrialConfig {
    let mut base = cfg.clone();
    base.hist_start = start.min(cfg.hist_start);
    base.sampler = SamplerPolicy::off();
    base.distill = DistillPolicy::default();
    base.trace_decisions = false;
    if let Some(e) = base.eval_from {
        base.eval_from = Some(e.max(base.hist_start));
    }
    base
}
