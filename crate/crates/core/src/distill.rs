//! Teacher/student distillation.
//!
//! The student trains against `(1 - alpha) * y + alpha * p_teacher`. The
//! teacher is a larger model trained on the unsampled stream from an
//! earlier start date. It advances in lockstep windows aligned with the
//! evaluation windows: predictions served for window `k` come from the
//! teacher as it stood at the start of window `k`, after which the teacher
//! trains on window `k`. Students therefore never see a teacher prediction
//! informed by the label it is predicting, and the same track serves every
//! student of an experiment.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::datagen::{GroundTruth, Stream};
use crate::error::{Error, Result};
use crate::hashing::HashConfig;
use crate::model::{Arch, CtrModel, MetricWindow, OptimizerConfig, WindowMetrics};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistillSchedule {
    None,
    /// Distil while `t` is before `fraction` of the historical range.
    Cutover { fraction: f64 },
    /// Distil through history and online training.
    Continuous,
}

impl DistillSchedule {
    pub fn label(&self) -> String {
        match *self {
            DistillSchedule::None => "none".into(),
            DistillSchedule::Cutover { fraction } => format!("cutover_{fraction}"),
            DistillSchedule::Continuous => "continuous".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistillPolicy {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub schedule: DistillSchedule,
}

fn default_alpha() -> f64 {
    0.5
}

impl Default for DistillPolicy {
    fn default() -> Self {
        DistillPolicy {
            alpha: default_alpha(),
            schedule: DistillSchedule::None,
        }
    }
}

impl DistillPolicy {
    pub fn enabled(&self) -> bool {
        !matches!(self.schedule, DistillSchedule::None)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::config("distill.alpha", format!("must lie in [0, 1], got {}", self.alpha)));
        }
        if let DistillSchedule::Cutover { fraction } = self.schedule {
            if !(fraction > 0.0 && fraction < 1.0) {
                return Err(Error::config(
                    "distill.schedule.fraction",
                    format!("must lie in (0, 1), got {fraction}"),
                ));
            }
        }
        Ok(())
    }
}

/// Soft target `(1 - alpha) * y + alpha * p_teacher`.
#[inline]
pub fn distill_target(y: f64, p_teacher: f64, alpha: f64) -> f64 {
    (1.0 - alpha) * y + alpha * p_teacher
}

/// Whether distillation applies at `t` for a student whose history is
/// `[hist_start, hist_end)`.
pub fn distill_active(policy: &DistillPolicy, t: u64, hist_start: u64, hist_end: u64) -> bool {
    match policy.schedule {
        DistillSchedule::None => false,
        DistillSchedule::Continuous => true,
        DistillSchedule::Cutover { fraction } => {
            (t as f64) < hist_start as f64 + fraction * (hist_end - hist_start) as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeacherSpec {
    pub arch: Arch,
    pub hash_dim: u32,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    /// First timestamp the teacher trains on; earlier than any student.
    pub start: u64,
    #[serde(default)]
    pub seed: u64,
}

impl TeacherSpec {
    pub fn param_count(&self) -> u64 {
        self.arch.param_count(self.hash_dim)
    }

    /// Rejects a teacher that is not strictly larger than the student or
    /// starts after it.
    pub fn check_against_student(&self, student_params: u64, student_start: u64) -> Result<()> {
        if self.param_count() <= student_params {
            return Err(Error::config(
                "teacher.arch",
                format!(
                    "teacher has {} params, must exceed student's {student_params}",
                    self.param_count()
                ),
            ));
        }
        if self.start > student_start {
            return Err(Error::config(
                "teacher.start",
                format!("teacher starts at {} after student start {student_start}", self.start),
            ));
        }
        Ok(())
    }
}

/// Teacher predictions for every timestamp in `[start, end)`, produced in
/// window lockstep, plus the teacher's own progressive metrics and the
/// checkpoints at the end of history and the end of the stream.
#[derive(Debug, Clone)]
pub struct TeacherTrack {
    start: u64,
    predictions: Vec<f64>,
    pub window_metrics: Vec<(u64, WindowMetrics)>,
    pub hist_end_checkpoint: CtrModel,
    pub final_checkpoint: CtrModel,
}

impl TeacherTrack {
    pub fn start(&self) -> u64 {
        self.start
    }

    pub fn end(&self) -> u64 {
        self.start + self.predictions.len() as u64
    }

    pub fn covers(&self, start: u64, end: u64) -> bool {
        self.start <= start && end <= self.end()
    }

    #[inline]
    pub fn prediction(&self, t: u64) -> f64 {
        self.predictions[(t - self.start) as usize]
    }
}

/// Trains the teacher over `[spec.start, end)` on the unsampled stream,
/// freezing its predictions per window of length `window`.
pub fn train_teacher(
    spec: &TeacherSpec,
    truth: &Arc<GroundTruth>,
    salt: u64,
    hist_end: u64,
    end: u64,
    window: u64,
) -> Result<TeacherTrack> {
    if spec.start >= hist_end || hist_end > end {
        return Err(Error::InvalidRange {
            start: spec.start as i64,
            end: hist_end as i64,
        });
    }
    if window == 0 {
        return Err(Error::config("window", "must be >= 1"));
    }
    let hash = HashConfig::new(spec.hash_dim, salt)?;
    let stream = Stream::new(Arc::clone(truth), hash)?;
    let mut model = CtrModel::new(spec.arch, hash, spec.optimizer, spec.seed)?;
    let mut predictions = Vec::with_capacity((end - spec.start) as usize);
    let mut window_metrics = Vec::new();
    let mut hist_end_checkpoint = None;
    let mut buf = Vec::with_capacity(window as usize);
    let mut metrics = MetricWindow::new(window as usize);

    let mut a = spec.start;
    while a < end {
        let b = ((a / window + 1) * window).min(end);
        if a == hist_end {
            hist_end_checkpoint = Some(model.clone());
        }
        buf.clear();
        buf.extend(stream.iter(a, b).map(|(x, _)| x));
        metrics.clear();
        for x in &buf {
            let p = model.predict(x);
            predictions.push(p);
            metrics.push(p, x.label, 1.0);
        }
        for x in &buf {
            model.step(x, x.y());
        }
        window_metrics.push((a / window, metrics.metrics()));
        a = b;
    }
    Ok(TeacherTrack {
        start: spec.start,
        predictions,
        window_metrics,
        hist_end_checkpoint: hist_end_checkpoint.unwrap_or_else(|| model.clone()),
        final_checkpoint: model,
    })
}
