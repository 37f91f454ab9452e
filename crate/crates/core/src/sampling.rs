//! Negative downsampling with inverse-probability importance weights.
//!
//! Three signals decide how likely a negative is to be kept: a flat rate,
//! the current model's loss on the example, and how rarely its features
//! have been seen. Positives are always kept. A schedule controls whether
//! downsampling runs for the whole stream or stops at a cutoff timestamp.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::example::Example;
use crate::model::logloss;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Signal {
    /// Keep each negative with probability `rate`.
    UniformNegative { rate: f64 },
    /// Keep negatives the model already scores well (loss below
    /// `loss_threshold`) with probability `rate`; keep the rest.
    LowLoss { rate: f64, loss_threshold: f64 },
    /// `min(1, rate * (1 + count_scale / sqrt(1 + min feature count)))`.
    CountUncertainty { rate: f64, count_scale: f64 },
}

impl Signal {
    pub fn rate(&self) -> f64 {
        match *self {
            Signal::UniformNegative { rate }
            | Signal::LowLoss { rate, .. }
            | Signal::CountUncertainty { rate, .. } => rate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Schedule {
    /// Downsample through history and online training alike.
    Continuous,
    /// Downsample only for `t < t_cut`.
    Cutoff { t_cut: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerPolicy {
    pub signal: Signal,
    pub schedule: Schedule,
    /// Weight of the newest loss in the exponential moving average.
    #[serde(default = "default_loss_decay")]
    pub loss_decay: f64,
}

fn default_loss_decay() -> f64 {
    0.01
}

impl Default for SamplerPolicy {
    fn default() -> Self {
        SamplerPolicy::off()
    }
}

impl SamplerPolicy {
    /// Keeps everything.
    pub fn off() -> Self {
        SamplerPolicy::uniform(1.0, Schedule::Continuous)
    }

    pub fn uniform(rate: f64, schedule: Schedule) -> Self {
        SamplerPolicy {
            signal: Signal::UniformNegative { rate },
            schedule,
            loss_decay: default_loss_decay(),
        }
    }

    pub fn is_off(&self) -> bool {
        matches!(self.signal, Signal::UniformNegative { rate } if rate == 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let rate = self.signal.rate();
        if !(rate > 0.0 && rate <= 1.0) {
            return Err(Error::config("sampler.signal.rate", format!("must lie in (0, 1], got {rate}")));
        }
        match self.signal {
            Signal::LowLoss { loss_threshold, .. } if !(loss_threshold >= 0.0) => {
                return Err(Error::config("sampler.signal.loss_threshold", "must be >= 0"));
            }
            Signal::CountUncertainty { count_scale, .. } if !(count_scale > 0.0) => {
                return Err(Error::config("sampler.signal.count_scale", "must be > 0"));
            }
            _ => {}
        }
        if !(self.loss_decay > 0.0 && self.loss_decay <= 1.0) {
            return Err(Error::config("sampler.loss_decay", "must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Whether the signal (rather than pass-through) decides at `t`.
    pub fn active_at(&self, t: u64) -> bool {
        match self.schedule {
            Schedule::Continuous => true,
            Schedule::Cutoff { t_cut } => t < t_cut,
        }
    }
}

/// Fresh information the signals read: feature occurrence counts and a
/// moving average of per-example loss. Updated for every example, kept or
/// dropped, so keep probabilities never depend on earlier keep decisions.
#[derive(Debug, Clone)]
pub struct SamplerState {
    /// `counts[field][index]`, allocated on first touch of a field.
    counts: Vec<Vec<u32>>,
    dim: usize,
    decay: f64,
    loss_ema: Option<f64>,
    last_t: Option<u64>,
    same_t: u64,
    /// Decisions made by the signal, and pass-throughs (positives or
    /// schedule inactive).
    pub signal_decisions: u64,
    pub passthrough_decisions: u64,
}

impl SamplerState {
    pub fn new(dim: u32, decay: f64) -> Self {
        SamplerState {
            counts: Vec::new(),
            dim: dim as usize,
            decay,
            loss_ema: None,
            last_t: None,
            same_t: 0,
            signal_decisions: 0,
            passthrough_decisions: 0,
        }
    }

    pub fn for_policy(policy: &SamplerPolicy, dim: u32) -> Self {
        SamplerState::new(dim, policy.loss_decay)
    }

    pub fn count(&self, field: u32, index: u32) -> u32 {
        self.counts
            .get(field as usize)
            .and_then(|c| c.get(index as usize))
            .copied()
            .unwrap_or(0)
    }

    /// Smallest occurrence count among the example's features.
    pub fn min_count(&self, x: &Example) -> u32 {
        x.features
            .iter()
            .map(|f| self.count(f.field, f.index))
            .min()
            .unwrap_or(0)
    }

    pub fn loss_ema(&self) -> Option<f64> {
        self.loss_ema
    }

    /// Records `x`'s features and folds `loss` into the moving average.
    /// The first loss initialises the average.
    pub fn update(&mut self, x: &Example, loss: f64) {
        for f in &x.features {
            let field = f.field as usize;
            if self.counts.len() <= field {
                self.counts.resize_with(field + 1, Vec::new);
            }
            let row = &mut self.counts[field];
            if row.is_empty() {
                row.resize(self.dim.max(f.index as usize + 1), 0);
            } else if row.len() <= f.index as usize {
                row.resize(f.index as usize + 1, 0);
            }
            row[f.index as usize] = row[f.index as usize].saturating_add(1);
        }
        self.loss_ema = Some(match self.loss_ema {
            None => loss,
            Some(ema) => self.decay * loss + (1.0 - self.decay) * ema,
        });
    }

    /// Counter distinguishing several decisions at the same timestamp.
    fn decision_slot(&mut self, t: u64) -> u64 {
        if self.last_t == Some(t) {
            self.same_t += 1;
        } else {
            self.last_t = Some(t);
            self.same_t = 0;
        }
        self.same_t
    }
}

/// `1 / keep_prob`.
pub fn importance_weight(keep_prob: f64) -> Result<f64> {
    if !(keep_prob > 0.0 && keep_prob <= 1.0) {
        return Err(Error::config("keep_prob", format!("must lie in (0, 1], got {keep_prob}")));
    }
    Ok(1.0 / keep_prob)
}

/// Probability of keeping `x` at `t` given the model's current prediction.
pub fn keep_probability(
    policy: &SamplerPolicy,
    state: &SamplerState,
    x: &Example,
    p_current: f64,
    t: u64,
) -> f64 {
    if x.label || !policy.active_at(t) {
        return 1.0;
    }
    match policy.signal {
        Signal::UniformNegative { rate } => rate,
        Signal::LowLoss {
            rate,
            loss_threshold,
        } => {
            if logloss(p_current, 0.0, 1.0) < loss_threshold {
                rate
            } else {
                1.0
            }
        }
        Signal::CountUncertainty { rate, count_scale } => {
            let n = f64::from(state.min_count(x));
            (rate * (1.0 + count_scale / (1.0 + n).sqrt())).min(1.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub keep_prob: f64,
    /// The example re-weighted by `1 / keep_prob`, or `None` if dropped.
    pub kept: Option<Example>,
}

/// One audited keep/drop decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: u64,
    pub label: bool,
    pub keep_prob: f64,
    pub kept: bool,
}

/// Decides whether to keep `x`, then updates `state` with it either way.
///
/// The keep draw is keyed by `(t, slot)` on `rng`, so runs that differ only
/// in rate see the same uniform for the same example and their kept sets
/// nest.
pub fn apply(
    policy: &SamplerPolicy,
    state: &mut SamplerState,
    x: &Example,
    p_current: f64,
    t: u64,
    rng: &Rng,
) -> Decision {
    let keep_prob = keep_probability(policy, state, x, p_current, t);
    if x.label || !policy.active_at(t) {
        state.passthrough_decisions += 1;
    } else {
        state.signal_decisions += 1;
    }
    let slot = state.decision_slot(t);
    let kept = (rng.uniform01(&[t, slot]) < keep_prob).then(|| {
        let mut k = x.clone();
        k.weight *= 1.0 / keep_prob;
        k
    });
    state.update(x, logloss(p_current, x.y(), 1.0));
    Decision { keep_prob, kept }
}

/// Free-function form of [`SamplerState::update`].
pub fn update_state(state: &mut SamplerState, x: &Example, loss: f64) {
    state.update(x, loss)
}
