//! Evaluation metrics: weighted logloss, Ranking Loss (1 - AUC), prediction
//! bias and baseline-relative deltas.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `w * (-y ln p - (1 - y) ln(1 - p))`; `y` may be a soft target.
#[inline]
pub fn logloss(p: f64, y: f64, w: f64) -> f64 {
    w * (-y * p.ln() - (1.0 - y) * (1.0 - p).ln())
}

/// Pairwise misranking rate `1 - AUC` over `(score, label)` pairs.
///
/// A (positive, negative) pair counts 1 when the positive scores strictly
/// lower and 1/2 when tied. Runs in O(n log n) by sorting and grouping
/// equal scores. Scores must not be NaN.
pub fn ranking_loss(window: &[(f64, bool)]) -> Result<f64> {
    let positives = window.iter().filter(|(_, y)| *y).count() as u64;
    let negatives = window.len() as u64 - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedMetric("ranking loss needs both classes"));
    }
    let mut sorted: Vec<(f64, bool)> = window.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

    // doubled count of misranked pairs keeps the arithmetic in integers
    let mut misranked2: u64 = 0;
    let mut neg_below: u64 = 0;
    let mut i = 0;
    while i < sorted.len() {
        let score = sorted[i].0;
        let (mut pos, mut neg) = (0u64, 0u64);
        while i < sorted.len() && sorted[i].0 == score {
            if sorted[i].1 {
                pos += 1;
            } else {
                neg += 1;
            }
            i += 1;
        }
        let neg_above = negatives - neg_below - neg;
        misranked2 += pos * (2 * neg_above + neg);
        neg_below += neg;
    }
    Ok(misranked2 as f64 / (2 * positives * negatives) as f64)
}

/// `sum(w p) / sum(w y)` over `(p, y, w)` triples; 1.0 is calibrated.
pub fn prediction_bias(window: &[(f64, bool, f64)]) -> Result<f64> {
    let (pred, actual) = window.iter().fold((0.0, 0.0), |(p, a), &(pi, yi, wi)| {
        (p + wi * pi, if yi { a + wi } else { a })
    });
    if actual <= 0.0 {
        return Err(Error::UndefinedMetric("prediction bias needs a positive"));
    }
    Ok(pred / actual)
}

/// `(run - baseline) / baseline`. Not antisymmetric: swapping roles changes
/// the denominator.
pub fn relative_metric(run_value: f64, baseline_value: f64) -> Result<f64> {
    if !(baseline_value > 0.0) {
        return Err(Error::config(
            "baseline",
            format!("relative metric needs a positive baseline, got {baseline_value}"),
        ));
    }
    Ok((run_value - baseline_value) / baseline_value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowMetrics {
    pub examples: u64,
    /// Weighted mean logloss.
    pub logloss: f64,
    pub ranking_loss: Option<f64>,
    pub bias: Option<f64>,
}

/// Running evaluation over a window of predictions.
#[derive(Debug, Clone)]
pub struct MetricWindow {
    len: usize,
    scored: Vec<(f64, bool)>,
    loss_sum: f64,
    weight_sum: f64,
    weighted_pred: f64,
    weighted_pos: f64,
}

impl MetricWindow {
    pub fn new(len: usize) -> Self {
        assert!(len >= 1, "window length must be >= 1");
        MetricWindow {
            len,
            scored: Vec::with_capacity(len.min(1 << 20)),
            loss_sum: 0.0,
            weight_sum: 0.0,
            weighted_pred: 0.0,
            weighted_pos: 0.0,
        }
    }

    pub fn push(&mut self, p: f64, label: bool, weight: f64) {
        let y = if label { 1.0 } else { 0.0 };
        self.scored.push((p, label));
        self.loss_sum += logloss(p, y, weight);
        self.weight_sum += weight;
        self.weighted_pred += weight * p;
        self.weighted_pos += weight * y;
    }

    pub fn count(&self) -> usize {
        self.scored.len()
    }

    pub fn is_full(&self) -> bool {
        self.scored.len() >= self.len
    }

    pub fn is_empty(&self) -> bool {
        self.scored.is_empty()
    }

    pub fn metrics(&self) -> WindowMetrics {
        WindowMetrics {
            examples: self.scored.len() as u64,
            logloss: if self.weight_sum > 0.0 {
                self.loss_sum / self.weight_sum
            } else {
                f64::NAN
            },
            ranking_loss: ranking_loss(&self.scored).ok(),
            bias: (self.weighted_pos > 0.0).then(|| self.weighted_pred / self.weighted_pos),
        }
    }

    pub fn clear(&mut self) {
        self.scored.clear();
        self.loss_sum = 0.0;
        self.weight_sum = 0.0;
        self.weighted_pred = 0.0;
        self.weighted_pos = 0.0;
    }
}
