//! Slow reference implementations used to cross-check the fast paths.

use crate::datagen::sigmoid;
use crate::error::{Error, Result};
use crate::example::Example;
use crate::model::{logloss, CtrModel};

/// O(n^2) pairwise count of `1 - AUC`; ties count one half.
pub fn ranking_loss_brute(window: &[(f64, bool)]) -> Result<f64> {
    let (mut misranked2, mut pairs) = (0u64, 0u64);
    for &(sp, yp) in window {
        if !yp {
            continue;
        }
        for &(sn, yn) in window {
            if yn {
                continue;
            }
            pairs += 1;
            if sp < sn {
                misranked2 += 2;
            } else if sp == sn {
                misranked2 += 1;
            }
        }
    }
    if pairs == 0 {
        return Err(Error::UndefinedMetric("ranking loss needs both classes"));
    }
    Ok(misranked2 as f64 / (2 * pairs) as f64)
}

/// `x.weight * logloss(sigmoid(score), target)` without prediction clamping,
/// i.e. the function whose derivative [`CtrModel::gradient`] returns.
pub fn training_loss(model: &CtrModel, x: &Example, target: f64) -> f64 {
    logloss(sigmoid(model.score(x)), target, x.weight)
}

/// Central-difference gradient over every parameter.
pub fn finite_difference(model: &CtrModel, x: &Example, target: f64, h: f64) -> Vec<f64> {
    let mut probe = model.clone();
    (0..model.params().len())
        .map(|i| {
            let orig = probe.params()[i];
            probe.params_mut()[i] = orig + h;
            let up = training_loss(&probe, x, target);
            probe.params_mut()[i] = orig - h;
            let down = training_loss(&probe, x, target);
            probe.params_mut()[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest relative disagreement between the analytic and the numeric
/// gradient. Components below `floor` in both are compared absolutely
/// against `floor`.
pub fn gradient_check(model: &mut CtrModel, x: &Example, target: f64, h: f64, floor: f64) -> f64 {
    let numeric = finite_difference(model, x, target, h);
    let analytic = model.gradient(x, target).to_dense(numeric.len());
    analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Expectation over all `2^n` keep patterns of `sum_i kept_i * v_i / q_i`,
/// where example `i` is kept independently with probability `q_i`.
/// Each `v` is a vector so the same routine covers losses and gradients.
pub fn expected_reweighted_sum(values: &[Vec<f64>], keep_probs: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), keep_probs.len());
    assert!(values.len() <= 24, "enumeration is exponential");
    let dim = values.first().map_or(0, Vec::len);
    let mut expectation = vec![0.0; dim];
    for pattern in 0u32..(1 << values.len()) {
        let mut prob = 1.0;
        let mut sum = vec![0.0; dim];
        for (i, (v, &q)) in values.iter().zip(keep_probs).enumerate() {
            if pattern >> i & 1 == 1 {
                prob *= q;
                for (s, vi) in sum.iter_mut().zip(v) {
                    *s += vi / q;
                }
            } else {
                prob *= 1.0 - q;
            }
        }
        for (e, s) in expectation.iter_mut().zip(&sum) {
            *e += prob * s;
        }
    }
    expectation
}
