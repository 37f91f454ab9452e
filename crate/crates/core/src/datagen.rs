//! Synthetic non-stationary click stream.
//!
//! Each timestamp carries one impression. Every field draws a token from a
//! Zipf-like popularity distribution; the click probability is a logistic
//! function of per-token weights plus low-rank pairwise interactions whose
//! dimension is `ground_truth_dim`. Drift is piecewise constant: timestamps
//! are grouped into epochs of `drift_period`, and each epoch adds an
//! independent perturbation of scale `drift_magnitude` to the token weights.
//!
//! The ground truth is known exactly, so Bayes-optimal loss is available as
//! an absolute floor for any run.

use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::example::{Example, Feature};
use crate::hashing::{hash_feature, HashConfig};
use crate::rng::Rng;

const CALIBRATION_SAMPLES: u64 = 100_000;
const BRACKET: f64 = 30.0;

/// Omitted fields take their [`Default`] values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StreamSpec {
    pub n_fields: u32,
    pub vocab_per_field: u32,
    /// Target marginal click rate.
    pub base_ctr: f64,
    /// Timestamps per drift epoch.
    pub drift_period: u64,
    pub drift_magnitude: f64,
    /// Rank of the pairwise interaction term; 0 makes the truth additive.
    pub ground_truth_dim: u32,
    pub seed: u64,
    /// Zipf exponent of token popularity.
    #[serde(default = "default_token_skew")]
    pub token_skew: f64,
    /// Standard deviation of per-token logit weights.
    #[serde(default = "default_weight_scale")]
    pub weight_scale: f64,
    /// Standard deviation of the summed interaction term.
    #[serde(default = "default_interaction_scale")]
    pub interaction_scale: f64,
}

fn default_token_skew() -> f64 {
    1.05
}
fn default_weight_scale() -> f64 {
    0.6
}
fn default_interaction_scale() -> f64 {
    0.5
}

impl Default for StreamSpec {
    fn default() -> Self {
        StreamSpec {
            n_fields: 8,
            vocab_per_field: 400,
            base_ctr: 1.0 / 251.0,
            drift_period: 200_000,
            drift_magnitude: 0.0,
            ground_truth_dim: 4,
            seed: 1,
            token_skew: default_token_skew(),
            weight_scale: default_weight_scale(),
            interaction_scale: default_interaction_scale(),
        }
    }
}

impl StreamSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_fields == 0 {
            return Err(Error::config("stream.n_fields", "must be >= 1"));
        }
        if self.n_fields > 64 {
            return Err(Error::config("stream.n_fields", "must be <= 64"));
        }
        if self.ground_truth_dim > 64 {
            return Err(Error::config("stream.ground_truth_dim", "must be <= 64"));
        }
        if self.vocab_per_field < 2 {
            return Err(Error::config("stream.vocab_per_field", "must be >= 2"));
        }
        if !(self.base_ctr > 0.0 && self.base_ctr < 1.0) {
            return Err(Error::config(
                "stream.base_ctr",
                format!("must lie in (0, 1), got {}", self.base_ctr),
            ));
        }
        if self.drift_period == 0 {
            return Err(Error::config("stream.drift_period", "must be >= 1"));
        }
        for (key, v) in [
            ("stream.drift_magnitude", self.drift_magnitude),
            ("stream.token_skew", self.token_skew),
            ("stream.weight_scale", self.weight_scale),
            ("stream.interaction_scale", self.interaction_scale),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(key, format!("must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn epoch(&self, t: u64) -> u64 {
        t / self.drift_period
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// The latent logistic model behind a [`StreamSpec`].
#[derive(Debug, Clone)]
pub struct GroundTruth {
    spec: StreamSpec,
    intercept: f64,
    /// `[field * vocab + token]`
    weights: Vec<f64>,
    /// `[(field * vocab + token) * dim + k]`
    latent: Vec<f64>,
    token_cdf: Vec<f64>,
    token_rng: Rng,
    label_rng: Rng,
    drift_rng: Rng,
}

impl GroundTruth {
    pub fn new(spec: &StreamSpec) -> Result<Self> {
        spec.validate()?;
        let root = Rng::new(spec.seed, "datagen");
        let weight_rng = root.child("weight");
        let latent_rng = root.child("latent");
        let (f, v, k) = (
            spec.n_fields as u64,
            spec.vocab_per_field as u64,
            spec.ground_truth_dim as u64,
        );

        let weights = (0..f * v)
            .map(|i| spec.weight_scale * weight_rng.normal(&[i]))
            .collect();

        let pairs = (f * f.saturating_sub(1) / 2) as f64;
        let latent_sd = if k == 0 || pairs == 0.0 {
            0.0
        } else {
            (spec.interaction_scale / (pairs * k as f64).sqrt()).sqrt()
        };
        let latent = (0..f * v * k)
            .map(|i| latent_sd * latent_rng.normal(&[i]))
            .collect();

        let mut token_cdf: Vec<f64> = (0..v)
            .scan(0.0, |acc, r| {
                *acc += ((r + 1) as f64).powf(-spec.token_skew);
                Some(*acc)
            })
            .collect();
        let total = *token_cdf.last().expect("vocab >= 2");
        token_cdf.iter_mut().for_each(|c| *c /= total);

        let mut gt = GroundTruth {
            spec: spec.clone(),
            intercept: 0.0,
            weights,
            latent,
            token_cdf,
            token_rng: root.child("token"),
            label_rng: root.child("label"),
            drift_rng: root.child("drift"),
        };
        gt.intercept = gt.calibrate()?;
        Ok(gt)
    }

    pub fn spec(&self) -> &StreamSpec {
        &self.spec
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    /// Token of every field at timestamp `t`.
    pub fn tokens_at(&self, t: u64, out: &mut Vec<u32>) {
        out.clear();
        for f in 0..u64::from(self.spec.n_fields) {
            out.push(self.draw_token(self.token_rng.uniform01(&[t, f])));
        }
    }

    #[inline]
    fn draw_token(&self, u: f64) -> u32 {
        let r = self.token_cdf.partition_point(|&c| c <= u);
        r.min(self.token_cdf.len() - 1) as u32
    }

    /// Latent score without the intercept for a token assignment in `epoch`.
    fn raw_score(&self, tokens: &[u32], epoch: u64) -> f64 {
        let v = u64::from(self.spec.vocab_per_field);
        let k = self.spec.ground_truth_dim as usize;
        let mut s = 0.0;
        for (f, &tok) in tokens.iter().enumerate() {
            let slot = f as u64 * v + u64::from(tok);
            s += self.weights[slot as usize];
            if self.spec.drift_magnitude > 0.0 {
                s += self.spec.drift_magnitude * self.drift_rng.normal(&[slot, epoch]);
            }
        }
        if k > 0 {
            // sum over field pairs of <v_f, v_g> = (|sum v|^2 - sum |v|^2) / 2
            let mut total = [0.0f64; 64];
            let total = &mut total[..k];
            let mut sq = 0.0;
            for (f, &tok) in tokens.iter().enumerate() {
                let base = (f as u64 * v + u64::from(tok)) as usize * k;
                for (j, acc) in total.iter_mut().enumerate() {
                    let x = self.latent[base + j];
                    *acc += x;
                    sq += x * x;
                }
            }
            s += 0.5 * (total.iter().map(|x| x * x).sum::<f64>() - sq);
        }
        s
    }

    /// Click probability of `tokens` at timestamp `t`.
    pub fn true_ctr(&self, tokens: &[u32], t: u64) -> f64 {
        sigmoid(self.intercept + self.raw_score(tokens, self.spec.epoch(t)))
    }

    /// Bisection for the intercept that matches the Monte Carlo marginal
    /// click rate to `base_ctr`.
    fn calibrate(&self) -> Result<f64> {
        let calib = Rng::new(self.spec.seed, "datagen").child("calibration");
        let mut tokens = Vec::with_capacity(self.spec.n_fields as usize);
        let scores: Vec<f64> = (0..CALIBRATION_SAMPLES)
            .map(|i| {
                tokens.clear();
                for f in 0..u64::from(self.spec.n_fields) {
                    tokens.push(self.draw_token(calib.uniform01(&[i, f])));
                }
                self.raw_score(&tokens, 0)
            })
            .collect();
        let marginal = |b: f64| scores.iter().map(|s| sigmoid(b + s)).sum::<f64>() / scores.len() as f64;
        let target = self.spec.base_ctr;
        let (mut lo, mut hi) = (-BRACKET, BRACKET);
        if marginal(lo) > target || marginal(hi) < target {
            return Err(Error::CalibrationBracket { target });
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if marginal(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-13 {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Intercept that calibrates the marginal click rate of `spec`.
pub fn calibrate_intercept(spec: &StreamSpec) -> Result<f64> {
    Ok(GroundTruth::new(spec)?.intercept)
}

/// A ground truth bound to one feature-hash space; yields hashed examples.
#[derive(Debug, Clone)]
pub struct Stream {
    truth: Arc<GroundTruth>,
    hash: HashConfig,
    /// `[field * vocab + token]` -> hashed index
    index: Vec<u32>,
}

impl Stream {
    pub fn new(truth: Arc<GroundTruth>, hash: HashConfig) -> Result<Self> {
        hash.validate()?;
        let spec = truth.spec();
        let index = (0..spec.n_fields)
            .flat_map(|f| (0..spec.vocab_per_field).map(move |tok| (f, tok)))
            .map(|(f, tok)| hash_feature(f, &tok.to_le_bytes(), &hash))
            .collect();
        Ok(Stream { truth, hash, index })
    }

    pub fn truth(&self) -> &GroundTruth {
        &self.truth
    }

    pub fn hash(&self) -> &HashConfig {
        &self.hash
    }

    /// Example at `t` together with its true click probability.
    pub fn example_at(&self, t: u64, tokens: &mut Vec<u32>) -> (Example, f64) {
        self.truth.tokens_at(t, tokens);
        let ctr = self.truth.true_ctr(tokens, t);
        let label = self.truth.label_rng.uniform01(&[t]) < ctr;
        let v = self.truth.spec.vocab_per_field;
        let features = tokens
            .iter()
            .enumerate()
            .map(|(f, &tok)| Feature {
                field: f as u32,
                index: self.index[(f as u32 * v + tok) as usize],
            })
            .collect();
        (Example::new(t, features, label), ctr)
    }

    /// Chronological iterator over `[start, end)` yielding `(example, true ctr)`.
    pub fn iter(&self, start: u64, end: u64) -> impl Iterator<Item = (Example, f64)> + '_ {
        let mut tokens = Vec::with_capacity(self.truth.spec.n_fields as usize);
        (start..end).map(move |t| self.example_at(t, &mut tokens))
    }
}

/// Examples for timestamps `[t_start, t_end)`.
pub fn generate(
    spec: &StreamSpec,
    hash: &HashConfig,
    t_start: i64,
    t_end: i64,
) -> Result<Vec<Example>> {
    if t_start < 0 || t_end < t_start {
        return Err(Error::InvalidRange {
            start: t_start,
            end: t_end,
        });
    }
    let stream = Stream::new(Arc::new(GroundTruth::new(spec)?), *hash)?;
    Ok(stream
        .iter(t_start as u64, t_end as u64)
        .map(|(x, _)| x)
        .collect())
}

/// Writes one example per line as `t label weight field:index ...`, single
/// spaces between tokens, features in field order.
pub fn write_examples<W: Write>(out: &mut W, examples: impl IntoIterator<Item = Example>) -> std::io::Result<()> {
    for x in examples {
        write!(out, "{} {} {}", x.t, u8::from(x.label), x.weight)?;
        for f in &x.features {
            write!(out, " {}:{}", f.field, f.index)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Parses the format produced by [`write_examples`].
pub fn read_examples<R: BufRead>(input: R) -> Result<Vec<Example>> {
    let bad = |line: usize, why: &str| Error::config(format!("line {line}"), why.to_string());
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<stream>", e))?;
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(' ');
        let t = parts.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad(n + 1, "bad t"))?;
        let label = match parts.next() {
            Some("0") => false,
            Some("1") => true,
            _ => return Err(bad(n + 1, "bad label")),
        };
        let weight = parts.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad(n + 1, "bad weight"))?;
        let features = parts
            .map(|p| {
                let (f, i) = p.split_once(':')?;
                Some(Feature {
                    field: f.parse().ok()?,
                    index: i.parse().ok()?,
                })
            })
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| bad(n + 1, "bad feature"))?;
        out.push(Example {
            t,
            features,
            label,
            weight,
        });
    }
    Ok(out)
}
