//! Hashed CTR predictors trained with a per-coordinate adaptive gradient
//! optimizer (accumulated squared gradients).
//!
//! Parameter layout in the flat vector:
//!
//! * linear: `[w_0 .. w_{D-1}, bias]`
//! * mlp(H): `[E (D x H, row per hashed index), b1 (H), v (H), b2]`, where the
//!   hidden layer is `relu(b1 + sum_f E[index_f])` and the logit is
//!   `b2 + v . hidden`. Summing embedding rows is the dense layer applied
//!   to the one-hot encoding of the pooled fields.

pub mod checkpoint;
pub mod metrics;

use serde::{Deserialize, Serialize};

use crate::datagen::sigmoid;
use crate::error::{Error, Result};
use crate::example::Example;
use crate::hashing::HashConfig;
use crate::rng::Rng;

pub use metrics::{logloss, prediction_bias, ranking_loss, relative_metric, MetricWindow, WindowMetrics};

/// Predictions are clamped to `[P_CLAMP, 1 - P_CLAMP]` before any loss.
pub const P_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Arch {
    Linear,
    Mlp { hidden: u32 },
}

impl Arch {
    pub fn param_count(&self, dim: u32) -> u64 {
        let d = u64::from(dim);
        match *self {
            Arch::Linear => d + 1,
            Arch::Mlp { hidden } => {
                let h = u64::from(hidden);
                (d + 1) * h + h + 1
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Arch::Mlp { hidden: 0 } => Err(Error::config("arch.hidden", "must be >= 1")),
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Arch::Linear => "linear".into(),
            Arch::Mlp { hidden } => format!("mlp{hidden}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Standard deviation of the random MLP initialisation.
    #[serde(default = "default_init_scale")]
    pub init_scale: f64,
    /// Initial value of the output bias (a prior log-odds).
    #[serde(default)]
    pub init_bias: f64,
}

fn default_lr() -> f64 {
    0.05
}
fn default_eps() -> f64 {
    1e-8
}
fn default_init_scale() -> f64 {
    0.1
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            lr: default_lr(),
            eps: default_eps(),
            init_scale: default_init_scale(),
            init_bias: 0.0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::config("optimizer.lr", "must be finite and >= 0"));
        }
        if !(self.eps > 0.0) {
            return Err(Error::config("optimizer.eps", "must be > 0"));
        }
        if !self.init_bias.is_finite() {
            return Err(Error::config("optimizer.init_bias", "must be finite"));
        }
        if !(self.init_scale >= 0.0) {
            return Err(Error::config("optimizer.init_scale", "must be >= 0"));
        }
        Ok(())
    }
}

/// Sparse gradient: unique parameter indices with their partial derivatives.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradient {
    pub entries: Vec<(usize, f64)>,
}

impl Gradient {
    fn clear(&mut self) {
        self.entries.clear();
    }

    /// Dense view for tests and diagnostics.
    pub fn to_dense(&self, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for &(i, g) in &self.entries {
            out[i] += g;
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct CtrModel {
    arch: Arch,
    hash: HashConfig,
    opt: OptimizerConfig,
    params: Vec<f64>,
    accum: Vec<f64>,
    grad: Gradient,
    hidden: Vec<f64>,
    rows: Vec<u32>,
}

impl PartialEq for CtrModel {
    fn eq(&self, other: &Self) -> bool {
        self.arch == other.arch
            && self.hash == other.hash
            && self.opt == other.opt
            && self.params.len() == other.params.len()
            && self
                .params
                .iter()
                .chain(&self.accum)
                .zip(other.params.iter().chain(&other.accum))
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl CtrModel {
    /// Linear models start at zero; MLP embeddings and output weights are
    /// drawn from the `init` stream of `seed`.
    pub fn new(arch: Arch, hash: HashConfig, opt: OptimizerConfig, seed: u64) -> Result<Self> {
        arch.validate()?;
        hash.validate()?;
        opt.validate()?;
        let n = arch.param_count(hash.dim) as usize;
        let mut params = vec![0.0; n];
        params[n - 1] = opt.init_bias;
        if let Arch::Mlp { hidden } = arch {
            let h = hidden as usize;
            let d = hash.dim as usize;
            let rng = Rng::new(seed, "init");
            for (i, p) in params[..d * h].iter_mut().enumerate() {
                *p = opt.init_scale * rng.normal(&[i as u64]);
            }
            let v0 = d * h + h;
            for (j, p) in params[v0..v0 + h].iter_mut().enumerate() {
                *p = opt.init_scale * rng.normal(&[(n + j) as u64]);
            }
        }
        Ok(CtrModel {
            arch,
            hash,
            opt,
            accum: vec![0.0; n],
            params,
            grad: Gradient::default(),
            hidden: Vec::new(),
            rows: Vec::new(),
        })
    }

    pub(crate) fn from_parts(
        arch: Arch,
        hash: HashConfig,
        opt: OptimizerConfig,
        params: Vec<f64>,
        accum: Vec<f64>,
    ) -> Result<Self> {
        arch.validate()?;
        hash.validate()?;
        let n = arch.param_count(hash.dim) as usize;
        if params.len() != n || accum.len() != n {
            return Err(Error::Checkpoint(format!(
                "expected {n} parameters, found {} / {}",
                params.len(),
                accum.len()
            )));
        }
        Ok(CtrModel {
            arch,
            hash,
            opt,
            params,
            accum,
            grad: Gradient::default(),
            hidden: Vec::new(),
            rows: Vec::new(),
        })
    }

    pub fn arch(&self) -> Arch {
        self.arch
    }

    pub fn hash(&self) -> &HashConfig {
        &self.hash
    }

    pub fn optimizer(&self) -> &OptimizerConfig {
        &self.opt
    }

    pub fn param_count(&self) -> u64 {
        self.params.len() as u64
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn accumulators(&self) -> &[f64] {
        &self.accum
    }

    /// Logit for `x`.
    pub fn score(&self, x: &Example) -> f64 {
        match self.arch {
            Arch::Linear => {
                let bias = self.params[self.params.len() - 1];
                bias + x.features.iter().map(|f| self.params[f.index as usize]).sum::<f64>()
            }
            Arch::Mlp { hidden } => {
                let h = hidden as usize;
                let (b1, v, b2) = self.head_offsets();
                let mut s = self.params[b2];
                for j in 0..h {
                    let mut a = self.params[b1 + j];
                    for f in &x.features {
                        a += self.params[f.index as usize * h + j];
                    }
                    if a > 0.0 {
                        s += self.params[v + j] * a;
                    }
                }
                s
            }
        }
    }

    /// Click probability, clamped to `[1e-7, 1 - 1e-7]`.
    pub fn predict(&self, x: &Example) -> f64 {
        sigmoid(self.score(x)).clamp(P_CLAMP, 1.0 - P_CLAMP)
    }

    fn head_offsets(&self) -> (usize, usize, usize) {
        let Arch::Mlp { hidden } = self.arch else {
            unreachable!("linear model has no hidden head")
        };
        let h = hidden as usize;
        let d = self.hash.dim as usize;
        (d * h, d * h + h, d * h + 2 * h)
    }

    /// Gradient of `x.weight * logloss(sigmoid(score), target)` with respect
    /// to every touched parameter. The derivative with respect to the logit
    /// is `x.weight * (p - target)` with the unclamped `p`.
    pub fn gradient(&mut self, x: &Example, target: f64) -> &Gradient {
        let mut grad = std::mem::take(&mut self.grad);
        self.fill_gradient(x, target, &mut grad);
        self.grad = grad;
        &self.grad
    }

    fn fill_gradient(&mut self, x: &Example, target: f64, grad: &mut Gradient) {
        grad.clear();
        match self.arch {
            Arch::Linear => {
                let delta = x.weight * (sigmoid(self.score(x)) - target);
                for f in &x.features {
                    let i = f.index as usize;
                    match grad.entries.iter_mut().find(|(j, _)| *j == i) {
                        Some(e) => e.1 += delta,
                        None => grad.entries.push((i, delta)),
                    }
                }
                grad.entries.push((self.params.len() - 1, delta));
            }
            Arch::Mlp { hidden } => {
                let h = hidden as usize;
                let (b1, v, b2) = self.head_offsets();
                self.hidden.clear();
                for j in 0..h {
                    let mut a = self.params[b1 + j];
                    for f in &x.features {
                        a += self.params[f.index as usize * h + j];
                    }
                    self.hidden.push(a);
                }
                let s = self.params[b2]
                    + self
                        .hidden
                        .iter()
                        .enumerate()
                        .filter(|(_, &a)| a > 0.0)
                        .map(|(j, &a)| self.params[v + j] * a)
                        .sum::<f64>();
                let delta = x.weight * (sigmoid(s) - target);

                self.rows.clear();
                for f in &x.features {
                    if !self.rows.contains(&f.index) {
                        self.rows.push(f.index);
                    }
                }
                // multiplicity of each distinct row in the pooled sum
                for &row in &self.rows {
                    let mult = x.features.iter().filter(|f| f.index == row).count() as f64;
                    for j in 0..h {
                        if self.hidden[j] > 0.0 {
                            grad.entries
                                .push((row as usize * h + j, mult * delta * self.params[v + j]));
                        }
                    }
                }
                for j in 0..h {
                    if self.hidden[j] > 0.0 {
                        grad.entries.push((b1 + j, delta * self.params[v + j]));
                        grad.entries.push((v + j, delta * self.hidden[j]));
                    }
                }
                grad.entries.push((b2, delta));
            }
        }
    }

    /// One adaptive-gradient step towards `target` (a hard label or a
    /// distillation blend) at learning rate `lr`.
    pub fn grad_step(&mut self, x: &Example, target: f64, lr: f64) {
        let mut grad = std::mem::take(&mut self.grad);
        self.fill_gradient(x, target, &mut grad);
        for &(i, g) in &grad.entries {
            self.accum[i] += g * g;
            self.params[i] -= lr * g / (self.accum[i] + self.opt.eps).sqrt();
        }
        self.grad = grad;
    }

    /// [`grad_step`](Self::grad_step) at the configured learning rate.
    pub fn step(&mut self, x: &Example, target: f64) {
        self.grad_step(x, target, self.opt.lr)
    }
}
