//! Counter-based deterministic randomness.
//!
//! A [`Rng`] is a pure function from `(seed, stream name, counter key)` to
//! 64 random bits. There is no mutable state, so the data generator, the
//! sampler and weight initialisation can each draw from their own named
//! stream without perturbing one another, and a draw never depends on how
//! many draws happened before it.

use serde::{Deserialize, Serialize};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finaliser.
#[inline]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over bytes, used to fold stream names into key material.
#[inline]
pub(crate) fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = 0xCBF2_9CE4_8422_2325 ^ seed;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rng {
    key: u64,
}

impl Rng {
    /// Keyed stream `name` under the global `seed`.
    pub fn new(seed: u64, name: &str) -> Self {
        Rng {
            key: mix64(fnv1a(mix64(seed ^ GOLDEN), name.as_bytes())),
        }
    }

    /// Derive a child stream; `Rng::new(s, "a").child("b")` differs from
    /// `Rng::new(s, "b")`.
    pub fn child(&self, name: &str) -> Self {
        Rng {
            key: mix64(fnv1a(self.key, name.as_bytes())),
        }
    }

    /// 64 random bits for the counter tuple `key`.
    #[inline]
    pub fn bits(&self, key: &[u64]) -> u64 {
        let mut h = self.key;
        for (i, &k) in key.iter().enumerate() {
            h = mix64(h ^ mix64(k.wrapping_add(GOLDEN.wrapping_mul(i as u64 + 1))));
        }
        mix64(h.wrapping_add(key.len() as u64))
    }

    /// Uniform draw in `[0, 1)` with 53 bits of resolution.
    #[inline]
    pub fn uniform01(&self, key: &[u64]) -> f64 {
        (self.bits(key) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller on two decorrelated uniforms.
    pub fn normal(&self, key: &[u64]) -> f64 {
        let a = self.bits(key);
        let b = mix64(a ^ GOLDEN);
        // shift u1 into (0, 1] so ln never sees zero
        let u1 = ((a >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64);
        let u2 = (b >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// Free-function form of [`Rng::uniform01`].
pub fn uniform01(rng: &Rng, key: &[u64]) -> f64 {
    rng.uniform01(key)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_key_same_value() {
        let rng = Rng::new(7, "sampler");
        assert_eq!(rng.uniform01(&[3, 9]), rng.uniform01(&[3, 9]));
        assert_eq!(
            Rng::new(7, "sampler").bits(&[1]),
            Rng::new(7, "sampler").bits(&[1])
        );
    }

    #[test]
    fn streams_and_keys_are_separated() {
        let a = Rng::new(7, "a");
        let b = Rng::new(7, "b");
        assert_ne!(a.bits(&[0]), b.bits(&[0]));
        assert_ne!(a.bits(&[0, 1]), a.bits(&[1, 0]));
        assert_ne!(a.bits(&[0]), a.bits(&[0, 0]));
        assert_ne!(Rng::new(8, "a").bits(&[0]), a.bits(&[0]));
        assert_ne!(a.child("b").bits(&[0]), b.bits(&[0]));
    }

    #[test]
    fn monte_carlo_mean() {
        let rng = Rng::new(11, "mean");
        let n = 100_000;
        let mean = (0..n).map(|i| rng.uniform01(&[i])).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn kolmogorov_smirnov_below_one_percent_critical_value() {
        let rng = Rng::new(12, "ks");
        let n = 100_000usize;
        let mut xs: Vec<f64> = (0..n as u64).map(|i| rng.uniform01(&[i, 5])).collect();
        xs.sort_by(f64::total_cmp);
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let lo = x - i as f64 / n as f64;
                let hi = (i + 1) as f64 / n as f64 - x;
                lo.max(hi)
            })
            .fold(0.0, f64::max);
        let critical = 1.628 / (n as f64).sqrt();
        assert!(d < critical, "KS statistic {d} >= {critical}");
    }

    #[test]
    fn normal_moments() {
        let rng = Rng::new(3, "normal");
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|i| rng.normal(&[i])).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }
}
