use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{fnv1a, mix64};

/// Feature-hash space. `dim` is a power of two so reduction is a mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashConfig {
    pub dim: u32,
    pub salt: u64,
}

impl HashConfig {
    pub fn new(dim: u32, salt: u64) -> Result<Self> {
        let cfg = HashConfig { dim, salt };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 || !self.dim.is_power_of_two() {
            return Err(Error::config(
                "hash.dim",
                format!("must be a power of two >= 2, got {}", self.dim),
            ));
        }
        Ok(())
    }

    #[inline]
    pub fn mask(&self) -> u64 {
        u64::from(self.dim) - 1
    }
}

/// Hash `raw_value` of field `field_id` into `[0, cfg.dim)`.
///
/// The field id is folded into the key material ahead of the value bytes so
/// identical values in different fields hash independently. No per-process
/// state is involved, so indices are stable across runs and machines.
#[inline]
pub fn hash_feature(field_id: u32, raw_value: &[u8], cfg: &HashConfig) -> u32 {
    let h = fnv1a(mix64(cfg.salt), &field_id.to_le_bytes());
    let h = fnv1a(mix64(h), raw_value);
    (mix64(h) & cfg.mask()) as u32
}
