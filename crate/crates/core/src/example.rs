use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One hashed feature: the field it came from and its index in `[0, D)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Feature {
    pub field: u32,
    pub index: u32,
}

/// One impression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    /// Stream position.
    pub t: u64,
    pub features: Vec<Feature>,
    pub label: bool,
    /// Importance weight; 1.0 unless the example survived downsampling.
    pub weight: f64,
}

impl Example {
    pub fn new(t: u64, features: Vec<Feature>, label: bool) -> Self {
        Example {
            t,
            features,
            label,
            weight: 1.0,
        }
    }

    #[inline]
    pub fn y(&self) -> f64 {
        if self.label {
            1.0
        } else {
            0.0
        }
    }

    pub fn validate(&self, dim: u32) -> Result<()> {
        if !(self.weight > 0.0 && self.weight.is_finite()) {
            return Err(Error::config(
                "example.weight",
                format!("must be positive, got {}", self.weight),
            ));
        }
        for (i, f) in self.features.iter().enumerate() {
            if f.index >= dim {
                return Err(Error::config(
                    "example.features",
                    format!("index {} outside [0, {dim})", f.index),
                ));
            }
            if self.features[..i].iter().any(|g| g.field == f.field) {
                return Err(Error::config(
                    "example.features",
                    format!("field {} appears twice", f.field),
                ));
            }
        }
        Ok(())
    }
}
