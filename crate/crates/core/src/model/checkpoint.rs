//! Versioned little-endian binary checkpoint.
//!
//! ```text
//! magic    8 bytes  "CTRLABCK"
//! version  u32      1
//! arch     u8       0 = linear, 1 = mlp
//! hidden   u32      0 for linear
//! dim      u32
//! salt     u64
//! lr, eps, init_scale, init_bias   f64 x 4
//! n        u64      parameter count
//! params   f64 x n
//! accum    f64 x n
//! ```
//!
//! Floats are stored as raw IEEE-754 bits, so a load reproduces the saved
//! model bit for bit.

use std::path::Path;

use super::{Arch, CtrModel, OptimizerConfig};
use crate::error::{Error, Result};
use crate::hashing::HashConfig;
use crate::output::write_atomic;

const MAGIC: &[u8; 8] = b"CTRLABCK";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn encode(model: &CtrModel) -> Vec<u8> {
    let n = model.params.len();
    let mut out = Vec::with_capacity(64 + 16 * n);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let (tag, hidden) = match model.arch {
        Arch::Linear => (0u8, 0u32),
        Arch::Mlp { hidden } => (1u8, hidden),
    };
    out.push(tag);
    out.extend_from_slice(&hidden.to_le_bytes());
    out.extend_from_slice(&model.hash.dim.to_le_bytes());
    out.extend_from_slice(&model.hash.salt.to_le_bytes());
    for v in [model.opt.lr, model.opt.eps, model.opt.init_scale, model.opt.init_bias] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(n as u64).to_le_bytes());
    for v in model.params.iter().chain(&model.accum) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::Checkpoint("truncated".into()));
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<CtrModel> {
    let mut r = Reader { buf: bytes };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let arch = match (r.u8()?, r.u32()?) {
        (0, _) => Arch::Linear,
        (1, hidden) => Arch::Mlp { hidden },
        (tag, _) => return Err(Error::Checkpoint(format!("unknown arch tag {tag}"))),
    };
    let hash = HashConfig {
        dim: r.u32()?,
        salt: r.u64()?,
    };
    let opt = OptimizerConfig {
        lr: r.f64()?,
        eps: r.f64()?,
        init_scale: r.f64()?,
        init_bias: r.f64()?,
    };
    let n = r.u64()? as usize;
    if n != arch.param_count(hash.dim) as usize {
        return Err(Error::Checkpoint(format!("parameter count {n} does not match arch")));
    }
    let params = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let accum = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    if !r.buf.is_empty() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    CtrModel::from_parts(arch, hash, opt, params, accum)
}

pub fn save(model: &CtrModel, path: &Path) -> Result<()> {
    write_atomic(path, &encode(model))
}

pub fn load(path: &Path) -> Result<CtrModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
