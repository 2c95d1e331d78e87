//! Versioned binary checkpoints. Layout (all integers and floats little
//! endian):
//!
//! ```text
//! magic "BSPC" | version u32 | obs_dim u32 | act_dim u32 | n_hidden u32 |
//! hidden[n_hidden] u32 | seed u64 |
//! actor layers (w row-major, then b) | log_std[act_dim] |
//! critic layers (w row-major, then b) |
//! norm count f64 | norm sum[obs_dim] | norm sum_sq[obs_dim]
//! ```

use std::path::Path;

use super::net::PolicyParams;
use crate::error::{Error, Result};
use crate::symmetry::SharedNormStats;

pub const MAGIC: &[u8; 4] = b"BSPC";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: PolicyParams,
    pub stats: SharedNormStats,
    pub seed: u64,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let p = &self.params;
        let hidden = p.hidden();
        let mut out = Vec::with_capacity(64 + 8 * (p.n_params() + 2 * p.obs_dim() + 1));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for d in [p.obs_dim(), p.act_dim(), hidden.len()].into_iter().chain(hidden.iter().copied()) {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.extend_from_slice(&self.seed.to_le_bytes());
        for v in p.to_flat() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.stats.count.to_le_bytes());
        for v in self.stats.sum.iter().chain(&self.stats.sum_sq) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported format version {version}, expected {VERSION}")));
        }
        let obs_dim = r.u32()? as usize;
        let act_dim = r.u32()? as usize;
        let n_hidden = r.u32()? as usize;
        if obs_dim == 0 || act_dim == 0 || n_hidden == 0 || n_hidden > 16 {
            return Err(Error::Checkpoint("corrupt dimension table".into()));
        }
        let hidden = (0..n_hidden).map(|_| r.u32().map(|h| h as usize)).collect::<Result<Vec<_>>>()?;
        if hidden.iter().any(|&h| h == 0 || h > 1 << 16) {
            return Err(Error::Checkpoint("corrupt hidden layer sizes".into()));
        }
        let seed = r.u64()?;
        let mut params = PolicyParams::zeros(obs_dim, act_dim, &hidden);
        let flat = r.f64s(params.n_params())?;
        params.set_flat(&flat)?;
        let count = r.f64()?;
        let sum = r.f64s(obs_dim)?;
        let sum_sq = r.f64s(obs_dim)?;
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self { params, stats: SharedNormStats { count, sum, sum_sq }, seed })
    }

    /// Errors unless the network matches the given observation and action sizes.
    pub fn check_dims(&self, obs_dim: usize, act_dim: usize) -> Result<()> {
        if self.params.obs_dim() != obs_dim || self.params.act_dim() != act_dim {
            return Err(Error::Checkpoint(format!(
                "checkpoint is {}→{}, configuration expects {obs_dim}→{act_dim}",
                self.params.obs_dim(),
                self.params.act_dim()
            )));
        }
        Ok(())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Checkpoint(format!("truncated file at byte {}", self.pos))),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    std::fs::write(path, ckpt.to_bytes())?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::from_bytes(&std::fs::read(path)?)
}
