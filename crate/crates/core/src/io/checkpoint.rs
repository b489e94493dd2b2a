//! Binary checkpoint format, all integers and floats little-endian:
//!
//! ```text
//! magic        8 bytes  "SHGCNCKP"
//! version      u32      CHECKPOINT_VERSION
//! kind         u8       0 = MF, 1 = SHGCN
//! normalize    u8       0 or 1
//! num_users    u64
//! num_items    u64
//! dim          u64
//! layers       u64      0 for MF
//! leaky_slope  f64
//! norm_eps     f64
//! init_std     f64
//! num_params   u64
//! per param:   rows u64, cols u64, rows*cols f64 (row-major)
//! checksum     32 bytes SHA-256 of everything above
//! ```
//!
//! Parameter order is the model's flat order (`Recommender::parameters`).

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::baseline::MfState;
use crate::error::{Error, Result};
use crate::model::{AnyModel, ModelConfig, ModelKind, Recommender, ShgcnState};
use crate::numeric::Matrix;

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"SHGCNCKP";
const CHECKSUM_LEN: usize = 32;

/// Serializes a model. `config` supplies the SHGCN hyperparameters; for MF
/// only its `dim` is meaningful and `layers` is written as 0.
pub fn write_checkpoint(model: &AnyModel, config: &ModelConfig) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let (kind, layers, dim) = match model {
        AnyModel::Mf(m) => (0u8, 0u64, m.dim() as u64),
        AnyModel::Shgcn(s) => (1u8, s.config.layers as u64, s.config.dim as u64),
    };
    let cfg = match model {
        AnyModel::Shgcn(s) => s.config,
        AnyModel::Mf(_) => *config,
    };
    out.push(kind);
    out.push(cfg.normalize as u8);
    for v in [model.num_users() as u64, model.num_items() as u64, dim, layers] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in [cfg.leaky_slope, cfg.norm_eps, cfg.init_std] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let params = model.parameters();
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for p in params {
        out.extend_from_slice(&(p.rows() as u64).to_le_bytes());
        out.extend_from_slice(&(p.cols() as u64).to_le_bytes());
        for v in p.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() - self.at < n {
            return Err(Error::Checkpoint("truncated checkpoint".into()));
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Checkpoint("size field overflows usize".into()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Parses a checkpoint, verifying magic, version and checksum before any
/// state is built. Returns the model and its config.
pub fn read_checkpoint(bytes: &[u8]) -> Result<(AnyModel, ModelConfig)> {
    if bytes.len() < MAGIC.len() + 4 + CHECKSUM_LEN || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file (bad magic or too short)".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {version} (expected {CHECKPOINT_VERSION})"
        )));
    }
    let (body, checksum) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
    if Sha256::digest(body).as_slice() != checksum {
        return Err(Error::Checkpoint("checksum mismatch (truncated or corrupt file)".into()));
    }

    let mut r = Reader { bytes: body, at: 12 };
    let kind = match r.u8()? {
        0 => ModelKind::Mf,
        1 => ModelKind::Shgcn,
        other => return Err(Error::Checkpoint(format!("unknown model kind tag {other}"))),
    };
    let normalize = match r.u8()? {
        0 => false,
        1 => true,
        other => return Err(Error::Checkpoint(format!("bad normalize flag {other}"))),
    };
    let (num_users, num_items, dim, layers) = (r.usize()?, r.usize()?, r.usize()?, r.usize()?);
    let config = ModelConfig { dim, layers, leaky_slope: r.f64()?, norm_eps: r.f64()?, init_std: r.f64()?, normalize };
    let count = r.usize()?;
    let mut params = Vec::new();
    for _ in 0..count {
        let (rows, cols) = (r.usize()?, r.usize()?);
        let len = rows
            .checked_mul(cols)
            .filter(|&n| n <= (body.len() - r.at) / 8)
            .ok_or_else(|| Error::Checkpoint("parameter size exceeds file".into()))?;
        let data = (0..len).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        params.push(Matrix::new(rows, cols, data).map_err(|e| Error::Checkpoint(e.to_string()))?);
    }
    if r.at != body.len() {
        return Err(Error::Checkpoint("trailing bytes after parameters".into()));
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::Checkpoint("non-finite parameter values".into()));
    }

    let wrap = |e: Error| Error::Checkpoint(e.to_string());
    let model = match kind {
        ModelKind::Mf => {
            if params.len() != 1 || params[0].cols() != dim {
                return Err(Error::Checkpoint("MF checkpoint must hold one (M+N) x d table".into()));
            }
            AnyModel::Mf(MfState::from_embeddings(num_users, num_items, params.remove(0)).map_err(wrap)?)
        }
        ModelKind::Shgcn => {
            AnyModel::Shgcn(ShgcnState::from_parameters(num_users, num_items, config, params).map_err(wrap)?)
        }
    };
    Ok((model, config))
}

pub fn save_checkpoint(path: &Path, model: &AnyModel, config: &ModelConfig) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, write_checkpoint(model, config))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(AnyModel, ModelConfig)> {
    read_checkpoint(&fs::read(path)?)
}
