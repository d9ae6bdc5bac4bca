//! Versioned binary checkpoint.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic    8 bytes  "TRDECKPT"
//! version  u32
//! name     u32 length + UTF-8 bytes (dataset label)
//! seed     u64      training seed
//! D, K, M  u32 x 3
//! ranks    u32 x D  (R_0 .. R_{D-1}, shared by all components)
//! affine   (f64 offset, f64 scale) x D
//! M times:
//!   permutation  u32 x D
//!   D cores      f64, (left, mode, right) row-major
//! ```
//!
//! Loading then saving reproduces the file byte for byte.

use std::path::Path;

use ndarray::Array3;
use serde_json::json;
use thiserror::Error;
use trde::datasets::Affine;
use trde::{Core, TermModel, TrCores, TrdeModel};

pub const MAGIC: &[u8; 8] = b"TRDECKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic bytes)")]
    BadMagic,
    #[error("checkpoint version {found} is not supported (expected {VERSION})")]
    Version { found: u32 },
    #[error("checkpoint is truncated")]
    Truncated,
    #[error("checkpoint has {0} trailing bytes")]
    Trailing(usize),
    #[error("invalid checkpoint: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A trained mixture plus what is needed to map it back to data units.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub dataset: String,
    pub train_seed: u64,
    pub affine: Vec<Affine>,
    pub model: TermModel,
}

impl Checkpoint {
    pub fn dims(&self) -> usize {
        self.model.dims()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let first = &self.model.components()[0];
        let d = first.dims();
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, VERSION);
        put_u32(&mut out, self.dataset.len() as u32);
        out.extend_from_slice(self.dataset.as_bytes());
        out.extend_from_slice(&self.train_seed.to_le_bytes());
        put_u32(&mut out, d as u32);
        put_u32(&mut out, first.grid(0).k_basis() as u32);
        put_u32(&mut out, self.model.len() as u32);
        for r in &first.coeff().ranks()[..d] {
            put_u32(&mut out, *r as u32);
        }
        for a in &self.affine {
            put_f64(&mut out, a.offset);
            put_f64(&mut out, a.scale);
        }
        for c in self.model.components() {
            for &p in c.permutation() {
                put_u32(&mut out, p as u32);
            }
            for core in c.coeff().cores() {
                for v in core.to_canonical().iter() {
                    put_f64(&mut out, *v);
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(CheckpointError::Version { found: version });
        }
        let len = r.u32()? as usize;
        let dataset = String::from_utf8(r.take(len)?.to_vec()).map_err(|e| CheckpointError::Invalid(e.to_string()))?;
        let train_seed = r.u64()?;
        let d = r.u32()? as usize;
        let k = r.u32()? as usize;
        let m = r.u32()? as usize;
        if d == 0 || m == 0 || k < 4 {
            return Err(CheckpointError::Invalid(format!("D = {d}, K = {k}, M = {m}")));
        }
        let ranks: Vec<usize> = (0..d).map(|_| r.u32().map(|v| v as usize)).collect::<Result<_, _>>()?;
        if ranks.contains(&0) {
            return Err(CheckpointError::Invalid("zero rank".into()));
        }
        let affine = (0..d)
            .map(|_| {
                Ok(Affine {
                    offset: r.f64()?,
                    scale: r.f64()?,
                })
            })
            .collect::<Result<Vec<_>, CheckpointError>>()?;
        let mut components = Vec::with_capacity(m);
        for _ in 0..m {
            let perm: Vec<usize> = (0..d).map(|_| r.u32().map(|v| v as usize)).collect::<Result<_, _>>()?;
            let mut cores = Vec::with_capacity(d);
            for axis in 0..d {
                let (left, right) = (ranks[axis], ranks[(axis + 1) % d]);
                let n = left * k * right;
                let values = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
                let canonical = Array3::from_shape_vec((left, k, right), values).expect("sized from header");
                cores.push(Core::from_canonical(canonical));
            }
            let coeff = TrCores::new(cores).map_err(|e| CheckpointError::Invalid(e.to_string()))?;
            components.push(TrdeModel::new(coeff, perm).map_err(|e| CheckpointError::Invalid(e.to_string()))?);
        }
        if r.pos != bytes.len() {
            return Err(CheckpointError::Trailing(bytes.len() - r.pos));
        }
        let model = TermModel::new(components).map_err(|e| CheckpointError::Invalid(e.to_string()))?;
        Ok(Checkpoint {
            dataset,
            train_seed,
            affine,
            model,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Checkpoint::from_bytes(&std::fs::read(path)?)
    }

    /// Human-readable view; floats go through JSON numbers, so this is not
    /// a lossless format.
    pub fn to_json(&self) -> serde_json::Value {
        let components: Vec<_> = self
            .model
            .components()
            .iter()
            .map(|c| {
                let cores: Vec<_> = c
                    .coeff()
                    .cores()
                    .iter()
                    .map(|core| {
                        let canon = core.to_canonical();
                        json!({
                            "shape": canon.shape(),
                            "values": canon.iter().collect::<Vec<_>>(),
                        })
                    })
                    .collect();
                json!({
                    "permutation": c.permutation(),
                    "partition_function": c.partition_function(),
                    "cores": cores,
                })
            })
            .collect();
        let first = &self.model.components()[0];
        json!({
            "format": { "magic": "TRDECKPT", "version": VERSION },
            "dataset": self.dataset,
            "train_seed": self.train_seed,
            "dims": self.dims(),
            "k_basis": first.grid(0).k_basis(),
            "ranks": first.coeff().ranks(),
            "components": self.model.len(),
            "sigma": self.model.sigma_weights().ok(),
            "parameters": self.model.parameter_count(),
            "affine": self.affine.iter().map(|a| json!({ "offset": a.offset, "scale": a.scale })).collect::<Vec<_>>(),
            "models": components,
        })
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).ok_or(CheckpointError::Truncated)?;
        let s = self.bytes.get(self.pos..end).ok_or(CheckpointError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
