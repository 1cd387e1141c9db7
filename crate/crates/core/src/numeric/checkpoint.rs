//! Binary checkpoint: `MEGU-CKPT`, version, layer dims, activation tag,
//! seed, then every parameter tensor in declared order, all little-endian.

use std::path::Path;

use sha2::{Digest, Sha256};

use super::model::{Activation, Classifier};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::io_util::{atomic_write, put_f64s, read, ByteReader};

pub const CKPT_MAGIC: &[u8; 9] = b"MEGU-CKPT";
pub const CKPT_VERSION: u32 = 1;

pub fn encode_checkpoint(model: &Classifier) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + model.param_count() * 8);
    out.extend_from_slice(CKPT_MAGIC);
    out.extend_from_slice(&CKPT_VERSION.to_le_bytes());
    out.extend_from_slice(&(model.layer_dims().len() as u32).to_le_bytes());
    for &d in model.layer_dims() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.push(model.activation().tag());
    out.extend_from_slice(&model.seed().to_le_bytes());
    for p in model.params() {
        put_f64s(&mut out, p.data());
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Classifier> {
    let mut r = ByteReader::new(bytes);
    r.magic(CKPT_MAGIC)?;
    let at = r.offset();
    let version = r.u32("version")?;
    if version != CKPT_VERSION {
        return Err(Error::parse(at, format!("unsupported checkpoint version {version}")));
    }
    let at = r.offset();
    let n = r.u32("layer count")? as usize;
    if !(2..=64).contains(&n) {
        return Err(Error::parse(at, format!("implausible layer count {n}")));
    }
    let mut dims = Vec::with_capacity(n);
    for _ in 0..n {
        dims.push(r.u32("layer dim")? as usize);
    }
    let at = r.offset();
    let activation = Activation::from_tag(r.u8("activation")?)
        .ok_or_else(|| Error::parse(at, "unknown activation tag"))?;
    let seed = r.u64("seed")?;
    let mut params = Vec::with_capacity(2 * (n - 1));
    for pair in dims.windows(2) {
        let at = r.offset();
        let w = r.f64s(pair[0] * pair[1], "weight tensor")?;
        params.push(Tensor::new(vec![pair[1], pair[0]], w).map_err(|e| Error::parse(at, e.to_string()))?);
        let at = r.offset();
        let b = r.f64s(pair[1], "bias tensor")?;
        params.push(Tensor::new(vec![pair[1]], b).map_err(|e| Error::parse(at, e.to_string()))?);
    }
    r.finish()?;
    Classifier::from_parameters(dims, activation, seed, params)
}

pub fn save_checkpoint(model: &Classifier, path: &Path) -> Result<()> {
    atomic_write(path, &encode_checkpoint(model))
}

pub fn load_checkpoint(path: &Path) -> Result<Classifier> {
    decode_checkpoint(&read(path)?)
}

impl Classifier {
    /// SHA-256 of the encoded checkpoint.
    pub fn checksum(&self) -> [u8; 32] {
        Sha256::digest(encode_checkpoint(self)).into()
    }
}
