//! Binary dataset file.
//!
//! Layout (little-endian): `MEGU-DATA`, version `u32`, `N`, `d`, `K` as
//! `u32`, `has_coarse` and `has_overlap` flags (`u8`), `K` class names
//! (`u32` byte length + UTF-8), inputs (`N*d` f64), labels (`N` u16),
//! optional coarse labels (`N` u16), optional overlap matrix (`K*K` f64).

use std::path::Path;

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::io_util::{atomic_write, put_f64s, read, ByteReader};
use crate::numeric::Tensor;

pub const DATA_MAGIC: &[u8; 9] = b"MEGU-DATA";
pub const DATA_VERSION: u32 = 1;

pub fn encode_dataset(ds: &Dataset) -> Result<Vec<u8>> {
    let k = ds.num_classes();
    if k > u16::MAX as usize + 1 {
        return Err(Error::Domain(format!("{k} classes exceed the u16 label range")));
    }
    let mut out = Vec::new();
    out.extend_from_slice(DATA_MAGIC);
    out.extend_from_slice(&DATA_VERSION.to_le_bytes());
    for v in [ds.len(), ds.dim(), k] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.push(ds.coarse_labels.is_some() as u8);
    out.push(ds.overlap_truth.is_some() as u8);
    for name in &ds.class_names {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
    }
    put_f64s(&mut out, ds.inputs.data());
    for &y in &ds.labels {
        out.extend_from_slice(&(y as u16).to_le_bytes());
    }
    if let Some(c) = &ds.coarse_labels {
        for &y in c {
            out.extend_from_slice(&(y as u16).to_le_bytes());
        }
    }
    if let Some(m) = &ds.overlap_truth {
        for row in m {
            put_f64s(&mut out, row);
        }
    }
    Ok(out)
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset> {
    let mut r = ByteReader::new(bytes);
    r.magic(DATA_MAGIC)?;
    let at = r.offset();
    let version = r.u32("version")?;
    if version != DATA_VERSION {
        return Err(Error::parse(at, format!("unsupported dataset version {version}")));
    }
    let n = r.u32("N")? as usize;
    let d = r.u32("d")? as usize;
    let at = r.offset();
    let k = r.u32("K")? as usize;
    if k == 0 {
        return Err(Error::parse(at, "K must be >= 1"));
    }
    let has_coarse = flag(&mut r, "has_coarse")?;
    let has_overlap = flag(&mut r, "has_overlap")?;
    let mut names = Vec::with_capacity(k.min(1 << 16));
    for _ in 0..k {
        let len = r.u32("class name length")? as usize;
        let at = r.offset();
        let raw = r.take(len, "class name")?;
        names.push(String::from_utf8(raw.to_vec()).map_err(|_| Error::parse(at, "class name is not UTF-8"))?);
    }
    let at = r.offset();
    let inputs = r.f64s(n * d, "input tensor")?;
    let inputs = Tensor::new(vec![n, d], inputs).map_err(|e| Error::parse(at, e.to_string()))?;
    let labels = read_labels(&mut r, n, k, "label")?;
    let coarse = if has_coarse { Some(read_labels(&mut r, n, usize::MAX, "coarse label")?) } else { None };
    let overlap = if has_overlap {
        let flat = r.f64s(k * k, "overlap matrix")?;
        Some(flat.chunks(k).map(<[f64]>::to_vec).collect())
    } else {
        None
    };
    r.finish()?;
    let end = r.offset();
    Dataset::new(inputs, labels, coarse, names, overlap).map_err(|e| Error::parse(end, e.to_string()))
}

fn flag(r: &mut ByteReader<'_>, what: &str) -> Result<bool> {
    let at = r.offset();
    match r.u8(what)? {
        0 => Ok(false),
        1 => Ok(true),
        v => Err(Error::parse(at, format!("{what} flag must be 0 or 1, got {v}"))),
    }
}

fn read_labels(r: &mut ByteReader<'_>, n: usize, k: usize, what: &str) -> Result<Vec<usize>> {
    if r.remaining() < n * 2 {
        return Err(Error::parse(
            r.offset(),
            format!("truncated {what}s: expected {} bytes, found {}", n * 2, r.remaining()),
        ));
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let at = r.offset();
        let y = r.u16(what)? as usize;
        if y >= k {
            return Err(Error::parse(at, format!("{what} {y} out of range for K = {k}")));
        }
        out.push(y);
    }
    Ok(out)
}

pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    atomic_write(path, &encode_dataset(ds)?)
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    decode_dataset(&read(path)?)
}
