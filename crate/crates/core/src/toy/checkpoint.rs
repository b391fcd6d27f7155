//! Flat binary checkpoint format, all integers and floats little-endian:
//!
//! ```text
//! magic        8 bytes  "STAFFTOY"
//! version      u32      1
//! n_dims       u32      number of layer widths (layers + 1)
//! dims         u32 × n_dims
//! mask         u8  × (n_dims - 1)   1 = layer is in φ
//! tag_len      u32
//! tag          tag_len bytes, UTF-8 family tag
//! parameters   f64 × total, per layer: weights (outputs × inputs, row-major) then bias
//! ```

use std::fs;
use std::path::Path;

use super::model::{Layer, ToyModel};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"STAFFTOY";
pub const VERSION: u32 = 1;

pub fn encode(model: &ToyModel) -> Vec<u8> {
    let dims = model.layer_dims();
    let mut out = Vec::with_capacity(32 + model.param_count() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for d in &dims {
        out.extend_from_slice(&(*d as u32).to_le_bytes());
    }
    out.extend(model.layers.iter().map(|l| u8::from(l.learnable)));
    out.extend_from_slice(&(model.family.len() as u32).to_le_bytes());
    out.extend_from_slice(model.family.as_bytes());
    for layer in &model.layers {
        for v in layer.weights.iter().chain(&layer.bias) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}

pub fn decode(buf: &[u8]) -> Result<ToyModel> {
    let mut c = Cursor { buf, pos: 0 };
    if c.take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let n_dims = c.u32()? as usize;
    if !(2..=64).contains(&n_dims) {
        return Err(Error::Checkpoint(format!(
            "implausible layer count {n_dims}"
        )));
    }
    let dims = (0..n_dims)
        .map(|_| c.u32().map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    if dims.iter().any(|&d| d == 0 || d > 1 << 20) {
        return Err(Error::Checkpoint(format!("bad layer dims {dims:?}")));
    }
    let mask = c.take(n_dims - 1)?.to_vec();
    let tag_len = c.u32()? as usize;
    let family = String::from_utf8(c.take(tag_len)?.to_vec())
        .map_err(|_| Error::Checkpoint("family tag is not UTF-8".into()))?;

    let mut layers = Vec::with_capacity(n_dims - 1);
    for (pair, &m) in dims.windows(2).zip(&mask) {
        let (inputs, outputs) = (pair[0], pair[1]);
        let weights = (0..inputs * outputs)
            .map(|_| c.f64())
            .collect::<Result<Vec<_>>>()?;
        let bias = (0..outputs).map(|_| c.f64()).collect::<Result<Vec<_>>>()?;
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::Checkpoint("non-finite parameter".into()));
        }
        layers.push(Layer {
            inputs,
            outputs,
            weights,
            bias,
            learnable: m != 0,
        });
    }
    if c.pos != buf.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes",
            buf.len() - c.pos
        )));
    }
    Ok(ToyModel::from_layers(layers, family))
}

pub fn save(model: &ToyModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(model)).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<ToyModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
