//! Binary model checkpoints.
//!
//! Layout, little-endian: magic `SQNM`, version u32, config block
//! (input_side u32, kernel u32, block count u32, channels u32 each,
//! hidden u32, embed_dim u32, class_count u32, seed u64), tensor count u32,
//! then per tensor: name length u32, UTF-8 name, ndim u32, dims u64 each,
//! values f64 each.

use std::path::Path;

use sqnet_core::colorfeat::ByteReader;

use crate::error::{NnetError, Result};
use crate::model::{Model, ModelConfig, ParamStore};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"SQNM";
pub const VERSION: u32 = 1;

fn u32_of(v: usize) -> u32 {
    u32::try_from(v).expect("size fits in u32")
}

pub fn encode(model: &Model) -> Vec<u8> {
    let c = model.config();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for v in [c.input_side, c.kernel, c.conv_channels.len()] {
        out.extend_from_slice(&u32_of(v).to_le_bytes());
    }
    for &ch in &c.conv_channels {
        out.extend_from_slice(&u32_of(ch).to_le_bytes());
    }
    for v in [c.hidden, c.embed_dim, c.class_count] {
        out.extend_from_slice(&u32_of(v).to_le_bytes());
    }
    out.extend_from_slice(&c.seed.to_le_bytes());
    let p = model.params();
    out.extend_from_slice(&u32_of(p.len()).to_le_bytes());
    for (name, t) in p.names().iter().zip(p.tensors()) {
        out.extend_from_slice(&u32_of(name.len()).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&u32_of(t.shape().len()).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Model> {
    let bad = |m: &str| NnetError::Checkpoint(m.to_string());
    let mut r = ByteReader::new(bytes);
    if r.take(4) != Some(&MAGIC[..]) {
        return Err(bad("bad magic"));
    }
    let version = r.u32().ok_or_else(|| bad("truncated header"))?;
    if version != VERSION {
        return Err(NnetError::Checkpoint(format!("unsupported version {version}")));
    }
    let mut next = || r.u32().map(|v| v as usize).ok_or_else(|| bad("truncated config"));
    let input_side = next()?;
    let kernel = next()?;
    let blocks = next()?;
    if blocks > 16 {
        return Err(bad("implausible block count"));
    }
    let conv_channels = (0..blocks).map(|_| next()).collect::<Result<Vec<_>>>()?;
    let hidden = next()?;
    let embed_dim = next()?;
    let class_count = next()?;
    let seed = r.u64().ok_or_else(|| bad("truncated config"))?;
    let config = ModelConfig {
        input_side,
        conv_channels,
        kernel,
        hidden,
        embed_dim,
        class_count,
        seed,
    };
    config.validate()?;
    let count = r.u32().ok_or_else(|| bad("truncated tensor table"))?;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let len = r.u32().ok_or_else(|| bad("truncated tensor name"))? as usize;
        let name = r.take(len).ok_or_else(|| bad("truncated tensor name"))?;
        let name = std::str::from_utf8(name).map_err(|_| bad("tensor name is not UTF-8"))?;
        let ndim = r.u32().ok_or_else(|| bad("truncated shape"))? as usize;
        if ndim > 8 {
            return Err(bad("implausible tensor rank"));
        }
        let shape = (0..ndim)
            .map(|_| r.u64().map(|d| d as usize).ok_or_else(|| bad("truncated shape")))
            .collect::<Result<Vec<_>>>()?;
        let n = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| bad("shape overflow"))?;
        let raw = r
            .take(n.checked_mul(8).ok_or_else(|| bad("shape overflow"))?)
            .ok_or_else(|| bad("truncated tensor values"))?;
        let data = raw.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
        store.push(name, Tensor::new(shape, data)?);
    }
    if !r.is_empty() {
        return Err(bad("trailing bytes"));
    }
    Model::from_params(config, store)
}

pub fn save(model: &Model, path: &Path) -> Result<()> {
    std::fs::write(path, encode(model))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Model> {
    decode(&std::fs::read(path)?)
}
