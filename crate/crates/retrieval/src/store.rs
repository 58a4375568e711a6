//! Unit-norm embedding table and its `SQNE` file format.

use std::collections::HashSet;
use std::path::Path;

use sqnet_core::colorfeat::ByteReader;

use crate::error::{Result, RetrievalError};

const MAGIC: &[u8; 4] = b"SQNE";
const VERSION: u32 = 1;

/// Allowed deviation of a stored vector's norm from 1.
pub const NORM_TOLERANCE: f64 = 1e-6;

/// Item ids with fixed-dimension unit vectors, stored as `f32`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingIndex {
    dim: usize,
    ids: Vec<u64>,
    values: Vec<f32>,
    seen: HashSet<u64>,
}

impl EmbeddingIndex {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            ids: Vec::new(),
            values: Vec::new(),
            seen: HashSet::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn vector(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Appends a vector after rounding it to `f32`. The rounded vector must
    /// be unit-norm within [`NORM_TOLERANCE`].
    pub fn push(&mut self, id: u64, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(RetrievalError::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        let rounded: Vec<f32> = v.iter().map(|&x| x as f32).collect();
        self.push_f32(id, rounded)
    }

    fn push_f32(&mut self, id: u64, v: Vec<f32>) -> Result<()> {
        let norm = v.iter().map(|&x| f64::from(x).powi(2)).sum::<f64>().sqrt();
        if !((norm - 1.0).abs() <= NORM_TOLERANCE) {
            return Err(RetrievalError::Store(format!("embedding for item {id} has norm {norm}")));
        }
        if !self.seen.insert(id) {
            return Err(RetrievalError::DuplicateId(id));
        }
        self.ids.push(id);
        self.values.extend(v);
        Ok(())
    }

    /// Euclidean distance between `q` and the stored vector `i`, in `f64`.
    pub fn distance(&self, i: usize, q: &[f64]) -> f64 {
        self.vector(i)
            .iter()
            .zip(q)
            .map(|(&a, &b)| (f64::from(a) - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn cosine(&self, i: usize, q: &[f64]) -> f64 {
        let v = self.vector(i);
        let dot: f64 = v.iter().zip(q).map(|(&a, &b)| f64::from(a) * b).sum();
        let nv = v.iter().map(|&a| f64::from(a).powi(2)).sum::<f64>().sqrt();
        let nq = q.iter().map(|b| b * b).sum::<f64>().sqrt();
        if nv == 0.0 || nq == 0.0 {
            return 0.0;
        }
        dot / (nv * nq)
    }

    /// Magic, version u32, dim u32, count u64, then per record the id u64
    /// and `dim` little-endian `f32` values.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(20 + self.len() * (8 + 4 * self.dim));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        for (i, id) in self.ids.iter().enumerate() {
            out.extend_from_slice(&id.to_le_bytes());
            for v in self.vector(i) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| RetrievalError::Store(m.to_string());
        let mut r = ByteReader::new(bytes);
        if r.take(4).ok_or_else(|| bad("truncated header"))? != MAGIC {
            return Err(bad("bad magic"));
        }
        let version = r.u32().ok_or_else(|| bad("truncated header"))?;
        if version != VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let dim = r.u32().ok_or_else(|| bad("truncated header"))? as usize;
        let count = r.u64().ok_or_else(|| bad("truncated header"))?;
        let mut index = Self::new(dim);
        for _ in 0..count {
            let id = r.u64().ok_or_else(|| bad("truncated record"))?;
            let v = (0..dim)
                .map(|_| r.f32().ok_or_else(|| bad("truncated record")))
                .collect::<Result<Vec<f32>>>()?;
            index.push_f32(id, v)?;
        }
        if !r.is_empty() {
            return Err(bad("trailing bytes"));
        }
        Ok(index)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::decode(&std::fs::read(path)?).map_err(|e| match e {
            RetrievalError::Store(m) => RetrievalError::Store(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}
