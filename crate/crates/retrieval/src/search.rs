//! Methods, ranked results and exhaustive search.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use sqnet_core::colorfeat::{color_similarity_tfidf, histogram_distance};

use crate::error::{Result, RetrievalError};
use crate::fusion::{fused_distance, fused_similarity_geometric};
use crate::index::RetrievalIndex;
use crate::query::QueryFeatures;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Method {
    /// Distance in the learned embedding space.
    Qnet,
    /// Weighted shape and grid-histogram distance.
    Baseline1 { gamma: f64 },
    /// Geometric mean of tf-idf color similarity and shape cosine.
    Baseline2 { omega: f64 },
}

impl Method {
    /// Builds a method from its CLI/API name. Only the parameter the
    /// method uses is range-checked.
    pub fn parse(name: &str, gamma: f64, omega: f64) -> Result<Self> {
        let m = match name {
            "qnet" => Method::Qnet,
            "baseline1" => Method::Baseline1 { gamma },
            "baseline2" => Method::Baseline2 { omega },
            other => return Err(RetrievalError::UnknownMethod(other.to_string())),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name, value: f64| {
            if (0.0..=1.0).contains(&value) {
                Ok(())
            } else {
                Err(RetrievalError::OutOfRange { name, value })
            }
        };
        match *self {
            Method::Qnet => Ok(()),
            Method::Baseline1 { gamma } => check("gamma", gamma),
            Method::Baseline2 { omega } => check("omega", omega),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::Qnet => "qnet",
            Method::Baseline1 { .. } => "baseline1",
            Method::Baseline2 { .. } => "baseline2",
        }
    }

    pub fn kind(&self) -> ScoreKind {
        match self {
            Method::Baseline2 { .. } => ScoreKind::Similarity,
            _ => ScoreKind::Distance,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Qnet => write!(f, "qnet"),
            Method::Baseline1 { gamma } => write!(f, "baseline1(gamma={gamma})"),
            Method::Baseline2 { omega } => write!(f, "baseline2(omega={omega})"),
        }
    }
}

/// Whether lower or higher scores rank first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Distance,
    Similarity,
}

impl ScoreKind {
    /// Order of two scores with the better one first.
    pub fn compare(self, a: f64, b: f64) -> Ordering {
        match self {
            ScoreKind::Distance => a.total_cmp(&b),
            ScoreKind::Similarity => b.total_cmp(&a),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedResult {
    pub id: u64,
    pub score: f64,
    pub kind: ScoreKind,
    /// 1-based.
    pub rank: usize,
}

/// Score of every indexed item for `query`, in index order.
pub fn score_all(index: &RetrievalIndex, query: &QueryFeatures, method: Method) -> Result<Vec<f64>> {
    method.validate()?;
    let n = index.len();
    match method {
        Method::Qnet => {
            let q = &query.qnet;
            check_dim(index.embeddings().dim(), q.len())?;
            Ok((0..n).map(|i| index.embeddings().distance(i, q)).collect())
        }
        Method::Baseline1 { gamma } => {
            let b = index.baselines().ok_or(RetrievalError::NoBaselines)?;
            let (shape, h) = query.baseline().ok_or(RetrievalError::NoBaselines)?;
            check_dim(b.shape.dim(), shape.len())?;
            (0..n)
                .map(|i| {
                    let shape_d = b.shape.distance(i, shape) / 2.0;
                    let color_d = histogram_distance(&h.grid, &b.grid[i])?;
                    Ok(fused_distance(shape_d, color_d, gamma))
                })
                .collect()
        }
        Method::Baseline2 { omega } => {
            let b = index.baselines().ok_or(RetrievalError::NoBaselines)?;
            let (shape, h) = query.baseline().ok_or(RetrievalError::NoBaselines)?;
            check_dim(b.shape.dim(), shape.len())?;
            Ok((0..n)
                .map(|i| {
                    let sim = color_similarity_tfidf(&h.stroke, &b.foreground[i], &b.corpus);
                    fused_similarity_geometric(sim, b.shape.cosine(i, shape), omega)
                })
                .collect())
        }
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(RetrievalError::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Ranks `(id, score)` pairs, breaking ties by ascending id, and keeps the
/// first `top_k`.
pub fn rank_scores(ids: &[u64], scores: &[f64], kind: ScoreKind, top_k: usize) -> Vec<RankedResult> {
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| kind.compare(scores[a], scores[b]).then(ids[a].cmp(&ids[b])));
    order
        .into_iter()
        .take(top_k)
        .enumerate()
        .map(|(r, i)| RankedResult {
            id: ids[i],
            score: scores[i],
            kind,
            rank: r + 1,
        })
        .collect()
}

/// Exhaustive search over the whole index.
pub fn search(index: &RetrievalIndex, query: &QueryFeatures, method: Method, top_k: usize) -> Result<Vec<RankedResult>> {
    if index.is_empty() {
        method.validate()?;
        return Ok(Vec::new());
    }
    let scores = score_all(index, query, method)?;
    Ok(rank_scores(index.ids(), &scores, method.kind(), top_k))
}
