//! Rank-based retrieval metrics.

use serde::{Deserialize, Serialize};

use crate::error::{EvalError, Result};

/// Mean reciprocal rank of the groundtruth item.
pub fn mrr(ranks: &[usize]) -> Result<f64> {
    if ranks.is_empty() {
        return Err(EvalError::NoQueries);
    }
    let mut sum = 0.0;
    for &r in ranks {
        if r == 0 {
            return Err(EvalError::InvalidRank(r));
        }
        sum += 1.0 / r as f64;
    }
    Ok(sum / ranks.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecallCurve {
    /// `(N, fraction of queries with rank <= N)` for N = 1..=max_n.
    pub points: Vec<(usize, f64)>,
    /// Smallest N reaching half of the queries, if within `max_n`.
    pub n_at_half: Option<usize>,
}

impl RecallCurve {
    pub fn at(&self, n: usize) -> Option<f64> {
        self.points.get(n.checked_sub(1)?).map(|p| p.1)
    }
}

/// Fraction of queries whose groundtruth appears in the first N results.
pub fn recall_ratio_curve(ranks: &[usize], max_n: usize) -> Result<RecallCurve> {
    if max_n == 0 {
        return Err(EvalError::Config("recall curve needs max_n >= 1".into()));
    }
    if let Some(&r) = ranks.iter().find(|&&r| r == 0) {
        return Err(EvalError::InvalidRank(r));
    }
    let mut hits = vec![0usize; max_n + 1];
    for &r in ranks {
        if r <= max_n {
            hits[r] += 1;
        }
    }
    let total = ranks.len().max(1) as f64;
    let mut points = Vec::with_capacity(max_n);
    let mut cum = 0;
    let mut n_at_half = None;
    for (n, &h) in hits.iter().enumerate().skip(1) {
        cum += h;
        if n_at_half.is_none() && !ranks.is_empty() && 2 * cum >= ranks.len() {
            n_at_half = Some(n);
        }
        points.push((n, cum as f64 / total));
    }
    Ok(RecallCurve { points, n_at_half })
}

/// Average precision of one full ranking. `None` when nothing is relevant.
pub fn average_precision(relevant: &[bool]) -> Option<f64> {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &r) in relevant.iter().enumerate() {
        if r {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    (hits > 0).then(|| sum / hits as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapResult {
    pub map: f64,
    /// Queries with no relevant item in the index; they count as AP 0.
    pub flagged: Vec<usize>,
}

/// Mean of per-query average precision over full rankings.
pub fn mean_average_precision(rankings: &[Vec<bool>]) -> Result<MapResult> {
    if rankings.is_empty() {
        return Err(EvalError::NoQueries);
    }
    let mut flagged = Vec::new();
    let mut sum = 0.0;
    for (q, r) in rankings.iter().enumerate() {
        match average_precision(r) {
            Some(ap) => sum += ap,
            None => flagged.push(q),
        }
    }
    Ok(MapResult {
        map: sum / rankings.len() as f64,
        flagged,
    })
}
