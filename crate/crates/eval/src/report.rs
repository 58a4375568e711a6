//! Per-method evaluation over a set of sketch queries.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sqnet_retrieval::{search, Method, QueryFeatures, RetrievalIndex};

use crate::error::{EvalError, Result};
use crate::metrics::{mean_average_precision, mrr, recall_ratio_curve};
use crate::plot::{line_chart, Series};

/// A sketch query with its single groundtruth photo.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub sketch_id: u64,
    pub groundtruth_id: u64,
    pub class_label: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRank {
    pub sketch_id: u64,
    pub rank: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub gamma: Option<f64>,
    pub omega: Option<f64>,
    pub index_size: usize,
    pub mrr: f64,
    pub map: f64,
    pub recall_curve: Vec<(usize, f64)>,
    pub n_at_half: Option<usize>,
    pub ranks: Vec<QueryRank>,
    /// Queries whose class has no photo in the index.
    pub flagged: Vec<u64>,
}

impl EvalReport {
    pub fn rank_values(&self) -> Vec<usize> {
        self.ranks.iter().map(|r| r.rank).collect()
    }

    /// Base name encoding the method and its parameter.
    pub fn file_stem(&self) -> String {
        match (self.gamma, self.omega) {
            (Some(g), _) => format!("{}_gamma{g}", self.method),
            (_, Some(o)) => format!("{}_omega{o}", self.method),
            _ => self.method.clone(),
        }
    }

    /// Writes `eval_<stem>.json` and the recall-ratio chart
    /// `recall_<stem>.svg`, returning both paths.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let stem = self.file_stem();
        let json = dir.join(format!("eval_{stem}.json"));
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        std::fs::write(&json, s)?;
        let svg = dir.join(format!("recall_{stem}.svg"));
        let series = Series {
            name: stem.clone(),
            points: self.recall_curve.iter().map(|&(n, f)| (n as f64, f)).collect(),
        };
        std::fs::write(
            &svg,
            line_chart(&format!("Recall ratio, {stem}"), "retrieved items N", "recall ratio", &[series]),
        )?;
        Ok((json, svg))
    }
}

/// Ranks the full index for every query and scores the rankings.
/// `features[i]` must encode the sketch of `queries[i]`.
pub fn evaluate(
    index: &RetrievalIndex,
    queries: &[QueryRecord],
    features: &[QueryFeatures],
    method: Method,
) -> Result<EvalReport> {
    if queries.is_empty() {
        return Err(EvalError::NoQueries);
    }
    if queries.len() != features.len() {
        return Err(EvalError::Config(format!(
            "{} queries but {} feature sets",
            queries.len(),
            features.len()
        )));
    }
    let labels: HashMap<u64, u32> = index.items().iter().map(|it| (it.id, it.class_label)).collect();
    let mut ranks = Vec::with_capacity(queries.len());
    let mut relevance = Vec::with_capacity(queries.len());
    for (q, f) in queries.iter().zip(features) {
        let results = search(index, f, method, usize::MAX)?;
        let rank = results
            .iter()
            .find(|r| r.id == q.groundtruth_id)
            .map(|r| r.rank)
            .ok_or(EvalError::MissingGroundtruth {
                sketch: q.sketch_id,
                groundtruth: q.groundtruth_id,
            })?;
        ranks.push(QueryRank {
            sketch_id: q.sketch_id,
            rank,
        });
        relevance.push(results.iter().map(|r| labels[&r.id] == q.class_label).collect::<Vec<bool>>());
    }
    let values: Vec<usize> = ranks.iter().map(|r| r.rank).collect();
    let curve = recall_ratio_curve(&values, index.len())?;
    let map = mean_average_precision(&relevance)?;
    let flagged: Vec<u64> = map.flagged.iter().map(|&i| queries[i].sketch_id).collect();
    if !flagged.is_empty() {
        log::warn!("{} queries have no same-class photo in the index", flagged.len());
    }
    let (gamma, omega) = match method {
        Method::Qnet => (None, None),
        Method::Baseline1 { gamma } => (Some(gamma), None),
        Method::Baseline2 { omega } => (None, Some(omega)),
    };
    Ok(EvalReport {
        method: method.name().to_string(),
        gamma,
        omega,
        index_size: index.len(),
        mrr: mrr(&values)?,
        map: map.map,
        recall_curve: curve.points,
        n_at_half: curve.n_at_half,
        ranks,
        flagged,
    })
}
