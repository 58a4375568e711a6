//! Training logs and feature-space ordering statistics.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sqnet_nnet::{Branch, Model};

use crate::data::{embed, ImageBank};
use crate::error::Result;
use crate::losses::euclidean;
use crate::sampler::Quadruplet;

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub stage: u8,
    pub epoch: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub branch: Option<String>,
    pub beta: Option<f64>,
    pub train_loss: f64,
    pub terms: BTreeMap<String, f64>,
    pub val_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub accuracy: Option<f64>,
}

pub fn to_jsonl(records: &[EpochMetrics]) -> Result<String> {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r)?);
        s.push('\n');
    }
    Ok(s)
}

pub fn write_jsonl(path: &Path, records: &[EpochMetrics]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(to_jsonl(records)?.as_bytes())?;
    Ok(())
}

pub fn read_jsonl(path: &Path) -> Result<Vec<EpochMetrics>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

/// Anchor distances of one quadruplet.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadDistances {
    pub d_pos: f64,
    pub d_pn: f64,
    pub d_neg: f64,
}

impl QuadDistances {
    pub fn full_chain(&self) -> bool {
        self.d_pos < self.d_pn && self.d_pn < self.d_neg
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderingStats {
    pub count: usize,
    /// Fraction with D+ < D+- < D-.
    pub chain_rate: f64,
    /// Fraction with D+ < D-.
    pub pos_neg_rate: f64,
    /// Mean of D+- - D+.
    pub mean_color_gap: f64,
    pub mean_d_pos: f64,
    pub mean_d_pn: f64,
    pub mean_d_neg: f64,
}

pub fn summarize(d: &[QuadDistances]) -> OrderingStats {
    let n = d.len().max(1) as f64;
    let frac = |f: &dyn Fn(&QuadDistances) -> bool| d.iter().filter(|q| f(q)).count() as f64 / n;
    let mean = |f: &dyn Fn(&QuadDistances) -> f64| d.iter().map(f).sum::<f64>() / n;
    OrderingStats {
        count: d.len(),
        chain_rate: frac(&|q| q.full_chain()),
        pos_neg_rate: frac(&|q| q.d_pos < q.d_neg),
        mean_color_gap: mean(&|q| q.d_pn - q.d_pos),
        mean_d_pos: mean(&|q| q.d_pos),
        mean_d_pn: mean(&|q| q.d_pn),
        mean_d_neg: mean(&|q| q.d_neg),
    }
}

/// Embeds each quadruplet (clean anchor sketch) and measures its distances.
pub fn quadruplet_distances(model: &Model, bank: &ImageBank, quads: &[Quadruplet]) -> Result<Vec<QuadDistances>> {
    let batch = 64;
    let pick = |f: fn(&Quadruplet) -> u64| quads.iter().map(f).collect::<Vec<u64>>();
    let q = embed(model, bank, Branch::Sketch, &pick(|q| q.anchor_sketch), batch)?;
    let p = embed(model, bank, Branch::Photo, &pick(|q| q.positive), batch)?;
    let pn = embed(model, bank, Branch::Photo, &pick(|q| q.positive_negative), batch)?;
    let n = embed(model, bank, Branch::Photo, &pick(|q| q.negative), batch)?;
    Ok((0..quads.len())
        .map(|i| QuadDistances {
            d_pos: euclidean(&q[i], &p[i]),
            d_pn: euclidean(&q[i], &pn[i]),
            d_neg: euclidean(&q[i], &n[i]),
        })
        .collect())
}

pub fn ordering_stats(model: &Model, bank: &ImageBank, quads: &[Quadruplet]) -> Result<OrderingStats> {
    Ok(summarize(&quadruplet_distances(model, bank, quads)?))
}
