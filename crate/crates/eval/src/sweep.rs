//! Parameter sweeps emitted as JSONL tables and SVG charts.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sqnet_retrieval::{Method, QueryFeatures, RetrievalIndex};

use crate::error::{EvalError, Result};
use crate::plot::{line_chart, Series};
use crate::report::{evaluate, EvalReport, QueryRecord};

pub const GAMMA_GRID: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
pub const OMEGA_GRID: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
pub const ALPHA_GRID: [f64; 4] = [0.1, 0.25, 0.5, 0.75];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Gamma,
    Omega,
    Alpha,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Gamma => "gamma",
            SweepParam::Omega => "omega",
            SweepParam::Alpha => "alpha",
        }
    }

    /// Method whose parameter this sweep varies.
    pub fn method_name(self) -> &'static str {
        match self {
            SweepParam::Gamma => "baseline1",
            SweepParam::Omega => "baseline2",
            SweepParam::Alpha => "qnet",
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gamma" => Ok(SweepParam::Gamma),
            "omega" => Ok(SweepParam::Omega),
            "alpha" => Ok(SweepParam::Alpha),
            other => Err(EvalError::Config(format!("unknown sweep parameter {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub method: String,
    pub param: SweepParam,
    pub value: f64,
    pub mrr: f64,
    pub map: f64,
    pub n_at_half: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedRow {
    pub value: f64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub param: SweepParam,
    pub rows: Vec<SweepRow>,
    pub skipped: Vec<SkippedRow>,
}

impl SweepTable {
    pub fn row(&self, value: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.value == value)
    }

    pub fn mrr_values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.mrr).collect()
    }

    pub fn map_values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.map).collect()
    }

    pub fn file_stem(&self) -> String {
        format!("sweep_{}_{}", self.param.method_name(), self.param.name())
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut s = String::new();
        for r in &self.rows {
            s.push_str(&serde_json::to_string(r)?);
            s.push('\n');
        }
        Ok(s)
    }

    /// Writes `<stem>.jsonl` and `<stem>.svg`.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let stem = self.file_stem();
        let jsonl = dir.join(format!("{stem}.jsonl"));
        std::fs::write(&jsonl, self.to_jsonl()?)?;
        let pts = |f: fn(&SweepRow) -> f64| self.rows.iter().map(|r| (r.value, f(r))).collect::<Vec<_>>();
        let series = [
            Series {
                name: "MRR".into(),
                points: pts(|r| r.mrr),
            },
            Series {
                name: "mAP".into(),
                points: pts(|r| r.map),
            },
        ];
        let svg = dir.join(format!("{stem}.svg"));
        let title = format!("{} over {}", self.param.method_name(), self.param.name());
        std::fs::write(&svg, line_chart(&title, self.param.name(), "score", &series))?;
        Ok((jsonl, svg))
    }
}

fn row_from(param: SweepParam, value: f64, r: &EvalReport) -> SweepRow {
    SweepRow {
        method: r.method.clone(),
        param,
        value,
        mrr: r.mrr,
        map: r.map,
        n_at_half: r.n_at_half,
    }
}

/// Evaluates one fusion baseline at every grid value.
pub fn sweep_fusion(
    index: &RetrievalIndex,
    queries: &[QueryRecord],
    features: &[QueryFeatures],
    param: SweepParam,
    grid: &[f64],
) -> Result<SweepTable> {
    if grid.is_empty() {
        return Err(EvalError::Config("sweep grid is empty".into()));
    }
    let mut rows = Vec::with_capacity(grid.len());
    for &v in grid {
        let method = match param {
            SweepParam::Gamma => Method::Baseline1 { gamma: v },
            SweepParam::Omega => Method::Baseline2 { omega: v },
            SweepParam::Alpha => {
                return Err(EvalError::Config("alpha sweeps need one checkpoint per value".into()));
            }
        };
        rows.push(row_from(param, v, &evaluate(index, queries, features, method)?));
    }
    Ok(SweepTable {
        param,
        rows,
        skipped: Vec::new(),
    })
}

/// Assembles a table from per-value reports. Values whose checkpoint could
/// not be evaluated are skipped with a warning.
pub fn sweep_from_reports(param: SweepParam, entries: Vec<(f64, std::result::Result<EvalReport, String>)>) -> Result<SweepTable> {
    if entries.is_empty() {
        return Err(EvalError::Config("sweep grid is empty".into()));
    }
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (value, r) in entries {
        match r {
            Ok(report) => rows.push(row_from(param, value, &report)),
            Err(reason) => {
                log::warn!("skipping {param} = {value}: {reason}");
                skipped.push(SkippedRow { value, reason });
            }
        }
    }
    Ok(SweepTable { param, rows, skipped })
}
