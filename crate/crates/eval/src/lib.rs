//! Retrieval metrics (MRR, recall ratio, mAP), per-method reports and
//! parameter sweeps.

pub mod error;
pub mod metrics;
pub mod plot;
pub mod report;
pub mod sweep;

pub use error::{EvalError, Result};
pub use metrics::{average_precision, mean_average_precision, mrr, recall_ratio_curve, MapResult, RecallCurve};
pub use report::{evaluate, EvalReport, QueryRank, QueryRecord};
pub use sweep::{sweep_fusion, sweep_from_reports, SweepParam, SweepRow, SweepTable, ALPHA_GRID, GAMMA_GRID, OMEGA_GRID};
