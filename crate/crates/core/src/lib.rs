//! Bootstrap estimation of SHAP attribution distributions for tree
//! ensembles, zero-inflated feature summaries, the RoSHAP robust ranking
//! score, and a top-k feature-selection benchmark.

// `!(x > 0.0)` style guards are meant to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attribution;
pub mod baselines;
pub mod dataset;
pub mod error;
pub mod evalharness;
pub mod report;
pub mod seed;
pub mod trees;
pub mod treeshap;

pub use attribution::{
    rank_features, run_bootstrap_attribution, AttributionRun, BootstrapConfig, FeatureDistributionSummary,
    RankingTable, SampleRetention,
};
pub use baselines::{ImportanceVector, Method};
pub use dataset::{BootstrapSplit, Dataset, SimulationConfig, Task};
pub use error::{Error, ErrorKind, Result};
pub use evalharness::{EvalConfig, MetricReport, SweepResult};
pub use trees::{fit_gbdt, GbdtParams, Objective, TreeEnsemble};
pub use treeshap::{tree_shap, Attribution};
