//! Competing importance measures: information gain, single-split SHAP and
//! model gain.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::attribution::{snap, RankingTable};
use crate::dataset::{split_indices, Dataset, SplitIndices, Task};
use crate::error::{Error, Result};
use crate::trees::{fit_gbdt, GbdtParams, TreeEnsemble};
use crate::treeshap::tree_shap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Roshap,
    SingleShap,
    Gain,
    InfoGain,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Roshap, Method::SingleShap, Method::Gain, Method::InfoGain];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Roshap => "roshap",
            Method::SingleShap => "single_shap",
            Method::Gain => "gain",
            Method::InfoGain => "info_gain",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s || m.as_str().replace('_', "-") == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method {s:?}")))
    }
}

/// One nonnegative importance score per feature.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceVector {
    pub method: Method,
    pub scores: Vec<f64>,
}

impl ImportanceVector {
    pub fn new(method: Method, scores: Vec<f64>) -> Result<Self> {
        if let Some(bad) = scores.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return Err(Error::Degenerate(format!("{method} score {bad} is not a finite nonnegative value")));
        }
        Ok(Self { method, scores })
    }

    pub fn ranking(&self, names: &[String]) -> RankingTable {
        RankingTable::from_scores(self.method.as_str(), &self.scores, names)
    }
}

pub const DEFAULT_IG_BINS: usize = 10;

/// Equal-frequency bin index of every value. Edges sit at the sorted values
/// of rank `floor(k n / bins)`, duplicates merged; a value's bin is the
/// number of edges at or below it, so tied values always share a bin.
pub fn equal_frequency_bins(values: &[f64], num_bins: usize) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut edges: Vec<f64> = (1..num_bins).map(|k| sorted[k * n / num_bins]).collect();
    edges.dedup();
    values
        .iter()
        .map(|&v| edges.partition_point(|&e| e <= v))
        .collect()
}

fn entropy(counts: impl Iterator<Item = usize>, total: usize) -> f64 {
    let t = total as f64;
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let q = c as f64 / t;
            -q * q.ln()
        })
        .sum()
}

/// `H(Y) - H(Y | X)` in nats for discrete codes, from joint counts.
pub fn information_gain_discrete(x: &[usize], y: &[usize]) -> f64 {
    let n = y.len();
    let kx = x.iter().max().map_or(0, |m| m + 1);
    let ky = y.iter().max().map_or(0, |m| m + 1);
    let mut joint = vec![0usize; kx * ky];
    let mut marginal_y = vec![0usize; ky];
    for (&a, &b) in x.iter().zip(y) {
        joint[a * ky + b] += 1;
        marginal_y[b] += 1;
    }
    let h_y = entropy(marginal_y.into_iter(), n);
    let h_y_given_x: f64 = joint
        .chunks(ky.max(1))
        .map(|row| {
            let nx: usize = row.iter().sum();
            if nx == 0 {
                0.0
            } else {
                nx as f64 / n as f64 * entropy(row.iter().copied(), nx)
            }
        })
        .sum();
    let ig = h_y - h_y_given_x;
    if ig < 0.0 && ig > -1e-12 {
        0.0
    } else {
        ig.max(0.0)
    }
}

/// Information gain of each feature about the target after equal-frequency
/// discretisation. A regression target is binned the same way.
pub fn information_gain(ds: &Dataset, num_bins: usize) -> Result<ImportanceVector> {
    if num_bins < 2 {
        return Err(Error::InvalidArgument("information gain needs at least 2 bins".into()));
    }
    let y: Vec<usize> = match ds.task() {
        Task::BinaryClassification => ds.target().iter().map(|&v| v as usize).collect(),
        Task::Regression => equal_frequency_bins(ds.target(), num_bins),
    };
    if y.iter().all(|&c| c == y[0]) {
        return Err(Error::SingleClass);
    }
    let scores = (0..ds.n_features())
        .map(|j| information_gain_discrete(&equal_frequency_bins(&ds.column(j), num_bins), &y))
        .collect();
    ImportanceVector::new(Method::InfoGain, scores)
}

/// One train/test split and one fit: the single-run SHAP scores
/// `sum over test rows of |phi_ij|` and the model's gain importance.
#[derive(Debug, Clone)]
pub struct SingleRun {
    pub split: SplitIndices,
    pub model: TreeEnsemble,
    pub shap: ImportanceVector,
    pub gain: ImportanceVector,
}

pub fn single_run(ds: &Dataset, params: &GbdtParams, seed: u64, test_fraction: f64) -> Result<SingleRun> {
    let stratified = ds.task() == Task::BinaryClassification;
    let split = split_indices(ds, test_fraction, seed, stratified)?;
    let train = ds.select_rows(&split.train)?;
    let model = fit_gbdt(&train, params, seed)?;
    let mut shap = vec![0.0; ds.n_features()];
    for &i in &split.test {
        let a = tree_shap(&model, ds.row(i))?;
        for (acc, phi) in shap.iter_mut().zip(&a.phi) {
            *acc += snap(phi.abs());
        }
    }
    Ok(SingleRun {
        shap: ImportanceVector::new(Method::SingleShap, shap)?,
        gain: ImportanceVector::new(Method::Gain, model.gain_importance())?,
        split,
        model,
    })
}

pub fn single_run_shap(ds: &Dataset, params: &GbdtParams, seed: u64, test_fraction: f64) -> Result<ImportanceVector> {
    single_run(ds, params, seed, test_fraction).map(|r| r.shap)
}
