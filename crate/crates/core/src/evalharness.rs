//! Top-k feature selection benchmark: keep the k best-ranked features,
//! refit the same model on a fixed train/test split, and score it.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attribution::RankingTable;
use crate::baselines::Method;
use crate::dataset::{split_indices, Dataset, SplitIndices, Task};
use crate::error::{Error, Result};
use crate::trees::{fit_gbdt, sigmoid, GbdtParams};

/// Rows with `|y|` at or below this are left out of MAPE.
pub const MAPE_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub average_precision: f64,
    pub auc_roc: f64,
    /// A per-class F1 had a zero denominator and was counted as 0.
    pub f1_zero_division: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegressionMetrics {
    pub rmse: f64,
    pub mae: f64,
    /// `None` when every target is too close to zero.
    pub mape: Option<f64>,
    pub mape_excluded: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum MetricReport {
    Classification(ClassificationMetrics),
    Regression(RegressionMetrics),
}

impl MetricReport {
    /// `(name, value)` pairs in a fixed order; absent values are skipped.
    pub fn values(&self) -> Vec<(&'static str, f64)> {
        match *self {
            MetricReport::Classification(c) => vec![
                ("accuracy", c.accuracy),
                ("macro_f1", c.macro_f1),
                ("average_precision", c.average_precision),
                ("auc_roc", c.auc_roc),
            ],
            MetricReport::Regression(r) => {
                let mut v = vec![("rmse", r.rmse), ("mae", r.mae)];
                if let Some(m) = r.mape {
                    v.push(("mape", m));
                }
                v
            }
        }
    }

    pub fn get(&self, metric: &str) -> Option<f64> {
        self.values().into_iter().find(|(n, _)| *n == metric).map(|(_, v)| v)
    }
}

fn class_counts(y_true: &[f64]) -> Result<(u64, u64)> {
    let pos = y_true.iter().filter(|&&y| y == 1.0).count() as u64;
    if let Some(&bad) = y_true.iter().find(|&&y| y != 0.0 && y != 1.0) {
        return Err(Error::InvalidArgument(format!("label {bad} is not 0 or 1")));
    }
    let neg = y_true.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    Ok((pos, neg))
}

/// Descending-score order with tied scores grouped: `(positives, negatives)`
/// per distinct score.
fn tie_groups(y_true: &[f64], scores: &[f64]) -> Vec<(u64, u64)> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut groups: Vec<(u64, u64)> = Vec::new();
    let mut last = None;
    for i in idx {
        if last != Some(scores[i]) {
            groups.push((0, 0));
            last = Some(scores[i]);
        }
        let g = groups.last_mut().expect("group pushed above");
        if y_true[i] == 1.0 {
            g.0 += 1;
        } else {
            g.1 += 1;
        }
    }
    groups
}

/// Probability of ranking a random positive above a random negative, ties
/// counting one half (Mann-Whitney).
pub fn auc_roc(y_true: &[f64], scores: &[f64]) -> Result<f64> {
    check_lengths(y_true.len(), scores.len())?;
    let (pos, neg) = class_counts(y_true)?;
    // Twice the win count keeps half-credit ties integral.
    let mut twice_wins: u128 = 0;
    let mut neg_below = neg;
    for (p, n) in tie_groups(y_true, scores) {
        neg_below -= n;
        twice_wins += u128::from(p) * (2 * u128::from(neg_below) + u128::from(n));
    }
    Ok(twice_wins as f64 / 2.0 / (pos as f64 * neg as f64))
}

/// `sum_i (R_i - R_{i-1}) P_i` over the precision-recall staircase, one
/// step per distinct score.
pub fn average_precision(y_true: &[f64], scores: &[f64]) -> Result<f64> {
    check_lengths(y_true.len(), scores.len())?;
    let (pos, _) = class_counts(y_true)?;
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    for (p, n) in tie_groups(y_true, scores) {
        tp += p;
        fp += n;
        let recall = tp as f64 / pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(ap)
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch { expected: a, got: b });
    }
    if a == 0 {
        return Err(Error::InvalidArgument("no rows to score".into()));
    }
    Ok(())
}

/// Accuracy and macro-F1 use `score >= threshold` as the positive call.
pub fn classification_metrics(y_true: &[f64], scores: &[f64], threshold: f64) -> Result<ClassificationMetrics> {
    let auc = auc_roc(y_true, scores)?;
    let ap = average_precision(y_true, scores)?;
    let mut confusion = [[0u64; 2]; 2]; // [truth][prediction]
    for (&y, &s) in y_true.iter().zip(scores) {
        confusion[usize::from(y == 1.0)][usize::from(s >= threshold)] += 1;
    }
    let n = y_true.len() as f64;
    let accuracy = (confusion[0][0] + confusion[1][1]) as f64 / n;
    let mut zero_division = false;
    let mut f1_sum = 0.0;
    for c in 0..2 {
        let tp = confusion[c][c];
        let fp = confusion[1 - c][c];
        let fn_ = confusion[c][1 - c];
        let den = 2 * tp + fp + fn_;
        if den == 0 {
            zero_division = true;
        } else {
            f1_sum += (2 * tp) as f64 / den as f64;
        }
    }
    Ok(ClassificationMetrics {
        accuracy,
        macro_f1: f1_sum / 2.0,
        average_precision: ap,
        auc_roc: auc,
        f1_zero_division: zero_division,
    })
}

pub fn regression_metrics(y_true: &[f64], y_pred: &[f64]) -> Result<RegressionMetrics> {
    check_lengths(y_true.len(), y_pred.len())?;
    let n = y_true.len() as f64;
    let (mut sq, mut abs, mut pct) = (0.0, 0.0, 0.0);
    let mut kept = 0usize;
    for (&y, &f) in y_true.iter().zip(y_pred) {
        let e = y - f;
        sq += e * e;
        abs += e.abs();
        if y.abs() > MAPE_EPS {
            pct += (e / y).abs();
            kept += 1;
        }
    }
    Ok(RegressionMetrics {
        rmse: (sq / n).sqrt(),
        mae: abs / n,
        mape: (kept > 0).then(|| pct / kept as f64),
        mape_excluded: y_true.len() - kept,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub k_values: Vec<usize>,
    pub test_fraction: f64,
    pub methods: Vec<Method>,
    pub params: GbdtParams,
    pub master_seed: u64,
    /// Worker threads for the (method x k) grid; `0` uses rayon's default.
    pub workers: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            k_values: (1..=15).collect(),
            test_fraction: 0.3,
            methods: Method::ALL.to_vec(),
            params: GbdtParams::default(),
            master_seed: 0,
            workers: 0,
        }
    }
}

impl EvalConfig {
    fn validate(&self, p: usize) -> Result<()> {
        if self.k_values.is_empty() {
            return Err(Error::InvalidArgument("k_values is empty".into()));
        }
        if let Some(&k) = self.k_values.iter().find(|&&k| k == 0 || k > p) {
            return Err(Error::InvalidArgument(format!("k = {k} outside 1..={p}")));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidArgument("no methods selected".into()));
        }
        self.params.validate()
    }
}

/// The train/test partition shared by every method and every k.
pub fn evaluation_split(ds: &Dataset, cfg: &EvalConfig) -> Result<SplitIndices> {
    split_indices(
        ds,
        cfg.test_fraction,
        cfg.master_seed,
        ds.task() == Task::BinaryClassification,
    )
}

/// Order-sensitive digest of a split, for checking that cells share it.
pub fn split_digest(split: &SplitIndices) -> u64 {
    let mut h = DefaultHasher::new();
    split.train.hash(&mut h);
    split.test.hash(&mut h);
    h.finish()
}

fn score_subset(ds: &Dataset, split: &SplitIndices, columns: &[usize], params: &GbdtParams, seed: u64) -> Result<MetricReport> {
    let sub = ds.select_columns(columns)?;
    let train = sub.select_rows(&split.train)?;
    let model = fit_gbdt(&train, params, seed)?;
    let y: Vec<f64> = split.test.iter().map(|&i| sub.target()[i]).collect();
    let margins: Vec<f64> = split.test.iter().map(|&i| model.predict_margin(sub.row(i))).collect::<Result<_>>()?;
    Ok(match ds.task() {
        Task::BinaryClassification => {
            let probs: Vec<f64> = margins.into_iter().map(sigmoid).collect();
            MetricReport::Classification(classification_metrics(&y, &probs, 0.5)?)
        }
        Task::Regression => MetricReport::Regression(regression_metrics(&y, &margins)?),
    })
}

/// The `k` top-ranked feature indices, in original column order (so that
/// `k = p` reproduces the full-feature model exactly).
pub fn selected_columns(ranking: &RankingTable, k: usize) -> Vec<usize> {
    let mut cols = ranking.top(k);
    cols.sort_unstable();
    cols
}

fn check_ranking(ranking: &RankingTable, p: usize) -> Result<()> {
    let mut seen = vec![false; p];
    for row in &ranking.rows {
        if row.feature >= p || std::mem::replace(&mut seen[row.feature], true) {
            return Err(Error::InvalidArgument(format!(
                "{} ranking is not a permutation of the {p} features",
                ranking.method
            )));
        }
    }
    if ranking.rows.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: ranking.rows.len(),
        });
    }
    Ok(())
}

/// Refits on the top `k` features of `ranking` and scores the held-out rows.
pub fn evaluate_topk(ds: &Dataset, ranking: &RankingTable, k: usize, cfg: &EvalConfig) -> Result<MetricReport> {
    check_ranking(ranking, ds.n_features())?;
    if k == 0 || k > ds.n_features() {
        return Err(Error::InvalidArgument(format!("k = {k} outside 1..={}", ds.n_features())));
    }
    let split = evaluation_split(ds, cfg)?;
    score_subset(ds, &split, &selected_columns(ranking, k), &cfg.params, cfg.master_seed)
}

/// Scores the model on every feature.
pub fn evaluate_full(ds: &Dataset, cfg: &EvalConfig) -> Result<MetricReport> {
    let split = evaluation_split(ds, cfg)?;
    let all: Vec<usize> = (0..ds.n_features()).collect();
    score_subset(ds, &split, &all, &cfg.params, cfg.master_seed)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalCell {
    pub method: String,
    pub k: usize,
    pub features: Vec<usize>,
    pub split_digest: u64,
    pub report: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub method: String,
    pub metric: String,
    pub mean: f64,
    pub sd: f64,
    pub k_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    /// Grid cells, method-major in input order, then by `k_values` order.
    pub cells: Vec<EvalCell>,
    pub rows: Vec<SweepRow>,
}

/// Mean and sample standard deviation (`n - 1`); the SD of one value is 0.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Evaluates every ranking at every `k` on one shared split, then averages
/// each metric over the `k` values.
pub fn sweep(ds: &Dataset, rankings: &[RankingTable], cfg: &EvalConfig) -> Result<SweepResult> {
    cfg.validate(ds.n_features())?;
    if rankings.is_empty() {
        return Err(Error::InvalidArgument("no rankings to evaluate".into()));
    }
    for r in rankings {
        check_ranking(r, ds.n_features())?;
    }
    let split = evaluation_split(ds, cfg)?;
    let digest = split_digest(&split);
    let grid: Vec<(usize, usize)> = (0..rankings.len())
        .flat_map(|m| cfg.k_values.iter().map(move |&k| (m, k)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot build worker pool: {e}")))?;
    let cells: Vec<EvalCell> = pool.install(|| {
        grid.par_iter()
            .map(|&(m, k)| {
                let features = selected_columns(&rankings[m], k);
                let report = score_subset(ds, &split, &features, &cfg.params, cfg.master_seed)?;
                Ok(EvalCell {
                    method: rankings[m].method.clone(),
                    k,
                    features,
                    split_digest: digest,
                    report,
                })
            })
            .collect::<Result<_>>()
    })?;

    let mut rows = Vec::new();
    for chunk in cells.chunks(cfg.k_values.len()) {
        let metrics: Vec<&str> = chunk[0].report.values().into_iter().map(|(n, _)| n).collect();
        for metric in metrics {
            let vals: Vec<f64> = chunk.iter().filter_map(|c| c.report.get(metric)).collect();
            let (mean, sd) = mean_sd(&vals);
            rows.push(SweepRow {
                method: chunk[0].method.clone(),
                metric: metric.to_string(),
                mean,
                sd,
                k_count: vals.len(),
            });
        }
    }
    Ok(SweepResult { cells, rows })
}

impl SweepResult {
    /// Summary CSV: `method, metric, mean, sd, k_count`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["method", "metric", "mean", "sd", "k_count"])?;
        for r in &self.rows {
            w.write_record([
                r.method.clone(),
                r.metric.clone(),
                r.mean.to_string(),
                r.sd.to_string(),
                r.k_count.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<sweep csv>", e))?;
        Ok(())
    }

    /// Per-cell CSV: `method, k, metric, value`.
    pub fn write_cells_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["method", "k", "metric", "value"])?;
        for c in &self.cells {
            for (metric, value) in c.report.values() {
                w.write_record([c.method.clone(), c.k.to_string(), metric.to_string(), value.to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io("<sweep cells csv>", e))?;
        Ok(())
    }

    pub fn row(&self, method: &str, metric: &str) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.method == method && r.metric == metric)
    }
}
