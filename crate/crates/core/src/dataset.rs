//! Tabular data: ingestion, splitting, bootstrap resampling and the
//! zero-inflated Gaussian simulation design.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    BinaryClassification,
    Regression,
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary-classification" | "classification" | "binary" => Ok(Task::BinaryClassification),
            "regression" => Ok(Task::Regression),
            other => Err(Error::InvalidArgument(format!("unknown task {other:?}"))),
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Task::BinaryClassification => "binary-classification",
            Task::Regression => "regression",
        })
    }
}

/// Immutable numeric feature matrix (row-major) with a response column.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    n_rows: usize,
    n_features: usize,
    target: Vec<f64>,
    feature_names: Vec<String>,
    target_name: String,
    task: Task,
}

impl Dataset {
    /// Builds a dataset from row-major `features`, validating every invariant.
    pub fn new(
        features: Vec<f64>,
        target: Vec<f64>,
        feature_names: Vec<String>,
        target_name: impl Into<String>,
        task: Task,
    ) -> Result<Self> {
        let n_rows = target.len();
        let n_features = feature_names.len();
        if n_rows < 2 {
            return Err(Error::InvalidDataset(format!(
                "need at least 2 rows, got {n_rows}"
            )));
        }
        if n_features == 0 {
            return Err(Error::InvalidDataset("need at least one feature".into()));
        }
        if features.len() != n_rows * n_features {
            return Err(Error::DimensionMismatch {
                expected: n_rows * n_features,
                got: features.len(),
            });
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / n_features + 1,
                column: feature_names[pos % n_features].clone(),
                value: features[pos].to_string(),
            });
        }
        let target_name = target_name.into();
        if let Some(pos) = target.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos + 1,
                column: target_name,
                value: target[pos].to_string(),
            });
        }
        if task == Task::BinaryClassification {
            check_binary(&target)?;
        }
        Ok(Dataset {
            features,
            n_rows,
            n_features,
            target,
            feature_names,
            target_name,
            task,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.features[i * self.n_features + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.features.chunks_exact(self.n_features)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// New dataset made of the given rows, repetitions allowed.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Dataset> {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        let mut target = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            target.push(self.target[i]);
        }
        Dataset::new(
            features,
            target,
            self.feature_names.clone(),
            self.target_name.clone(),
            self.task,
        )
    }

    /// New dataset restricted to the given feature columns, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> Result<Dataset> {
        if let Some(&bad) = columns.iter().find(|&&j| j >= self.n_features) {
            return Err(Error::InvalidArgument(format!(
                "feature index {bad} out of range for {} features",
                self.n_features
            )));
        }
        let mut features = Vec::with_capacity(self.n_rows * columns.len());
        for row in self.rows() {
            features.extend(columns.iter().map(|&j| row[j]));
        }
        let names = columns
            .iter()
            .map(|&j| self.feature_names[j].clone())
            .collect();
        Dataset::new(
            features,
            self.target.clone(),
            names,
            self.target_name.clone(),
            self.task,
        )
    }

    /// Row indices grouped by class label (class 0 first). Regression data
    /// yields a single group holding every row.
    fn class_groups(&self) -> Vec<Vec<usize>> {
        match self.task {
            Task::Regression => vec![(0..self.n_rows).collect()],
            Task::BinaryClassification => {
                let mut groups = vec![Vec::new(), Vec::new()];
                for (i, &y) in self.target.iter().enumerate() {
                    groups[usize::from(y == 1.0)].push(i);
                }
                groups
            }
        }
    }

    /// Writes the dataset as CSV with the target as the last column.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(
            self.feature_names
                .iter()
                .map(String::as_str)
                .chain(std::iter::once(self.target_name.as_str())),
        )?;
        let mut record = Vec::with_capacity(self.n_features + 1);
        for (row, y) in self.rows().zip(&self.target) {
            record.clear();
            record.extend(row.iter().map(|v| v.to_string()));
            record.push(y.to_string());
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

fn check_binary(target: &[f64]) -> Result<()> {
    let mut seen = [false; 2];
    for (row, &y) in target.iter().enumerate() {
        if y == 0.0 {
            seen[0] = true;
        } else if y == 1.0 {
            seen[1] = true;
        } else {
            return Err(Error::NonBinaryTarget { row: row + 1, value: y });
        }
    }
    if seen[0] && seen[1] {
        Ok(())
    } else {
        Err(Error::SingleClass)
    }
}

/// Options for [`read_csv`]. `recode` replaces exact feature values before
/// validation (e.g. a sentinel `100` mapped to `-110`).
#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub target_column: String,
    pub task: Task,
    pub recode: Vec<(f64, f64)>,
}

impl CsvOptions {
    pub fn new(target_column: impl Into<String>, task: Task) -> Self {
        CsvOptions {
            target_column: target_column.into(),
            task,
            recode: Vec::new(),
        }
    }
}

/// Loads a headered numeric CSV. Rows in errors are 1-based data rows
/// (the header is not counted).
pub fn load_csv(path: impl AsRef<Path>, target_column: &str, task: Task) -> Result<Dataset> {
    load_csv_with(path, &CsvOptions::new(target_column, task))
}

pub fn load_csv_with(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, opts)
}

pub fn read_csv<R: Read>(reader: R, opts: &CsvOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let target_idx = header
        .iter()
        .position(|h| *h == opts.target_column)
        .ok_or_else(|| Error::MissingTarget(opts.target_column.clone()))?;
    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != target_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut features = Vec::new();
    let mut target = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 1;
        for (k, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            let value: f64 = cell.parse().map_err(|_| Error::NonNumeric {
                row,
                column: header[k].clone(),
                value: cell.to_string(),
            })?;
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    row,
                    column: header[k].clone(),
                    value: cell.to_string(),
                });
            }
            if k == target_idx {
                target.push(value);
            } else {
                let value = opts
                    .recode
                    .iter()
                    .find(|(old, _)| *old == value)
                    .map_or(value, |&(_, new)| new);
                features.push(value);
            }
        }
    }
    Dataset::new(
        features,
        target,
        feature_names,
        opts.target_column.clone(),
        opts.task,
    )
}

/// Row partition produced by [`split_indices`]; both sides sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn split_indices(
    ds: &Dataset,
    test_fraction: f64,
    seed: u64,
    stratified: bool,
) -> Result<SplitIndices> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    if stratified && ds.task() == Task::Regression {
        return Err(Error::InvalidArgument(
            "stratified split requires a classification target".into(),
        ));
    }
    let mut rng = rng_from_seed(seed);
    let groups = if stratified {
        ds.class_groups()
    } else {
        vec![(0..ds.n_rows()).collect()]
    };
    let mut train = Vec::new();
    let mut test = Vec::new();
    for mut group in groups {
        let n_test = (test_fraction * group.len() as f64).round() as usize;
        if n_test == 0 || n_test == group.len() {
            return Err(Error::InvalidArgument(format!(
                "test fraction {test_fraction} leaves an empty side for a group of {} rows",
                group.len()
            )));
        }
        group.shuffle(&mut rng);
        test.extend_from_slice(&group[..n_test]);
        train.extend_from_slice(&group[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, test })
}

/// Splits rows into (train, test) datasets.
pub fn train_test_split(
    ds: &Dataset,
    test_fraction: f64,
    seed: u64,
    stratified: bool,
) -> Result<(Dataset, Dataset)> {
    let split = split_indices(ds, test_fraction, seed, stratified)?;
    Ok((ds.select_rows(&split.train)?, ds.select_rows(&split.test)?))
}

/// One bootstrap resample and its out-of-bag complement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BootstrapSplit {
    pub run_id: u64,
    /// Exactly `n` draws with replacement, in draw order.
    pub train_indices: Vec<usize>,
    /// Rows never drawn, ascending.
    pub oob_indices: Vec<usize>,
}

/// Redraws allowed after the first draw leaves an empty out-of-bag set.
pub const MAX_OOB_RETRIES: u32 = 16;

pub fn bootstrap_resample(ds: &Dataset, seed: u64) -> Result<BootstrapSplit> {
    bootstrap_resample_with(ds, seed, false)
}

/// Plain (or per-class, when `stratified`) resampling with replacement.
/// An empty out-of-bag set triggers a redraw with `seed + attempt`.
pub fn bootstrap_resample_with(ds: &Dataset, seed: u64, stratified: bool) -> Result<BootstrapSplit> {
    let n = ds.n_rows();
    let groups = if stratified && ds.task() == Task::BinaryClassification {
        ds.class_groups()
    } else {
        vec![(0..n).collect()]
    };
    for attempt in 0..=MAX_OOB_RETRIES {
        let mut rng = rng_from_seed(seed.wrapping_add(u64::from(attempt)));
        let mut train = Vec::with_capacity(n);
        for group in &groups {
            train.extend((0..group.len()).map(|_| group[rng.random_range(0..group.len())]));
        }
        let mut drawn = vec![false; n];
        for &i in &train {
            drawn[i] = true;
        }
        let oob: Vec<usize> = (0..n).filter(|&i| !drawn[i]).collect();
        if !oob.is_empty() {
            return Ok(BootstrapSplit {
                run_id: 0,
                train_indices: train,
                oob_indices: oob,
            });
        }
    }
    Err(Error::EmptyOutOfBag {
        attempts: MAX_OOB_RETRIES + 1,
    })
}

impl BootstrapSplit {
    pub fn unique_train(&self) -> BTreeSet<usize> {
        self.train_indices.iter().copied().collect()
    }
}

/// Zero-inflated Gaussian design: `s` class-dependent signal features
/// followed by `d - s` noise features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub n: usize,
    pub d: usize,
    pub s: usize,
    pub sigma_signal: f64,
    pub sigma_noise: f64,
    pub pi_signal: f64,
    pub pi_noise: f64,
    /// Class-1 mean of the first signal feature.
    pub mu_max: f64,
    /// Class-1 mean of the last signal feature.
    pub mu_min: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            n: 600,
            d: 1000,
            s: 10,
            sigma_signal: 3.0,
            sigma_noise: 1.0,
            pi_signal: 0.3,
            pi_noise: 0.2,
            mu_max: 1.5,
            mu_min: 0.4,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.n == 0 || self.d == 0 || self.s == 0 {
            return bad("n, d and s must be positive".into());
        }
        if self.s > self.d {
            return bad(format!("s = {} exceeds d = {}", self.s, self.d));
        }
        if !(self.sigma_signal > 0.0 && self.sigma_noise > 0.0)
            || !self.sigma_signal.is_finite()
            || !self.sigma_noise.is_finite()
        {
            return bad("standard deviations must be positive and finite".into());
        }
        for (name, p) in [("pi_signal", self.pi_signal), ("pi_noise", self.pi_noise)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        if !self.mu_max.is_finite() || !self.mu_min.is_finite() {
            return bad("signal means must be finite".into());
        }
        Ok(())
    }

    /// Class-1 nonzero-component means of the signal features, evenly
    /// spaced from `mu_max` down to `mu_min`. Class 0 uses the negatives.
    pub fn signal_means(&self) -> Vec<f64> {
        if self.s == 1 {
            return vec![self.mu_max];
        }
        let step = (self.mu_max - self.mu_min) / (self.s - 1) as f64;
        (0..self.s).map(|j| self.mu_max - j as f64 * step).collect()
    }
}

/// Draws a binary classification dataset from the zero-inflated Gaussian
/// design. Columns are named `x1..xd`, the target `y`.
pub fn simulate_zig(cfg: &SimulationConfig, seed: u64) -> Result<Dataset> {
    cfg.validate()?;
    let means = cfg.signal_means();
    let mut rng = rng_from_seed(seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut features = Vec::with_capacity(cfg.n * cfg.d);
    let mut target = Vec::with_capacity(cfg.n);
    for _ in 0..cfg.n {
        let y = rng.random_bool(0.5);
        target.push(if y { 1.0 } else { 0.0 });
        for j in 0..cfg.d {
            let (pi, mu, sigma) = if let Some(&m) = means.get(j) {
                let mu = if y { m } else { -m };
                (cfg.pi_signal, mu, cfg.sigma_signal)
            } else {
                (cfg.pi_noise, 0.0, cfg.sigma_noise)
            };
            let zero = rng.random::<f64>() < pi;
            let value = if zero {
                0.0
            } else {
                mu + sigma * std_normal.sample(&mut rng)
            };
            features.push(value);
        }
    }
    let names = (1..=cfg.d).map(|j| format!("x{j}")).collect();
    Dataset::new(features, target, names, "y", Task::BinaryClassification)
}
