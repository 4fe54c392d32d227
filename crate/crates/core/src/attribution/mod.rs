//! Bootstrap estimation of per-feature attribution distributions.
//!
//! Each run resamples the rows, refits the ensemble, explains every
//! out-of-bag row with TreeSHAP and aggregates `U_j = (n / |oob|) * sum |phi_ij|`.
//! Runs are independent and seeded from `(master_seed, run_id)` alone, so the
//! result does not depend on how many workers execute them.

mod kde;
mod moments;
mod summary;

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{bootstrap_resample_with, Dataset};
use crate::error::{Error, Result};
use crate::seed::derive_run_seed;
use crate::trees::{fit_gbdt_weighted, GbdtParams};
use crate::treeshap::tree_shap;

pub use kde::{kde_density, silverman_bandwidth, Kde};
pub use moments::{
    kolmogorov_distance_normal, lyapunov_diagnostic, moments_from_samples, zero_inflated_moments,
    LyapunovDiagnostic, ZeroInflatedMoments, DEFAULT_DOMINANCE_THRESHOLD, MIN_RUNS_PER_OBSERVATION,
};
pub use summary::{
    rank_features, roshap_score, summarize_feature, summarize_runs, FeatureDistributionSummary,
    RankingRow, RankingTable, MIN_NONZERO_FOR_MOMENTS,
};

/// Absolute attributions at or below this are treated as exact zeros.
pub const ZERO_SNAP: f64 = 1e-12;

/// Which per-observation absolute attributions to keep for diagnostics.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleRetention {
    #[default]
    None,
    Features(Vec<usize>),
    All,
}

impl SampleRetention {
    fn features(&self, p: usize) -> Vec<usize> {
        match self {
            SampleRetention::None => Vec::new(),
            SampleRetention::Features(f) => f.clone(),
            SampleRetention::All => (0..p).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    pub params: GbdtParams,
    pub runs: usize,
    pub master_seed: u64,
    /// Worker threads; `0` uses rayon's default.
    pub workers: usize,
    pub retain: SampleRetention,
    pub stratified_bootstrap: bool,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            params: GbdtParams::default(),
            runs: 100,
            master_seed: 0,
            workers: 0,
            retain: SampleRetention::None,
            stratified_bootstrap: false,
        }
    }
}

/// Absolute OOB attributions of the retained features in one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub oob_rows: Vec<usize>,
    pub features: Vec<usize>,
    /// `abs[k][m]` is `|phi|` of feature `features[k]` at row `oob_rows[m]`,
    /// after zero snapping.
    pub abs: Vec<Vec<f64>>,
}

/// Output of one bootstrap run.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributionRun {
    pub run_id: u64,
    pub oob_size: usize,
    /// Rescaled aggregate magnitude per feature (margin units).
    pub u: Vec<f64>,
    pub zero_flag: Vec<bool>,
    pub samples: Option<SampleRecord>,
}

impl AttributionRun {
    /// Raw out-of-bag sums, before the `n / |oob|` rescaling.
    pub fn raw_sums(&self, n_rows: usize) -> Vec<f64> {
        let back = self.oob_size as f64 / n_rows as f64;
        self.u.iter().map(|u| u * back).collect()
    }
}

/// Runs the full bootstrap attribution procedure.
pub fn run_bootstrap_attribution(ds: &Dataset, cfg: &BootstrapConfig) -> Result<Vec<AttributionRun>> {
    if cfg.runs == 0 {
        return Err(Error::InvalidArgument("number of bootstrap runs must be at least 1".into()));
    }
    cfg.params.validate()?;
    let retained = cfg.retain.features(ds.n_features());
    if let Some(&bad) = retained.iter().find(|&&j| j >= ds.n_features()) {
        return Err(Error::InvalidArgument(format!(
            "retained feature {bad} out of range"
        )));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot build worker pool: {e}")))?;
    pool.install(|| {
        (1..=cfg.runs as u64)
            .into_par_iter()
            .map(|b| {
                single_run(ds, cfg, b, &retained).map_err(|e| Error::Run {
                    run_id: b,
                    source: Box::new(e),
                })
            })
            .collect()
    })
}

/// Bootstrap run `run_id` in isolation.
pub fn single_run(
    ds: &Dataset,
    cfg: &BootstrapConfig,
    run_id: u64,
    retained: &[usize],
) -> Result<AttributionRun> {
    let seed = derive_run_seed(cfg.master_seed, run_id);
    let mut split = bootstrap_resample_with(ds, seed, cfg.stratified_bootstrap)?;
    split.run_id = run_id;
    let mut weights = vec![0.0; ds.n_rows()];
    for &i in &split.train_indices {
        weights[i] += 1.0;
    }
    let (ensemble, _) = fit_gbdt_weighted(ds, &weights, &cfg.params, false)?;

    let p = ds.n_features();
    let mut raw = vec![0.0; p];
    let mut abs: Vec<Vec<f64>> = vec![Vec::with_capacity(split.oob_indices.len()); retained.len()];
    for &i in &split.oob_indices {
        let attribution = tree_shap(&ensemble, ds.row(i))?;
        for (acc, phi) in raw.iter_mut().zip(&attribution.phi) {
            *acc += snap(phi.abs());
        }
        for (col, &j) in abs.iter_mut().zip(retained) {
            col.push(snap(attribution.phi[j].abs()));
        }
    }
    let scale = ds.n_rows() as f64 / split.oob_indices.len() as f64;
    let u: Vec<f64> = raw.iter().map(|r| r * scale).collect();
    let zero_flag = u.iter().map(|&v| v == 0.0).collect();
    let samples = (!retained.is_empty()).then(|| SampleRecord {
        oob_rows: split.oob_indices.clone(),
        features: retained.to_vec(),
        abs,
    });
    Ok(AttributionRun {
        run_id,
        oob_size: split.oob_indices.len(),
        u,
        zero_flag,
        samples,
    })
}

pub(crate) fn snap(a: f64) -> f64 {
    if a <= ZERO_SNAP {
        0.0
    } else {
        a
    }
}

/// The `B` values of `U_j` for one feature, in run order.
pub fn feature_values(runs: &[AttributionRun], feature: usize) -> Vec<f64> {
    runs.iter().map(|r| r.u[feature]).collect()
}

/// Per-observation absolute attributions of `feature` across the runs in
/// which the observation was out of bag. Indexed by row; rows never out of
/// bag get an empty vector. `None` when the feature was not retained.
pub fn per_observation_samples(
    runs: &[AttributionRun],
    feature: usize,
    n_rows: usize,
) -> Option<Vec<Vec<f64>>> {
    let mut out = vec![Vec::new(); n_rows];
    for run in runs {
        let rec = run.samples.as_ref()?;
        let k = rec.features.iter().position(|&f| f == feature)?;
        for (&row, &a) in rec.oob_rows.iter().zip(&rec.abs[k]) {
            out[row].push(a);
        }
    }
    Some(out)
}

/// Writes the `B x p` matrix of `U` values: `run_id, oob_size, <features...>`.
pub fn write_u_dump<W: Write>(writer: W, runs: &[AttributionRun], feature_names: &[String]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(
        ["run_id", "oob_size"]
            .into_iter()
            .chain(feature_names.iter().map(String::as_str)),
    )?;
    let mut record = Vec::with_capacity(feature_names.len() + 2);
    for run in runs {
        record.clear();
        record.push(run.run_id.to_string());
        record.push(run.oob_size.to_string());
        record.extend(run.u.iter().map(|u| u.to_string()));
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io("<u dump>", e))?;
    Ok(())
}

/// Parsed `U` dump: feature names and runs (without per-sample records).
pub fn read_u_dump<R: Read>(reader: R) -> Result<(Vec<String>, Vec<AttributionRun>)> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.len() < 3 || &header[0] != "run_id" || &header[1] != "oob_size" {
        return Err(Error::InvalidDataset(
            "U dump must start with run_id,oob_size columns".into(),
        ));
    }
    let names: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
    let mut runs = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let cell = |k: usize| -> Result<f64> {
            let v: f64 = record[k].parse().map_err(|_| Error::NonNumeric {
                row: r + 1,
                column: header[k].to_string(),
                value: record[k].to_string(),
            })?;
            if !v.is_finite() || v < 0.0 {
                return Err(Error::NonFinite {
                    row: r + 1,
                    column: header[k].to_string(),
                    value: record[k].to_string(),
                });
            }
            Ok(v)
        };
        let run_id = cell(0)? as u64;
        let oob_size = cell(1)? as usize;
        let u = (2..record.len()).map(cell).collect::<Result<Vec<f64>>>()?;
        runs.push(AttributionRun {
            run_id,
            oob_size,
            zero_flag: u.iter().map(|&v| v == 0.0).collect(),
            u,
            samples: None,
        });
    }
    Ok((names, runs))
}

/// Long-format per-sample dump: `run_id, row, feature, abs_phi`, including
/// exact zeros so out-of-bag membership is recoverable.
pub fn write_sample_dump<W: Write>(writer: W, runs: &[AttributionRun]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["run_id", "row", "feature", "abs_phi"])?;
    for run in runs {
        let Some(rec) = &run.samples else { continue };
        let id = run.run_id.to_string();
        for (k, &feature) in rec.features.iter().enumerate() {
            let f = feature.to_string();
            for (&row, a) in rec.oob_rows.iter().zip(&rec.abs[k]) {
                w.write_record([id.as_str(), &row.to_string(), &f, &a.to_string()])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("<sample dump>", e))?;
    Ok(())
}

/// Reads a per-sample dump back into per-observation sample lists for one
/// feature (see [`per_observation_samples`]).
pub fn read_sample_dump<R: Read>(reader: R, feature: usize, n_rows: usize) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = vec![Vec::new(); n_rows];
    let mut found = false;
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let parse = |k: usize| -> Result<f64> {
            record[k].parse().map_err(|_| Error::NonNumeric {
                row: r + 1,
                column: ["run_id", "row", "feature", "abs_phi"][k].into(),
                value: record[k].to_string(),
            })
        };
        if parse(2)? as usize != feature {
            continue;
        }
        let row = parse(1)? as usize;
        if row >= n_rows {
            return Err(Error::InvalidDataset(format!("sample dump row {row} out of range")));
        }
        found = true;
        out[row].push(parse(3)?);
    }
    if !found {
        return Err(Error::Insufficient(format!(
            "no per-sample attributions recorded for feature {feature}"
        )));
    }
    Ok(out)
}

/// Reads a full per-sample dump and attaches the records to `runs` (matched
/// by `run_id`). Returns one more than the largest row index seen.
pub fn attach_sample_dump<R: Read>(reader: R, runs: &mut [AttributionRun]) -> Result<usize> {
    use std::collections::BTreeMap;

    let mut rdr = csv::Reader::from_reader(reader);
    // run_id -> feature -> (rows, values)
    type Columns = BTreeMap<usize, (Vec<usize>, Vec<f64>)>;
    let mut by_run: BTreeMap<u64, Columns> = BTreeMap::new();
    let mut n_rows = 0;
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != 4 {
            return Err(Error::InvalidDataset(format!(
                "sample dump line {} has {} fields, expected 4",
                r + 2,
                record.len()
            )));
        }
        let parse = |k: usize| -> Result<f64> {
            record[k].parse().map_err(|_| Error::NonNumeric {
                row: r + 1,
                column: ["run_id", "row", "feature", "abs_phi"][k].into(),
                value: record[k].to_string(),
            })
        };
        let (run_id, row, feature, a) = (parse(0)? as u64, parse(1)? as usize, parse(2)? as usize, parse(3)?);
        n_rows = n_rows.max(row + 1);
        let entry = by_run.entry(run_id).or_default().entry(feature).or_default();
        entry.0.push(row);
        entry.1.push(a);
    }
    for run in runs.iter_mut() {
        let Some(features) = by_run.remove(&run.run_id) else {
            continue;
        };
        let mut it = features.into_iter();
        let (first, (oob_rows, first_abs)) = it.next().expect("entry exists only with a record");
        let mut rec = SampleRecord {
            oob_rows,
            features: vec![first],
            abs: vec![first_abs],
        };
        for (feature, (rows, abs)) in it {
            if rows != rec.oob_rows {
                return Err(Error::InvalidDataset(format!(
                    "sample dump run {} lists different rows for feature {feature}",
                    run.run_id
                )));
            }
            rec.features.push(feature);
            rec.abs.push(abs);
        }
        run.samples = Some(rec);
    }
    if let Some(run_id) = by_run.keys().next() {
        return Err(Error::InvalidDataset(format!(
            "sample dump mentions run {run_id}, which is not in the U dump"
        )));
    }
    Ok(n_rows)
}
