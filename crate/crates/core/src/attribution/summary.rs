use std::cmp::Ordering;
use std::io::Write;

use crate::error::{Error, Result};

use super::kde::Kde;
use super::moments::{lyapunov_diagnostic, LyapunovDiagnostic};
use super::{feature_values, per_observation_samples, AttributionRun};

/// Nonzero values needed before skewness, kurtosis and the normality
/// statistic are reported.
pub const MIN_NONZERO_FOR_MOMENTS: usize = 8;

/// Distribution summary of one feature's `B` bootstrap values of `U_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDistributionSummary {
    pub feature: usize,
    pub runs: usize,
    /// Fraction of runs with `U_j == 0`.
    pub p_zero: f64,
    /// Median of the strictly positive values; `0` when there are none.
    pub median_nonzero: f64,
    /// Sample standard deviation over all values, zeros included.
    pub sd_all: f64,
    pub mean_all: f64,
    pub skewness: Option<f64>,
    pub excess_kurtosis: Option<f64>,
    /// Jarque-Bera statistic of the nonzero values.
    pub normality_stat: Option<f64>,
    pub lyapunov: Option<LyapunovDiagnostic>,
    pub kde: Option<Kde>,
}

impl FeatureDistributionSummary {
    pub fn roshap(&self) -> f64 {
        roshap_score(self)
    }

    pub fn nonzero_count(&self) -> usize {
        self.runs - (self.p_zero * self.runs as f64).round() as usize
    }
}

pub fn summarize_feature(feature: usize, values: &[f64]) -> Result<FeatureDistributionSummary> {
    if values.is_empty() {
        return Err(Error::Insufficient("no bootstrap values to summarize".into()));
    }
    let b = values.len();
    let zeros = values.iter().filter(|&&v| v == 0.0).count();
    let mut nonzero: Vec<f64> = values.iter().copied().filter(|&v| v > 0.0).collect();
    nonzero.sort_by(f64::total_cmp);
    let median_nonzero = median_sorted(&nonzero);
    let mean_all = values.iter().sum::<f64>() / b as f64;
    let sd_all = if b >= 2 {
        let ss: f64 = values.iter().map(|v| (v - mean_all) * (v - mean_all)).sum();
        (ss / (b - 1) as f64).sqrt()
    } else {
        0.0
    };

    let (skewness, excess_kurtosis, normality_stat) = match shape_moments(&nonzero) {
        Some((s, k)) => {
            let m = nonzero.len() as f64;
            (Some(s), Some(k), Some(m / 6.0 * (s * s + k * k / 4.0)))
        }
        None => (None, None, None),
    };
    let kde = Kde::fit(&nonzero).ok();

    Ok(FeatureDistributionSummary {
        feature,
        runs: b,
        p_zero: zeros as f64 / b as f64,
        median_nonzero,
        sd_all,
        mean_all,
        skewness,
        excess_kurtosis,
        normality_stat,
        lyapunov: None,
        kde,
    })
}

fn median_sorted(sorted: &[f64]) -> f64 {
    let m = sorted.len();
    match m {
        0 => 0.0,
        _ if m % 2 == 1 => sorted[m / 2],
        _ => (sorted[m / 2 - 1] + sorted[m / 2]) / 2.0,
    }
}

/// Sample skewness and excess kurtosis (population-moment form).
fn shape_moments(values: &[f64]) -> Option<(f64, f64)> {
    if values.len() < MIN_NONZERO_FOR_MOMENTS {
        return None;
    }
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= m;
    m3 /= m;
    m4 /= m;
    if !(m2 > 0.0) {
        return None;
    }
    Some((m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0))
}

/// `(1 - P0) * m^2 / s`, with `s` floored at `1e-6 * m`; zero for a feature
/// that is never active.
pub fn roshap_score(s: &FeatureDistributionSummary) -> f64 {
    if s.p_zero >= 1.0 || s.median_nonzero <= 0.0 {
        return 0.0;
    }
    let m = s.median_nonzero;
    (1.0 - s.p_zero) * m * m / s.sd_all.max(1e-6 * m)
}

/// Summaries for every feature; diagnostics are attached where per-sample
/// attributions were retained.
pub fn summarize_runs(runs: &[AttributionRun], n_rows: usize) -> Result<Vec<FeatureDistributionSummary>> {
    let p = runs
        .first()
        .map(|r| r.u.len())
        .ok_or_else(|| Error::Insufficient("no bootstrap runs".into()))?;
    (0..p)
        .map(|j| {
            let mut s = summarize_feature(j, &feature_values(runs, j))?;
            if let Some(per_obs) = per_observation_samples(runs, j, n_rows) {
                s.lyapunov = lyapunov_diagnostic(&per_obs).ok();
            }
            Ok(s)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingRow {
    pub rank: usize,
    pub feature: usize,
    pub name: String,
    pub score: f64,
    pub summary: Option<FeatureDistributionSummary>,
}

/// Features ordered by decreasing score. `method` names the score column.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingTable {
    pub method: String,
    pub rows: Vec<RankingRow>,
}

/// Orders features by RoSHAP; ties go to the lower zero rate, then the
/// larger nonzero median, then the lower feature index.
pub fn rank_features(summaries: &[FeatureDistributionSummary], names: &[String]) -> RankingTable {
    let mut order: Vec<(f64, &FeatureDistributionSummary)> =
        summaries.iter().map(|s| (roshap_score(s), s)).collect();
    order.sort_by(|(sa, a), (sb, b)| {
        sb.total_cmp(sa)
            .then(a.p_zero.total_cmp(&b.p_zero))
            .then(b.median_nonzero.total_cmp(&a.median_nonzero))
            .then(a.feature.cmp(&b.feature))
    });
    RankingTable {
        method: "roshap".into(),
        rows: order
            .into_iter()
            .enumerate()
            .map(|(k, (score, s))| RankingRow {
                rank: k + 1,
                feature: s.feature,
                name: names.get(s.feature).cloned().unwrap_or_else(|| format!("f{}", s.feature)),
                score,
                summary: Some(s.clone()),
            })
            .collect(),
    }
}

impl RankingTable {
    /// Ranks plain scores (descending, ties by lower index).
    pub fn from_scores(method: impl Into<String>, scores: &[f64], names: &[String]) -> Self {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| match scores[b].total_cmp(&scores[a]) {
            Ordering::Equal => a.cmp(&b),
            o => o,
        });
        RankingTable {
            method: method.into(),
            rows: order
                .into_iter()
                .enumerate()
                .map(|(k, j)| RankingRow {
                    rank: k + 1,
                    feature: j,
                    name: names.get(j).cloned().unwrap_or_else(|| format!("f{j}")),
                    score: scores[j],
                    summary: None,
                })
                .collect(),
        }
    }

    /// Feature indices in rank order.
    pub fn order(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.feature).collect()
    }

    /// 1-based rank of `feature`.
    pub fn rank_of(&self, feature: usize) -> Option<usize> {
        self.rows.iter().find(|r| r.feature == feature).map(|r| r.rank)
    }

    pub fn top(&self, k: usize) -> Vec<usize> {
        self.rows.iter().take(k).map(|r| r.feature).collect()
    }

    /// CSV with columns `rank, feature, <method>, p0_percent, median_nonzero,
    /// sd, mean, skewness, normality_stat, lyapunov_ratio, max_var_share`.
    /// Distribution columns are empty for methods without a bootstrap
    /// distribution.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "rank",
            "feature",
            self.method.as_str(),
            "p0_percent",
            "median_nonzero",
            "sd",
            "mean",
            "skewness",
            "normality_stat",
            "lyapunov_ratio",
            "max_var_share",
        ])?;
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for row in &self.rows {
            let mut rec = vec![row.rank.to_string(), row.name.clone(), row.score.to_string()];
            match &row.summary {
                Some(s) => rec.extend([
                    format!("{:.2}", 100.0 * s.p_zero),
                    s.median_nonzero.to_string(),
                    s.sd_all.to_string(),
                    s.mean_all.to_string(),
                    opt(s.skewness),
                    opt(s.normality_stat),
                    opt(s.lyapunov.map(|l| l.ratio)),
                    opt(s.lyapunov.map(|l| l.max_var_share)),
                ]),
                None => rec.extend(std::iter::repeat_n(String::new(), 8)),
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<ranking csv>", e))?;
        Ok(())
    }
}
