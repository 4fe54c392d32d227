//! Moment identities of the zero-inflated aggregate and diagnostics for
//! its Gaussian approximation.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Observations out of bag in fewer runs than this are left out of the
/// per-observation moment estimates.
pub const MIN_RUNS_PER_OBSERVATION: usize = 8;

/// Above this largest variance share a Gaussian summary is not recommended.
pub const DEFAULT_DOMINANCE_THRESHOLD: f64 = 0.5;

/// Mean and variance of `U = sum_i (1 - B_i) H_i` with independent terms,
/// `B_i ~ Bernoulli(w_i)` independent of `H_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroInflatedMoments {
    pub mu: f64,
    pub s2: f64,
    pub w: Vec<f64>,
    pub eh: Vec<f64>,
    pub vh: Vec<f64>,
}

impl ZeroInflatedMoments {
    pub fn sd(&self) -> f64 {
        self.s2.sqrt()
    }
}

/// `mu = sum (1 - w) E[H]`,
/// `s2 = sum (1 - w) Var[H] + sum w (1 - w) E[H]^2`.
pub fn zero_inflated_moments(w: &[f64], eh: &[f64], vh: &[f64]) -> Result<ZeroInflatedMoments> {
    if w.len() != eh.len() || w.len() != vh.len() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            got: if eh.len() != w.len() { eh.len() } else { vh.len() },
        });
    }
    if let Some(bad) = w.iter().find(|w| !(0.0..=1.0).contains(*w)) {
        return Err(Error::InvalidArgument(format!("zero probability {bad} outside [0, 1]")));
    }
    if let Some(bad) = vh.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::InvalidArgument(format!("negative variance {bad}")));
    }
    let mut mu = 0.0;
    let mut within = 0.0;
    let mut between = 0.0;
    for ((&w, &e), &v) in w.iter().zip(eh).zip(vh) {
        mu += (1.0 - w) * e;
        within += (1.0 - w) * v;
        between += w * (1.0 - w) * e * e;
    }
    Ok(ZeroInflatedMoments {
        mu,
        s2: within + between,
        w: w.to_vec(),
        eh: eh.to_vec(),
        vh: vh.to_vec(),
    })
}

/// Plug-in estimates from per-observation bootstrap samples of `|T_ij|`:
/// the zero rate, and the mean and (population) variance of the nonzero
/// part. Observations with no samples are skipped.
pub fn moments_from_samples(per_observation: &[Vec<f64>]) -> Result<ZeroInflatedMoments> {
    let mut w = Vec::new();
    let mut eh = Vec::new();
    let mut vh = Vec::new();
    for samples in per_observation.iter().filter(|s| !s.is_empty()) {
        let nonzero: Vec<f64> = samples.iter().copied().filter(|&a| a > 0.0).collect();
        w.push((samples.len() - nonzero.len()) as f64 / samples.len() as f64);
        if nonzero.is_empty() {
            eh.push(0.0);
            vh.push(0.0);
        } else {
            let m = nonzero.len() as f64;
            let mean = nonzero.iter().sum::<f64>() / m;
            eh.push(mean);
            vh.push(nonzero.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / m);
        }
    }
    if w.is_empty() {
        return Err(Error::Insufficient("no per-observation samples".into()));
    }
    zero_inflated_moments(&w, &eh, &vh)
}

/// Third-moment Lyapunov ratio and the largest single-observation share of
/// the total variance. Both shrink toward 0 when many comparable terms
/// drive the aggregate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovDiagnostic {
    /// `sum_i E|X_i - E X_i|^3 / s^3` with `s^2 = sum_i Var X_i`.
    pub ratio: f64,
    /// `max_i Var X_i / s^2`.
    pub max_var_share: f64,
    pub observations: usize,
}

impl LyapunovDiagnostic {
    pub fn gaussian_recommended(&self, dominance_threshold: f64) -> bool {
        self.max_var_share <= dominance_threshold
    }
}

pub fn lyapunov_diagnostic(per_observation: &[Vec<f64>]) -> Result<LyapunovDiagnostic> {
    let mut third = 0.0;
    let mut total_var = 0.0;
    let mut max_var: f64 = 0.0;
    let mut observations = 0;
    for samples in per_observation
        .iter()
        .filter(|s| s.len() >= MIN_RUNS_PER_OBSERVATION)
    {
        let m = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / m;
        let mut var = 0.0;
        let mut abs3 = 0.0;
        for a in samples {
            let d = (a - mean).abs();
            var += d * d;
            abs3 += d * d * d;
        }
        var /= m;
        third += abs3 / m;
        total_var += var;
        max_var = max_var.max(var);
        observations += 1;
    }
    if observations == 0 {
        return Err(Error::Insufficient(format!(
            "no observation has at least {MIN_RUNS_PER_OBSERVATION} bootstrap samples"
        )));
    }
    if !(total_var > 0.0) {
        return Err(Error::Degenerate("per-observation variances are all zero".into()));
    }
    Ok(LyapunovDiagnostic {
        ratio: third / total_var.powf(1.5),
        max_var_share: max_var / total_var,
        observations,
    })
}

/// Kolmogorov-Smirnov distance between the empirical CDF of `values` and
/// the standard normal CDF.
pub fn kolmogorov_distance_normal(values: &[f64]) -> f64 {
    let normal = Normal::standard();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &z)| {
            let f = normal.cdf(z);
            ((i + 1) as f64 / m - f).max(f - i as f64 / m)
        })
        .fold(0.0, f64::max)
}
