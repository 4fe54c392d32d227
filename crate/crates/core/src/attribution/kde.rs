use serde::Serialize;

use crate::error::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Gaussian kernel density estimate over the nonzero part of a sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Kde {
    samples: Vec<f64>,
    bandwidth: f64,
}

impl Kde {
    /// Fits with the Silverman bandwidth. Needs at least two distinct values;
    /// a constant sample is a point mass and has no density.
    pub fn fit(samples: &[f64]) -> Result<Self> {
        let bandwidth = silverman_bandwidth(samples)?;
        Ok(Self {
            samples: samples.to_vec(),
            bandwidth,
        })
    }

    pub fn with_bandwidth(samples: &[f64], bandwidth: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Insufficient("no samples for density estimate".into()));
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {bandwidth}")));
        }
        Ok(Self {
            samples: samples.to_vec(),
            bandwidth,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn density(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let sum: f64 = self
            .samples
            .iter()
            .map(|s| {
                let z = (x - s) / h;
                (-0.5 * z * z).exp()
            })
            .sum();
        sum * INV_SQRT_2PI / (h * self.samples.len() as f64)
    }

    pub fn evaluate(&self, grid: &[f64]) -> Vec<f64> {
        grid.iter().map(|&x| self.density(x)).collect()
    }
}

/// Type-7 (linear interpolation) quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `0.9 * min(sd, IQR / 1.34) * m^(-1/5)`, floored at `1e-9 * (max - min)`.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (Some(&min), Some(&max)) = (sorted.first(), sorted.last()) else {
        return Err(Error::Insufficient("no samples for density estimate".into()));
    };
    if min == max {
        return Err(Error::Degenerate(format!(
            "all {} samples equal {min}; the distribution is a point mass",
            sorted.len()
        )));
    }
    let m = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / m;
    let sd = (sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0)).sqrt();
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let h = 0.9 * sd.min(iqr / 1.34) * m.powf(-0.2);
    Ok(h.max(1e-9 * (max - min)))
}

pub fn kde_density(samples: &[f64], grid: &[f64]) -> Result<Vec<f64>> {
    Ok(Kde::fit(samples)?.evaluate(grid))
}
