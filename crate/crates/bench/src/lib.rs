//! Shared fixtures for the benchmarks.

use roshap::dataset::simulate_zig;
use roshap::{fit_gbdt, Dataset, GbdtParams, SimulationConfig, TreeEnsemble};

/// Simulated classification data with `n` rows and `d` features.
pub fn dataset(n: usize, d: usize) -> Dataset {
    let cfg = SimulationConfig {
        n,
        d,
        s: d.min(10),
        ..SimulationConfig::default()
    };
    simulate_zig(&cfg, 42).expect("valid benchmark design")
}

pub fn params(num_rounds: usize, max_depth: usize) -> GbdtParams {
    GbdtParams {
        num_rounds,
        max_depth,
        ..GbdtParams::default()
    }
}

pub fn model(ds: &Dataset, num_rounds: usize, max_depth: usize) -> TreeEnsemble {
    fit_gbdt(ds, &params(num_rounds, max_depth), 0).expect("benchmark fit")
}
