use std::collections::BTreeSet;

use proptest::prelude::*;
use roshap::dataset::{bootstrap_resample, simulate_zig, SimulationConfig};
use roshap::seed::derive_run_seed;
use roshap::{Dataset, Task};

fn rows(n: usize) -> Dataset {
    let x = (0..n).map(|i| i as f64).collect();
    let y = (0..n).map(|i| (i % 2) as f64).collect();
    Dataset::new(x, y, vec!["x1".into()], "y", Task::BinaryClassification).unwrap()
}

#[test]
fn out_of_bag_fraction_near_one_over_e() {
    let ds = rows(600);
    let mean = (0..100u64)
        .map(|seed| bootstrap_resample(&ds, derive_run_seed(2024, seed + 1)).unwrap().oob_indices.len() as f64 / 600.0)
        .sum::<f64>()
        / 100.0;
    assert!((0.353..=0.383).contains(&mean), "{mean}");
}

#[test]
fn ten_resamples_cover_almost_every_row() {
    let ds = rows(600);
    let mut covered = 0usize;
    for master in 0..50u64 {
        let mut seen = vec![false; 600];
        for b in 1..=10 {
            for i in bootstrap_resample(&ds, derive_run_seed(master, b)).unwrap().train_indices {
                seen[i] = true;
            }
        }
        covered += seen.iter().filter(|&&s| s).count();
    }
    let fraction = covered as f64 / (50.0 * 600.0);
    assert!(fraction > 0.9999, "{fraction}");
}

proptest! {
    #[test]
    fn bootstrap_partitions_rows(n in 2usize..300, master in any::<u64>(), b in 1u64..1000) {
        let ds = rows(n);
        let seed = derive_run_seed(master, b);
        let split = bootstrap_resample(&ds, seed).unwrap();
        prop_assert_eq!(split.train_indices.len(), n);
        prop_assert!(split.train_indices.iter().all(|&i| i < n));
        let unique = split.unique_train();
        let oob: BTreeSet<usize> = split.oob_indices.iter().copied().collect();
        prop_assert!(!oob.is_empty());
        prop_assert!(unique.is_disjoint(&oob));
        prop_assert_eq!(unique.len() + oob.len(), n);
        prop_assert_eq!(bootstrap_resample(&ds, seed).unwrap(), split);
    }
}

fn nonzero_stats(values: impl Iterator<Item = f64>) -> (f64, f64, usize) {
    let v: Vec<f64> = values.filter(|&x| x != 0.0).collect();
    let m = v.len() as f64;
    let mean = v.iter().sum::<f64>() / m;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0);
    (mean, var, v.len())
}

fn zero_fraction(ds: &Dataset, j: usize) -> f64 {
    ds.column(j).iter().filter(|&&v| v == 0.0).count() as f64 / ds.n_rows() as f64
}

#[test]
fn simulated_moments_match_generator() {
    let cfg = SimulationConfig::default();
    let ds = simulate_zig(&cfg, 42).unwrap();
    assert_eq!((ds.n_rows(), ds.n_features()), (600, 1000));
    for j in 0..10 {
        let z = zero_fraction(&ds, j);
        assert!((0.25..=0.35).contains(&z), "signal x{} zero fraction {z}", j + 1);
    }

    // Each noise column's zero count is Binomial(600, 0.2); the band
    // [0.15, 0.25] holds about 3.06 sd, so roughly 2 of 990 columns are
    // expected outside it. Check that count and the pooled rate instead.
    let outside = (10..1000)
        .filter(|&j| !(0.15..=0.25).contains(&zero_fraction(&ds, j)))
        .count();
    assert!(outside <= 8, "{outside} noise columns outside [0.15, 0.25]");
    let pooled = (10..1000).map(|j| zero_fraction(&ds, j)).sum::<f64>() / 990.0;
    let se = (0.2f64 * 0.8 / (600.0 * 990.0)).sqrt();
    assert!((pooled - 0.2).abs() <= 4.0 * se, "{pooled}");

    let x1 = ds.column(0);
    let (mean1, _, _) = nonzero_stats(x1.iter().zip(ds.target()).filter(|(_, &y)| y == 1.0).map(|(&v, _)| v));
    let tol = 3.0 * (3.0 / (0.7f64 * 300.0).sqrt());
    assert!((mean1 - 1.5).abs() <= tol, "{mean1}");
}

#[test]
#[ignore = "known failure: with 990 noise columns a correct generator puts ~2 outside the band"]
fn every_noise_column_within_band() {
    let ds = simulate_zig(&SimulationConfig::default(), 42).unwrap();
    let out: Vec<(usize, f64)> = (10..1000)
        .map(|j| (j, zero_fraction(&ds, j)))
        .filter(|(_, z)| !(0.15..=0.25).contains(z))
        .collect();
    assert!(out.is_empty(), "{out:?}");
}

#[test]
fn class_means_are_mirror_images() {
    let ds = simulate_zig(&SimulationConfig::default(), 7).unwrap();
    for j in 0..10 {
        let col = ds.column(j);
        let by_class = |c: f64| nonzero_stats(col.iter().zip(ds.target()).filter(|(_, &y)| y == c).map(|(&v, _)| v));
        let (m1, v1, n1) = by_class(1.0);
        let (m0, v0, n0) = by_class(0.0);
        let se = (v1 / n1 as f64 + v0 / n0 as f64).sqrt();
        assert!((m1 + m0).abs() <= 4.0 * se, "x{}: {m1} vs {m0}", j + 1);
    }
}

#[test]
fn simulation_is_reproducible() {
    let cfg = SimulationConfig {
        n: 50,
        d: 20,
        ..SimulationConfig::default()
    };
    let mut a = Vec::new();
    let mut b = Vec::new();
    simulate_zig(&cfg, 3).unwrap().write_csv(&mut a).unwrap();
    simulate_zig(&cfg, 3).unwrap().write_csv(&mut b).unwrap();
    assert_eq!(a, b);
    let mut c = Vec::new();
    simulate_zig(&cfg, 4).unwrap().write_csv(&mut c).unwrap();
    assert_ne!(a, c);
}
