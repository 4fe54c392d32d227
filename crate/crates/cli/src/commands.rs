use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde_json::json;

use roshap::attribution::{
    attach_sample_dump, feature_values, kolmogorov_distance_normal, lyapunov_diagnostic,
    moments_from_samples, per_observation_samples, read_u_dump, summarize_feature, summarize_runs,
    write_sample_dump, write_u_dump, AttributionRun,
};
use roshap::baselines::{information_gain, single_run};
use roshap::dataset::{load_csv_with, simulate_zig, CsvOptions};
use roshap::evalharness::{evaluate_full, sweep};
use roshap::report::{distribution_svg, sweep_svg};
use roshap::{
    rank_features, run_bootstrap_attribution, BootstrapConfig, Dataset, EvalConfig, Error, Method,
    RankingTable, SampleRetention, SimulationConfig,
};

use crate::manifest::RunManifest;
use crate::{AttributeArgs, DataArgs, DiagnoseArgs, RankArgs, SelectEvalArgs, SimulateArgs, UsageError};

pub fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn parse_recode(items: &[String]) -> Result<Vec<(f64, f64)>> {
    items
        .iter()
        .map(|item| {
            let parsed = item
                .split_once('=')
                .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)));
            parsed.ok_or_else(|| UsageError(format!("--recode expects OLD=NEW with numbers, got {item:?}")).into())
        })
        .collect()
}

fn load_data(path: &Path, target: &str, task: roshap::Task, recode: &[String]) -> Result<Dataset> {
    let opts = CsvOptions {
        recode: parse_recode(recode)?,
        ..CsvOptions::new(target, task)
    };
    Ok(load_csv_with(path, &opts)?)
}

fn load(args: &DataArgs) -> Result<Dataset> {
    load_data(&args.data, &args.target, args.task, &args.recode)
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> roshap::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

fn read_udump(path: &Path) -> Result<(Vec<String>, Vec<AttributionRun>)> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let (names, runs) = read_u_dump(file).with_context(|| format!("reading {}", path.display()))?;
    if runs.is_empty() {
        return Err(Error::Insufficient(format!("{} holds no runs", path.display())).into());
    }
    Ok((names, runs))
}

/// Attaches a per-sample dump and returns the number of rows it covers.
fn attach_samples(path: &Path, runs: &mut [AttributionRun]) -> Result<usize> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    attach_sample_dump(file, runs).with_context(|| format!("reading {}", path.display()))
}

/// Accepts a feature name or a 1-based column position.
fn resolve_feature(names: &[String], key: &str) -> Result<usize> {
    if let Some(j) = names.iter().position(|n| n == key) {
        return Ok(j);
    }
    match key.parse::<usize>() {
        Ok(k) if (1..=names.len()).contains(&k) => Ok(k - 1),
        _ => Err(UsageError(format!("unknown feature {key:?}")).into()),
    }
}

fn parse_k_list(spec: &str) -> Result<Vec<usize>> {
    let bad = || UsageError(format!("--k-list expects e.g. 1-15 or 1,5,10, got {spec:?}"));
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
                if a > b {
                    return Err(bad().into());
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    Ok(out)
}

fn svg_name(feature: &str) -> String {
    feature
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

pub fn simulate(a: SimulateArgs, argv: &[String]) -> Result<()> {
    let mut cfg: SimulationConfig = match &a.config {
        Some(path) => read_toml(path)?,
        None => SimulationConfig::default(),
    };
    macro_rules! set {
        ($($f:ident),*) => {$( if let Some(v) = a.$f { cfg.$f = v; } )*};
    }
    set!(n, d, s, sigma_signal, sigma_noise, pi_signal, pi_noise, mu_max, mu_min);

    let mut m = RunManifest::new("simulate", argv);
    m.config = serde_json::to_value(&cfg)?;
    m.master_seed = Some(a.seed);
    let ds = m.time("simulate", || simulate_zig(&cfg, a.seed))?;
    let bytes = m.time("write", || csv_bytes(|b| ds.write_csv(b)))?;
    m.output(&a.out, &bytes)?;
    let mut manifest = a.out.clone().into_os_string();
    manifest.push(".manifest.json");
    m.write(Path::new(&manifest))
}

pub fn attribute(a: AttributeArgs, argv: &[String]) -> Result<()> {
    let params = a.params.resolve()?;
    let mut m = RunManifest::new("attribute", argv);
    let ds = m.time("load", || load(&a.data))?;
    let retain = match a.keep_samples.as_deref() {
        None => SampleRetention::None,
        Some("all") => SampleRetention::All,
        Some(list) => SampleRetention::Features(
            list.split(',')
                .map(|key| resolve_feature(ds.feature_names(), key.trim()))
                .collect::<Result<_>>()?,
        ),
    };
    let cfg = BootstrapConfig {
        params,
        runs: a.runs,
        master_seed: a.seed,
        workers: a.workers,
        retain,
        stratified_bootstrap: a.stratified_bootstrap,
    };
    m.config = json!({
        "data": a.data.data,
        "target": a.data.target,
        "task": a.data.task,
        "recode": a.data.recode,
        "n_rows": ds.n_rows(),
        "n_features": ds.n_features(),
        "bootstrap": cfg,
        "attribution_scale": "margin (log-odds for classification)",
        "u_definition": "U_j = (n / |oob|) * sum over out-of-bag rows of |phi_ij|",
    });
    m.master_seed = Some(a.seed);
    m.runs = Some(a.runs);

    let runs = m.time("bootstrap", || run_bootstrap_attribution(&ds, &cfg))?;
    let udump = csv_bytes(|b| write_u_dump(b, &runs, ds.feature_names()))?;
    m.output(&a.out_dir.join("u_dump.csv"), &udump)?;
    if cfg.retain != SampleRetention::None {
        let samples = csv_bytes(|b| write_sample_dump(b, &runs))?;
        m.output(&a.out_dir.join("samples.csv"), &samples)?;
    }
    m.write(&a.out_dir.join("manifest.json"))
}

pub fn rank(a: RankArgs, argv: &[String]) -> Result<()> {
    let mut m = RunManifest::new("rank", argv);
    let mut distribution: Option<(Vec<AttributionRun>, Vec<String>)> = None;
    let table: RankingTable = match a.method {
        Method::Roshap => {
            let path = a
                .udump
                .as_ref()
                .ok_or_else(|| UsageError("--method roshap needs --udump".into()))?;
            let (names, mut runs) = read_udump(path)?;
            let mut n_rows = 0;
            if let Some(samples) = &a.samples {
                n_rows = attach_samples(samples, &mut runs)?;
            }
            let summaries = m.time("summarize", || summarize_runs(&runs, n_rows))?;
            let table = rank_features(&summaries, &names);
            distribution = Some((runs, names));
            table
        }
        method => {
            let path = a
                .data
                .as_ref()
                .ok_or_else(|| UsageError(format!("--method {method} needs --data")))?;
            let ds = m.time("load", || load_data(path, &a.target, a.task, &a.recode))?;
            let scores = match method {
                Method::InfoGain => information_gain(&ds, a.bins)?,
                _ => {
                    let seed = a
                        .seed
                        .ok_or_else(|| UsageError(format!("--method {method} needs --seed")))?;
                    m.master_seed = Some(seed);
                    let params = a.params.resolve()?;
                    let run = m.time("fit", || single_run(&ds, &params, seed, a.test_fraction))?;
                    if method == Method::Gain { run.gain } else { run.shap }
                }
            };
            scores.ranking(ds.feature_names())
        }
    };
    m.config = json!({
        "method": a.method,
        "udump": a.udump,
        "samples": a.samples,
        "data": a.data,
        "test_fraction": a.test_fraction,
        "bins": a.bins,
    });

    let csv = csv_bytes(|b| table.write_csv(b))?;
    m.output(&a.out, &csv)?;
    if !a.svg_features.is_empty() {
        let Some((runs, names)) = &distribution else {
            return Err(UsageError("--svg-features needs --method roshap".into()).into());
        };
        let dir = a.svg_dir.clone().unwrap_or_else(|| a.out.parent().map(Path::to_path_buf).unwrap_or_default());
        for key in &a.svg_features {
            let j = resolve_feature(names, key)?;
            let values = feature_values(runs, j);
            let summary = summarize_feature(j, &values)?;
            let svg = distribution_svg(&names[j], &values, &summary);
            m.output(&dir.join(format!("distribution_{}.svg", svg_name(&names[j]))), svg.as_bytes())?;
        }
    }
    let mut manifest = a.out.clone().into_os_string();
    manifest.push(".manifest.json");
    m.write(Path::new(&manifest))
}

pub fn diagnose(a: DiagnoseArgs, argv: &[String]) -> Result<()> {
    let mut m = RunManifest::new("diagnose", argv);
    let (names, mut runs) = read_udump(&a.udump)?;
    let j = resolve_feature(&names, &a.feature)?;
    let name = names[j].clone();
    let values = feature_values(&runs, j);
    let summary = summarize_feature(j, &values)?;

    let unavailable = |why: &str| {
        Error::Insufficient(format!(
            "diagnostics unavailable for {name}: {why}; rerun attribute with --keep-samples"
        ))
    };
    let samples = a.samples.as_ref().ok_or_else(|| unavailable("no per-sample dump given"))?;
    let n_rows = attach_samples(samples, &mut runs)?;
    let per_obs = per_observation_samples(&runs, j, n_rows)
        .filter(|obs| obs.iter().any(|s| !s.is_empty()))
        .ok_or_else(|| unavailable("feature not retained in the per-sample dump"))?;

    // Needs observations that were out of bag in enough runs; report the
    // reason instead of failing when B is small.
    let (lyapunov, lyapunov_note) = match lyapunov_diagnostic(&per_obs) {
        Ok(l) => (Some(l), None),
        Err(e @ (Error::Insufficient(_) | Error::Degenerate(_))) => (None, Some(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    let moments = moments_from_samples(&per_obs)?;
    let nonzero: Vec<f64> = values.iter().copied().filter(|&v| v > 0.0).collect();
    let kolmogorov = (nonzero.len() >= 2).then(|| {
        let k = nonzero.len() as f64;
        let mean = nonzero.iter().sum::<f64>() / k;
        let sd = (nonzero.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0)).sqrt();
        let z: Vec<f64> = nonzero.iter().map(|v| (v - mean) / sd).collect();
        kolmogorov_distance_normal(&z)
    });

    let report = json!({
        "feature": name,
        "runs": summary.runs,
        "p_zero": summary.p_zero,
        "median_nonzero": summary.median_nonzero,
        "mean": summary.mean_all,
        "sd": summary.sd_all,
        "roshap": summary.roshap(),
        "skewness": summary.skewness,
        "excess_kurtosis": summary.excess_kurtosis,
        "jarque_bera": summary.normality_stat,
        "kolmogorov_distance": kolmogorov,
        "kde_bandwidth": summary.kde.as_ref().map(|k| k.bandwidth()),
        "lyapunov_ratio": lyapunov.map(|l| l.ratio),
        "max_var_share": lyapunov.map(|l| l.max_var_share),
        "observations": lyapunov.map(|l| l.observations),
        "lyapunov_note": lyapunov_note,
        "dominance_threshold": a.dominance_threshold,
        "gaussian_summary_recommended": lyapunov.map(|l| l.gaussian_recommended(a.dominance_threshold)),
        "per_observation": {
            "mean_zero_rate": moments.w.iter().sum::<f64>() / moments.w.len() as f64,
            "mu": moments.mu,
            "sd": moments.sd(),
        },
    });
    m.config = json!({
        "udump": a.udump,
        "samples": a.samples,
        "feature": name,
        "dominance_threshold": a.dominance_threshold,
    });
    m.runs = Some(summary.runs);

    let stem = svg_name(&name);
    let mut json = serde_json::to_vec_pretty(&report)?;
    json.push(b'\n');
    m.output(&a.out_dir.join(format!("diagnostics_{stem}.json")), &json)?;
    let svg = distribution_svg(&name, &values, &summary);
    m.output(&a.out_dir.join(format!("distribution_{stem}.svg")), svg.as_bytes())?;
    m.write(&a.out_dir.join(format!("diagnose_{stem}.manifest.json")))
}

pub fn select_eval(a: SelectEvalArgs, argv: &[String]) -> Result<()> {
    let mut m = RunManifest::new("select-eval", argv);
    let params = a.params.resolve()?;
    let ds = m.time("load", || load(&a.data))?;
    let cfg = EvalConfig {
        k_values: parse_k_list(&a.k_list)?,
        test_fraction: a.test_fraction,
        methods: a.methods.clone(),
        params: params.clone(),
        master_seed: a.seed,
        workers: a.workers,
    };

    let mut rankings = Vec::new();
    let single = if a.methods.iter().any(|x| matches!(x, Method::SingleShap | Method::Gain)) {
        Some(m.time("single_run", || single_run(&ds, &params, a.seed, a.test_fraction))?)
    } else {
        None
    };
    for method in &a.methods {
        let table = match method {
            Method::Roshap => {
                let path = a
                    .udump
                    .as_ref()
                    .ok_or_else(|| UsageError("method roshap needs --udump".into()))?;
                let (names, runs) = read_udump(path)?;
                if names != ds.feature_names() {
                    bail!(Error::InvalidDataset(format!(
                        "{} does not list the dataset's feature columns",
                        path.display()
                    )));
                }
                rank_features(&summarize_runs(&runs, 0)?, &names)
            }
            Method::InfoGain => information_gain(&ds, a.bins)?.ranking(ds.feature_names()),
            Method::SingleShap => single.as_ref().expect("fitted above").shap.ranking(ds.feature_names()),
            Method::Gain => single.as_ref().expect("fitted above").gain.ranking(ds.feature_names()),
        };
        rankings.push(table);
    }

    let full = m.time("full_model", || evaluate_full(&ds, &cfg))?;
    let result = m.time("sweep", || sweep(&ds, &rankings, &cfg))?;
    m.config = json!({
        "data": a.data.data,
        "target": a.data.target,
        "task": a.data.task,
        "recode": a.data.recode,
        "udump": a.udump,
        "bins": a.bins,
        "eval": cfg,
        "full_model": full,
        "error_bars": "standard deviation over k",
    });
    m.master_seed = Some(a.seed);

    let out: &PathBuf = &a.out_dir;
    m.output(&out.join("comparison.csv"), &csv_bytes(|b| result.write_csv(b))?)?;
    m.output(&out.join("cells.csv"), &csv_bytes(|b| result.write_cells_csv(b))?)?;
    for table in &rankings {
        m.output(&out.join(format!("ranking_{}.csv", table.method)), &csv_bytes(|b| table.write_csv(b))?)?;
    }
    for (metric, _) in full.values() {
        let svg = sweep_svg(&result, metric);
        m.output(&out.join(format!("comparison_{metric}.svg")), svg.as_bytes())?;
    }
    m.write(&out.join("manifest.json"))
}
