//! `roshap`: simulate data, run bootstrap attribution, rank features,
//! inspect distribution diagnostics and benchmark top-k selection.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric or
//! degeneracy error.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use roshap::{ErrorKind, GbdtParams, Task};

#[derive(Debug, Parser)]
#[command(name = "roshap", version, about = "Bootstrap SHAP distributions and robust feature ranking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a zero-inflated Gaussian classification dataset.
    Simulate(SimulateArgs),
    /// Bootstrap attribution: per-run aggregate |SHAP| of every feature.
    Attribute(AttributeArgs),
    /// Rank features by RoSHAP or by a baseline importance.
    Rank(RankArgs),
    /// Distribution diagnostics for one feature.
    Diagnose(DiagnoseArgs),
    /// Top-k refit benchmark across ranking methods.
    SelectEval(SelectEvalArgs),
    /// Re-run the command recorded in a manifest.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
    },
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// TOML file with SimulationConfig keys; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    sigma_signal: Option<f64>,
    #[arg(long)]
    sigma_noise: Option<f64>,
    #[arg(long)]
    pi_signal: Option<f64>,
    #[arg(long)]
    pi_noise: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    mu_max: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    mu_min: Option<f64>,
}

#[derive(Debug, Args, Clone)]
struct DataArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "y")]
    target: String,
    #[arg(long, default_value = "binary-classification")]
    task: Task,
    /// Replace feature value OLD by NEW on load (repeatable).
    #[arg(long, value_name = "OLD=NEW", allow_hyphen_values = true)]
    recode: Vec<String>,
}

/// Model parameters: a TOML file of GbdtParams keys, overridden by flags.
#[derive(Debug, Args, Clone)]
struct ParamArgs {
    #[arg(long)]
    params_file: Option<PathBuf>,
    #[arg(long)]
    num_rounds: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    lambda_l2: Option<f64>,
    #[arg(long)]
    min_child_weight: Option<f64>,
    #[arg(long)]
    min_gain: Option<f64>,
}

#[derive(Debug, Args)]
struct AttributeArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// Number of bootstrap runs B.
    #[arg(long, default_value_t = 100)]
    runs: usize,
    #[arg(long)]
    seed: u64,
    /// Worker threads (0: one per core). Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Keep per-observation |SHAP| for diagnostics: all features, or a
    /// comma-separated list of feature names.
    #[arg(long, value_name = "FEATURES", num_args = 0..=1, default_missing_value = "all")]
    keep_samples: Option<String>,
    /// Resample within each class.
    #[arg(long)]
    stratified_bootstrap: bool,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct RankArgs {
    #[arg(long, default_value = "roshap")]
    method: roshap::Method,
    /// U dump from `attribute` (needed for roshap).
    #[arg(long)]
    udump: Option<PathBuf>,
    /// Per-sample dump from `attribute --keep-samples`.
    #[arg(long)]
    samples: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Write a distribution SVG for these features (comma-separated names).
    #[arg(long, value_delimiter = ',')]
    svg_features: Vec<String>,
    #[arg(long)]
    svg_dir: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value = "y")]
    target: String,
    #[arg(long, default_value = "binary-classification")]
    task: Task,
    #[arg(long, value_name = "OLD=NEW", allow_hyphen_values = true)]
    recode: Vec<String>,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 0.3)]
    test_fraction: f64,
    /// Equal-frequency bins for information gain.
    #[arg(long, default_value_t = roshap::baselines::DEFAULT_IG_BINS)]
    bins: usize,
}

#[derive(Debug, Args)]
struct DiagnoseArgs {
    #[arg(long)]
    udump: PathBuf,
    #[arg(long)]
    samples: Option<PathBuf>,
    /// Feature name, or its 1-based column position.
    #[arg(long)]
    feature: String,
    /// Flag the Gaussian summary when one observation holds more than this
    /// share of the variance.
    #[arg(long, default_value_t = roshap::attribution::DEFAULT_DOMINANCE_THRESHOLD)]
    dominance_threshold: f64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct SelectEvalArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// Master seed: fixes the shared split and the single-run baselines.
    #[arg(long)]
    seed: u64,
    /// U dump from `attribute`, required for the roshap method.
    #[arg(long)]
    udump: Option<PathBuf>,
    /// k values, e.g. `1-15` or `1,5,10`.
    #[arg(long, default_value = "1-15")]
    k_list: String,
    #[arg(long, value_delimiter = ',', default_value = "roshap,single_shap,gain,info_gain")]
    methods: Vec<roshap::Method>,
    #[arg(long, default_value_t = 0.3)]
    test_fraction: f64,
    #[arg(long, default_value_t = roshap::baselines::DEFAULT_IG_BINS)]
    bins: usize,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

impl ParamArgs {
    fn resolve(&self) -> anyhow::Result<GbdtParams> {
        let mut p: GbdtParams = match &self.params_file {
            Some(path) => commands::read_toml(path)?,
            None => GbdtParams::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => {$( if let Some(v) = self.$f { p.$f = v; } )*};
        }
        set!(num_rounds, max_depth, learning_rate, lambda_l2, min_child_weight, min_gain);
        p.validate()?;
        Ok(p)
    }
}

/// Error for malformed flags or config that clap cannot catch.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<roshap::Error>() {
            return match e.kind() {
                ErrorKind::Usage => 2,
                ErrorKind::Data => 3,
                ErrorKind::Numeric => 4,
            };
        }
        if cause.is::<UsageError>() || cause.is::<toml::de::Error>() {
            return 2;
        }
        if cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() {
            return 3;
        }
    }
    1
}

fn dispatch(cli: Cli, argv: &[String]) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate(a) => commands::simulate(a, argv),
        Command::Attribute(a) => commands::attribute(a, argv),
        Command::Rank(a) => commands::rank(a, argv),
        Command::Diagnose(a) => commands::diagnose(a, argv),
        Command::SelectEval(a) => commands::select_eval(a, argv),
        Command::Rerun { manifest } => {
            let m = manifest::RunManifest::read(&manifest)?;
            let mut full = vec!["roshap".to_string()];
            full.extend(m.argv.iter().cloned());
            let cli = Cli::try_parse_from(&full).map_err(|e| UsageError(e.to_string()))?;
            if matches!(cli.command, Command::Rerun { .. }) {
                return Err(UsageError("a manifest cannot replay another rerun".into()).into());
            }
            dispatch(cli, &m.argv)
        }
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // Library errors already embed their source in the message.
            let mut msg = e.to_string();
            for cause in e.chain().skip(1) {
                let c = cause.to_string();
                if !msg.contains(&c) {
                    msg = format!("{msg}: {c}");
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(exit_code(&e))
        }
    }
}
