//! Command-line front end for `hawkes-regen`.
//!
//! Every subcommand reads the same [`config::ExperimentConfig`]: a TOML
//! file given by `--config`, then `--set key.path=value` overrides, then the
//! dedicated flags (`--seed`, `--reps`, `--out`, `--lambda`, `--A`, `--T`).
//! Later sources win. Environment variables are never read.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod commands;
pub mod config;
pub mod error;

use config::parse_override;
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "hawkes-regen", version, about = "Regeneration toolkit for linear Hawkes processes")]
#[command(allow_negative_numbers = true)]
pub struct Cli {
    /// TOML experiment config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; stream i is seeded with seed XOR i.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Replications (cycles, clusters or paths, depending on the subcommand).
    #[arg(long, global = true)]
    pub reps: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// Window length A.
    #[arg(long = "A", global = true)]
    pub window: Option<f64>,
    /// Horizon T.
    #[arg(long = "T", global = true)]
    pub horizon: Option<f64>,
    /// Config override with a flat key path, e.g. `transfer.alpha=0.4`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one path on (0, T] and write its events as CSV.
    Sim,
    /// Simulate one path and report its A-regeneration times as JSON.
    Regen,
    /// Takács transform E[e^{-s tau^A}] over an s-grid, as CSV `s,value,abs_error`.
    Laplace(LaplaceArgs),
    /// Moments of tau^A and the delay bound, as JSON.
    Moments(MomentsArgs),
    /// Deviation bound for sliding averages, or its inverse, as JSON.
    Bound(BoundArgs),
    /// Estimate pi^A f from simulated cycles or one sliding average, as JSON.
    Estimate(EstimateArgs),
    /// Run the Monte Carlo validation battery; exit code 3 if any check fails.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ServiceArgs {
    /// Dominating service Exp(theta) + A.
    #[arg(long, conflicts_with = "degenerate")]
    pub theta: Option<f64>,
    /// Deterministic service A (clusters of length 0).
    #[arg(long)]
    pub degenerate: bool,
}

#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true)]
pub struct LaplaceArgs {
    #[command(flatten)]
    pub service: ServiceArgs,
    /// Comma-separated grid of s values; overrides `s_grid`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub s: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true)]
pub struct MomentsArgs {
    #[command(flatten)]
    pub service: ServiceArgs,
    /// Also report E[e^{alpha tau}] (exponential service only).
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true)]
pub struct BoundArgs {
    #[arg(long)]
    pub alpha: f64,
    /// Lower end of the range of f.
    #[arg(long)]
    pub a: f64,
    /// Upper end of the range of f.
    #[arg(long)]
    pub b: f64,
    /// Bound mode: moments from the dominating queue with service Exp(theta).
    #[arg(long, group = "moments")]
    pub theta: Option<f64>,
    /// Exact mode: JSON file with `mean_tau`, `exp_moment` and optionally `alpha_upper`.
    #[arg(long, group = "moments")]
    pub mc_moments_file: Option<PathBuf>,
    /// Report the epsilon at which the bound equals eta.
    #[arg(long, group = "target")]
    pub eta: Option<f64>,
    /// Report the bound at this epsilon.
    #[arg(long, group = "target")]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FunctionalKind {
    Count,
    Constant,
    Indicator,
    Pair,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimateMethod {
    /// Renewal-reward ratio over `reps` independent cycles.
    Cycles,
    /// Sliding average over one path on (0, T].
    Path,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    #[arg(long, value_enum, default_value = "count")]
    pub kind: FunctionalKind,
    /// Value for `--kind constant`.
    #[arg(long)]
    pub value: Option<f64>,
    /// Count for `--kind indicator`.
    #[arg(long)]
    pub k: Option<usize>,
    /// Pair kernel for `--kind pair`: `const:VALUE:SUPPORT` or `table:FILE` (CSV `u,w` on [-support, 0]).
    #[arg(long)]
    pub w: Option<String>,
    /// Clamp the functional to `a,b`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub clamp: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "cycles")]
    pub method: EstimateMethod,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// Also write the raw cycle lengths as CSV.
    #[arg(long)]
    pub cycles_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    ValidationFailed,
}

impl Cli {
    /// `--set` overrides followed by the dedicated flags.
    pub fn overrides(&self) -> Result<Vec<(String, toml::Value)>, CliError> {
        let mut out = self.set.iter().map(|s| parse_override(s)).collect::<Result<Vec<_>, _>>()?;
        let float = |key: &str, v: Option<f64>| v.map(|v| (key.to_string(), toml::Value::Float(v)));
        let int = |key: &str, v: Option<i64>| v.map(|v| (key.to_string(), toml::Value::Integer(v)));
        let to_int = |v: u64, name: &str| {
            i64::try_from(v).map_err(|_| CliError::Config(format!("--{name} {v} does not fit in a TOML integer")))
        };
        out.extend(int("seed", self.seed.map(|s| to_int(s, "seed")).transpose()?));
        out.extend(int("reps", self.reps.map(|r| to_int(r as u64, "reps")).transpose()?));
        out.extend(float("lambda", self.lambda));
        out.extend(float("A", self.window));
        out.extend(float("T", self.horizon));
        if let Some(p) = &self.out {
            out.push(("output.out".into(), toml::Value::String(p.display().to_string())));
        }
        if let Command::Validate(ValidateArgs { cycles_csv: Some(p) }) = &self.command {
            out.push(("output.cycles_csv".into(), toml::Value::String(p.display().to_string())));
        }
        Ok(out)
    }
}

pub fn run(cli: &Cli) -> Result<Status, CliError> {
    let loaded = config::load(cli.config.as_deref(), &cli.overrides()?)?;
    match &cli.command {
        Command::Sim => commands::sim(&loaded),
        Command::Regen => commands::regen(&loaded),
        Command::Laplace(args) => commands::laplace(&loaded, args),
        Command::Moments(args) => commands::moments(&loaded, args),
        Command::Bound(args) => commands::bound(&loaded, args),
        Command::Estimate(args) => commands::estimate(&loaded, args),
        Command::Validate(_) => commands::validate(&loaded),
    }
}
