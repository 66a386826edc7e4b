//! `t2drisk`: the modelling pipeline from the command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

mod commands;
mod run;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use t2drisk::ErrorClass;

#[derive(Parser, Debug)]
#[command(name = "t2drisk", version, about = "10-year type 2 diabetes risk modelling pipeline")]
pub struct Cli {
    /// Seed for every random draw in the command.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Refuse to run randomized commands without an explicit --seed.
    #[arg(long, global = true)]
    pub strict: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic cohort CSV.
    Synth(SynthArgs),
    /// Split 75/25, fit a Cox model on the training part and report coefficients.
    Fit(FitArgs),
    /// Backward elimination by cross-validated c-index.
    Select(SelectArgs),
    /// Discrimination and calibration of a fitted Cox model on a cohort.
    Eval(EvalArgs),
    /// Train a neural Cox model.
    Traindl(TraindlArgs),
    /// Build the fixed-coefficient risk engine artifact.
    Publish(PublishArgs),
    /// Serve a risk engine artifact over HTTP.
    Serve(ServeArgs),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Generator TOML; the built-in preset when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override the cohort size.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[arg(long)]
    pub cohort: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.25)]
    pub test_fraction: f64,
    /// Prediction horizon in years.
    #[arg(long, default_value_t = 10.0)]
    pub horizon: f64,
    /// L2 penalty; only for rescuing separated data.
    #[arg(long, default_value_t = 0.0)]
    pub ridge: f64,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
pub enum RuleArg {
    Baseline,
    Candidate,
}

#[derive(Args, Debug)]
pub struct SelectArgs {
    #[arg(long)]
    pub cohort: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = t2drisk::select::DEFAULT_FOLDS)]
    pub folds: usize,
    /// Whose fold SD bounds an acceptable loss.
    #[arg(long, value_enum, default_value_t = RuleArg::Baseline)]
    pub rule: RuleArg,
    /// L2 penalty for every cross-validation fit; rescues rare, separable indicators.
    #[arg(long, default_value_t = 0.0)]
    pub ridge: f64,
    /// Reviewer overrides TOML with `[[allow]]` / `[[block]]` entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// `model.json` written by `fit`.
    #[arg(long)]
    pub model: PathBuf,
    /// Evaluation cohort, normally the `test.csv` written by `fit`.
    #[arg(long)]
    pub cohort: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = t2drisk::eval::DEFAULT_ROUNDS)]
    pub bootstrap_rounds: usize,
}

#[derive(Args, Debug)]
pub struct TraindlArgs {
    #[arg(long)]
    pub cohort: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Network TOML; the tuned default when absent. Its `seed` is replaced by --seed.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0.25)]
    pub test_fraction: f64,
    /// Random-search trials before the final fit; 0 trains the given config.
    #[arg(long, default_value_t = 0)]
    pub search_trials: usize,
    /// Share of the training part held out for search validation.
    #[arg(long, default_value_t = 0.2)]
    pub validation_fraction: f64,
}

#[derive(Args, Debug)]
pub struct PublishArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Reference sample size for baseline calibration.
    #[arg(long)]
    pub n: Option<usize>,
    /// Mean 10-year risk the baseline is calibrated to.
    #[arg(long, default_value_t = t2drisk::engine::TARGET_MEAN_RISK)]
    pub target: f64,
    /// Replace the modifiable field list (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub modifiable: Option<Vec<String>>,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long, default_value = "models/published-model.json")]
    pub model: PathBuf,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Allowed CORS origin; repeatable, `*` for any.
    #[arg(long = "cors-origin")]
    pub cors_origins: Vec<String>,
    /// Log one line per request (method, path, status, latency; never bodies).
    #[arg(long)]
    pub access_log: bool,
}

/// Bad flags or flag combinations discovered after parsing.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<t2drisk::Error>() {
            return match e.class() {
                ErrorClass::Usage => 1,
                ErrorClass::Data => 2,
                ErrorClass::Numeric => 3,
            };
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
