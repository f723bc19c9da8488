//! `catlink`: batch runner for the entangled-cat experiments.
//!
//! Exit codes: 0 ok, 1 runtime failure, 2 configuration error, 3 a walk did
//! not converge within `max_steps` (the output is still written).

mod config;
mod experiments;
mod output;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use config::{load_file, normalize_key, Format, Params, META_KEYS};
use experiments::Experiment;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Core(catlink_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn config(key: &str, reason: impl std::fmt::Display) -> Self {
        CliError::Config(format!("invalid parameter `{key}`: {reason}"))
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

impl From<catlink_core::Error> for CliError {
    fn from(e: catlink_core::Error) -> Self {
        match e {
            catlink_core::Error::Parameter { .. } => CliError::Config(e.to_string()),
            other => CliError::Core(other),
        }
    }
}

/// Run one experiment. Parameters come from `--config` and are overridden by
/// flags; ranges are `a:b:step` or comma lists, phases may use `pi`.
#[derive(Debug, Parser)]
#[command(name = "catlink", version = catlink_core::VERSION)]
struct Args {
    /// prepare | transmit | purify-walk | purify-fock | mean-steps | eof-curve |
    /// backaction-curve | interference | complementarity
    experiment: Option<String>,

    /// key=value file; CSV and JSON outputs of earlier runs are accepted too.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output path, `-` for stdout.
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    seed: Option<String>,

    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<String>,
    /// Fresh-pulse purity, or a grid of them.
    #[arg(long, allow_hyphen_values = true)]
    r: Option<String>,
    /// Purity of the initial signal pair (defaults to `r`).
    #[arg(long, allow_hyphen_values = true)]
    signal_r: Option<String>,
    /// Beam-splitter amplitude transmittance of the preparation circuit.
    #[arg(long)]
    t: Option<String>,
    #[arg(long)]
    t0: Option<String>,
    #[arg(long)]
    t1: Option<String>,
    /// Line length in units of the characteristic length.
    #[arg(long = "l-over-L", alias = "l-over-l")]
    l_over_l: Option<String>,
    /// Beam splitters per unit of the discrete line.
    #[arg(long)]
    steps: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    max_steps: Option<String>,
    /// Fock cutoff of the signal modes, or `auto`.
    #[arg(long)]
    cutoff: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    dphi: Option<String>,
    /// fock | qubit
    #[arg(long)]
    level: Option<String>,
    /// Also run the Fock-space simulation (true | false).
    #[arg(long)]
    fock: Option<String>,
}

impl Args {
    fn flags(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("experiment", &self.experiment),
            ("out", &self.out),
            ("format", &self.format),
            ("seed", &self.seed),
            ("alpha", &self.alpha),
            ("beta", &self.beta),
            ("gamma", &self.gamma),
            ("r", &self.r),
            ("signal_r", &self.signal_r),
            ("t", &self.t),
            ("t0", &self.t0),
            ("t1", &self.t1),
            ("l_over_l", &self.l_over_l),
            ("steps", &self.steps),
            ("epsilon", &self.epsilon),
            ("trials", &self.trials),
            ("max_steps", &self.max_steps),
            ("cutoff", &self.cutoff),
            ("dphi", &self.dphi),
            ("level", &self.level),
            ("fock", &self.fock),
        ]
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("CATLINK_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::config("CATLINK_THREADS", format!("`{v}` is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

fn run(args: Args) -> Result<bool, CliError> {
    configure_threads()?;
    let mut raw = match &args.config {
        Some(path) => load_file(path)?,
        None => BTreeMap::new(),
    };
    for (key, value) in args.flags() {
        if let Some(v) = value {
            raw.insert(normalize_key(key), v.trim().to_string());
        }
    }
    let experiment: Experiment = raw
        .get("experiment")
        .ok_or_else(|| CliError::Config("no experiment given".into()))?
        .parse()?;
    let format: Format = raw.get("format").map_or("csv", String::as_str).parse()?;
    let out = raw.get("out").cloned().unwrap_or_else(|| "-".into());
    if let Some(v) = raw.get("version").filter(|v| *v != catlink_core::VERSION) {
        eprintln!(
            "warning: config written by version {v}, running {}",
            catlink_core::VERSION
        );
    }

    if let Some(k) = raw
        .keys()
        .find(|k| !META_KEYS.contains(&k.as_str()) && !experiment.keys().contains(&k.as_str()))
    {
        return Err(CliError::Config(format!(
            "parameter `{k}` is not used by experiment `{experiment}`"
        )));
    }

    let params = Params::new(raw);
    let outcome = experiments::run(experiment, &params)?;

    let mut header = params.effective();
    header.insert("experiment".into(), experiment.to_string());
    header.insert("format".into(), format.to_string());
    header.insert("version".into(), catlink_core::VERSION.into());
    output::emit(&out, format, &header, &outcome.table)?;
    Ok(outcome.converged)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let rendered = e.to_string();
            let line = rendered.lines().next().unwrap_or("bad arguments");
            eprintln!("error: usage: {}", line.trim_start_matches("error: ").trim());
            return ExitCode::from(2);
        }
    };
    match run(args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::from(e.exit_code())
        }
    }
}
