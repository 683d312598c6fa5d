//! `maxstable`: experiment runner for max-stable risk measures.
//!
//! Exit codes: 0 when every verdict passes, 1 when a check fails, 2 on usage
//! errors or malformed input.

mod artifacts;
mod asymptotic;
mod config;
mod finite;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use maxstable::families::HorizonGrid;
use maxstable::io::{LoadedRisk, RiskFile};

use artifacts::Artifacts;
use config::ExperimentConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("malformed input: {0}")]
    Input(String),
    #[error("cannot write output: {0}")]
    Output(String),
}

impl CliError {
    pub fn input(e: impl std::fmt::Display) -> Self {
        CliError::Input(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
enum Command {
    /// Monetary axioms, max-stability, convexity and maxitive representation.
    Check,
    /// LDP bounds for every subset against the minimal or a supplied rate.
    Ldp,
    /// Laplace principle on random functions, with uniqueness under perturbation.
    Lp,
    /// The two counterexample families.
    Counterexample,
    /// Cramer rates of Bernoulli sample means.
    Cramer,
    /// Shortfall against entropic values, inverse-loss formulas and the shift condition.
    Shortfall,
    /// Shortfall rates under a square-root transform of the Cramer rate.
    TransformedLdp,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Ldp => "ldp",
            Command::Lp => "lp",
            Command::Counterexample => "counterexample",
            Command::Cramer => "cramer",
            Command::Shortfall => "shortfall",
            Command::TransformedLdp => "transformed-ldp",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "maxstable", version, about = "Max-stable risk measure and large deviation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment config; flags given on the command line take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default `maxstable-out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated, strictly increasing horizons.
    #[arg(long, global = true, value_delimiter = ',')]
    horizons: Option<Vec<u32>>,
    /// Override for the command's primary tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Risk-measure definition file (check, ldp, lp).
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    #[arg(long, global = true)]
    trials: Option<usize>,
}

/// One named verdict of a run.
#[derive(Debug, Clone, Serialize)]
pub struct Criterion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Criterion {
    pub fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.to_string(), passed, detail }
    }
}

pub struct Context {
    pub cfg: ExperimentConfig,
    input: Option<Vec<u8>>,
    pub out: Artifacts,
}

impl Context {
    /// Custom horizons keep the default window, shortened for short lists.
    pub fn grid(&self, default: HorizonGrid) -> Result<HorizonGrid, CliError> {
        match &self.cfg.horizons {
            Some(h) => HorizonGrid::new(h.clone(), default.window().min(h.len())).map_err(|e| CliError::Usage(e.to_string())),
            None => Ok(default),
        }
    }

    pub fn tol(&self, default: f64) -> f64 {
        self.cfg.tol.unwrap_or(default)
    }

    pub fn trials(&self, default: usize) -> usize {
        self.cfg.trials.unwrap_or(default)
    }

    pub fn risk(&self) -> Result<LoadedRisk, CliError> {
        let bytes = self.input.as_ref().ok_or_else(|| CliError::Usage("this command needs --input".into()))?;
        let text = std::str::from_utf8(bytes).map_err(CliError::input)?;
        RiskFile::parse(text).and_then(|f| f.build()).map_err(CliError::input)
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    command: &'a str,
    config_hash: &'a str,
    passed: bool,
    criteria: &'a [Criterion],
}

fn resolve(cli: Cli) -> Result<(Command, ExperimentConfig), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(c) = &cfg.command {
        if c != cli.command.name() {
            return Err(CliError::Usage(format!("config is for `{c}`, not `{}`", cli.command.name())));
        }
    }
    cfg.command = Some(cli.command.name().to_string());
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if cli.out.is_some() {
        cfg.out = cli.out;
    }
    if cli.horizons.is_some() {
        cfg.horizons = cli.horizons;
    }
    if cli.tol.is_some() {
        cfg.tol = cli.tol;
    }
    if cli.input.is_some() {
        cfg.input = cli.input;
    }
    if cli.trials.is_some() {
        cfg.trials = cli.trials;
    }
    cfg.validate()?;
    Ok((cli.command, cfg))
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let (command, cfg) = resolve(cli)?;
    let input = match &cfg.input {
        Some(p) => Some(std::fs::read(p).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display())))?),
        None => None,
    };
    let hash = cfg.hash(command.name(), input.as_deref());
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("maxstable-out"));
    let ctx = Context { cfg, input, out: Artifacts::create(dir, hash)? };
    let criteria = match command {
        Command::Check => finite::check(&ctx)?,
        Command::Ldp => finite::ldp(&ctx)?,
        Command::Lp => finite::lp(&ctx)?,
        Command::Counterexample => asymptotic::counterexample(&ctx)?,
        Command::Cramer => asymptotic::cramer(&ctx)?,
        Command::Shortfall => asymptotic::shortfall(&ctx)?,
        Command::TransformedLdp => asymptotic::transformed(&ctx)?,
    };
    for c in &criteria {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let passed = criteria.iter().all(|c| c.passed);
    let summary = Summary { command: command.name(), config_hash: ctx.out.hash(), passed, criteria: &criteria };
    ctx.out.json("summary.json", &summary)?;
    Ok(passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
