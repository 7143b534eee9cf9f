//! Command-line front end: scenario files in, CSV tables out.
//!
//! Exit codes: 0 on success, 1 for usage, configuration or model validation
//! errors, 2 for numerical failures at run time. The error class is printed
//! on stderr.

pub mod commands;
pub mod config;
pub mod csv;
pub mod scenarios;

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::Error;
use config::{parse_config, ConfigError, Scenario};
use csv::CsvTable;

pub const SEED_ENV: &str = "SPDE_DENSITY_SEED";

#[derive(Debug, Parser)]
#[command(name = "spde-density", version, about = "Closed-form densities for stochastic heat equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Scenario file (TOML with [model], [run] and [outputs] sections).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Directory for the CSV outputs.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    /// Seed override; takes precedence over SPDE_DENSITY_SEED and the file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads. Results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Closed-form density on the u-grid.
    Density,
    /// Feynman-Kac Monte Carlo estimates next to the closed form.
    FkEstimate,
    /// Direct spectral sampling with KS statistics against the closed form.
    OracleSample,
    /// Fokker-Planck residuals under step refinement.
    FpResidual,
    /// Chapman-Kolmogorov composition error.
    CkCheck,
    /// Run every job of a scenario.
    Scenario {
        #[command(subcommand)]
        action: Option<ScenarioAction>,
    },
}

#[derive(Debug, Clone, Subcommand)]
pub enum ScenarioAction {
    /// Run a bundled scenario by name.
    Run { name: String },
    /// List bundled scenarios.
    List,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(ConfigError),
    Numerical(Error),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Numerical(e) if e.is_validation() => 1,
            CliError::Numerical(_) | CliError::Io(_) => 2,
        }
    }

    pub fn class(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "UsageError",
            CliError::Config(e) => e.class(),
            CliError::Numerical(e) => e.class(),
            CliError::Io(_) => "IoError",
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "UsageError: {m}"),
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Numerical(e) => write!(f, "{e}"),
            CliError::Io(m) => write!(f, "IoError: {m}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Numerical(e)
    }
}

/// Seed precedence: flag, then environment, then the scenario file, then 0.
pub fn resolve_seed(flag: Option<u64>, env: Option<&str>, file: u64) -> Result<u64, CliError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match env {
        Some(v) => v.trim().parse().map_err(|_| {
            CliError::Config(ConfigError::Invalid(crate::error::ValidationReport(vec![
                crate::error::InvalidParameter::new(SEED_ENV, format!("expected an unsigned integer, got `{v}`")),
            ])))
        }),
        None => Ok(file),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Job {
    Density,
    Fk,
    Oracle,
    Residual,
    Ck,
}

impl Job {
    pub const ALL: [Job; 5] = [Job::Density, Job::Fk, Job::Oracle, Job::Residual, Job::Ck];

    fn output<'a>(&self, scenario: &'a Scenario) -> &'a str {
        let o = &scenario.outputs;
        match self {
            Job::Density => &o.density,
            Job::Fk => &o.fk,
            Job::Oracle => &o.oracle,
            Job::Residual => &o.residual,
            Job::Ck => &o.ck,
        }
    }

    pub fn table(&self, scenario: &Scenario, seed: u64) -> Result<CsvTable, Error> {
        match self {
            Job::Density => commands::density(scenario),
            Job::Fk => commands::fk_estimate(scenario, seed),
            Job::Oracle => commands::oracle_sample(scenario, seed),
            Job::Residual => commands::fp_residual(scenario),
            Job::Ck => commands::ck(scenario),
        }
    }
}

/// Computes every job first and writes only if all succeed, so a failing
/// run leaves no CSV behind.
pub fn run_jobs(jobs: &[Job], scenario: &Scenario, seed: u64, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let tables = jobs
        .iter()
        .map(|job| job.table(scenario, seed).map(|t| (job.output(scenario), t)))
        .collect::<Result<Vec<_>, Error>>()?;
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    let mut written = Vec::with_capacity(tables.len());
    for (name, table) in tables {
        let path = out.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::Io(format!("{}: {e}", parent.display())))?;
        }
        table
            .write_atomic(&path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        written.push(path);
    }
    Ok(written)
}

fn load(cli: &Cli) -> Result<Option<(Scenario, Vec<Job>)>, CliError> {
    let from_file = |cli: &Cli| -> Result<Scenario, CliError> {
        let path = cli
            .config
            .as_ref()
            .ok_or_else(|| CliError::Usage("this command needs --config <path>".into()))?;
        Ok(parse_config(path)?)
    };
    let single = |job| -> Result<Option<(Scenario, Vec<Job>)>, CliError> { Ok(Some((from_file(cli)?, vec![job]))) };
    match &cli.command {
        Command::Density => single(Job::Density),
        Command::FkEstimate => single(Job::Fk),
        Command::OracleSample => single(Job::Oracle),
        Command::FpResidual => single(Job::Residual),
        Command::CkCheck => single(Job::Ck),
        Command::Scenario { action: Some(ScenarioAction::List) } => {
            for name in scenarios::names() {
                println!("{name}");
            }
            Ok(None)
        }
        Command::Scenario {
            action: Some(ScenarioAction::Run { name }),
        } => {
            let scenario = scenarios::bundled(name).ok_or_else(|| {
                let known: Vec<_> = scenarios::names().collect();
                CliError::Usage(format!("unknown scenario `{name}`; bundled: {}", known.join(", ")))
            })??;
            Ok(Some((scenario, Job::ALL.to_vec())))
        }
        Command::Scenario { action: None } => Ok(Some((from_file(cli)?, Job::ALL.to_vec()))),
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let Some((scenario, jobs)) = load(cli)? else {
        return Ok(());
    };
    let env = std::env::var(SEED_ENV).ok();
    let seed = resolve_seed(cli.seed, env.as_deref(), scenario.run.seed)?;
    let work = || run_jobs(&jobs, &scenario, seed, &cli.out);
    let written = match cli.threads {
        Some(0) => return Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot build thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };
    for path in written {
        println!("{}", path.display());
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.class());
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_precedence() {
        assert_eq!(resolve_seed(Some(3), Some("5"), 7).unwrap(), 3);
        assert_eq!(resolve_seed(None, Some("5"), 7).unwrap(), 5);
        assert_eq!(resolve_seed(None, None, 7).unwrap(), 7);
        assert_eq!(resolve_seed(None, Some("x"), 7).unwrap_err().exit_code(), 1);
    }

    #[test]
    fn cli_shape() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Numerical(Error::DegenerateLaw("atom")).exit_code(), 2);
        assert_eq!(CliError::Numerical(Error::UnsupportedBoundary("row 3")).exit_code(), 1);
        assert_eq!(CliError::Usage("x".into()).exit_code(), 1);
    }
}
