//! `rru simulate` and `rru verify`.
//!
//! Exit codes: 0 success, 2 configuration or precondition error (including
//! an unknown test name), 3 I/O error, 4 verifier failure.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::analytics::{
    atom_scan, clt_test, dn_growth_check, dominance_test, identity_fuzz, rate_check,
    series_diagnostics, tail_sum_check, AnalyticsError, TestReport, TheoryTargets,
};
use crate::config::{ConfigError, ExperimentConfig};
use crate::coupling::{run_coupled, run_coupled_ensemble, CouplingError};
use crate::ensemble::{default_workers, run_ensemble, EnsembleError, EnsembleSummary};
use crate::output::{
    read_paths_csv, read_summary, unix_now, write_coupled_csv, write_outputs, OutputError,
    COUPLED_FILE, PATHS_FILE, SUMMARY_FILE,
};
use crate::urn::PathTrace;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_FAIL: i32 = 4;

/// Shadow-urn mean tolerance for `verify couple`, in standard errors.
const COUPLE_MAX_Z: f64 = 4.0;

#[derive(Debug, Parser)]
#[command(name = "rru", version, about = "Randomly reinforced urn experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the ensemble described by the config and write its outputs.
    Simulate(CommonArgs),
    /// Run one verifier against the outputs of `simulate`.
    Verify {
        #[arg(value_enum)]
        test: VerifyTest,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Overrides `master_seed` from the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VerifyTest {
    Clt,
    Atoms,
    Dominance,
    Rates,
    Tails,
    Series,
    Growth,
    Couple,
    Identity,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error("{0}")]
    Mismatch(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("test {0} failed")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(ConfigError::Io { .. }) | Self::Output(_) | Self::Io { .. } => EXIT_IO,
            Self::Ensemble(EnsembleError::Config(ConfigError::Io { .. })) => EXIT_IO,
            Self::Ensemble(EnsembleError::Pool(_)) | Self::Coupling(CouplingError::Pool(_)) => {
                EXIT_IO
            }
            Self::Failed(_) => EXIT_FAIL,
            _ => EXIT_CONFIG,
        }
    }
}

fn load_config(args: &CommonArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::from_file(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn workers(args: &CommonArgs) -> usize {
    args.workers.unwrap_or_else(default_workers).max(1)
}

/// Parses `args` (including the program name) and runs the command,
/// writing reports to `out`. Returns the process exit code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return EXIT_CONFIG;
            }
            let _ = write!(out, "{e}");
            return EXIT_OK;
        }
    };
    match run(&cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "rru: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate(args) => simulate(args, out),
        Command::Verify { test, common } => {
            let report = verify(*test, common)?;
            let _ = writeln!(out, "{report}");
            if report.pass() {
                Ok(())
            } else {
                Err(CliError::Failed(report.name))
            }
        }
    }
}

fn simulate(args: &CommonArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = load_config(args)?;
    let started = unix_now();
    let workers = workers(args);
    let ens = run_ensemble(&cfg, workers)?;
    let files = write_outputs(&args.out, &ens, workers, started)?;
    let _ = writeln!(
        out,
        "simulated {} paths x {} steps (seed {}), mean Z_N = {:.6}",
        cfg.num_paths,
        cfg.n_steps,
        cfg.master_seed,
        ens.summary.last().mean_z
    );
    for f in files {
        let _ = writeln!(out, "wrote {}", f.display());
    }
    Ok(())
}

fn load_summary(cfg: &ExperimentConfig, dir: &Path) -> Result<EnsembleSummary, CliError> {
    let summary = read_summary(&dir.join(SUMMARY_FILE))?;
    if summary.master_seed != cfg.master_seed
        || summary.n_steps != cfg.n_steps
        || summary.num_paths != cfg.num_paths
    {
        return Err(CliError::Mismatch(format!(
            "outputs in {} were produced by a different config (seed {}, N {}, paths {})",
            dir.display(),
            summary.master_seed,
            summary.n_steps,
            summary.num_paths
        )));
    }
    Ok(summary)
}

fn load_traces(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathTrace>, CliError> {
    load_summary(cfg, dir)?;
    Ok(read_paths_csv(&dir.join(PATHS_FILE), cfg)?)
}

fn targets(cfg: &ExperimentConfig) -> Result<TheoryTargets, CliError> {
    let law = cfg.law().map_err(ConfigError::from)?;
    Ok(TheoryTargets::new(&law.mu, &law.nu)?)
}

/// Runs verifier `test` for the config and outputs named by `args`.
pub fn verify(test: VerifyTest, args: &CommonArgs) -> Result<TestReport, CliError> {
    let cfg = load_config(args)?;
    let v = &cfg.verify;
    let dir = args.out.as_path();
    let d0 = cfg.x + cfg.y;
    let report = match test {
        VerifyTest::Clt => {
            let traces = load_traces(&cfg, dir)?;
            clt_test(
                &traces,
                &targets(&cfg)?,
                cfg.clt_checkpoint(),
                cfg.n_steps,
                v.clt_eps,
                v.clt_threshold,
            )?
        }
        VerifyTest::Atoms => {
            let summary = load_summary(&cfg, dir)?;
            atom_scan(&summary.final_z, v.atoms_bins, v.atoms_max_mass, v.atoms_max_dup)?
        }
        VerifyTest::Dominance => {
            let law = cfg.law().map_err(ConfigError::from)?;
            let summary = load_summary(&cfg, dir)?;
            let means: Vec<(u64, f64)> =
                summary.checkpoints.iter().map(|c| (c.n, c.mean_z)).collect();
            dominance_test(
                &law.mu,
                &law.nu,
                &summary.final_z,
                &means,
                v.dominance_z_star,
                v.dominance_min_mean,
                v.dominance_window,
            )?
        }
        VerifyTest::Rates => {
            let summary = load_summary(&cfg, dir)?;
            rate_check(
                &summary,
                &targets(&cfg)?,
                cfg.rates_checkpoint(),
                d0,
                &cfg.moments,
                v.rates_tolerance,
            )?
        }
        VerifyTest::Tails => {
            let traces = load_traces(&cfg, dir)?;
            tail_sum_check(&traces, &targets(&cfg)?, cfg.tails_checkpoint(), v.tails_tolerance)?
        }
        VerifyTest::Series => {
            let summary = load_summary(&cfg, dir)?;
            series_diagnostics(&summary, v.series_max_last_gap)?
        }
        VerifyTest::Growth => {
            let summary = load_summary(&cfg, dir)?;
            let beta = cfg.law().map_err(ConfigError::from)?.beta();
            dn_growth_check(&summary, &targets(&cfg)?, beta, d0)?
        }
        VerifyTest::Couple => {
            let paths = v.couple_paths.unwrap_or(cfg.num_paths.min(1000));
            let steps = v.couple_steps.unwrap_or(cfg.n_steps);
            let summary = run_coupled_ensemble(&cfg, paths, steps, workers(args))?;
            let trace = run_coupled(&cfg, 0, steps)?;
            std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
                path: dir.display().to_string(),
                source,
            })?;
            let path = dir.join(COUPLED_FILE);
            let io = |source| CliError::Io {
                path: path.display().to_string(),
                source,
            };
            let file = File::create(&path).map_err(io)?;
            write_coupled_csv(BufWriter::new(file), &trace.steps).map_err(io)?;
            summary.report(COUPLE_MAX_Z)
        }
        VerifyTest::Identity => {
            identity_fuzz(cfg.master_seed, v.identity_steps, v.identity_tolerance)
        }
    };
    Ok(report)
}
