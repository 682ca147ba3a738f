//! Command-line front end. Exit codes: 0 success, 1 invariant failure,
//! 2 usage or configuration error.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::coupling::{run, series_audits, RunConfig};
use crate::error::Error;
use crate::io::{dump_config, load_config, read_series};
use crate::model::{validate_coefficients, ModelCoefficients, SampleSpec};
use crate::zero_dim::{run_zero_dim, ZeroDimSample};

#[derive(Debug, Parser)]
#[command(name = "polyflow", version, about = "Coupled polymeric-fluid solver")]
pub struct Cli {
    /// TOML run configuration; defaults are used when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for randomized initial data; overrides the configured one.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the coupled model to t_final.
    Run,
    /// Check the coefficient family against the structural assumptions.
    Validate,
    /// Integrate the spatially homogeneous prion model.
    ZeroDim,
    /// Replay a time-series file against the configured tolerances.
    CheckInvariants {
        /// `series.csv` written by `run`.
        series: PathBuf,
    },
    /// Print the default configuration.
    DumpDefaults,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVARIANT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::ConfigParse { .. } | Error::ConfigConstraint { .. } | Error::InvalidParameter(_) => EXIT_USAGE,
        _ => EXIT_INVARIANT,
    }
}

fn load(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        Some(p) => load_config(p).map_err(|e| match e {
            Error::Io(io) => Error::invalid(format!("cannot read {}: {io}", p.display())),
            e => e,
        })?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.initial.seed = seed;
    }
    Ok(cfg)
}

/// Runs the CLI on `args` (including the program name) and returns the exit
/// code. Output goes to `stdout`, errors to `stderr`.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                write!(stdout, "{text}")
            } else {
                write!(stderr, "{text}")
            };
            return code;
        }
    };
    if let Some(n) = cli.threads {
        // a second initialization in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match dispatch(&cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: &Cli, stdout: &mut dyn Write) -> Result<i32, Error> {
    match &cli.command {
        Command::DumpDefaults => {
            write!(stdout, "{}", dump_config(&RunConfig::default()))?;
            Ok(EXIT_OK)
        }
        Command::Validate => {
            let cfg = load(cli)?;
            let coeffs = ModelCoefficients::from_params(&cfg.coefficients)?;
            let report = validate_coefficients(&coeffs, &SampleSpec::default())?;
            write!(stdout, "{report}")?;
            Ok(if report.all_passed() { EXIT_OK } else { EXIT_INVARIANT })
        }
        Command::Run => {
            let cfg = load(cli)?;
            let summary = run(&cfg, cli.out.as_deref())?;
            write!(stdout, "{}", summary.report())?;
            Ok(if summary.passed() { EXIT_OK } else { EXIT_INVARIANT })
        }
        Command::ZeroDim => {
            let cfg = load(cli)?;
            let coeffs = ModelCoefficients::from_params(&cfg.coefficients)?;
            let tr = run_zero_dim(&cfg.zero_dim, &coeffs)?;
            let mut csv = ZeroDimSample::COLUMNS.join(",");
            csv.push('\n');
            for s in &tr.samples {
                let row: Vec<String> = s.values().iter().map(|v| format!("{v:?}")).collect();
                csv.push_str(&row.join(","));
                csv.push('\n');
            }
            match &cli.out {
                Some(dir) => {
                    std::fs::create_dir_all(dir)?;
                    std::fs::write(dir.join("zero_dim.csv"), &csv)?;
                }
                None => write!(stdout, "{csv}")?,
            }
            writeln!(
                stdout,
                "steps {} max relative mass drift {:e}",
                tr.steps,
                tr.max_drift()
            )?;
            Ok(EXIT_OK)
        }
        Command::CheckInvariants { series } => {
            let cfg = load(cli)?;
            check_invariants(series, &cfg, stdout)
        }
    }
}

fn check_invariants(path: &Path, cfg: &RunConfig, stdout: &mut dyn Write) -> Result<i32, Error> {
    let series = read_series(path)?;
    let Some(first) = series.first() else {
        return Err(Error::TimeSeries("no rows".into()));
    };
    let k = cfg.coefficients.k_const;
    let bound = (k * k).max(first.phi_max);
    let (moments, weighted, violations) = series_audits(&series, cfg, bound);
    writeln!(stdout, "rows {}", series.len())?;
    for (a, m) in &moments {
        writeln!(stdout, "moment {a}: fitted rate {:e} bound {:e}", m.rate, m.bound_rate)?;
    }
    if let Some(w) = weighted {
        writeln!(stdout, "weighted norm: max ratio {:e}", w.max_ratio)?;
    }
    for v in &violations {
        writeln!(stdout, "FAIL {v}")?;
    }
    if violations.is_empty() {
        writeln!(stdout, "all invariants hold")?;
        Ok(EXIT_OK)
    } else {
        Ok(EXIT_INVARIANT)
    }
}
