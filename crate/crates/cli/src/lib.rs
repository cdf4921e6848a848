//! Batch driver for contraction analysis and controller synthesis of Lur'e
//! systems. [`run`] parses arguments and returns the process exit code:
//! 0 success or feasible, 1 usage, schema or I/O error, 2 negative finding,
//! 3 undetermined.

pub mod commands;
pub mod demo;
pub mod problem;
pub mod report;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::commands::{CheckFlags, SimulateFlags, SolverFlags, Theorem};
use crate::problem::InputError;
use crate::report::{Report, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "lure-contract", version, about = "Contraction certificates for Lur'e systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Search for a certificate P for the gains in the problem file.
    Analyze(SolveArgs),
    /// Search for gains and a certificate, then re-audit the analysis form.
    Synthesize(SolveArgs),
    /// Simulate trajectory pairs and measure P-distance contraction.
    Simulate(SimulateArgs),
    /// Sample the nonlinearity class inequality for builtin or tabulated maps.
    Check(CheckArgs),
    /// Reproduce the three-state design example and check its published numbers.
    DemoPaper(DemoArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Problem file (JSON).
    pub problem: PathBuf,
    /// Also write the report to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Do not print the report on stdout.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: Common,
    /// `auto` or an explicit inequality tag such as `ct-lip-conservative`.
    #[arg(long, default_value = "auto", value_parser = commands::parse_theorem)]
    pub theorem: Theorem,
    #[arg(long)]
    pub margin_min: Option<f64>,
    #[arg(long, env = "LURE_CONTRACT_SEED")]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// JSON file of `[[x0_a, x0_b], ...]` initial pairs.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Directory for trajectory CSVs and `rates.csv`.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// SVG file for the x1 plot.
    #[arg(long)]
    pub plot: Option<PathBuf>,
    #[arg(long, env = "LURE_CONTRACT_SEED")]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub common: Common,
    /// Builtin name or `table:path.csv`; repeatable. Defaults to `builtin_psi`.
    #[arg(long)]
    pub psi: Vec<String>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, env = "LURE_CONTRACT_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    /// Output directory.
    #[arg(long, default_value = "demo-paper")]
    pub out: PathBuf,
    #[arg(long)]
    pub quiet: bool,
}

fn with_problem(
    common: &Common,
    f: impl FnOnce(&problem::Loaded) -> Result<Report, InputError>,
) -> Result<Report, InputError> {
    f(&problem::load(&common.problem)?)
}

/// Parses `args` (including the program name) and runs one command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let start = Instant::now();
    let (result, out, quiet): (_, Option<PathBuf>, bool) = match &cli.command {
        Command::Analyze(a) | Command::Synthesize(a) => {
            let flags = SolverFlags { margin_min: a.margin_min, seed: a.seed };
            let analyze = matches!(cli.command, Command::Analyze(_));
            let r = with_problem(&a.common, |l| {
                if analyze {
                    commands::analyze(l, a.theorem, &flags)
                } else {
                    commands::synthesize(l, a.theorem, &flags)
                }
            });
            (r, a.common.out.clone(), a.common.quiet)
        }
        Command::Simulate(a) => {
            let flags = SimulateFlags {
                steps: a.steps,
                t_end: a.t_end,
                dt: a.dt,
                pairs: a.pairs.clone(),
                csv: a.csv.clone(),
                plot: a.plot.clone(),
                seed: a.seed,
            };
            (with_problem(&a.common, |l| commands::simulate(l, &flags)), a.common.out.clone(), a.common.quiet)
        }
        Command::Check(a) => {
            let flags = CheckFlags { psi: a.psi.clone(), samples: a.samples, seed: a.seed, tol: a.tol };
            (with_problem(&a.common, |l| commands::check(l, &flags)), a.common.out.clone(), a.common.quiet)
        }
        Command::DemoPaper(a) => {
            (demo::run_demo(&demo::DemoData::embedded(), &a.out), Some(a.out.join("report.json")), a.quiet)
        }
    };
    emit(result, out.as_deref(), quiet, start)
}

fn emit(result: Result<Report, InputError>, out: Option<&Path>, quiet: bool, start: Instant) -> i32 {
    let mut report = match result {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    report.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    if let Some(path) = out {
        if let Err(e) = report.write(path) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return EXIT_USAGE;
        }
    }
    if !quiet {
        println!("{}", report.to_json());
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    report.exit_code
}

/// Runs the embedded example from caller-supplied data, as [`run`] would.
pub fn run_demo_with(data: &demo::DemoData, out: &Path, quiet: bool) -> i32 {
    let start = Instant::now();
    emit(demo::run_demo(data, out), Some(&out.join("report.json")), quiet, start)
}
