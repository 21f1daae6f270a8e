//! `degennes`: de Gennes function tables, 2D magnetic Robin ground states,
//! semiclassical sweeps and check plans.
//!
//! Precedence of settings: built-in defaults, then the `--config` file, then flags.
//! Exit codes: 0 success, 1 computation failed or a check did not pass, 2 bad input.

// `!(x > 0.0)` is used on purpose: NaN must be rejected as bad input.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "degennes",
    version,
    about = "De Gennes function and 2D magnetic Robin eigenvalues"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
pub struct Common {
    /// Strict JSON run configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Validate the configuration and print it with its hash, without computing.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Args, Clone, Default)]
pub struct ProblemArgs {
    /// `circle:R` or `ellipse:A,B` (default circle:1).
    #[arg(long)]
    pub curve: Option<String>,
    /// Semiclassical parameter in (0, 1).
    #[arg(long)]
    pub h: Option<f64>,
    /// Exponent α of the boundary term (default 1).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Constant γ or `cos:MEAN,AMPLITUDE` (default 0).
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<String>,
    #[arg(long, value_enum)]
    pub boundary: Option<BoundaryArg>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum BoundaryArg {
    Robin,
    Dirichlet,
}

#[derive(Args, Clone, Default)]
pub struct SolverArgs {
    /// Relative residual target of the eigensolver.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Krylov basis size.
    #[arg(long)]
    pub basis: Option<usize>,
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Seed of the eigensolver start vector.
    #[arg(long)]
    pub solver_seed: Option<u64>,
    /// Boundary-layer refinement of the default mesh.
    #[arg(long)]
    pub refinement: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Θ(γ), ξ(γ), φ(0)² and moments on a γ grid.
    Theta {
        /// `start:stop:step` or a single value, within [-8, 8].
        #[arg(long, allow_hyphen_values = true)]
        gamma: Option<String>,
        /// Coarse 1D grid spacing (the fine level halves it).
        #[arg(long)]
        spacing: Option<f64>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Moments, closed forms and perturbation coefficients at one γ.
    Profile {
        #[arg(long, allow_hyphen_values = true)]
        gamma: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the ground state profile `t,phi` as CSV.
        #[arg(long)]
        samples: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Ground state of one 2D problem: field CSV and summary JSON.
    Eig2d {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Directory for eig2d_field.csv, eig2d_summary.json and eig2d.meta.json.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Re-solve in random gauges and report the largest relative change of mu1.
        #[arg(long)]
        gauge_check: bool,
        #[arg(long, default_value_t = 5)]
        gauges: usize,
        /// Seed of the random gauges.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Ground states over a decreasing h list, with optional fits and verdicts.
    Sweep {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Comma-separated, strictly decreasing.
        #[arg(long)]
        h_list: Option<String>,
        /// Theorem checks to judge on the sweep (repeatable).
        #[arg(long = "theorem")]
        theorems: Vec<String>,
        /// Parallel cases; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Directory for sweep_cases.csv, sweep_report.json and sweep.meta.json.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run a named, versioned check plan; exit 0 iff every verdict passes.
    Verify {
        #[arg(long)]
        plan: Option<String>,
        /// List plan ids and exit.
        #[arg(long)]
        list: bool,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Verdict JSON; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Mass distribution of a ground state relative to a target set.
    Localize {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// `boundary`, `points:X,Y;X,Y` or `arcs:S,S`.
        #[arg(long, allow_hyphen_values = true)]
        target: Option<String>,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Theta {
            gamma,
            spacing,
            format,
            out,
            common,
        } => commands::theta(&common, gamma, spacing, format, out),
        Command::Profile {
            gamma,
            alpha,
            beta,
            h,
            out,
            samples,
            common,
        } => commands::profile(&common, gamma, alpha, beta, h, out, samples),
        Command::Eig2d {
            problem,
            solver,
            out_dir,
            gauge_check,
            gauges,
            seed,
            common,
        } => commands::eig2d(&common, &problem, &solver, out_dir, gauge_check.then_some(gauges), seed),
        Command::Sweep {
            problem,
            solver,
            h_list,
            theorems,
            jobs,
            out_dir,
            common,
        } => commands::sweep(&common, &problem, &solver, h_list, theorems, jobs, out_dir),
        Command::Verify {
            plan,
            list,
            solver,
            jobs,
            out,
            common,
        } => commands::verify(&common, plan, list, &solver, jobs, out),
        Command::Localize {
            problem,
            solver,
            target,
            radius,
            out,
            common,
        } => commands::localize(&common, &problem, &solver, target, radius, out),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
