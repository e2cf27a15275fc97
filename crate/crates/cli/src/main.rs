//! `avdelay` command-line tool.
//!
//! Exit status is 0 on success, 1 on invalid input or arguments, and 2 when
//! reading or writing files fails. Every flag can also be set through an
//! `AVDELAY_`-prefixed environment variable.

use std::path::PathBuf;
use std::process::ExitCode;

use avdelay::harness::{
    cmd_analyze, cmd_boundary, cmd_coverage, cmd_simulate, AnalyzeOptions, BoundaryOptions, CoverageOptions,
    EstimatorKind, SimulateOptions, VGrid, VarianceMode,
};
use avdelay::{Bounds, Error};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "avdelay",
    version,
    about = "Anytime-valid inference for experiments with delayed outcomes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic potential-outcome table with one assignment.
    Simulate {
        #[arg(long, env = "AVDELAY_N", default_value_t = 500)]
        n: usize,
        #[arg(long, env = "AVDELAY_SEED", default_value_t = 0)]
        seed: u64,
        /// Set every outcome to 1.
        #[arg(long, env = "AVDELAY_COUNTING")]
        counting: bool,
        /// Output directory.
        #[arg(long, env = "AVDELAY_OUT")]
        out: PathBuf,
    },
    /// Estimate reward paths with confidence sequences and p-values.
    Analyze {
        /// Observed or oracle CSV.
        #[arg(long, env = "AVDELAY_INPUT")]
        input: PathBuf,
        #[arg(long, env = "AVDELAY_OUT")]
        out: PathBuf,
        #[arg(long, env = "AVDELAY_ESTIMATOR", value_enum, default_value_t = Estimator::Ipw)]
        estimator: Estimator,
        #[arg(long, env = "AVDELAY_ALPHA", default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, env = "AVDELAY_ETA_SQ", default_value_t = 1.0 / 16.0)]
        eta_sq: f64,
        /// Largest admissible |y|.
        #[arg(long, env = "AVDELAY_OUTCOME_BOUND", default_value_t = 10.0)]
        outcome_bound: f64,
        /// Propensities must lie in [pi_min, 1 - pi_min].
        #[arg(long, env = "AVDELAY_PI_MIN", default_value_t = 1e-6)]
        pi_min: f64,
    },
    /// Coverage of the confidence sequences over resampled assignments.
    Coverage {
        #[arg(long, env = "AVDELAY_REPS", default_value_t = 200)]
        reps: usize,
        #[arg(long, env = "AVDELAY_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, env = "AVDELAY_N", default_value_t = 500)]
        n: usize,
        #[arg(long, env = "AVDELAY_COUNTING")]
        counting: bool,
        #[arg(long, env = "AVDELAY_ESTIMATORS", value_enum, value_delimiter = ',',
              default_values_t = [Estimator::Ipw, Estimator::AipwRunningMean])]
        estimators: Vec<Estimator>,
        #[arg(long, env = "AVDELAY_VARIANCE_MODE", value_enum, value_delimiter = ',',
              default_values_t = [Variance::Oracle, Variance::Estimated])]
        variance_mode: Vec<Variance>,
        #[arg(long, env = "AVDELAY_ALPHA", default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, env = "AVDELAY_ETA_SQ", default_value_t = 1.0 / 16.0)]
        eta_sq: f64,
        /// Worker threads; results are identical for any value.
        #[arg(long, env = "AVDELAY_THREADS")]
        threads: Option<usize>,
        #[arg(long, env = "AVDELAY_OUT")]
        out: PathBuf,
    },
    /// Tabulate boundaries and relative widths over a variance grid.
    Boundary {
        /// Comma list or log:LO:HI:N.
        #[arg(long, env = "AVDELAY_V_GRID", default_value = "log:0.01:1e10:121")]
        v_grid: String,
        /// Hold the control clock fixed at this value.
        #[arg(long, env = "AVDELAY_V0")]
        v0: Option<f64>,
        #[arg(long, env = "AVDELAY_ALPHA", default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, env = "AVDELAY_ETA_SQ", default_value_t = 1.0 / 16.0)]
        eta_sq: f64,
        #[arg(long, env = "AVDELAY_PI", default_value_t = 0.5)]
        pi: f64,
        #[arg(long, env = "AVDELAY_OUT")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Estimator {
    Ipw,
    AipwRunningMean,
}

impl From<Estimator> for EstimatorKind {
    fn from(e: Estimator) -> Self {
        match e {
            Estimator::Ipw => EstimatorKind::Ipw,
            Estimator::AipwRunningMean => EstimatorKind::AipwRunningMean,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Variance {
    Oracle,
    Estimated,
}

impl From<Variance> for VarianceMode {
    fn from(v: Variance) -> Self {
        match v {
            Variance::Oracle => VarianceMode::Oracle,
            Variance::Estimated => VarianceMode::Estimated,
        }
    }
}

fn run(command: Command) -> avdelay::Result<()> {
    match command {
        Command::Simulate { n, seed, counting, out } => {
            let m = cmd_simulate(&SimulateOptions {
                n,
                seed,
                counting,
                out: out.clone(),
            })?;
            println!("wrote {} files to {}", m.outputs.len(), out.display());
        }
        Command::Analyze {
            input,
            out,
            estimator,
            alpha,
            eta_sq,
            outcome_bound,
            pi_min,
        } => {
            cmd_analyze(&AnalyzeOptions {
                input,
                out: out.clone(),
                estimator: estimator.into(),
                alpha,
                eta_sq,
                bounds: Bounds::new(outcome_bound, pi_min)?,
            })?;
            println!("wrote series to {}", out.display());
        }
        Command::Coverage {
            reps,
            seed,
            n,
            counting,
            estimators,
            variance_mode,
            alpha,
            eta_sq,
            threads,
            out,
        } => {
            let (report, _) = cmd_coverage(&CoverageOptions {
                reps,
                seed,
                n,
                counting,
                estimators: estimators.into_iter().map(Into::into).collect(),
                variance_modes: variance_mode.into_iter().map(Into::into).collect(),
                alpha,
                eta_sq,
                threads,
                out,
            })?;
            println!("estimator,variance,estimand,coverage,nominal");
            for r in &report.rows {
                println!(
                    "{},{},{},{:.4},{:.4}",
                    r.estimator.label(),
                    r.variance.label(),
                    r.estimand.label(),
                    r.coverage,
                    r.nominal
                );
            }
        }
        Command::Boundary {
            v_grid,
            v0,
            alpha,
            eta_sq,
            pi,
            out,
        } => {
            cmd_boundary(&BoundaryOptions {
                v_grid: v_grid.parse::<VGrid>()?,
                v0,
                alpha,
                eta_sq,
                pi,
                out: out.clone(),
            })?;
            println!("wrote boundary table to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_io() {
        2
    } else {
        1
    }
}
