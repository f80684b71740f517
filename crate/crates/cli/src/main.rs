mod commands;
mod output;
mod source;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use source::SystemArgs;
use stochbt::Error;

#[derive(Parser, Debug)]
#[command(
    name = "stochbt",
    version,
    about = "Balanced truncation for stochastic linear systems"
)]
struct Cli {
    /// Directory for CSV, report and manifest files.
    #[arg(long, global = true, default_value = "stochbt-out")]
    out: PathBuf,
    /// Seed of the Monte Carlo generator.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Relative tolerance of H∞ bisections.
    #[arg(long, global = true, default_value_t = 1e-6)]
    tol: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    #[value(name = "I", alias = "1")]
    One,
    #[value(name = "II", alias = "2")]
    Two,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PSourceArg {
    Optimize,
    Baseline,
    /// The Gramian shipped with the builtin (sec4a, example2).
    Given,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveArg {
    Auto,
    TraceP,
    TracePq,
}

#[derive(Args, Clone, Debug)]
pub struct GramianArgs {
    #[arg(long, value_enum, default_value = "II")]
    pub kind: KindArg,
    /// Type II reachability Gramian. Defaults to `given` for builtins that
    /// carry one and to `optimize` otherwise.
    #[arg(long, value_enum)]
    pub p_source: Option<PSourceArg>,
    #[arg(long, value_enum, default_value = "auto")]
    pub objective: ObjectiveArg,
    /// Relative tolerance for merging singular values into one group.
    #[arg(long, default_value_t = stochbt::balancing::DEFAULT_GROUP_TOL)]
    pub group_tol: f64,
    /// Reject semidefinite Gramians instead of dropping negligible directions.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Args, Clone, Debug)]
pub struct OrderArgs {
    /// Number of singular-value groups to keep.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..), conflicts_with = "states")]
    pub r: Option<u64>,
    /// State dimension to keep; snapped down to a group boundary.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub states: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Mean-square stability verdict, spectral abscissa and certificate.
    Stability {
        #[command(flatten)]
        sys: SystemArgs,
    },
    /// Gramian pair, singular values and inequality check.
    Gramians {
        #[command(flatten)]
        sys: SystemArgs,
        #[command(flatten)]
        gram: GramianArgs,
    },
    /// Balanced truncation to one order or a sweep of orders.
    Reduce {
        #[command(flatten)]
        sys: SystemArgs,
        #[command(flatten)]
        gram: GramianArgs,
        #[command(flatten)]
        order: OrderArgs,
        /// Reduce to every group count from `--from` in steps of `--step`.
        #[arg(long, conflicts_with_all = ["r", "states"])]
        sweep: bool,
        #[arg(long, default_value_t = 1, requires = "sweep")]
        from: usize,
        #[arg(long, default_value_t = 1, requires = "sweep")]
        step: usize,
        /// Also compute the H∞ norm of every truncation error.
        #[arg(long)]
        error: bool,
    },
    /// H∞ norm bracket of a system, or of the difference of two systems.
    Hinf {
        #[command(flatten)]
        sys: SystemArgs,
        /// Second system; the norm of the difference is reported.
        reduced: Option<PathBuf>,
    },
    /// Monte Carlo output error between a system and its reduction.
    Simulate {
        #[command(flatten)]
        sys: SystemArgs,
        /// Reduced system file. Without it the system is reduced first.
        reduced: Option<PathBuf>,
        #[command(flatten)]
        gram: GramianArgs,
        #[command(flatten)]
        order: OrderArgs,
        #[arg(long, default_value_t = 20.0)]
        t_final: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
        /// Constant input, one value per channel (default all ones).
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        input: Option<Vec<f64>>,
        /// Record every k-th step (default: about 1000 records).
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Timings of the main stages on ladders of growing order.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "8,12,16,20")]
        sizes: Vec<usize>,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) => match e {
            Error::Parse { .. }
            | Error::Io { .. }
            | Error::Domain(_)
            | Error::DimensionMismatch(_)
            | Error::InvalidSystem(_) => 1,
            Error::NotStable
            | Error::SingularGramian { .. }
            | Error::NotPd { .. }
            | Error::NearZeroSigma { .. }
            | Error::InfeasibleStart
            | Error::ObjectiveNotCoercive
            | Error::StabilityLost => 2,
            _ => 3,
        },
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let ctx = commands::Context {
        out: cli.out,
        seed: cli.seed,
        tol: cli.tol,
    };
    let result = match cli.command {
        Command::Stability { sys } => commands::stability(&ctx, &sys),
        Command::Gramians { sys, gram } => commands::gramians(&ctx, &sys, &gram),
        Command::Reduce {
            sys,
            gram,
            order,
            sweep,
            from,
            step,
            error,
        } => {
            if sweep {
                commands::sweep(&ctx, &sys, &gram, from, step, error)
            } else {
                commands::reduce(&ctx, &sys, &gram, &order, error)
            }
        }
        Command::Hinf { sys, reduced } => commands::hinf(&ctx, &sys, reduced.as_deref()),
        Command::Simulate {
            sys,
            reduced,
            gram,
            order,
            t_final,
            dt,
            paths,
            input,
            stride,
        } => {
            let sim = commands::SimArgs {
                t_final,
                dt,
                paths,
                input,
                stride,
            };
            commands::simulate(&ctx, &sys, reduced.as_deref(), &gram, &order, &sim)
        }
        Command::Bench { sizes } => commands::bench(&ctx, &sizes),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
