//! `chebyshev`: verify Chebyshev-type tail bounds on discrete measures.
//!
//! Exit status: 0 when every evaluated bound holds, 1 on input errors, 2 when
//! some bound is violated.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "chebyshev", version, about = "Chebyshev-type tail bound verifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate every applicable inequality on a measure file.
    Verify(VerifyArgs),
    /// Like `verify`, over an ε grid.
    Sweep(VerifyArgs),
    /// Quantize draws from a sampler onto a grid and check the step-function guarantees.
    Quantize(QuantizeArgs),
    /// Monte Carlo tail estimates for a sampler.
    Mc(McArgs),
    /// Check the Hilbert-space reduction identities on a p = 2 measure.
    Reduce(ReduceArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone)]
struct EpsilonArgs {
    /// Single ε.
    #[arg(long, conflicts_with = "grid")]
    epsilon: Option<f64>,
    /// ε grid, `start:stop:points,log` or `start:stop:points,lin`.
    #[arg(long)]
    grid: Option<String>,
}

#[derive(Args, Debug, Clone)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Measure JSON file.
    #[arg(long)]
    input: PathBuf,
    /// Dual measure for `banach_dual`; defaults to the input read as functionals.
    #[arg(long)]
    dual: Option<PathBuf>,
    /// Inequality name, `rao` for both Rao bounds, or `all`.
    #[arg(long, default_value = "all")]
    inequality: String,
    #[command(flatten)]
    epsilon: EpsilonArgs,
    /// Unused by exact enumeration; accepted for a uniform interface.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum FamilyName {
    Gaussian,
    UniformBall,
    SymmetricAtoms,
}

#[derive(Args, Debug, Clone)]
struct SamplerArgs {
    /// Sampler JSON, e.g. `{"family":"uniform-ball","radius":1}`; overrides --family.
    #[arg(long)]
    sampler: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FamilyName::Gaussian)]
    family: FamilyName,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Norm exponent, a number ≥ 1 or `inf`.
    #[arg(long, default_value = "2")]
    p: String,
    /// Standard deviation of each coordinate for `gaussian`.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Ball radius for `uniform-ball`.
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    /// Measure file whose atoms are symmetrized for `symmetric-atoms`.
    #[arg(long)]
    atoms_from: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct QuantizeArgs {
    #[command(flatten)]
    sampler: SamplerArgs,
    /// Grid spacing δ.
    #[arg(long)]
    resolution: f64,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Measure output; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Guarantee report; defaults to `<out>.report.json`, or standard error.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct McArgs {
    #[command(flatten)]
    sampler: SamplerArgs,
    /// `norm`, `quad_S` or `mahalanobis_S`.
    #[arg(long, default_value = "norm")]
    statistic: String,
    /// Measure defining S; defaults to the empirical law of the draws.
    #[arg(long)]
    operator: Option<PathBuf>,
    #[arg(long, default_value_t = 100_000)]
    draws: usize,
    #[command(flatten)]
    epsilon: EpsilonArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct ReduceArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    epsilon: EpsilonArgs,
    #[command(flatten)]
    output: OutputArgs,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Verify(args) => commands::verify(&args, false),
        Command::Sweep(args) => commands::verify(&args, true),
        Command::Quantize(args) => commands::quantize(&args),
        Command::Mc(args) => commands::mc(&args),
        Command::Reduce(args) => commands::reduce(&args),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
