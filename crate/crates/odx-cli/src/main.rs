//! `odx` — attack image generators through their latent inputs, gate latent
//! vectors with distributional tests, and run the evaluation protocol.
//!
//! Exit codes: 0 success, 1 negative validation decision, 2 usage or format
//! error, 3 runtime/numeric failure. All randomness flows from `--seed`, so
//! identical invocations produce identical artifacts.

mod commands;
mod presets;
mod reports;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use odx_core::Error;

#[derive(Parser)]
#[command(name = "odx", version, about = "Out-domain attacks on image generators, and the defender's input gate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create or inspect generator models.
    #[command(subcommand)]
    Model(ModelCommand),
    /// Train a toy generator/discriminator pair.
    Train(commands::train::TrainArgs),
    /// Drive a generator toward a target image by optimizing its latent input.
    Invert(commands::invert::InvertArgs),
    /// Test a latent vector against the declared prior.
    Validate(commands::validate::ValidateArgs),
    /// Attack a target set and aggregate error and gate pass rates.
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Evaluate several models over shared targets.
    Sweep(commands::sweep::SweepArgs),
    /// Linearly interpolate between two latent vectors and render frames.
    Interpolate(commands::interpolate::InterpolateArgs),
    /// Pooled Shannon entropy of an image set.
    Entropy(commands::entropy::EntropyArgs),
    /// Generate images from prior draws.
    Sample(commands::sample::SampleArgs),
}

#[derive(Subcommand)]
enum ModelCommand {
    /// Build a randomly initialized generator from a preset or an
    /// architecture file.
    InitRandom(commands::model::InitRandomArgs),
}

/// Shared `--jobs` flag; the environment variable ODX_JOBS supplies the
/// default, and 0 means "all cores".
#[derive(Args, Clone)]
pub struct JobsArg {
    /// Parallel attacks (0 = all cores; env ODX_JOBS overrides the default).
    #[arg(long, default_value_t = default_jobs())]
    jobs: usize,
}

fn default_jobs() -> usize {
    std::env::var("ODX_JOBS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(0)
}

impl JobsArg {
    /// Runs `f` inside a rayon pool of the requested width.
    pub fn install<T>(&self, f: impl FnOnce() -> T + Send) -> T
    where
        T: Send,
    {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if self.jobs > 0 {
            builder = builder.num_threads(self.jobs);
        }
        match builder.build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        }
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Numeric(_) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Model(ModelCommand::InitRandom(args)) => commands::model::init_random(args),
        Command::Train(args) => commands::train::run(args),
        Command::Invert(args) => commands::invert::run(args),
        Command::Validate(args) => commands::validate::run(args),
        Command::Evaluate(args) => commands::evaluate::run(args),
        Command::Sweep(args) => commands::sweep::run(args),
        Command::Interpolate(args) => commands::interpolate::run(args),
        Command::Entropy(args) => commands::entropy::run(args),
        Command::Sample(args) => commands::sample::run(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
