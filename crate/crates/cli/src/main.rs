//! `dpmqkd`: key-rate sweeps, protocol simulation and optics checks.
//!
//! Exit status: 0 success, 1 usage error, 2 numeric failure, 3 self-check
//! failure.

mod config;
mod failure;
mod output;
mod simulate;
mod sweeps;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::ConfigFile;
use failure::Failure;

#[derive(Parser, Debug)]
#[command(name = "dpmqkd", version, about = "Plug-and-play MDI-CVQKD key rates and simulation")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Output file. Defaults to `$DPMQKD_OUT_DIR/<command>.csv`, else stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Plain-text `key = value` file; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Omit the timestamp comment so reruns are byte-identical.
    #[arg(long, global = true)]
    no_timestamp: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Asymptotic key rate against total Alice-Bob distance.
    AsymptoticSweep(sweeps::AsymptoticArgs),
    /// Largest excess noise with a positive key rate, against distance.
    TolerableNoise(sweeps::TolerableArgs),
    /// Finite-size key rates for local and conventional estimation.
    FiniteSizeSweep(sweeps::FiniteArgs),
    /// Pulse-level simulation with local covariance estimation.
    Simulate(simulate::SimulateArgs),
    /// Numerical checks of the polarization optics and DPM modulation.
    DpmVerify(verify::VerifyArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::AsymptoticSweep(_) => "asymptotic-sweep",
            Command::TolerableNoise(_) => "tolerable-noise",
            Command::FiniteSizeSweep(_) => "finite-size-sweep",
            Command::Simulate(_) => "simulate",
            Command::DpmVerify(_) => "dpm-verify",
        }
    }
}

/// Resolved output settings shared by every command.
pub struct Context {
    pub command: &'static str,
    pub out: Option<PathBuf>,
    pub timestamp: bool,
    pub config: ConfigFile,
}

impl Context {
    pub fn target(&self) -> Option<PathBuf> {
        output::resolve_target(self.out.as_deref(), &format!("{}.csv", self.command))
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config = match &cli.common.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let command = cli.command.name();
    let out = config.lookup(cli.common.out.clone(), "out")?;
    let timestamp = !config.flag(cli.common.no_timestamp, "no-timestamp")?;
    let ctx = Context { command, out, timestamp, config };
    match cli.command {
        Command::AsymptoticSweep(a) => sweeps::asymptotic(&ctx, a),
        Command::TolerableNoise(a) => sweeps::tolerable(&ctx, a),
        Command::FiniteSizeSweep(a) => sweeps::finite(&ctx, a),
        Command::Simulate(a) => simulate::run(&ctx, a),
        Command::DpmVerify(a) => verify::run(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("dpmqkd: {f}");
            f.exit_code()
        }
    }
}
