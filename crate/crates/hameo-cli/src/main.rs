//! `hameo` — command-line laboratory for area-preserving dynamics on the
//! disc and the sphere.
//!
//! Exit codes: 0 success, 1 failed check or runtime error, 2 usage or
//! configuration error. Outputs are deterministic: the same config and
//! seed produce byte-identical reports.

mod commands;
mod emit;

use clap::{Parser, Subcommand};
use commands::{
    AlgebraArgs, CalArgs, DisplaceArgs, FlowArgs, HoferArgs, LimitsArgs, VerifyArgs, WildArgs,
};
use hameo::{Error, Result};

/// Numerical laboratory for Hamiltonian dynamics on the disc and the
/// sphere: flows, path algebra, oscillation norms, Calabi-type
/// invariants, displacement energy, and twist-map limit diagnostics.
#[derive(Parser, Debug)]
#[command(name = "hameo", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate a Hamiltonian flow on a sample grid and tabulate frames
    Flow(FlowArgs),
    /// Residuals of the product/inverse/rescale/reparameterization laws
    Algebra(AlgebraArgs),
    /// Path length, oscillation norms, and the path metric
    Hofer(HoferArgs),
    /// Search a witness family for the cheapest displacement of a target
    Displace(DisplaceArgs),
    /// Calabi-type invariant: closed-form twist route and path route
    Cal(CalArgs),
    /// Dyadic twist tower: level values, conjugation residuals, divergence
    Wild(WildArgs),
    /// Sequence convergence tables or step-refinement studies
    Limits(LimitsArgs),
    /// Run the invariant check suites
    Verify(VerifyArgs),
}

/// `HAMEO_THREADS` caps the rayon pool; unset leaves the default
/// (one thread per core).
fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var("HAMEO_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| {
            Error::Config(format!(
                "HAMEO_THREADS must be a positive integer, got {raw:?}"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Flow(args) => commands::flow(&args).map(|()| 0),
        Command::Algebra(args) => commands::algebra(&args).map(|()| 0),
        Command::Hofer(args) => commands::hofer_cmd(&args).map(|()| 0),
        Command::Displace(args) => commands::displace(&args).map(|()| 0),
        Command::Cal(args) => commands::cal(&args).map(|()| 0),
        Command::Wild(args) => commands::wild(&args).map(|()| 0),
        Command::Limits(args) => commands::limits_cmd(&args).map(|()| 0),
        Command::Verify(args) => commands::verify_cmd(&args),
    }
}

fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    match init_threads().and_then(|()| run(cli)) {
        Ok(code) => std::process::ExitCode::from(code),
        Err(err) => {
            eprintln!("hameo: {err}");
            std::process::ExitCode::from(err.exit_code().clamp(0, 255) as u8)
        }
    }
}
