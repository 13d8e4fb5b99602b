//! `qwalk`: config-driven front-end for the photonic quantum-walk simulator.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod angle;
mod commands;
mod config;
mod error;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::config::*;
use crate::error::CliError;
use crate::output::{config_hash, Output};

/// Environment variable with the default worker count.
const THREADS_ENV: &str = "QWALK_THREADS";

#[derive(Parser, Debug)]
#[command(name = "qwalk", version, about = "Photonic quantum-walk simulator")]
struct Cli {
    /// JSON config file; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: ./out/<command>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; falls back to the config file, then QWALK_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Validate and print the resolved parameters without computing.
    #[arg(long, global = true)]
    dry_run: bool,
    /// Write PNG copies of camera frames (needs the `png` feature).
    #[arg(long, global = true)]
    png: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    Evolve(EvolveArgs),
    Bands(BandsArgs),
    Chern(ChernArgs),
    PhaseDiagram(PhaseDiagramArgs),
    Transport(TransportArgs),
    VelocityMap(VelocityMapArgs),
    Edge(EdgeArgs),
    Optics(OpticsArgs),
    Deviations(DeviationsArgs),
    MonteCarlo(MonteCarloArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Evolve(_) => "evolve",
            Command::Bands(_) => "bands",
            Command::Chern(_) => "chern",
            Command::PhaseDiagram(_) => "phase-diagram",
            Command::Transport(_) => "transport",
            Command::VelocityMap(_) => "velocity-map",
            Command::Edge(_) => "edge",
            Command::Optics(_) => "optics",
            Command::Deviations(_) => "deviations",
            Command::MonteCarlo(_) => "monte-carlo",
        }
    }
}

fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => {
            v.trim().parse().map(Some).map_err(|_| CliError::Config(format!("{THREADS_ENV}={v:?} is not a thread count")))
        }
        _ => Ok(None),
    }
}

/// Validates, then either prints the plan or runs `body` inside a capped pool.
fn execute<P, V, B>(cli: &Cli, file: &ConfigFile, params: P, validate: V, body: B) -> Result<(), CliError>
where
    P: Serialize,
    V: FnOnce(&P) -> Result<(), CliError>,
    B: FnOnce(&P, &commands::Context, &mut Output) -> Result<(), CliError> + Send,
    P: Sync,
{
    validate(&params)?;
    let name = cli.command.name();
    let threads = match cli.threads.or(file.threads) {
        Some(t) => Some(t),
        None => threads_from_env()?,
    }
    .unwrap_or(0);
    let out_dir = cli.out.clone().or_else(|| file.out_dir.clone()).unwrap_or_else(|| Path::new("out").join(name));
    if cli.png && !cfg!(feature = "png") {
        return Err(CliError::Config("--png needs a build with the `png` feature".into()));
    }
    if cli.dry_run {
        let plan = serde_json::json!({
            "command": name,
            "schema_version": SCHEMA_VERSION,
            "config_sha256": config_hash(name, &params),
            "out_dir": out_dir,
            "threads": threads,
            "params": params,
        });
        println!("{}", serde_json::to_string_pretty(&plan).map_err(qwalk::error::Error::from)?);
        return Ok(());
    }
    let mut out = Output::create(&out_dir, name, &params)?;
    let ctx = commands::Context { png: cli.png };
    let start = Instant::now();
    let result = qwalk::par::with_threads(threads, || body(&params, &ctx, &mut out));
    let status = match &result {
        Ok(()) => "ok".to_string(),
        Err(e) => format!("error(exit {})", e.exit_code()),
    };
    out.log_run(&status, if threads == 0 { qwalk::par::current_threads() } else { threads }, start.elapsed().as_secs_f64())?;
    if result.is_ok() {
        eprintln!("{name}: wrote {} files to {}", out.written.len(), out_dir.display());
    }
    result
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile { schema_version: SCHEMA_VERSION, ..Default::default() },
    };
    match &cli.command {
        Command::Evolve(a) => {
            let p = a.resolve(file.evolve.as_ref());
            execute(cli, &file, p, commands::validate_evolve, commands::evolve)
        }
        Command::Bands(a) => {
            let p = a.resolve(file.bands.as_ref());
            execute(cli, &file, p, commands::validate_bands, |p, _, out| commands::bands(p, out))
        }
        Command::Chern(a) => {
            let p = a.resolve(file.chern.as_ref());
            execute(cli, &file, p, commands::validate_chern, |p, _, out| commands::chern(p, out))
        }
        Command::PhaseDiagram(a) => {
            let p = a.resolve(file.phase_diagram.as_ref());
            execute(cli, &file, p, commands::validate_phase_diagram, |p, _, out| commands::phase_diagram(p, out))
        }
        Command::Transport(a) => {
            let p = a.resolve(file.transport.as_ref());
            execute(cli, &file, p, commands::validate_transport, |p, _, out| commands::transport(p, out))
        }
        Command::VelocityMap(a) => {
            let p = a.resolve(file.velocity_map.as_ref());
            execute(cli, &file, p, commands::validate_velocity_map, |p, _, out| commands::velocity_map(p, out))
        }
        Command::Edge(a) => {
            let p = a.resolve(file.edge.as_ref());
            execute(cli, &file, p, commands::validate_edge, |p, _, out| commands::edge(p, out))
        }
        Command::Optics(a) => {
            let p = a.resolve(file.optics.as_ref());
            execute(cli, &file, p, commands::validate_optics, commands::optics)
        }
        Command::Deviations(a) => {
            let p = a.resolve(file.deviations.as_ref());
            execute(cli, &file, p, commands::validate_deviations, |p, _, out| commands::deviations(p, out))
        }
        Command::MonteCarlo(a) => {
            let p = a.resolve(file.monte_carlo.as_ref());
            execute(cli, &file, p, commands::validate_monte_carlo, |p, _, out| commands::monte_carlo(p, out))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
