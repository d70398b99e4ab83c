//! `toral-nodal`: command-line front end for the numerical kernels.
//!
//! Exit codes: 0 on success, 1 on usage or input errors, 2 when a work budget
//! is exceeded.

mod artifacts;
mod commands;
mod config;
mod plot;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};

use artifacts::{compare, read_manifest, write_manifest, write_outputs, RunManifest};
use commands::Command;

#[derive(Parser, Debug)]
#[command(
    name = "toral-nodal",
    version,
    about = "Nodal domains of toral Laplace eigenfunctions"
)]
struct Cli {
    /// Directory for outputs and manifests.
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// `key = value` file of default flags for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    action: Action,
}

#[derive(Subcommand, Debug)]
enum Action {
    #[command(flatten)]
    Run(Command),
    /// Re-run a recorded manifest and check the outputs are byte-identical.
    Replay { manifest: PathBuf },
}

fn parse(args: Vec<OsString>) -> std::result::Result<Cli, clap::Error> {
    let cli = Cli::try_parse_from(&args)?;
    let Some(path) = &cli.config else {
        return Ok(cli);
    };
    let Action::Run(cmd) = &cli.action else {
        return Ok(cli);
    };
    let merged = std::fs::read_to_string(path)
        .map_err(anyhow::Error::from)
        .and_then(|text| config::parse(&text))
        .and_then(|entries| config::merge(args, cmd.name(), &entries))
        .map_err(|e| {
            clap::Error::raw(
                clap::error::ErrorKind::Io,
                format!("config {}: {e:#}\n", path.display()),
            )
        })?;
    Cli::try_parse_from(merged)
}

fn now() -> String {
    chrono::Utc::now()
        .format("%Y-%m-%dT%H:%M:%S%.3fZ")
        .to_string()
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!(toral_nodal::Error::InvalidParameter(
                "--threads must be positive".into()
            ));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    match cli.action {
        Action::Run(cmd) => {
            let started_at = now();
            let outputs = cmd.execute()?;
            let entries = write_outputs(&cli.out, cmd.name(), &outputs)?;
            let manifest = RunManifest {
                command: cmd.name().to_string(),
                seed: cmd.seed(),
                params: cmd,
                version: env!("CARGO_PKG_VERSION").to_string(),
                started_at,
                finished_at: now(),
                threads: rayon::current_num_threads(),
                outputs: entries,
            };
            let path = write_manifest(&cli.out, &manifest)?;
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(&outputs[0].bytes)?;
            stdout.flush()?;
            eprintln!("manifest: {}", path.display());
            Ok(())
        }
        Action::Replay { manifest } => {
            let recorded = read_manifest(&manifest)?;
            let outputs = recorded.params.execute()?;
            let diffs = compare(&recorded.outputs, &outputs, &recorded.command)?;
            if diffs.is_empty() {
                println!(
                    "replay of {} matches {} outputs",
                    manifest.display(),
                    outputs.len()
                );
                Ok(())
            } else {
                for d in &diffs {
                    eprintln!("{d}");
                }
                bail!(
                    "replay differs in {} of {} outputs",
                    diffs.len(),
                    outputs.len()
                )
            }
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<toral_nodal::Error>() {
        Some(toral_nodal::Error::BudgetExceeded { .. }) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match parse(std::env::args_os().collect()) {
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
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
