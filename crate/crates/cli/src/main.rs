//! `memheat`: solve, compare, sweep and audit heat conduction problems with
//! flux and capacity memory from a TOML run configuration.

mod commands;
mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};

use crate::commands::Oracle;
use crate::config::{Resolved, RunConfig};
use crate::output::{num, Provenance};

/// Exit status for a stability-bound violation found by `audit`.
const EXIT_VIOLATION: u8 = 2;

#[derive(Parser)]
#[command(name = "memheat", version, about = "Heat conduction with flux and capacity memory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scheme; write snapshot profiles and the energy log.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (defaults to `output` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the scheme against a reference solver over three τ-halvings.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        oracle: Oracle,
        /// Sine modes in the modal superposition (default: all grid modes).
        #[arg(long)]
        modes: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve once per value of a config parameter.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Dotted path to a numeric scalar, e.g. `flux_kernel.0.weight`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve and check the stability bound; exits with status 2 on violation.
    Audit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn base_dir(config: &Path) -> PathBuf {
    config.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn out_dir(flag: Option<PathBuf>, config: &RunConfig, base: &Path) -> Result<PathBuf> {
    match (flag, &config.output) {
        (Some(out), _) => Ok(out),
        (None, Some(out)) => Ok(base.join(out)),
        (None, None) => bail!("no output directory: pass --out or set `output` in the config"),
    }
}

fn load(config: &Path) -> Result<(RunConfig, Resolved)> {
    let raw = RunConfig::load(config)?;
    let resolved = raw.resolve(&base_dir(config))?;
    Ok((raw, resolved))
}

fn provenance(command: &str, config: &Path, extra: &[String], resolved: &Resolved) -> Provenance {
    let mut lines = vec![format!("config file: {}", config.display())];
    lines.extend(extra.iter().cloned());
    Provenance::new(command, &lines, &resolved.config.to_toml())
}

fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Solve { config, out } => {
            let (raw, resolved) = load(&config)?;
            let out = out_dir(out, &raw, &base_dir(&config))?;
            let summary = commands::solve(&resolved, &out, &provenance("solve", &config, &[], &resolved))?;
            println!("steps {}", resolved.steps);
            println!("final energy {}", num(summary.final_energy()));
            if let Some(d) = summary.report.first_violation() {
                log::warn!("stability bound exceeded at step {} (margin {})", d.step, num(d.margin));
            }
            println!("wrote {}", out.display());
        }
        Command::Audit { config, out } => {
            let (raw, resolved) = load(&config)?;
            let out = out_dir(out, &raw, &base_dir(&config))?;
            let summary = commands::solve(&resolved, &out, &provenance("audit", &config, &[], &resolved))?;
            let report = &summary.report;
            let worst = report.steps.iter().map(|d| d.margin).fold(f64::INFINITY, f64::min);
            println!("steps {}", resolved.steps);
            println!("smallest margin {}", num(worst));
            if let Some(d) = report.first_violation() {
                println!(
                    "VIOLATION at step {} t {}: energy {} > bound {}",
                    d.step,
                    num(d.t),
                    num(d.energy),
                    num(d.bound)
                );
                if !resolved.scheme.is_unconditionally_stable() {
                    println!("sigma {} < 0.5: no stability guarantee", num(resolved.scheme.sigma));
                }
                return Ok(ExitCode::from(EXIT_VIOLATION));
            }
            println!("bound holds at every step");
        }
        Command::Compare {
            config,
            oracle,
            modes,
            out,
        } => {
            let (raw, resolved) = load(&config)?;
            let out = out_dir(out, &raw, &base_dir(&config))?;
            let modes = modes.unwrap_or(resolved.problem.grid().n());
            let extra = [format!("oracle: {}", oracle.name()), format!("modes: {modes}")];
            let rows = commands::compare(
                &resolved,
                oracle,
                modes,
                &out,
                &provenance("compare", &config, &extra, &resolved),
            )?;
            println!("tau,snapshot_max_abs,all_levels_max_abs");
            for row in rows {
                println!(
                    "{},{},{}",
                    num(row.tau),
                    num(row.snapshot_max_abs),
                    num(row.all_levels_max_abs)
                );
            }
        }
        Command::Sweep {
            config,
            param,
            values,
            out,
        } => {
            let raw = RunConfig::load(&config)?;
            let out = out_dir(out, &raw, &base_dir(&config))?;
            let values = commands::parse_values(&values)?;
            let rows = commands::sweep(&config, &base_dir(&config), &param, &values, &out)?;
            println!("value,min_u,max_u,final_energy");
            for row in rows {
                println!(
                    "{},{},{},{}",
                    num(row.value),
                    num(row.min_u),
                    num(row.max_u),
                    num(row.final_energy)
                );
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
