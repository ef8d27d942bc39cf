//! `cotc`: bifurcation boundaries and simulations of constant on-time buck
//! converters from a flat key=value configuration.

mod commands;
mod config;
mod table;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{Context, Result};
use clap::{Parser, ValueEnum};
use cotc_core::bifurcation::FormulaId;

use commands::{Command, Sweep};
use config::{ConfigError, RawConfig};
use table::ResultTable;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_REGRESSION: u8 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "cotc", version, about = "Stability boundaries of constant on-time buck converters")]
struct Cli {
    /// Configuration file of KEY=VALUE lines in SI units.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override or add a configuration key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Write the table here instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Harmonic truncation order.
    #[arg(long, global = true, value_name = "N")]
    nh: Option<usize>,
    /// Simulated switching cycles.
    #[arg(long, global = true, value_name = "N")]
    cycles: Option<usize>,
    /// Formula identifier; see `cotc formulas`.
    #[arg(long, global = true, value_name = "ID")]
    formula: Option<String>,
    /// Evaluate over a uniform grid of one key.
    #[arg(long, global = true, value_name = "KEY=lo:hi:n")]
    sweep: Option<String>,
    /// S-plot evaluation point.
    #[arg(long, global = true, allow_hyphen_values = true)]
    lambda: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

fn load_config(cli: &Cli) -> Result<RawConfig, ConfigError> {
    let mut raw = match &cli.config {
        Some(path) => RawConfig::from_file(path)?,
        None => RawConfig::default(),
    };
    for s in &cli.set {
        raw.apply_override(s).map_err(|e| ConfigError(format!("--set {s}: {e}")))?;
    }
    if let Some(nh) = cli.nh {
        raw.set_value("Nh", nh as f64)?;
    }
    if let Some(n) = cli.cycles {
        raw.set_value("ncycles", n as f64)?;
    }
    if let Some(l) = cli.lambda {
        raw.set_value("lambda", l)?;
    }
    Ok(raw)
}

fn output(cli: &Cli) -> Result<Box<dyn Write>> {
    Ok(match &cli.out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).map_err(|e| ConfigError(format!("cannot create {}: {e}", path.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit(table: &ResultTable, cli: &Cli) -> Result<()> {
    let mut out = output(cli)?;
    match cli.format {
        Format::Csv => table.write_csv(&mut out)?,
        Format::Json => table.write_json(&mut out)?,
    }
    out.flush().context("writing output")
}

fn examples(cli: &Cli) -> Result<ExitCode> {
    let outcomes = cotc_validation::run_all();
    let failed = outcomes.iter().filter(|o| !o.passed()).count();
    let mut out = output(cli)?;
    match cli.format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, &outcomes)?;
            writeln!(out)?;
        }
        Format::Csv => {
            for o in &outcomes {
                writeln!(out, "{o}")?;
            }
            writeln!(out, "examples: {} passed, {failed} failed", outcomes.len() - failed)?;
        }
    }
    out.flush()?;
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(EXIT_REGRESSION) })
}

fn run(cli: &Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Examples => return examples(cli),
        Command::Formulas => {
            let mut out = output(cli)?;
            for f in FormulaId::ALL {
                writeln!(out, "{:<34}{}", f.id(), f.description())?;
            }
            return Ok(ExitCode::SUCCESS);
        }
        Command::Keys => {
            let mut out = output(cli)?;
            writeln!(out, "{:<14}{:<18}{}", "scheme", "-", "V_COTC, C_COTC or V_COTC_CURRENT_RAMP (default V_COTC)")?;
            for k in config::KEYS {
                writeln!(out, "{:<14}{:<18}{}", k.name, k.unit, k.help)?;
            }
            return Ok(ExitCode::SUCCESS);
        }
        _ => {}
    }
    let raw = load_config(cli)?;
    let sweep = cli.sweep.as_deref().map(Sweep::parse).transpose()?;
    let formula = cli.formula.as_deref().map(FormulaId::from_str).transpose()?;
    let table = match cli.command {
        Command::Simulate => {
            if sweep.is_some() {
                return Err(ConfigError("simulate does not take --sweep".into()).into());
            }
            commands::run_simulation(&raw)?
        }
        Command::Onset => commands::run_onset(&raw, sweep)?,
        cmd => commands::evaluate(cmd, formula, &raw, sweep)?,
    };
    emit(&table, cli)?;
    Ok(ExitCode::SUCCESS)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return EXIT_CONFIG;
        }
        if let Some(e) = cause.downcast_ref::<cotc_core::Error>() {
            return match e {
                cotc_core::Error::InvalidParameter { .. } | cotc_core::Error::Usage(_) => EXIT_CONFIG,
                _ => EXIT_NUMERIC,
            };
        }
    }
    EXIT_NUMERIC
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("COTC_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
