//! Command-line front end for `jtchain`: configuration-driven parameter
//! sweeps, figure data, exact-diagonalization validation and a critical
//! coupling scan.

pub mod config;
pub mod error;
pub mod figures;
pub mod format;
pub mod sweep;
pub mod validate;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use jtchain::meanfield::critical_coupling;
use jtchain::spinwave::bisect_critical_coupling;
use jtchain::ModelParams;

use crate::config::{parse_sweep_config, parse_validate_config, read_text};
use crate::error::{CliError, CliResult};
use crate::figures::{reproduce_figure, FigureId, FigureSpec};

/// Bisection tolerance of `critical`.
pub const CRITICAL_TOL: f64 = 1e-12;

#[derive(Debug, Parser)]
#[command(name = "jtchain", version, about = "Mean-field and spin-wave analysis of Jahn-Teller spin-boson chains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the sweeps of a TOML config.
    Sweep { config: PathBuf },
    /// Write the data and a plot script for one figure.
    Figure {
        #[arg(value_enum)]
        figure: FigureId,
        #[arg(long, default_value = "figures")]
        out: PathBuf,
        /// Parameter override, e.g. `--set omega=2`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Compare mean field and spin waves with exact diagonalization.
    Validate { config: PathBuf },
    /// Locate the critical coupling by bisection on the soft mode.
    Critical {
        #[arg(long, default_value_t = 1.0)]
        omega: f64,
        #[arg(long, default_value_t = 1.0)]
        omega0: f64,
        #[arg(long, default_value_t = 0.4)]
        t: f64,
        #[arg(long, default_value_t = 20)]
        n: usize,
        /// Coupling range `lo,hi`.
        #[arg(long, default_value = "0,10", value_parser = parse_range, allow_hyphen_values = true)]
        range: (f64, f64),
    },
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected lo,hi, got '{s}'"))?;
    let lo = a.trim().parse::<f64>().map_err(|e| format!("'{a}': {e}"))?;
    let hi = b.trim().parse::<f64>().map_err(|e| format!("'{b}': {e}"))?;
    if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
        return Err(format!("range needs finite lo < hi, got {lo},{hi}"));
    }
    Ok((lo, hi))
}

/// Bisection estimate and closed form of the critical coupling.
pub fn critical_scan(params: &ModelParams, lo: f64, hi: f64) -> CliResult<(f64, f64)> {
    params.validate()?;
    let estimate = bisect_critical_coupling(params, lo, hi, CRITICAL_TOL)?;
    Ok((estimate, critical_coupling(params)?))
}

fn config_dir(path: &Path) -> PathBuf {
    path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}

fn list(out: &mut dyn Write, paths: &[PathBuf]) -> CliResult<()> {
    for p in paths {
        writeln!(out, "wrote {}", p.display()).map_err(|e| CliError::io("<stdout>", e))?;
    }
    Ok(())
}

/// Executes a parsed command, printing progress to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    match cli.command {
        Command::Sweep { config } => {
            let text = read_text(&config)?;
            let cfgs = parse_sweep_config(&text, &config_dir(&config))?;
            let written = sweep::run_sweeps(&cfgs, text.as_bytes())?;
            list(out, &written)
        }
        Command::Figure { figure, out: dir, set } => {
            let written = reproduce_figure(&FigureSpec { figure_id: figure, overrides: set }, &dir)?;
            list(out, &written)
        }
        Command::Validate { config } => {
            let text = read_text(&config)?;
            let cfg = parse_validate_config(&text, &config_dir(&config))?;
            let (report, written) = validate::validate_and_write(&cfg)?;
            out.write_all(validate::report_text(&report).as_bytes()).map_err(|e| CliError::io("<stdout>", e))?;
            list(out, &written)
        }
        Command::Critical { omega, omega0, t, n, range } => {
            let p = ModelParams::periodic(n, omega0, t, 0.0, omega)?;
            let (estimate, closed) = critical_scan(&p, range.0, range.1)?;
            writeln!(out, "g_c (bisection)   {estimate:.8}").map_err(|e| CliError::io("<stdout>", e))?;
            writeln!(out, "g_c (closed form) {closed:.8}").map_err(|e| CliError::io("<stdout>", e))?;
            Ok(())
        }
    }
}
