//! Batch front end over `hierstab-core`, the library behind the `hierstab`
//! binary.
//!
//! ```text
//! hierstab <command> <model-file> [--out DIR] [--grid-n N] [--search LO,HI]
//!          [--rect RE0,RE1,IM0,IM1] [--T t] [--eps e]
//! ```
//!
//! Exit codes: 0 success, 1 numerical failure, 2 model error,
//! 3 non-convergence, 4 consistency alarm or disagreeing routes, 64 usage.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod output;

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_MODEL: u8 = 2;
pub const EXIT_NONCONVERGENCE: u8 = 3;
pub const EXIT_ALARM: u8 = 4;
pub const EXIT_USAGE: u8 = 64;

#[derive(Debug, Parser)]
#[command(name = "hierstab", version, about = "Stability analysis of hierarchical size-structured population models")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the trivial and all bracketed positive equilibria.
    Equilibrium(Args),
    /// Sign-of-beta_Q classification with the explicit characteristic function.
    Classify(Args),
    /// Eigenvalues of the characteristic determinant in a rectangle.
    Spectrum(Args),
    /// Positivity, dissipativity, trivial and scramble conditions.
    Conditions(Args),
    /// Measure the perturbation growth rate by direct simulation.
    Simulate(Args),
    /// Run every route and check that they agree on stability.
    Validate(Args),
}

#[derive(Debug, Clone, clap::Args)]
pub struct Args {
    /// Model file (TOML).
    pub model: PathBuf,
    /// Directory for report.json and CSV artifacts.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override the number of grid cells.
    #[arg(long = "grid-n")]
    pub grid_n: Option<usize>,
    /// Real window for the dominant root, `LO,HI`.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub search: Option<[f64; 2]>,
    /// Complex rectangle `RE0,RE1,IM0,IM1` for the determinant search.
    #[arg(long, value_parser = parse_rect, allow_hyphen_values = true)]
    pub rect: Option<[f64; 4]>,
    /// Simulation horizon.
    #[arg(long = "T", value_parser = parse_positive, allow_hyphen_values = true)]
    pub t_end: Option<f64>,
    /// Perturbation size relative to the L1 norm of the equilibrium.
    #[arg(long, value_parser = parse_positive, allow_hyphen_values = true)]
    pub eps: Option<f64>,
}

fn parse_list<const N: usize>(text: &str) -> Result<[f64; N], String> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(format!("expected {N} comma-separated numbers, got `{text}`"));
    }
    let mut out = [0.0; N];
    for (slot, p) in out.iter_mut().zip(parts) {
        let v: f64 = p.parse().map_err(|_| format!("`{p}` is not a number"))?;
        if !v.is_finite() {
            return Err(format!("`{p}` is not finite"));
        }
        *slot = v;
    }
    Ok(out)
}

fn parse_positive(text: &str) -> Result<f64, String> {
    let [v] = parse_list::<1>(text)?;
    if v <= 0.0 {
        return Err(format!("must be positive, got {v}"));
    }
    Ok(v)
}

fn parse_pair(text: &str) -> Result<[f64; 2], String> {
    let [lo, hi] = parse_list::<2>(text)?;
    if lo >= hi {
        return Err(format!("need LO < HI, got {lo},{hi}"));
    }
    Ok([lo, hi])
}

fn parse_rect(text: &str) -> Result<[f64; 4], String> {
    let r = parse_list::<4>(text)?;
    if r[0] >= r[1] || r[2] >= r[3] {
        return Err(format!("need RE0 < RE1 and IM0 < IM1, got `{text}`"));
    }
    Ok(r)
}

/// Sizes the global rayon pool from `HIERSTAB_THREADS`, when set. Call once
/// per process, before [`run`].
pub fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("HIERSTAB_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("HIERSTAB_THREADS must be a positive integer, got `{value}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code. The JSON report goes to `out`, diagnostics to stderr.
pub fn run<I, T>(argv: I, out: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (name, args) = match &cli.command {
        Command::Equilibrium(a) => ("equilibrium", a),
        Command::Classify(a) => ("classify", a),
        Command::Spectrum(a) => ("spectrum", a),
        Command::Conditions(a) => ("conditions", a),
        Command::Simulate(a) => ("simulate", a),
        Command::Validate(a) => ("validate", a),
    };
    match commands::run(name, args, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("hierstab {name}: {e}");
            e.exit_code()
        }
    }
}
