//! Command line front end: `run` executes a configured experiment, `reduce`
//! exports the direct-competition kernel, `verify-esd` checks a steady-state
//! candidate.  Exit codes: 0 success, 2 invalid input, 3 numerical failure,
//! 4 I/O failure.

use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chemostat_core::diagnostics::{esd_verify, EsdCandidate, EsdReport, VerifyModel};
use chemostat_core::harness::experiments::build_coefficients;
use chemostat_core::harness::{load_config, output, run_experiment};
use chemostat_core::model::reduce_kernel;
use chemostat_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "chemostat",
    version,
    about = "Chemostat trait-space competition and its direct-competition reduction"
)]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config; write artifacts and manifest.
    Run {
        /// Path to a JSON run configuration.
        #[arg(long)]
        config: PathBuf,
    },
    /// Compute the reduced competition kernel and write it as a dense CSV.
    Reduce {
        /// Path to a JSON run configuration (grids and coefficients are used).
        #[arg(long)]
        config: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Verify a steady-state candidate (CSV of x,weight rows) against the
    /// configured model; prints a verdict row per model.
    VerifyEsd {
        /// Path to a JSON run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Candidate CSV with header `x,weight`.
        #[arg(long)]
        candidate: PathBuf,
        /// Acceptance tolerance for the fitness residuals.
        #[arg(long, default_value_t = 1e-3)]
        tolerance: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads(cli.threads);
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(feature = "parallel")]
fn configure_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: could not configure {n} threads: {e}");
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn configure_threads(threads: Option<usize>) {
    if threads.is_some_and(|n| n > 1) {
        eprintln!("warning: built without the parallel feature; --threads ignored");
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run { config } => cmd_run(&config),
        Command::Reduce { config, out } => cmd_reduce(&config, &out),
        Command::VerifyEsd { config, candidate, tolerance } => {
            cmd_verify_esd(&config, &candidate, tolerance)
        }
    }
}

fn cmd_run(config_path: &Path) -> Result<()> {
    let cfg = load_config(config_path)?;
    let outcome = run_experiment(&cfg)?;
    let config_bytes = std::fs::read(config_path)
        .map_err(|e| Error::io(config_path.display().to_string(), e))?;
    let dir = PathBuf::from(&cfg.output_dir);
    let (_, paths) = output::write_outputs(&dir, &outcome.files, &config_bytes)?;
    print!("{}", outcome.summary);
    for p in paths {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_reduce(config_path: &Path, out: &Path) -> Result<()> {
    let cfg = load_config(config_path)?;
    let coeffs = build_coefficients(&cfg, None)?;
    let kernel = reduce_kernel(&coeffs)?;
    let csv = output::reduced_kernel_csv(&kernel.grid_x, &kernel.c);
    std::fs::write(out, csv.as_bytes()).map_err(|e| Error::io(out.display().to_string(), e))?;
    println!("wrote {} ({} x {} kernel)", out.display(), kernel.grid_x.len(), kernel.grid_x.len());
    Ok(())
}

/// Reads `x,weight` rows and snaps each x to its grid node (within half a
/// spacing); weights must be positive and nodes distinct.
fn read_candidate(path: &Path, coeffs: &chemostat_core::model::Coefficients) -> Result<EsdCandidate> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let csv_err = |detail: String| Error::Csv { path: path.display().to_string(), detail };
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == "x,weight" => {}
        other => {
            return Err(csv_err(format!("expected header \"x,weight\", found {other:?}")));
        }
    }
    let grid = &coeffs.grid_x;
    let mut support = Vec::new();
    let mut weights = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let (Some(xs), Some(ws), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(csv_err(format!("row {}: expected two fields", lineno + 2)));
        };
        let x: f64 = xs
            .trim()
            .parse()
            .map_err(|_| csv_err(format!("row {}: bad x value {xs:?}", lineno + 2)))?;
        let w: f64 = ws
            .trim()
            .parse()
            .map_err(|_| csv_err(format!("row {}: bad weight {ws:?}", lineno + 2)))?;
        let idx = grid.nearest_node(x);
        if (grid.nodes()[idx] - x).abs() > 0.5 * grid.h() {
            return Err(csv_err(format!(
                "row {}: x = {x} is not on the grid [{}, {}] with spacing {}",
                lineno + 2,
                grid.x_min(),
                grid.x_max(),
                grid.h()
            )));
        }
        support.push(idx);
        weights.push(w);
    }
    Ok(EsdCandidate { support, weights, r_bar: None })
}

fn cmd_verify_esd(config_path: &Path, candidate_path: &Path, tolerance: f64) -> Result<()> {
    let cfg = load_config(config_path)?;
    let coeffs = build_coefficients(&cfg, None)?;
    let candidate = read_candidate(candidate_path, &coeffs)?;
    println!("model,{}", EsdReport::csv_header());
    if cfg.model.runs_chemostat() {
        let report = esd_verify(
            &candidate,
            &coeffs,
            VerifyModel::Chemostat { epsilon: cfg.scales.epsilon },
            tolerance,
        )?;
        println!("chemostat,{}", report.to_csv_row());
    }
    if cfg.model.runs_direct() {
        let kernel = reduce_kernel(&coeffs)?;
        let report = esd_verify(&candidate, &coeffs, VerifyModel::Direct(&kernel), tolerance)?;
        println!("direct,{}", report.to_csv_row());
    }
    Ok(())
}
