//! Artifact rendering and the output manifest.
//!
//! All floats are written with Rust's shortest round-trip formatting, so
//! re-parsing a CSV reproduces the exact f64 bits and reruns of a
//! deterministic experiment produce byte-identical files (the one exception
//! is the wall-clock `seconds` column of sweep.csv).

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::grid::TraitGrid;
use crate::harness::experiments::{OutFile, RatioRow, SweepRow};

fn fmt(x: f64) -> String {
    format!("{x}")
}

fn fmt_opt(x: Option<f64>) -> String {
    match x {
        Some(v) => fmt(v),
        None => String::new(),
    }
}

/// `t,mass,resource_gap,S_cr,S_dc` per sample; Lyapunov columns are blank
/// when no steady-state candidate was attached to the run.
pub fn timeseries_csv(traj: &Trajectory) -> String {
    let mut out = String::from("t,mass,resource_gap,S_cr,S_dc\n");
    for s in &traj.samples {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt(s.t),
            fmt(s.mass),
            fmt(s.resource_gap),
            fmt_opt(s.s_cr),
            fmt_opt(s.s_dc)
        ));
    }
    out
}

/// First row: the trait nodes.  Each following row: `t` then the density.
pub fn density_heatmap_csv(grid: &TraitGrid, traj: &Trajectory) -> String {
    let mut out = String::new();
    let nodes: Vec<String> = grid.nodes().iter().map(|&x| fmt(x)).collect();
    out.push_str(&nodes.join(","));
    out.push('\n');
    for state in &traj.states {
        let mut row = Vec::with_capacity(state.n.len() + 1);
        row.push(fmt(state.t));
        row.extend(state.n.iter().map(|&v| fmt(v)));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// `t,peak_count` per sample.
pub fn peaks_csv(history: &[(f64, usize)]) -> String {
    let mut out = String::from("t,peak_count\n");
    for (t, count) in history {
        out.push_str(&format!("{},{count}\n", fmt(*t)));
    }
    out
}

/// `x,n` rows for a final profile.
pub fn final_density_csv(grid: &TraitGrid, n: &[f64]) -> String {
    let mut out = String::from("x,n\n");
    for (x, v) in grid.nodes().iter().zip(n) {
        out.push_str(&format!("{},{}\n", fmt(*x), fmt(*v)));
    }
    out
}

/// The epsilon-sweep table, one row per epsilon in config order.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "epsilon,rel_error_R,l1_distance,peaks_chemostat,peaks_direct,mass_chemostat,mass_direct,seconds\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            fmt(r.epsilon),
            fmt(r.rel_error_r),
            fmt(r.l1_distance),
            r.peaks_chemostat,
            r.peaks_direct,
            fmt(r.mass_chemostat),
            fmt(r.mass_direct),
            fmt(r.seconds)
        ));
    }
    out
}

/// The ratio-study table, one row per arm.
pub fn ratio_csv(rows: &[RatioRow]) -> String {
    let mut out = String::from("arm,m,m_in,ratio,mass,l1_to_baseline,ratio_preserved\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.arm,
            fmt(r.m),
            fmt(r.m_in),
            fmt(r.ratio),
            fmt(r.mass),
            fmt(r.l1_to_baseline),
            r.ratio_preserved
        ));
    }
    out
}

/// Dense matrix CSV for a reduced kernel: header row and first column carry
/// the trait nodes (same layout the coefficient loader expects for `K`).
pub fn reduced_kernel_csv(grid: &TraitGrid, c: &nalgebra::DMatrix<f64>) -> String {
    let mut out = String::from("x");
    for &x in grid.nodes() {
        out.push(',');
        out.push_str(&fmt(x));
    }
    out.push('\n');
    for i in 0..grid.len() {
        let mut row = Vec::with_capacity(grid.len() + 1);
        row.push(fmt(grid.nodes()[i]));
        for j in 0..grid.len() {
            row.push(fmt(c[(i, j)]));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// One manifest entry per artifact.
#[derive(Debug, Clone, Serialize)]
pub struct ManifestEntry {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

/// `manifest.json`: the config hash plus every artifact with its own hash.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub config_sha256: String,
    pub files: Vec<ManifestEntry>,
}

/// Hex-encoded SHA-256, as recorded in `manifest.json`.
pub fn sha256_hex(data: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(data);
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for b in digest {
        hex.push_str(&format!("{b:02x}"));
    }
    hex
}

/// Writes every artifact plus `manifest.json` into `dir` (created if
/// needed).  Rerunning with identical inputs rewrites identical bytes.
/// Returns the manifest and the paths written.
pub fn write_outputs(dir: &Path, files: &[OutFile], config_bytes: &[u8]) -> Result<(Manifest, Vec<PathBuf>)> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let mut entries = Vec::with_capacity(files.len());
    let mut paths = Vec::with_capacity(files.len() + 1);
    for f in files {
        let path = dir.join(&f.name);
        std::fs::write(&path, f.contents.as_bytes())
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        entries.push(ManifestEntry {
            name: f.name.clone(),
            bytes: f.contents.len(),
            sha256: sha256_hex(f.contents.as_bytes()),
        });
        paths.push(path);
    }
    entries.sort_by(|a, b| a.name.cmp(&b.name));
    let manifest = Manifest { config_sha256: sha256_hex(config_bytes), files: entries };
    let manifest_path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&manifest_path, json.as_bytes())
        .map_err(|e| Error::io(manifest_path.display().to_string(), e))?;
    paths.push(manifest_path);
    Ok((manifest, paths))
}
