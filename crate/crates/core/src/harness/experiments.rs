//! Experiment drivers: single runs, epsilon sweeps, ratio studies and
//! branching (peak-count) studies, all built from a [`RunConfig`].

use std::time::Instant;

use crate::diagnostics::{l1_distance, peak_count, rel_error_r, PeakSummary};
use crate::dynamics::{initial_condition_gaussian, run, Model, ScaleParams, State, Trajectory};
use crate::error::{Error, Result};
use crate::grid::TraitGrid;
use crate::harness::config::{CoefficientSpec, ExperimentSpec, RunConfig};
use crate::harness::output;
use crate::model::{reduce_kernel, Coefficients, ReducedKernel};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Relative height below which a local maximum does not count as a peak.
pub const PEAK_THRESHOLD: f64 = 0.1;

/// One produced artifact, by file name.
#[derive(Debug, Clone, PartialEq)]
pub struct OutFile {
    pub name: String,
    pub contents: String,
}

/// Everything an experiment produces: artifacts plus a human summary.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub files: Vec<OutFile>,
    pub summary: String,
}

/// Maps over items, in parallel when the `parallel` feature is enabled; the
/// output order always matches the input order.
fn map_ordered<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().map(f).collect()
    }
}

/// Instantiates the coefficient tables, optionally overriding `(m, m_in)`
/// for a ratio-study arm.
pub fn build_coefficients(
    cfg: &RunConfig,
    arm_override: Option<(f64, f64)>,
) -> Result<Coefficients> {
    let grid_x = TraitGrid::new(cfg.grid_x.min, cfg.grid_x.max, cfg.grid_x.points)?;
    let grid_y = TraitGrid::new(cfg.grid_y.min, cfg.grid_y.max, cfg.grid_y.points)?;
    match &cfg.coefficients {
        CoefficientSpec::Gaussian { sigma_k, sigma_in, m_in, m } => {
            let (m_val, m_in_val) = match arm_override {
                Some((m_arm, m_in_arm)) => (m_arm, m_in_arm),
                None => (*m, *m_in),
            };
            Coefficients::gaussian_normalized(grid_x, grid_y, *sigma_k, *sigma_in, m_in_val, m_val)
        }
        CoefficientSpec::Csv { xa, ymr, k } => {
            if arm_override.is_some() {
                return Err(Error::Config(
                    "ratio-study arm overrides require gaussian coefficients".into(),
                ));
            }
            let coeffs = Coefficients::from_csv_files(
                &cfg.resolve_path(xa),
                &cfg.resolve_path(ymr),
                &cfg.resolve_path(k),
            )?;
            for (name, want, got) in
                [("grid_x", &grid_x, &coeffs.grid_x), ("grid_y", &grid_y, &coeffs.grid_y)]
            {
                if want.len() != got.len()
                    || (want.x_min() - got.x_min()).abs() > 1e-9
                    || (want.x_max() - got.x_max()).abs() > 1e-9
                {
                    return Err(Error::Config(format!(
                        "{name} in the config ([{}, {}] x {}) does not match the CSV tables ([{}, {}] x {})",
                        want.x_min(), want.x_max(), want.len(),
                        got.x_min(), got.x_max(), got.len()
                    )));
                }
            }
            Ok(coeffs)
        }
    }
}

/// Initial state from the config: normalized Gaussian consumers, scaled
/// inflow as the starting resource.
pub fn build_initial(cfg: &RunConfig, coeffs: &Coefficients) -> Result<State> {
    let n0 = initial_condition_gaussian(
        &coeffs.grid_x,
        cfg.initial.center,
        cfg.initial.variance,
        cfg.initial.mass,
    )?;
    let r0: Vec<f64> = coeffs.r_in.iter().map(|r| r * cfg.initial.r0_scale).collect();
    Ok(State::new(n0, r0))
}

fn scales_with(cfg: &RunConfig, epsilon: f64) -> Result<ScaleParams> {
    ScaleParams::new(epsilon, cfg.scales.mu)
}

fn run_one(
    cfg: &RunConfig,
    model: Model,
    coeffs: &Coefficients,
    kernel: Option<&ReducedKernel>,
    epsilon: f64,
) -> Result<Trajectory> {
    let scales = scales_with(cfg, epsilon)?;
    let initial = build_initial(cfg, coeffs)?;
    run(
        model,
        coeffs,
        kernel,
        &scales,
        initial,
        cfg.time.t_end,
        cfg.time.dt,
        cfg.time.sample_every,
        None,
    )
}

/// Chemostat and direct trajectories from the same data, with the
/// comparison metrics evaluated at the final time.
#[derive(Debug, Clone)]
pub struct ModelComparison {
    pub epsilon: f64,
    pub chemostat: Trajectory,
    pub direct: Trajectory,
    pub rel_error_r: f64,
    pub l1_distance: f64,
    pub peaks_chemostat: PeakSummary,
    pub peaks_direct: PeakSummary,
    pub mass_chemostat: f64,
    pub mass_direct: f64,
}

/// Runs both models at the given `epsilon` (the config's own epsilon is
/// ignored) and compares the endpoints.
pub fn run_model_comparison(cfg: &RunConfig, epsilon: f64) -> Result<ModelComparison> {
    let coeffs = build_coefficients(cfg, None)?;
    let kernel = reduce_kernel(&coeffs)?;
    run_model_comparison_with(cfg, &coeffs, &kernel, epsilon)
}

/// As [`run_model_comparison`], reusing prebuilt tables (sweeps share them).
pub fn run_model_comparison_with(
    cfg: &RunConfig,
    coeffs: &Coefficients,
    kernel: &ReducedKernel,
    epsilon: f64,
) -> Result<ModelComparison> {
    let chemostat = run_one(cfg, Model::Chemostat, coeffs, Some(kernel), epsilon)?;
    let direct = run_one(cfg, Model::Direct, coeffs, Some(kernel), epsilon)?;
    let nc = &chemostat.final_state().n;
    let nd = &direct.final_state().n;
    let grid = &coeffs.grid_x;
    Ok(ModelComparison {
        epsilon,
        rel_error_r: rel_error_r(&chemostat.final_state().r, coeffs),
        l1_distance: l1_distance(nc, nd, grid),
        peaks_chemostat: peak_count(nc, grid, PEAK_THRESHOLD),
        peaks_direct: peak_count(nd, grid, PEAK_THRESHOLD),
        mass_chemostat: grid.integrate(nc),
        mass_direct: grid.integrate(nd),
        chemostat,
        direct,
    })
}

/// One row of an epsilon sweep.  A failed row records its error and NaN
/// metrics instead of aborting the remaining rows.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub epsilon: f64,
    pub rel_error_r: f64,
    pub l1_distance: f64,
    pub peaks_chemostat: usize,
    pub peaks_direct: usize,
    pub mass_chemostat: f64,
    pub mass_direct: f64,
    pub seconds: f64,
    pub error: Option<String>,
}

/// Runs the model comparison at every epsilon in the config (rows are
/// independent and run in parallel under the `parallel` feature; the output
/// order is the config order).
pub fn run_epsilon_sweep(cfg: &RunConfig) -> Result<Vec<SweepRow>> {
    let epsilons = match &cfg.experiment {
        ExperimentSpec::EpsilonSweep { epsilons } => epsilons.clone(),
        _ => return Err(Error::Config("config does not describe an epsilon sweep".into())),
    };
    let coeffs = build_coefficients(cfg, None)?;
    let kernel = reduce_kernel(&coeffs)?;
    let rows = map_ordered(epsilons, |epsilon| {
        let started = Instant::now();
        match run_model_comparison_with(cfg, &coeffs, &kernel, epsilon) {
            Ok(cmp) => SweepRow {
                epsilon,
                rel_error_r: cmp.rel_error_r,
                l1_distance: cmp.l1_distance,
                peaks_chemostat: cmp.peaks_chemostat.count,
                peaks_direct: cmp.peaks_direct.count,
                mass_chemostat: cmp.mass_chemostat,
                mass_direct: cmp.mass_direct,
                seconds: started.elapsed().as_secs_f64(),
                error: None,
            },
            Err(e) => SweepRow {
                epsilon,
                rel_error_r: f64::NAN,
                l1_distance: f64::NAN,
                peaks_chemostat: 0,
                peaks_direct: 0,
                mass_chemostat: f64::NAN,
                mass_direct: f64::NAN,
                seconds: started.elapsed().as_secs_f64(),
                error: Some(e.to_string()),
            },
        }
    });
    Ok(rows)
}

/// One arm of a ratio study, compared against the first arm.
#[derive(Debug, Clone)]
pub struct RatioRow {
    pub arm: usize,
    pub m: f64,
    pub m_in: f64,
    pub ratio: f64,
    pub mass: f64,
    pub l1_to_baseline: f64,
    pub ratio_preserved: bool,
}

/// Ratio-study result: per-arm metrics plus the final chemostat densities.
#[derive(Debug, Clone)]
pub struct RatioStudy {
    pub rows: Vec<RatioRow>,
    pub finals: Vec<Vec<f64>>,
    pub grid: TraitGrid,
}

/// Integrates the chemostat for every `(m, m_in)` arm and measures the L1
/// distance of each final density to the first arm's.  Arms sharing the
/// baseline's `m_in/m` ratio have identical reduced kernels, so the direct
/// limit predicts they should stay close.
pub fn run_ratio_study(cfg: &RunConfig) -> Result<RatioStudy> {
    let arms = match &cfg.experiment {
        ExperimentSpec::RatioStudy { arms } => arms.clone(),
        _ => return Err(Error::Config("config does not describe a ratio study".into())),
    };
    let runs: Vec<Result<(Coefficients, Trajectory)>> = map_ordered(arms.clone(), |arm| {
        let coeffs = build_coefficients(cfg, Some((arm.m, arm.m_in)))?;
        let traj = run_one(cfg, Model::Chemostat, &coeffs, None, cfg.scales.epsilon)?;
        Ok((coeffs, traj))
    });
    let mut finals = Vec::new();
    let mut grid = None;
    for r in runs {
        let (coeffs, traj) = r?;
        finals.push(traj.final_state().n.clone());
        grid.get_or_insert(coeffs.grid_x);
    }
    let grid = grid.expect("validated: at least one arm");
    let base_ratio = arms[0].m_in / arms[0].m;
    let rows = arms
        .iter()
        .enumerate()
        .map(|(i, arm)| {
            let ratio = arm.m_in / arm.m;
            RatioRow {
                arm: i,
                m: arm.m,
                m_in: arm.m_in,
                ratio,
                mass: grid.integrate(&finals[i]),
                l1_to_baseline: l1_distance(&finals[i], &finals[0], &grid),
                ratio_preserved: (ratio - base_ratio).abs() <= 1e-12 * base_ratio.abs(),
            }
        })
        .collect();
    Ok(RatioStudy { rows, finals, grid })
}

/// Peak-count history of a trajectory at the standard threshold.
pub fn peak_history(traj: &Trajectory, grid: &TraitGrid) -> Vec<(f64, usize)> {
    traj.states
        .iter()
        .map(|s| (s.t, peak_count(&s.n, grid, PEAK_THRESHOLD).count))
        .collect()
}

fn describe_peaks(history: &[(f64, usize)]) -> String {
    let mut parts = Vec::new();
    for w in history.windows(2) {
        if w[0].1 != w[1].1 {
            parts.push(format!("{} -> {} at t = {}", w[0].1, w[1].1, w[1].0));
        }
    }
    if parts.is_empty() {
        format!("stays at {}", history.first().map(|p| p.1).unwrap_or(0))
    } else {
        parts.join(", ")
    }
}

fn selected_models(cfg: &RunConfig) -> Vec<Model> {
    let mut models = Vec::new();
    if cfg.model.runs_chemostat() {
        models.push(Model::Chemostat);
    }
    if cfg.model.runs_direct() {
        models.push(Model::Direct);
    }
    models
}

fn model_tag(model: Model) -> &'static str {
    match model {
        Model::Chemostat => "chemostat",
        Model::Direct => "direct",
    }
}

/// Runs the experiment described by the config and renders every artifact
/// it defines (file contents only; see [`output::write_outputs`]).
pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    match &cfg.experiment {
        ExperimentSpec::Single => run_single(cfg),
        ExperimentSpec::Branching => run_branching(cfg),
        ExperimentSpec::EpsilonSweep { .. } => {
            let rows = run_epsilon_sweep(cfg)?;
            let mut summary = String::new();
            for row in &rows {
                match &row.error {
                    None => summary.push_str(&format!(
                        "epsilon = {}: rel_error_R = {}, l1 = {}, peaks = {}/{}\n",
                        row.epsilon,
                        row.rel_error_r,
                        row.l1_distance,
                        row.peaks_chemostat,
                        row.peaks_direct
                    )),
                    Some(e) => {
                        summary.push_str(&format!("epsilon = {}: FAILED: {e}\n", row.epsilon))
                    }
                }
            }
            let files = vec![OutFile { name: "sweep.csv".into(), contents: output::sweep_csv(&rows) }];
            Ok(ExperimentOutcome { files, summary })
        }
        ExperimentSpec::RatioStudy { .. } => {
            let study = run_ratio_study(cfg)?;
            let mut files = vec![OutFile {
                name: "ratio_study.csv".into(),
                contents: output::ratio_csv(&study.rows),
            }];
            for (i, n) in study.finals.iter().enumerate() {
                files.push(OutFile {
                    name: format!("final_density_arm{i}.csv"),
                    contents: output::final_density_csv(&study.grid, n),
                });
            }
            let mut summary = String::new();
            for row in &study.rows {
                summary.push_str(&format!(
                    "arm {}: m = {}, m_in = {}, ratio = {} ({}), l1 to baseline = {}\n",
                    row.arm,
                    row.m,
                    row.m_in,
                    row.ratio,
                    if row.ratio_preserved { "preserved" } else { "changed" },
                    row.l1_to_baseline
                ));
            }
            Ok(ExperimentOutcome { files, summary })
        }
    }
}

fn run_single(cfg: &RunConfig) -> Result<ExperimentOutcome> {
    let coeffs = build_coefficients(cfg, None)?;
    let models = selected_models(cfg);
    let kernel = if cfg.model.runs_direct() { Some(reduce_kernel(&coeffs)?) } else { None };
    let mut files = Vec::new();
    let mut summary = String::new();
    for model in models {
        let traj = run_one(cfg, model, &coeffs, kernel.as_ref(), cfg.scales.epsilon)?;
        let tag = model_tag(model);
        files.push(OutFile {
            name: format!("timeseries_{tag}.csv"),
            contents: output::timeseries_csv(&traj),
        });
        files.push(OutFile {
            name: format!("final_density_{tag}.csv"),
            contents: output::final_density_csv(&coeffs.grid_x, &traj.final_state().n),
        });
        let last = traj.samples.last().expect("at least one sample");
        summary.push_str(&format!(
            "{tag}: final mass = {}, resource gap = {}\n",
            last.mass, last.resource_gap
        ));
    }
    Ok(ExperimentOutcome { files, summary })
}

fn run_branching(cfg: &RunConfig) -> Result<ExperimentOutcome> {
    let coeffs = build_coefficients(cfg, None)?;
    let models = selected_models(cfg);
    let kernel = if cfg.model.runs_direct() { Some(reduce_kernel(&coeffs)?) } else { None };
    let mut files = Vec::new();
    let mut summary = String::new();
    for model in models {
        let traj = run_one(cfg, model, &coeffs, kernel.as_ref(), cfg.scales.epsilon)?;
        let tag = model_tag(model);
        let history = peak_history(&traj, &coeffs.grid_x);
        files.push(OutFile {
            name: format!("density_heatmap_{tag}.csv"),
            contents: output::density_heatmap_csv(&coeffs.grid_x, &traj),
        });
        files.push(OutFile {
            name: format!("peaks_{tag}.csv"),
            contents: output::peaks_csv(&history),
        });
        files.push(OutFile {
            name: format!("timeseries_{tag}.csv"),
            contents: output::timeseries_csv(&traj),
        });
        summary.push_str(&format!("{tag}: peaks {}\n", describe_peaks(&history)));
    }
    Ok(ExperimentOutcome { files, summary })
}
