//! Time integration for the chemostat and the direct-competition model.
//!
//! Both models advance in rescaled time `dt_eff = dt / mu` when mutations are
//! on (`mu > 0`) and `dt_eff = dt` otherwise, by an operator splitting:
//!
//! 1. resource relaxation, solved exactly over the substep with the uptake
//!    integral frozen (chemostat only),
//! 2. exponential Euler for the multiplicative growth term `n <- n exp(G dt)`,
//! 3. implicit diffusion `(I - dt mu Laplacian) n = n` for the mutation term.
//!
//! The splitting keeps `n` positive unconditionally and keeps `R` inside
//! `[0, max(R0, R_in)]`, so the only stability constraint is accuracy of the
//! frozen-coefficient substeps; a guard halves `dt` recursively whenever the
//! growth exponent `dt_eff * max|G|` exceeds [`STABILITY_GUARD`].

use crate::diagnostics::{self, EsdCandidate};
use crate::error::{Error, Result};
use crate::grid::TraitGrid;
use crate::model::{Coefficients, ReducedKernel};

/// Which of the two models to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Chemostat,
    Direct,
}

/// Timescale separation `epsilon` and mutation size `mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleParams {
    pub epsilon: f64,
    pub mu: f64,
}

impl ScaleParams {
    pub fn new(epsilon: f64, mu: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::Config(format!("epsilon must be positive and finite, got {epsilon}")));
        }
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(Error::Config(format!("mu must be nonnegative and finite, got {mu}")));
        }
        Ok(Self { epsilon, mu })
    }

    /// Effective step in rescaled time: `dt/mu` with mutations, `dt` without.
    pub fn dt_eff(&self, dt: f64) -> f64 {
        if self.mu > 0.0 {
            dt / self.mu
        } else {
            dt
        }
    }
}

/// Densities at one instant: consumer `n` on the trait grid, resource `r` on
/// the resource grid (carried unchanged by the direct model).
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub n: Vec<f64>,
    pub r: Vec<f64>,
    pub t: f64,
}

impl State {
    pub fn new(n: Vec<f64>, r: Vec<f64>) -> Self {
        Self { n, r, t: 0.0 }
    }
}

/// Growth exponents above this trigger adaptive halving of the step.
pub const STABILITY_GUARD: f64 = 5.0;
/// Densities are kept at or above this once positive; exact zeros stay zero.
pub const MIN_DENSITY: f64 = 1e-300;

const MAX_HALVINGS: u32 = 60;

/// One sampled row of diagnostics along a trajectory.
#[derive(Debug, Clone)]
pub struct Sample {
    pub t: f64,
    pub mass: f64,
    pub resource_gap: f64,
    pub s_cr: Option<f64>,
    pub s_dc: Option<f64>,
}

/// Sampled output of [`run`]: states and diagnostics at the sample times.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub model: Model,
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub samples: Vec<Sample>,
}

impl Trajectory {
    pub fn final_state(&self) -> &State {
        self.states.last().expect("trajectory has at least the initial state")
    }
}

/// Mass-normalized Gaussian bump: `n(x) = C exp(-(x-center)^2 / (2 variance))`
/// scaled so its trapezoid mass on the grid equals `mass` exactly.
pub fn initial_condition_gaussian(
    grid: &TraitGrid,
    center: f64,
    variance: f64,
    mass: f64,
) -> Result<Vec<f64>> {
    if !center.is_finite() || !(variance > 0.0) || !(mass > 0.0) {
        return Err(Error::Config(format!(
            "initial condition needs finite center, positive variance and mass; got center = {center}, variance = {variance}, mass = {mass}"
        )));
    }
    let raw: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&x| {
            let d = x - center;
            (-d * d / (2.0 * variance)).exp()
        })
        .collect();
    let raw_mass = grid.integrate(&raw);
    if !(raw_mass > 0.0) {
        return Err(Error::Config(format!(
            "initial Gaussian at center {center} underflows everywhere on [{}, {}]",
            grid.x_min(),
            grid.x_max()
        )));
    }
    let scale = mass / raw_mass;
    Ok(raw.iter().map(|v| v * scale).collect())
}

pub use crate::model::uptake;

fn check_state(coeffs: &Coefficients, state: &State) -> Result<()> {
    if state.n.len() != coeffs.grid_x.len() || state.r.len() != coeffs.grid_y.len() {
        return Err(Error::DimensionMismatch(format!(
            "state has n: {}, r: {} for grids {} x {}",
            state.n.len(),
            state.r.len(),
            coeffs.grid_x.len(),
            coeffs.grid_y.len()
        )));
    }
    Ok(())
}

fn check_finite(values: &[f64], what: &str, t: f64) -> Result<()> {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::BlowUp { t, detail: format!("{what} became non-finite at node {i}") });
    }
    Ok(())
}

/// Growth-stage update shared by both models; keeps positive entries at or
/// above [`MIN_DENSITY`] and leaves exact zeros untouched.
fn apply_growth(n: &[f64], g: &[f64], dt_eff: f64) -> Vec<f64> {
    n.iter()
        .zip(g)
        .map(|(&ni, &gi)| {
            if ni > 0.0 {
                (ni * (dt_eff * gi).exp()).max(MIN_DENSITY)
            } else {
                0.0
            }
        })
        .collect()
}

/// Implicit diffusion stage; re-floors entries that were already positive.
fn apply_diffusion(grid: &TraitGrid, scales: &ScaleParams, dt: f64, n: Vec<f64>) -> Vec<f64> {
    if scales.mu == 0.0 {
        return n;
    }
    // Mutation term is mu^2 Laplacian in rescaled time dt_eff = dt/mu, hence
    // the solve coefficient dt_eff * mu^2 = dt * mu.
    let mut out = grid.solve_diffusion(dt * scales.mu, &n);
    for (post, pre) in out.iter_mut().zip(&n) {
        if *pre > 0.0 && *post < MIN_DENSITY {
            *post = MIN_DENSITY;
        }
    }
    out
}

fn chemostat_step_inner(
    state: &State,
    coeffs: &Coefficients,
    scales: &ScaleParams,
    dt: f64,
) -> Result<(State, f64)> {
    let eps = scales.epsilon;
    let dt_eff = scales.dt_eff(dt);
    let u = uptake(coeffs, &state.n);

    // Stage 1: exact resource relaxation with frozen uptake.
    // R' = (m/eps^2)(R_in - R) - (1/eps) U R relaxes to r_star at rate lambda.
    let ny = coeffs.grid_y.len();
    let mut r_new = vec![0.0; ny];
    for j in 0..ny {
        let lambda = coeffs.m[j] / (eps * eps) + u[j] / eps;
        let r_star = (coeffs.m[j] / (eps * eps)) * coeffs.r_in[j] / lambda;
        r_new[j] = r_star + (state.r[j] - r_star) * (-lambda * dt_eff).exp();
    }
    check_finite(&r_new, "resource", state.t)?;

    // Stage 2: growth at the relaxed resource.
    let wy = coeffs.grid_y.weights();
    let nx = coeffs.grid_x.len();
    let mut g = vec![0.0; nx];
    let mut max_exp = 0.0_f64;
    for i in 0..nx {
        let mut coupling = 0.0;
        for j in 0..ny {
            coupling += wy[j] * coeffs.k[(i, j)] * (r_new[j] - coeffs.r_in[j]);
        }
        g[i] = coeffs.a[i] + coupling / eps;
        max_exp = max_exp.max((dt_eff * g[i]).abs());
    }
    check_finite(&g, "growth rate", state.t)?;
    let n_grown = apply_growth(&state.n, &g, dt_eff);

    // Stage 3: mutation diffusion.
    let n_new = apply_diffusion(&coeffs.grid_x, scales, dt, n_grown);
    Ok((State { n: n_new, r: r_new, t: state.t + dt }, max_exp))
}

fn direct_step_inner(
    state: &State,
    coeffs: &Coefficients,
    kernel: &ReducedKernel,
    scales: &ScaleParams,
    dt: f64,
) -> Result<(State, f64)> {
    let dt_eff = scales.dt_eff(dt);
    let nx = coeffs.grid_x.len();
    let wx = coeffs.grid_x.weights();
    let wn: Vec<f64> = wx.iter().zip(&state.n).map(|(w, n)| w * n).collect();
    let mut g = vec![0.0; nx];
    let mut max_exp = 0.0_f64;
    for i in 0..nx {
        let mut comp = 0.0;
        for (j, &wnj) in wn.iter().enumerate() {
            comp += kernel.c[(i, j)] * wnj;
        }
        g[i] = coeffs.a[i] - comp;
        max_exp = max_exp.max((dt_eff * g[i]).abs());
    }
    check_finite(&g, "growth rate", state.t)?;
    let n_grown = apply_growth(&state.n, &g, dt_eff);
    let n_new = apply_diffusion(&coeffs.grid_x, scales, dt, n_grown);
    Ok((State { n: n_new, r: state.r.clone(), t: state.t + dt }, max_exp))
}

/// One chemostat step of size `dt` (no stability guard; see [`run`]).
pub fn step_chemostat(
    state: &State,
    coeffs: &Coefficients,
    scales: &ScaleParams,
    dt: f64,
) -> Result<State> {
    check_state(coeffs, state)?;
    Ok(chemostat_step_inner(state, coeffs, scales, dt)?.0)
}

/// One direct-competition step of size `dt` (no stability guard; see [`run`]).
pub fn step_direct(
    state: &State,
    coeffs: &Coefficients,
    kernel: &ReducedKernel,
    scales: &ScaleParams,
    dt: f64,
) -> Result<State> {
    check_state(coeffs, state)?;
    if kernel.grid_x.len() != coeffs.grid_x.len() {
        return Err(Error::DimensionMismatch(format!(
            "reduced kernel is on {} nodes, coefficients on {}",
            kernel.grid_x.len(),
            coeffs.grid_x.len()
        )));
    }
    Ok(direct_step_inner(state, coeffs, kernel, scales, dt)?.0)
}

fn advance_guarded(
    model: Model,
    coeffs: &Coefficients,
    kernel: Option<&ReducedKernel>,
    scales: &ScaleParams,
    state: State,
    dt: f64,
    depth: u32,
) -> Result<State> {
    let (next, max_exp) = match model {
        Model::Chemostat => chemostat_step_inner(&state, coeffs, scales, dt)?,
        Model::Direct => direct_step_inner(
            &state,
            coeffs,
            kernel.expect("checked by run"),
            scales,
            dt,
        )?,
    };
    if max_exp <= STABILITY_GUARD {
        return Ok(next);
    }
    if depth >= MAX_HALVINGS {
        return Err(Error::BlowUp {
            t: state.t,
            detail: format!(
                "growth exponent {max_exp} still exceeds the stability guard {STABILITY_GUARD} after {MAX_HALVINGS} step halvings"
            ),
        });
    }
    let mid = advance_guarded(model, coeffs, kernel, scales, state, 0.5 * dt, depth + 1)?;
    advance_guarded(model, coeffs, kernel, scales, mid, 0.5 * dt, depth + 1)
}

/// Integrates from `initial` to `t_end`, sampling every `sample_every` steps
/// (the initial state and the final state are always sampled).
///
/// When `esd` is given, the matching Lyapunov functional is evaluated at each
/// sample: the resource-competition one for the chemostat (computing the
/// steady resource from the candidate if it lacks one) and the
/// direct-competition one for the direct model.
#[allow(clippy::too_many_arguments)]
pub fn run(
    model: Model,
    coeffs: &Coefficients,
    kernel: Option<&ReducedKernel>,
    scales: &ScaleParams,
    initial: State,
    t_end: f64,
    dt: f64,
    sample_every: usize,
    esd: Option<&EsdCandidate>,
) -> Result<Trajectory> {
    coeffs.validate()?;
    check_state(coeffs, &initial)?;
    if !(dt > 0.0) || !dt.is_finite() || !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::Config(format!(
            "need positive finite dt and t_end, got dt = {dt}, t_end = {t_end}"
        )));
    }
    if sample_every == 0 {
        return Err(Error::Config("sample_every must be at least 1".into()));
    }
    if model == Model::Direct && kernel.is_none() {
        return Err(Error::Config("the direct model requires a reduced kernel".into()));
    }
    if let Some(i) = initial.n.iter().chain(initial.r.iter()).position(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::Config(format!(
            "initial densities must be nonnegative and finite (offending flat index {i})"
        )));
    }

    // Enrich the candidate with its steady resource once, so per-sample
    // Lyapunov evaluations are cheap and consistent.
    let enriched: Option<EsdCandidate> = match (model, esd) {
        (Model::Chemostat, Some(cand)) if cand.r_bar.is_none() => {
            let mut owned = cand.clone();
            owned.r_bar = Some(diagnostics::steady_resource(
                &cand.dense_density(&coeffs.grid_x)?,
                coeffs,
                scales.epsilon,
            ));
            Some(owned)
        }
        (_, Some(cand)) => Some(cand.clone()),
        (_, None) => None,
    };

    let r_cap: Vec<f64> = initial
        .r
        .iter()
        .zip(&coeffs.r_in)
        .map(|(r0, rin)| r0.max(*rin))
        .collect();

    let n_steps = ((t_end / dt) - 1e-9).ceil().max(1.0) as usize;
    let mut traj = Trajectory { model, times: Vec::new(), states: Vec::new(), samples: Vec::new() };
    let mut state = initial;
    state.t = 0.0;

    record_sample(&mut traj, &state, model, coeffs, enriched.as_ref())?;
    for k in 0..n_steps {
        let step_dt = if k + 1 == n_steps { t_end - state.t } else { dt };
        if !(step_dt > 0.0) {
            break;
        }
        state = advance_guarded(model, coeffs, kernel, scales, state, step_dt, 0)?;
        debug_assert!(state.n.iter().all(|&v| v >= 0.0), "density positivity violated");
        debug_assert!(
            model == Model::Direct
                || state.r.iter().zip(&r_cap).all(|(r, cap)| *r <= cap + 1e-12),
            "resource exceeded max(R0, R_in)"
        );
        if (k + 1) % sample_every == 0 || k + 1 == n_steps {
            record_sample(&mut traj, &state, model, coeffs, enriched.as_ref())?;
        }
    }
    Ok(traj)
}

fn record_sample(
    traj: &mut Trajectory,
    state: &State,
    model: Model,
    coeffs: &Coefficients,
    esd: Option<&EsdCandidate>,
) -> Result<()> {
    let mass = coeffs.grid_x.integrate(&state.n);
    let resource_gap = diagnostics::resource_gap(&state.r, coeffs);
    let (s_cr, s_dc) = match (model, esd) {
        (Model::Chemostat, Some(cand)) => (
            Some(diagnostics::lyapunov_cr(&state.n, &state.r, cand, coeffs)?),
            None,
        ),
        (Model::Direct, Some(cand)) => {
            (None, Some(diagnostics::lyapunov_dc(&state.n, cand, coeffs)?))
        }
        _ => (None, None),
    };
    traj.times.push(state.t);
    traj.states.push(state.clone());
    traj.samples.push(Sample { t: state.t, mass, resource_gap, s_cr, s_dc });
    Ok(())
}
