//! Trajectory diagnostics, steady-state candidates and Lyapunov functionals.
//!
//! A steady state of either model concentrates on a support set where the
//! invasion fitness vanishes; off the support the fitness must be
//! nonpositive (the evolutionary stability condition).  This module solves
//! for candidate weights on a proposed support, verifies candidates against
//! either model, and evaluates the two Lyapunov functionals
//!
//! ```text
//! S_cr = -Int nbar ln n - Int Rbar ln R + Int n + Int R      (chemostat)
//! S_dc = -Int nbar ln n + Int n                              (direct)
//! ```
//!
//! together with their dissipation rates.

use crate::error::{Error, Result};
use crate::grid::TraitGrid;
use crate::model::{uptake, Coefficients, ReducedKernel};

/// Total population `Integral n dx`.
pub fn mass(n: &[f64], grid: &TraitGrid) -> f64 {
    grid.integrate(n)
}

/// `Integral |R - R_in| dy`: how far the resource is from its inflow profile.
pub fn resource_gap(r: &[f64], coeffs: &Coefficients) -> f64 {
    let diff: Vec<f64> = r.iter().zip(&coeffs.r_in).map(|(a, b)| (a - b).abs()).collect();
    coeffs.grid_y.integrate(&diff)
}

/// Resource gap relative to the inflow mass `Integral R_in dy`.
pub fn rel_error_r(r: &[f64], coeffs: &Coefficients) -> f64 {
    resource_gap(r, coeffs) / coeffs.grid_y.integrate(&coeffs.r_in)
}

/// `Integral |n1 - n2| dx`.
pub fn l1_distance(n1: &[f64], n2: &[f64], grid: &TraitGrid) -> f64 {
    assert_eq!(n1.len(), n2.len(), "l1_distance: length mismatch {} vs {}", n1.len(), n2.len());
    let diff: Vec<f64> = n1.iter().zip(n2).map(|(a, b)| (a - b).abs()).collect();
    grid.integrate(&diff)
}

/// Hopf-Cole transform `u = mu ln n` (`-inf` where `n = 0`), the natural
/// scale on which mutation-limited dynamics move at O(1) speed.
pub fn hopf_cole(n: &[f64], mu: f64) -> Vec<f64> {
    n.iter().map(|&v| if v > 0.0 { mu * v.ln() } else { f64::NEG_INFINITY }).collect()
}

/// Peak census of a density profile.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakSummary {
    pub count: usize,
    pub indices: Vec<usize>,
    pub locations: Vec<f64>,
}

/// Counts strict local maxima at least `rel_threshold` times the global
/// maximum.  Boundary nodes count (the outside is treated as empty) and a
/// flat plateau counts once, at its leftmost node.
pub fn peak_count(n: &[f64], grid: &TraitGrid, rel_threshold: f64) -> PeakSummary {
    assert_eq!(n.len(), grid.len(), "peak_count: density length {} vs grid {}", n.len(), grid.len());
    assert!(
        rel_threshold > 0.0 && rel_threshold < 1.0,
        "peak_count: rel_threshold must be in (0, 1), got {rel_threshold}"
    );
    let max = n.iter().cloned().fold(0.0_f64, f64::max);
    let mut indices = Vec::new();
    if max > 0.0 {
        let cut = rel_threshold * max;
        let len = n.len();
        for i in 0..len {
            let left = if i == 0 { f64::NEG_INFINITY } else { n[i - 1] };
            let right = if i + 1 == len { f64::NEG_INFINITY } else { n[i + 1] };
            // Strictly above the left neighbor, at least the right one: a
            // plateau registers only at its leftmost node.
            if n[i] >= cut && n[i] > left && n[i] >= right {
                indices.push(i);
            }
        }
    }
    let locations = indices.iter().map(|&i| grid.nodes()[i]).collect();
    PeakSummary { count: indices.len(), indices, locations }
}

/// A candidate steady state: node indices carrying mass, the density values
/// there and, for the chemostat, the steady resource profile.
#[derive(Debug, Clone, PartialEq)]
pub struct EsdCandidate {
    pub support: Vec<usize>,
    pub weights: Vec<f64>,
    pub r_bar: Option<Vec<f64>>,
}

impl EsdCandidate {
    /// Relative threshold below which a node does not count as support when
    /// extracting a candidate from a dense profile.
    pub const SUPPORT_THRESHOLD: f64 = 1e-12;

    /// Extracts support and weights from a dense profile: every node whose
    /// value exceeds [`Self::SUPPORT_THRESHOLD`] times the maximum.
    pub fn from_dense(n: &[f64], grid: &TraitGrid) -> Result<Self> {
        assert_eq!(n.len(), grid.len(), "from_dense: length {} vs grid {}", n.len(), grid.len());
        let max = n.iter().cloned().fold(0.0_f64, f64::max);
        if !(max > 0.0) {
            return Err(Error::InfeasibleSupport { node: 0, x: grid.nodes()[0], weight: 0.0 });
        }
        let cut = Self::SUPPORT_THRESHOLD * max;
        let mut support = Vec::new();
        let mut weights = Vec::new();
        for (i, &v) in n.iter().enumerate() {
            if v > cut {
                support.push(i);
                weights.push(v);
            }
        }
        Ok(Self { support, weights, r_bar: None })
    }

    /// Validates indices and weights and expands to a dense profile (zeros
    /// off the support).
    pub fn dense_density(&self, grid: &TraitGrid) -> Result<Vec<f64>> {
        if self.support.len() != self.weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "candidate has {} support nodes but {} weights",
                self.support.len(),
                self.weights.len()
            )));
        }
        let mut dense = vec![0.0; grid.len()];
        for (&i, &w) in self.support.iter().zip(&self.weights) {
            if i >= grid.len() {
                return Err(Error::DimensionMismatch(format!(
                    "support index {i} is outside the {}-node grid",
                    grid.len()
                )));
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::InfeasibleSupport { node: i, x: grid.nodes()[i], weight: w });
            }
            if dense[i] != 0.0 {
                return Err(Error::DimensionMismatch(format!("support index {i} repeats")));
            }
            dense[i] = w;
        }
        Ok(dense)
    }
}

/// Steady resource induced by a consumer profile:
/// `Rbar = R_in / (1 + (eps/m) U[nbar])`, the exact balance of inflow,
/// decay and uptake.
pub fn steady_resource(n_dense: &[f64], coeffs: &Coefficients, epsilon: f64) -> Vec<f64> {
    let u = uptake(coeffs, n_dense);
    coeffs
        .r_in
        .iter()
        .zip(coeffs.m.iter().zip(&u))
        .map(|(rin, (m, uj))| rin / (1.0 + epsilon * uj / m))
        .collect()
}

/// Chemostat invasion fitness at a frozen resource profile:
/// `phi(x) = a(x) + (1/eps) Integral K(x,y) (Rbar(y) - R_in(y)) dy`.
fn fitness_chemostat(coeffs: &Coefficients, r_bar: &[f64], epsilon: f64) -> Vec<f64> {
    let wy = coeffs.grid_y.weights();
    let nx = coeffs.grid_x.len();
    let ny = coeffs.grid_y.len();
    let mut phi = vec![0.0; nx];
    for (i, p) in phi.iter_mut().enumerate() {
        let mut acc = 0.0;
        for j in 0..ny {
            acc += wy[j] * coeffs.k[(i, j)] * (r_bar[j] - coeffs.r_in[j]);
        }
        *p = coeffs.a[i] + acc / epsilon;
    }
    phi
}

/// Direct-model invasion fitness `phi(x) = a(x) - Integral c(x,x') nbar dx'`.
fn fitness_direct(coeffs: &Coefficients, kernel: &ReducedKernel, n_dense: &[f64]) -> Vec<f64> {
    let wx = coeffs.grid_x.weights();
    let nx = coeffs.grid_x.len();
    let wn: Vec<f64> = wx.iter().zip(n_dense).map(|(w, n)| w * n).collect();
    let mut phi = vec![0.0; nx];
    for (i, p) in phi.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, &wnj) in wn.iter().enumerate() {
            acc += kernel.c[(i, j)] * wnj;
        }
        *p = coeffs.a[i] - acc;
    }
    phi
}

/// Solves for direct-model steady weights on a proposed support:
/// `sum_s c(x_r, x_s) w_s q_s = a(x_r)` (with `w` the quadrature weights).
/// Nonpositive solutions mean no steady state has exactly this support.
pub fn esd_solve_on_support(
    support: &[usize],
    coeffs: &Coefficients,
    kernel: &ReducedKernel,
) -> Result<EsdCandidate> {
    let grid = &coeffs.grid_x;
    if support.is_empty() {
        return Err(Error::DimensionMismatch("empty support".into()));
    }
    for &i in support {
        if i >= grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "support index {i} is outside the {}-node grid",
                grid.len()
            )));
        }
    }
    let s = support.len();
    let w = grid.weights();
    let a = nalgebra::DMatrix::from_fn(s, s, |r, c| {
        kernel.c[(support[r], support[c])] * w[support[c]]
    });
    let rhs = nalgebra::DVector::from_fn(s, |r, _| coeffs.a[support[r]]);
    let solved = a.lu().solve(&rhs).ok_or(Error::SingularSupportSystem)?;
    let weights: Vec<f64> = solved.iter().cloned().collect();
    for (r, &q) in weights.iter().enumerate() {
        if !(q > 0.0) || !q.is_finite() {
            return Err(Error::InfeasibleSupport {
                node: support[r],
                x: grid.nodes()[support[r]],
                weight: q,
            });
        }
    }
    Ok(EsdCandidate { support: support.to_vec(), weights, r_bar: None })
}

/// Solves for chemostat steady weights on a proposed support by fixed-point
/// iteration: the steady condition is the direct-model one with the kernel
/// weight `R_in/m` replaced by `R_in/m * 1/(1 + (eps/m) U[nbar])`, which
/// depends on the unknown weights through the uptake.
pub fn esd_solve_on_support_chemostat(
    support: &[usize],
    coeffs: &Coefficients,
    epsilon: f64,
    max_iterations: usize,
    tolerance: f64,
) -> Result<EsdCandidate> {
    let grid = &coeffs.grid_x;
    if support.is_empty() {
        return Err(Error::DimensionMismatch("empty support".into()));
    }
    for &i in support {
        if i >= grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "support index {i} is outside the {}-node grid",
                grid.len()
            )));
        }
    }
    let s = support.len();
    let wx = grid.weights();
    let wy = coeffs.grid_y.weights();
    let ny = coeffs.grid_y.len();
    let mut dense = vec![0.0; grid.len()];
    let mut weights = vec![0.0; s];

    for iter in 0..max_iterations {
        // Resource correction from the current guess (first pass: no uptake).
        let u = uptake(coeffs, &dense);
        let corr: Vec<f64> = (0..ny)
            .map(|j| wy[j] * coeffs.r_in[j] / coeffs.m[j] / (1.0 + epsilon * u[j] / coeffs.m[j]))
            .collect();
        let a_mat = nalgebra::DMatrix::from_fn(s, s, |r, c| {
            let (ir, ic) = (support[r], support[c]);
            let mut acc = 0.0;
            for j in 0..ny {
                acc += coeffs.k[(ir, j)] * corr[j] * coeffs.k[(ic, j)];
            }
            acc * wx[ic]
        });
        let rhs = nalgebra::DVector::from_fn(s, |r, _| coeffs.a[support[r]]);
        let solved = a_mat.lu().solve(&rhs).ok_or(Error::SingularSupportSystem)?;
        let new_weights: Vec<f64> = solved.iter().cloned().collect();
        for (r, &q) in new_weights.iter().enumerate() {
            if !(q > 0.0) || !q.is_finite() {
                return Err(Error::InfeasibleSupport {
                    node: support[r],
                    x: grid.nodes()[support[r]],
                    weight: q,
                });
            }
        }
        let scale = new_weights.iter().cloned().fold(0.0_f64, f64::max);
        let drift = weights
            .iter()
            .zip(&new_weights)
            .map(|(o, n)| (o - n).abs())
            .fold(0.0_f64, f64::max);
        weights = new_weights;
        dense = vec![0.0; grid.len()];
        for (&i, &q) in support.iter().zip(&weights) {
            dense[i] = q;
        }
        if iter > 0 && drift <= tolerance * scale {
            let r_bar = steady_resource(&dense, coeffs, epsilon);
            return Ok(EsdCandidate { support: support.to_vec(), weights, r_bar: Some(r_bar) });
        }
    }
    Err(Error::BlowUp {
        t: 0.0,
        detail: format!(
            "chemostat support solve did not converge in {max_iterations} iterations"
        ),
    })
}

/// Which model a candidate is verified against.
#[derive(Debug, Clone, Copy)]
pub enum VerifyModel<'a> {
    Direct(&'a ReducedKernel),
    Chemostat { epsilon: f64 },
}

/// Outcome of a steady-state verification: residual of the zero-fitness
/// condition on the support, and the largest positive fitness off it.
#[derive(Debug, Clone)]
pub struct EsdReport {
    pub tolerance: f64,
    pub max_support_residual: f64,
    pub max_offsupport_violation: f64,
    pub verdict: bool,
    pub support_nodes: Vec<f64>,
}

impl EsdReport {
    pub fn csv_header() -> &'static str {
        "tolerance,max_support_residual,max_offsupport_violation,verdict,support_nodes"
    }

    /// One flat CSV row; support nodes are semicolon-separated.
    pub fn to_csv_row(&self) -> String {
        let nodes: Vec<String> = self.support_nodes.iter().map(|x| format!("{x}")).collect();
        format!(
            "{},{},{},{},{}",
            self.tolerance,
            self.max_support_residual,
            self.max_offsupport_violation,
            if self.verdict { "pass" } else { "fail" },
            nodes.join(";")
        )
    }
}

/// Checks the evolutionary stability conditions for `candidate`: fitness
/// zero (to `tolerance`) on the support and at most `tolerance` off it.
/// For the chemostat the steady resource is recomputed from the candidate
/// (its `r_bar` field is not trusted).
pub fn esd_verify(
    candidate: &EsdCandidate,
    coeffs: &Coefficients,
    model: VerifyModel<'_>,
    tolerance: f64,
) -> Result<EsdReport> {
    if !(tolerance > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {tolerance}")));
    }
    let grid = &coeffs.grid_x;
    let dense = candidate.dense_density(grid)?;
    let phi = match model {
        VerifyModel::Direct(kernel) => fitness_direct(coeffs, kernel, &dense),
        VerifyModel::Chemostat { epsilon } => {
            let r_bar = steady_resource(&dense, coeffs, epsilon);
            fitness_chemostat(coeffs, &r_bar, epsilon)
        }
    };
    let on: std::collections::HashSet<usize> = candidate.support.iter().cloned().collect();
    let mut max_support_residual = 0.0_f64;
    let mut max_offsupport_violation = 0.0_f64;
    for (i, &p) in phi.iter().enumerate() {
        if on.contains(&i) {
            max_support_residual = max_support_residual.max(p.abs());
        } else {
            max_offsupport_violation = max_offsupport_violation.max(p.max(0.0));
        }
    }
    let verdict = max_support_residual <= tolerance && max_offsupport_violation <= tolerance;
    Ok(EsdReport {
        tolerance,
        max_support_residual,
        max_offsupport_violation,
        verdict,
        support_nodes: candidate.support.iter().map(|&i| grid.nodes()[i]).collect(),
    })
}

fn require_r_bar(esd: &EsdCandidate) -> Result<&[f64]> {
    esd.r_bar.as_deref().ok_or_else(|| {
        Error::Config("candidate lacks a steady resource profile (r_bar)".into())
    })
}

/// Chemostat Lyapunov functional
/// `S_cr = -Int nbar ln n - Int Rbar ln R + Int n + Int R`.
pub fn lyapunov_cr(
    n: &[f64],
    r: &[f64],
    esd: &EsdCandidate,
    coeffs: &Coefficients,
) -> Result<f64> {
    let grid_x = &coeffs.grid_x;
    let grid_y = &coeffs.grid_y;
    let r_bar = require_r_bar(esd)?;
    esd.dense_density(grid_x)?;
    let wx = grid_x.weights();
    let wy = grid_y.weights();
    let mut s = 0.0;
    for (&i, &q) in esd.support.iter().zip(&esd.weights) {
        if !(n[i] > 0.0) {
            return Err(Error::NonPositiveDensity { node: i, x: grid_x.nodes()[i] });
        }
        s -= wx[i] * q * n[i].ln();
    }
    for j in 0..grid_y.len() {
        if !(r[j] > 0.0) {
            return Err(Error::NonPositiveResource { node: j });
        }
        s -= wy[j] * r_bar[j] * r[j].ln();
    }
    s += grid_x.integrate(n);
    s += grid_y.integrate(r);
    Ok(s)
}

/// Dissipation rate of [`lyapunov_cr`] along chemostat trajectories:
/// a negative resource-mismatch quadratic plus the population-weighted
/// steady-state fitness (nonpositive at an evolutionarily stable state).
pub fn dissipation_cr(
    n: &[f64],
    r: &[f64],
    esd: &EsdCandidate,
    coeffs: &Coefficients,
    epsilon: f64,
) -> Result<f64> {
    let r_bar = require_r_bar(esd)?;
    esd.dense_density(&coeffs.grid_x)?;
    let wy = coeffs.grid_y.weights();
    let eps2 = epsilon * epsilon;
    let mut quad = 0.0;
    for j in 0..coeffs.grid_y.len() {
        if !(r[j] > 0.0) || !(r_bar[j] > 0.0) {
            return Err(Error::NonPositiveResource { node: j });
        }
        let d = r_bar[j] - r[j];
        quad += wy[j] * coeffs.m[j] * coeffs.r_in[j] / (eps2 * r_bar[j] * r[j]) * d * d;
    }
    let phi = fitness_chemostat(coeffs, r_bar, epsilon);
    let weighted: Vec<f64> = n.iter().zip(&phi).map(|(ni, pi)| ni * pi).collect();
    Ok(-quad + coeffs.grid_x.integrate(&weighted))
}

/// Direct-competition Lyapunov functional `S_dc = -Int nbar ln n + Int n`.
pub fn lyapunov_dc(n: &[f64], esd: &EsdCandidate, coeffs: &Coefficients) -> Result<f64> {
    let grid = &coeffs.grid_x;
    esd.dense_density(grid)?;
    let w = grid.weights();
    let mut s = 0.0;
    for (&i, &q) in esd.support.iter().zip(&esd.weights) {
        if !(n[i] > 0.0) {
            return Err(Error::NonPositiveDensity { node: i, x: grid.nodes()[i] });
        }
        s -= w[i] * q * n[i].ln();
    }
    Ok(s + grid.integrate(n))
}

/// Dissipation rate of [`lyapunov_dc`], in the resource-side form: a
/// negative `R_in/m`-weighted square of the uptake mismatch plus the
/// population-weighted steady-state fitness.
pub fn dissipation_dc(n: &[f64], esd: &EsdCandidate, coeffs: &Coefficients) -> Result<f64> {
    let dense = esd.dense_density(&coeffs.grid_x)?;
    let diff: Vec<f64> = n.iter().zip(&dense).map(|(a, b)| a - b).collect();
    let v = uptake(coeffs, &diff);
    let wy = coeffs.grid_y.weights();
    let mut quad = 0.0;
    for j in 0..coeffs.grid_y.len() {
        quad += wy[j] * coeffs.r_in[j] / coeffs.m[j] * v[j] * v[j];
    }
    // Fitness against the steady profile, written through K so no reduced
    // kernel is needed: a(x) - Int K(x,y) R_in/m U[nbar](y) dy.
    let u_bar = uptake(coeffs, &dense);
    let wx = coeffs.grid_x.weights();
    let mut linear = 0.0;
    for i in 0..coeffs.grid_x.len() {
        let mut acc = 0.0;
        for j in 0..coeffs.grid_y.len() {
            acc += wy[j] * coeffs.k[(i, j)] * coeffs.r_in[j] / coeffs.m[j] * u_bar[j];
        }
        linear += wx[i] * n[i] * (coeffs.a[i] - acc);
    }
    Ok(-quad + linear)
}

/// Same dissipation written through the reduced kernel:
/// `-<n - nbar, C (n - nbar)>_w + Int n (a - c * nbar)`.  Agrees with
/// [`dissipation_dc`] to quadrature roundoff; the quadratic term shows the
/// role of the weighted-kernel positivity.
pub fn dissipation_dc_cform(
    n: &[f64],
    esd: &EsdCandidate,
    kernel: &ReducedKernel,
    coeffs: &Coefficients,
) -> Result<f64> {
    let grid = &coeffs.grid_x;
    let dense = esd.dense_density(grid)?;
    let w = grid.weights();
    let diff: Vec<f64> = n.iter().zip(&dense).map(|(a, b)| a - b).collect();
    let nx = grid.len();
    let mut quad = 0.0;
    for i in 0..nx {
        let mut row = 0.0;
        for j in 0..nx {
            row += kernel.c[(i, j)] * w[j] * diff[j];
        }
        quad += w[i] * diff[i] * row;
    }
    let phi = fitness_direct(coeffs, kernel, &dense);
    let weighted: Vec<f64> = n.iter().zip(&phi).map(|(ni, pi)| ni * pi).collect();
    Ok(-quad + grid.integrate(&weighted))
}
