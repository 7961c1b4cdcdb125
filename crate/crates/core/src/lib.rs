//! Chemostat competition-for-resource dynamics over a continuous trait
//! space, and its fast-resource reduction to a direct-competition model.
//!
//! The chemostat couples a consumer density `n(x, t)` to a resource density
//! `R(y, t)` through an uptake kernel `K(x, y)`, with the resource relaxing
//! on a fast timescale `epsilon`.  As `epsilon -> 0` the dynamics converge
//! to Lotka-Volterra direct competition whose kernel is the explicit
//! quadrature `c(x,x') = Int K(x,y) R_in(y)/m(y) K(x',y) dy`, symmetric and
//! positive semidefinite by construction.  The crate provides:
//!
//! - [`grid`]: uniform trait grids, trapezoid quadrature, a conservative
//!   no-flux Laplacian and its implicit solver;
//! - [`model`]: coefficient tables (Gaussian families or CSV), the kernel
//!   reduction (parallel and sequential, bit-identical) and its closed form;
//! - [`dynamics`]: positivity-preserving operator-split integration of both
//!   models, with mutations and an adaptive stability guard;
//! - [`diagnostics`]: peak censuses, steady-state (evolutionarily stable
//!   distribution) solving and verification, Lyapunov functionals and their
//!   dissipation rates;
//! - [`harness`]: strict JSON configs, the canned experiments (single runs,
//!   epsilon sweeps, ratio studies, branching studies) and CSV artifacts
//!   with a hashed manifest.

// `!(x > 0.0)` deliberately rejects NaN along with nonpositive values, and
// numerical loops touching several arrays at once stay as index loops.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod harness;
pub mod model;

pub use error::{Error, Result};
