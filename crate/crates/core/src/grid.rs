//! Uniform trait-space grids with trapezoidal quadrature and a conservative
//! no-flux Laplacian.
//!
//! Every integral in the model is evaluated as a weighted node sum over one
//! of these grids.  The mutation operator is the standard second-order
//! central stencil closed with mirrored ghost nodes, which makes the discrete
//! diffusion conserve the quadrature mass exactly and keeps the operator
//! negative semidefinite in the weighted inner product.

use crate::error::{Error, Result};

/// A uniform one-dimensional grid together with its trapezoid weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TraitGrid {
    x_min: f64,
    x_max: f64,
    h: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl TraitGrid {
    /// Builds a uniform grid of `n_points` nodes spanning `[x_min, x_max]`
    /// with trapezoid weights (`h/2` at the two ends, `h` inside).
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "bounds must be finite, got [{x_min}, {x_max}]"
            )));
        }
        if x_max <= x_min {
            return Err(Error::InvalidGrid(format!(
                "x_max ({x_max}) must exceed x_min ({x_min})"
            )));
        }
        if n_points < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 points, got {n_points}"
            )));
        }
        let h = (x_max - x_min) / (n_points - 1) as f64;
        let nodes: Vec<f64> = (0..n_points).map(|i| x_min + i as f64 * h).collect();
        let mut weights = vec![h; n_points];
        weights[0] = 0.5 * h;
        weights[n_points - 1] = 0.5 * h;
        Ok(Self { x_min, x_max, h, nodes, weights })
    }

    /// Reconstructs a grid from an explicit node list (e.g. loaded from a
    /// file), checking uniform spacing to a relative `1e-9` of the step.
    pub fn from_nodes(nodes: &[f64]) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 points, got {}",
                nodes.len()
            )));
        }
        let h = (nodes[nodes.len() - 1] - nodes[0]) / (nodes.len() - 1) as f64;
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidGrid("nodes must be increasing and finite".into()));
        }
        for (i, pair) in nodes.windows(2).enumerate() {
            if (pair[1] - pair[0] - h).abs() > 1e-9 * h {
                return Err(Error::InvalidGrid(format!(
                    "non-uniform spacing between nodes {i} and {} ({} vs step {h})",
                    i + 1,
                    pair[1] - pair[0]
                )));
            }
        }
        Self::new(nodes[0], nodes[nodes.len() - 1], nodes.len())
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    /// Node spacing.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Trapezoid quadrature of nodal values: `sum_i w_i v_i`, accumulated in
    /// index order so results are reproducible bit for bit.
    ///
    /// Panics if `values` does not match the grid length (caller bug).
    pub fn integrate(&self, values: &[f64]) -> f64 {
        assert_eq!(
            values.len(),
            self.nodes.len(),
            "integrate: value vector length {} does not match grid length {}",
            values.len(),
            self.nodes.len()
        );
        let mut acc = 0.0;
        for (w, v) in self.weights.iter().zip(values) {
            acc += w * v;
        }
        acc
    }

    /// Second-order Laplacian with no-flux boundaries via mirrored ghost
    /// nodes: the boundary rows are `2(v[1] - v[0])/h^2` and its mirror.
    ///
    /// Panics if `values` does not match the grid length.
    pub fn laplacian(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(
            values.len(),
            self.nodes.len(),
            "laplacian: value vector length {} does not match grid length {}",
            values.len(),
            self.nodes.len()
        );
        let n = values.len();
        let inv_h2 = 1.0 / (self.h * self.h);
        let mut out = vec![0.0; n];
        out[0] = 2.0 * (values[1] - values[0]) * inv_h2;
        for i in 1..n - 1 {
            out[i] = (values[i + 1] - 2.0 * values[i] + values[i - 1]) * inv_h2;
        }
        out[n - 1] = 2.0 * (values[n - 2] - values[n - 1]) * inv_h2;
        out
    }

    /// Solves `(I - coef * Laplacian) u = rhs` with the same no-flux closure,
    /// by the Thomas algorithm.  The system matrix is an M-matrix, so a
    /// nonnegative right-hand side yields a nonnegative solution (the forward
    /// elimination keeps all subtractions as sums of nonnegatives).
    ///
    /// `coef` must be nonnegative; panics on length mismatch.
    pub fn solve_diffusion(&self, coef: f64, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(
            rhs.len(),
            self.nodes.len(),
            "solve_diffusion: rhs length {} does not match grid length {}",
            rhs.len(),
            self.nodes.len()
        );
        assert!(coef >= 0.0, "solve_diffusion: negative coefficient {coef}");
        let n = rhs.len();
        if coef == 0.0 {
            return rhs.to_vec();
        }
        let r = coef / (self.h * self.h);
        let diag = 1.0 + 2.0 * r;
        // Tridiagonal system: sub/super are -r, except the ghost-mirrored
        // boundary rows where the single off-diagonal entry is -2r.
        let mut c_prime = vec![0.0; n];
        let mut d_prime = vec![0.0; n];
        c_prime[0] = -2.0 * r / diag;
        d_prime[0] = rhs[0] / diag;
        for i in 1..n {
            let sub = if i == n - 1 { -2.0 * r } else { -r };
            let sup = -r;
            let denom = diag - sub * c_prime[i - 1];
            c_prime[i] = sup / denom;
            d_prime[i] = (rhs[i] - sub * d_prime[i - 1]) / denom;
        }
        let mut u = vec![0.0; n];
        u[n - 1] = d_prime[n - 1];
        for i in (0..n - 1).rev() {
            u[i] = d_prime[i] - c_prime[i] * u[i + 1];
        }
        u
    }

    /// Index of the node closest to `x` (clamped to the grid).
    pub fn nearest_node(&self, x: f64) -> usize {
        let raw = (x - self.x_min) / self.h;
        let idx = raw.round();
        if idx <= 0.0 {
            0
        } else if idx >= (self.nodes.len() - 1) as f64 {
            self.nodes.len() - 1
        } else {
            idx as usize
        }
    }
}
