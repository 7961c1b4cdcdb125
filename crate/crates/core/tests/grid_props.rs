//! Property tests for the trait grid: quadrature exactness bounds, and the
//! conservation, sign, and positivity structure of the discrete no-flux
//! diffusion operator.

mod support;

use chemostat_core::grid::TraitGrid;
use nalgebra::DMatrix;
use proptest::prelude::*;
use support::simpson_adaptive;

fn grid_params() -> impl Strategy<Value = (f64, f64, usize)> {
    (-5.0..5.0f64, 0.5..10.0f64, 3usize..150)
        .prop_map(|(min, width, n)| (min, min + width, n))
}

fn grid_and_vec() -> impl Strategy<Value = (f64, f64, usize, Vec<f64>)> {
    grid_params().prop_flat_map(|(min, max, n)| {
        (
            Just(min),
            Just(max),
            Just(n),
            prop::collection::vec(-10.0..10.0f64, n),
        )
    })
}

proptest! {
    #[test]
    fn weights_sum_to_domain_length((min, max, n) in grid_params()) {
        let grid = TraitGrid::new(min, max, n).unwrap();
        let total: f64 = grid.weights().iter().sum();
        prop_assert!((total - (max - min)).abs() <= 1e-12 * (max - min).abs().max(1.0));
    }

    #[test]
    fn trapezoid_integrates_affine_functions_exactly(
        (min, max, n) in grid_params(),
        slope in -3.0..3.0f64,
        offset in -3.0..3.0f64,
    ) {
        let grid = TraitGrid::new(min, max, n).unwrap();
        let values: Vec<f64> = grid.nodes().iter().map(|&x| slope * x + offset).collect();
        let exact = 0.5 * slope * (max * max - min * min) + offset * (max - min);
        let scale = grid
            .nodes()
            .iter()
            .map(|&x| (slope * x + offset).abs())
            .fold(1.0f64, f64::max)
            * (max - min);
        prop_assert!((grid.integrate(&values) - exact).abs() <= 1e-12 * scale);
    }

    #[test]
    fn trapezoid_error_on_quadratics_respects_h2_bound(
        (min, max, n) in grid_params(),
        curve in 0.1..3.0f64,
    ) {
        let grid = TraitGrid::new(min, max, n).unwrap();
        let values: Vec<f64> = grid.nodes().iter().map(|&x| curve * x * x).collect();
        let oracle = simpson_adaptive(&|x| curve * x * x, min, max, 1e-13);
        // Trapezoid error bound (b - a) h^2 max|f''| / 12 with f'' = 2 curve.
        let bound = (max - min) * grid.h() * grid.h() * curve / 6.0;
        prop_assert!((grid.integrate(&values) - oracle).abs() <= bound * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn laplacian_conserves_mass((min, max, n, v) in grid_and_vec()) {
        let grid = TraitGrid::new(min, max, n).unwrap();
        let lap = grid.laplacian(&v);
        let vmax = v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        let tol = 1e-10 * (4.0 * vmax / grid.h()).max(1.0);
        prop_assert!(grid.integrate(&lap).abs() <= tol);
    }

    #[test]
    fn laplacian_quadratic_form_is_nonpositive((min, max, n, v) in grid_and_vec()) {
        let grid = TraitGrid::new(min, max, n).unwrap();
        let lap = grid.laplacian(&v);
        let form: f64 = grid
            .weights()
            .iter()
            .zip(v.iter().zip(lap.iter()))
            .map(|(w, (vi, li))| w * vi * li)
            .sum();
        let vmax = v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        let tol = 1e-12 * (n as f64) * 4.0 * vmax * vmax / grid.h() + 1e-12;
        prop_assert!(form <= tol, "quadratic form {} exceeds tolerance {}", form, tol);
    }

    #[test]
    fn diffusion_solve_inverts_conserves_and_stays_nonnegative(
        (min, max, n) in (-5.0..5.0f64, 0.5..10.0f64, 3usize..42)
            .prop_map(|(min, width, n)| (min, min + width, n)),
        rhs_seed in prop::collection::vec(0.0..10.0f64, 42),
        r in 0.1..10.0f64,
    ) {
        let grid = TraitGrid::new(min, max, n).unwrap();
        let rhs: Vec<f64> = rhs_seed[..n].iter().map(|&x| x + 1e-6).collect();
        let coef = r * grid.h() * grid.h();
        let u = grid.solve_diffusion(coef, &rhs);
        let lap = grid.laplacian(&u);
        let umax = u.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        let scale = umax.max(4.0 * r * umax).max(1.0);
        for i in 0..n {
            let residual = u[i] - coef * lap[i] - rhs[i];
            prop_assert!(residual.abs() <= 1e-10 * scale);
            // M-matrix inverse of a positive vector is strictly positive.
            prop_assert!(u[i] > 0.0);
        }
        let mass_in = grid.integrate(&rhs);
        let mass_out = grid.integrate(&u);
        prop_assert!((mass_in - mass_out).abs() <= 1e-10 * mass_in.max(1.0));
    }

    #[test]
    fn nearest_node_round_trips_nodes((min, max, n) in grid_params()) {
        let grid = TraitGrid::new(min, max, n).unwrap();
        for (i, &x) in grid.nodes().iter().enumerate() {
            prop_assert_eq!(grid.nearest_node(x), i);
        }
    }

    #[test]
    fn from_nodes_reconstructs_uniform_grids((min, max, n) in grid_params()) {
        let grid = TraitGrid::new(min, max, n).unwrap();
        let rebuilt = TraitGrid::from_nodes(grid.nodes()).unwrap();
        prop_assert_eq!(rebuilt.len(), grid.len());
        prop_assert!((rebuilt.h() - grid.h()).abs() <= 1e-12 * grid.h());
        prop_assert!((rebuilt.x_min() - grid.x_min()).abs() <= 1e-12);
        prop_assert!((rebuilt.x_max() - grid.x_max()).abs() <= 1e-12);
    }
}

/// The diffusion generator is self-adjoint in the quadrature inner product;
/// its spectrum must be nonpositive (no-flux Neumann Laplacian).
#[test]
fn laplacian_spectrum_is_nonpositive_in_weighted_space() {
    for &(min, max, n) in &[(-2.0, 2.0, 11usize), (-1.0, 3.0, 51), (0.0, 1.0, 101)] {
        let grid = TraitGrid::new(min, max, n).unwrap();
        let w = grid.weights();
        // Column j of the operator: Laplacian applied to the j-th basis vector.
        let mut sym = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = grid.laplacian(&e);
            for i in 0..n {
                // Similarity transform W^{1/2} L W^{-1/2} symmetrizes L.
                sym[(i, j)] = w[i].sqrt() * col[i] / w[j].sqrt();
            }
        }
        let asym = (&sym - sym.transpose()).abs().max();
        assert!(asym <= 1e-12 / (grid.h() * grid.h()), "asymmetry {asym}");
        let eigen = nalgebra::SymmetricEigen::new(sym);
        let max_eig = eigen.eigenvalues.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        assert!(
            max_eig <= 1e-12 * 4.0 / (grid.h() * grid.h()),
            "positive eigenvalue {max_eig} on grid ({min}, {max}, {n})"
        );
    }
}
