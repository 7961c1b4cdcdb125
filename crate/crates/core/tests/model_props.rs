//! Property tests for the kernel reduction: positive semidefiniteness over
//! random coefficient tables, second-order quadrature refinement against an
//! adaptive Simpson oracle, closed-form agreement for Gaussian kernels, and
//! bitwise determinism of the parallel path.

mod support;

use chemostat_core::grid::TraitGrid;
use chemostat_core::model::{
    closed_form_reduced, reduce_kernel, reduce_kernel_seq, uptake, Coefficients,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use support::simpson_adaptive;

fn random_coefficients() -> impl Strategy<Value = Coefficients> {
    (3usize..12, 3usize..12)
        .prop_flat_map(|(nx, ny)| {
            (
                Just(nx),
                Just(ny),
                prop::collection::vec(0.0..3.0f64, nx * ny),
                prop::collection::vec(0.1..5.0f64, ny),
                prop::collection::vec(0.1..5.0f64, ny),
            )
        })
        .prop_map(|(nx, ny, kv, m, r_in)| Coefficients {
            grid_x: TraitGrid::new(-1.0, 1.0, nx).unwrap(),
            grid_y: TraitGrid::new(-2.0, 2.0, ny).unwrap(),
            a: vec![0.0; nx],
            m,
            r_in,
            k: DMatrix::from_row_slice(nx, ny, &kv),
            b: None,
            d_slow: None,
        })
}

proptest! {
    /// c = K^T diag(w R_in / m) K is a Gram matrix, so it must be positive
    /// semidefinite in the quadrature inner product for any admissible data.
    #[test]
    fn reduced_kernel_is_positive_semidefinite(coeffs in random_coefficients()) {
        let rk = reduce_kernel(&coeffs).unwrap();
        let (lo, hi) = rk.weighted_eigen_bounds();
        prop_assert!(lo >= -1e-10 * hi.max(1.0), "negative eigenvalue {} (max {})", lo, hi);
    }

    /// Every entry integrates a nonnegative function, so c >= 0 entrywise.
    #[test]
    fn reduced_kernel_entries_are_nonnegative(coeffs in random_coefficients()) {
        let rk = reduce_kernel(&coeffs).unwrap();
        for v in rk.c.iter() {
            prop_assert!(*v >= 0.0);
        }
    }

    #[test]
    fn uptake_is_linear(
        coeffs in random_coefficients(),
        scale in 0.1..10.0f64,
    ) {
        let nx = coeffs.grid_x.len();
        let n1: Vec<f64> = (0..nx).map(|i| 0.5 + (i as f64) * 0.3).collect();
        let n2: Vec<f64> = (0..nx).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let sum: Vec<f64> = n1.iter().zip(&n2).map(|(a, b)| a + scale * b).collect();
        let u1 = uptake(&coeffs, &n1);
        let u2 = uptake(&coeffs, &n2);
        let u = uptake(&coeffs, &sum);
        for j in 0..coeffs.grid_y.len() {
            let expect = u1[j] + scale * u2[j];
            prop_assert!((u[j] - expect).abs() <= 1e-12 * expect.abs().max(1.0));
        }
    }

    /// On a wide resource domain the trapezoid sum is spectrally accurate for
    /// Gaussian data, so the discrete reduction must match the closed form
    /// sqrt(pi / (2 alpha + beta)) exp(gamma (x + x')^2 - alpha (x^2 + x'^2)).
    #[test]
    fn reduction_matches_closed_form_for_gaussian_kernels(
        alpha in 0.5..2.0f64,
        beta in 0.0..2.0f64,
    ) {
        let grid_x = TraitGrid::new(-1.0, 1.0, 5).unwrap();
        let grid_y = TraitGrid::new(-10.0, 10.0, 1001).unwrap();
        let coeffs = Coefficients::gaussian_unnormalized(grid_x, grid_y, alpha, beta).unwrap();
        let rk = reduce_kernel(&coeffs).unwrap();
        let cf = closed_form_reduced(alpha, beta).unwrap();
        let nodes = rk.grid_x.nodes().to_vec();
        for (i, &x) in nodes.iter().enumerate() {
            for (j, &xp) in nodes.iter().enumerate() {
                let expect = cf.eval(x, xp);
                prop_assert!(
                    (rk.c[(i, j)] - expect).abs() <= 1e-6 * expect,
                    "c({}, {}) = {} vs closed form {}",
                    x, xp, rk.c[(i, j)], expect
                );
            }
        }
    }
}

#[cfg(feature = "parallel")]
proptest! {
    #[test]
    fn parallel_and_sequential_reductions_agree_bitwise(coeffs in random_coefficients()) {
        let par = reduce_kernel(&coeffs).unwrap();
        let seq = reduce_kernel_seq(&coeffs).unwrap();
        for (a, b) in par.c.iter().zip(seq.c.iter()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

/// When the integrand does not vanish at the resource boundary the trapezoid
/// rule is genuinely second order: halving h must cut the error by about 4.
/// The oracle integrates the same truncated-domain integrand adaptively.
#[test]
fn reduction_error_decays_at_second_order_under_refinement() {
    let alpha = 0.25;
    let grid_x = TraitGrid::new(-1.0, 1.0, 5).unwrap();
    let xs = grid_x.nodes().to_vec();
    let oracle = |x: f64, xp: f64| {
        simpson_adaptive(
            &|y| (-alpha * (x - y) * (x - y)).exp() * (-alpha * (xp - y) * (xp - y)).exp(),
            -1.0,
            1.0,
            1e-13,
        )
    };
    let errors: Vec<DMatrix<f64>> = [51usize, 101, 201]
        .iter()
        .map(|&ny| {
            let grid_y = TraitGrid::new(-1.0, 1.0, ny).unwrap();
            let ky = grid_y.nodes().to_vec();
            let coeffs = Coefficients {
                grid_x: grid_x.clone(),
                grid_y,
                a: vec![0.0; xs.len()],
                m: vec![1.0; ny],
                r_in: vec![1.0; ny],
                k: DMatrix::from_fn(xs.len(), ny, |i, j| {
                    (-alpha * (xs[i] - ky[j]) * (xs[i] - ky[j])).exp()
                }),
                b: None,
                d_slow: None,
            };
            let rk = reduce_kernel(&coeffs).unwrap();
            DMatrix::from_fn(xs.len(), xs.len(), |i, j| {
                (rk.c[(i, j)] - oracle(xs[i], xs[j])).abs()
            })
        })
        .collect();
    let mut checked = 0;
    for i in 0..xs.len() {
        for j in 0..xs.len() {
            let (e0, e1, e2) = (errors[0][(i, j)], errors[1][(i, j)], errors[2][(i, j)]);
            if e0 < 1e-9 {
                continue;
            }
            checked += 1;
            let r01 = e0 / e1;
            let r12 = e1 / e2;
            assert!(
                (2.8..=5.2).contains(&r01) && (2.8..=5.2).contains(&r12),
                "pair ({}, {}): errors {e0:.3e} / {e1:.3e} / {e2:.3e}, ratios {r01:.3} and {r12:.3}",
                xs[i],
                xs[j]
            );
        }
    }
    assert!(checked >= 10, "only {checked} pairs had usable error signal");
}
