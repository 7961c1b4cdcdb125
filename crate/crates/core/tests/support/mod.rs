//! Shared oracles for the integration tests, implemented independently of the
//! library numerics: an adaptive Simpson quadrature and an adaptive embedded
//! Runge-Kutta-Fehlberg 4(5) integrator.

#![allow(dead_code, clippy::too_many_arguments)]

/// Adaptive Simpson quadrature with error control by interval halving.
pub fn simpson_adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, m, fm, whole, tol, 48)
}

/// Integrates dy/dt = f(t, y) from `t0` to `t_end` with the classic
/// Fehlberg 4(5) embedded pair and proportional step control, returning the
/// state at `t_end`. Local extrapolation: the fifth-order solution advances.
pub fn rkf45(
    f: &dyn Fn(f64, &[f64]) -> Vec<f64>,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    rtol: f64,
    atol: f64,
) -> Vec<f64> {
    assert!(t_end > t0, "rkf45 integrates forward only");
    let dim = y0.len();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut h = (t_end - t0) * 1e-4;
    let eval = |t: f64, base: &[f64], h: f64, ks: &[(&Vec<f64>, f64)]| -> Vec<f64> {
        let mut arg = base.to_vec();
        for (k, c) in ks {
            for i in 0..dim {
                arg[i] += h * c * k[i];
            }
        }
        f(t, &arg)
    };
    let mut steps = 0u64;
    while t < t_end {
        assert!(steps < 200_000_000, "rkf45 step budget exhausted");
        steps += 1;
        if t + h > t_end {
            h = t_end - t;
        }
        let k1 = f(t, &y);
        let k2 = eval(t + h / 4.0, &y, h, &[(&k1, 1.0 / 4.0)]);
        let k3 = eval(t + 3.0 * h / 8.0, &y, h, &[(&k1, 3.0 / 32.0), (&k2, 9.0 / 32.0)]);
        let k4 = eval(
            t + 12.0 * h / 13.0,
            &y,
            h,
            &[
                (&k1, 1932.0 / 2197.0),
                (&k2, -7200.0 / 2197.0),
                (&k3, 7296.0 / 2197.0),
            ],
        );
        let k5 = eval(
            t + h,
            &y,
            h,
            &[
                (&k1, 439.0 / 216.0),
                (&k2, -8.0),
                (&k3, 3680.0 / 513.0),
                (&k4, -845.0 / 4104.0),
            ],
        );
        let k6 = eval(
            t + h / 2.0,
            &y,
            h,
            &[
                (&k1, -8.0 / 27.0),
                (&k2, 2.0),
                (&k3, -3544.0 / 2565.0),
                (&k4, 1859.0 / 4104.0),
                (&k5, -11.0 / 40.0),
            ],
        );
        let mut err_ratio = 0.0_f64;
        let mut y5 = y.clone();
        for i in 0..dim {
            let fourth = y[i]
                + h * (25.0 / 216.0 * k1[i]
                    + 1408.0 / 2565.0 * k3[i]
                    + 2197.0 / 4104.0 * k4[i]
                    - 1.0 / 5.0 * k5[i]);
            let fifth = y[i]
                + h * (16.0 / 135.0 * k1[i]
                    + 6656.0 / 12825.0 * k3[i]
                    + 28561.0 / 56430.0 * k4[i]
                    - 9.0 / 50.0 * k5[i]
                    + 2.0 / 55.0 * k6[i]);
            let scale = atol + rtol * y[i].abs().max(fifth.abs());
            err_ratio = err_ratio.max((fifth - fourth).abs() / scale);
            y5[i] = fifth;
        }
        if err_ratio <= 1.0 {
            t += h;
            y = y5;
        }
        let factor = if err_ratio > 0.0 {
            (0.9 * err_ratio.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h *= factor;
    }
    y
}
