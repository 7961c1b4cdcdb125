//! Problem coefficients and the kernel reduction.
//!
//! The chemostat couples a consumer density `n(x)` on the trait grid to a
//! resource density `R(y)` on the resource grid through an uptake kernel
//! `K(x, y)`.  In the fast-resource limit the dynamics collapse to direct
//! competition with kernel
//!
//! ```text
//! c(x, x') = Integral K(x, y) * (R_in(y) / m(y)) * K(x', y) dy
//! ```
//!
//! which is symmetric and positive semidefinite by construction (it is a
//! Gram matrix in the weight `R_in/m`).  For Gaussian `K` and `R_in` the
//! reduction has a closed form used as an oracle for the quadrature.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::grid::TraitGrid;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// All problem data: grids, per-node rate tables and the uptake kernel.
///
/// `a` lives on the trait grid; `m` and `r_in` on the resource grid; `k` has
/// one row per trait node and one column per resource node.  The optional
/// `b`/`d_slow` split records `a = b - d_slow` when the net rate comes from
/// separate birth and slow-death tables.
#[derive(Debug, Clone)]
pub struct Coefficients {
    pub grid_x: TraitGrid,
    pub grid_y: TraitGrid,
    pub a: Vec<f64>,
    pub m: Vec<f64>,
    pub r_in: Vec<f64>,
    pub k: DMatrix<f64>,
    pub b: Option<Vec<f64>>,
    pub d_slow: Option<Vec<f64>>,
}

fn gaussian_density(x: f64, sigma: f64) -> f64 {
    let z = x / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

impl Coefficients {
    /// Benchmark setup with normalized Gaussian uptake and inflow:
    /// `K(x,y) = g_{sigma_k}(x - y)`, `R_in(y) = m_in * g_{sigma_in}(y)`,
    /// `m` constant, and net growth `a(x) = 1 - x^2`.
    pub fn gaussian_normalized(
        grid_x: TraitGrid,
        grid_y: TraitGrid,
        sigma_k: f64,
        sigma_in: f64,
        m_in: f64,
        m_const: f64,
    ) -> Result<Self> {
        if !(sigma_k > 0.0) || !(sigma_in > 0.0) {
            return Err(Error::InvalidCoefficients(format!(
                "kernel widths must be positive, got sigma_k = {sigma_k}, sigma_in = {sigma_in}"
            )));
        }
        if !(m_in > 0.0) || !(m_const > 0.0) {
            return Err(Error::InvalidCoefficients(format!(
                "m_in and m must be positive, got m_in = {m_in}, m = {m_const}"
            )));
        }
        let a = grid_x.nodes().iter().map(|x| 1.0 - x * x).collect();
        let m = vec![m_const; grid_y.len()];
        let r_in = grid_y
            .nodes()
            .iter()
            .map(|&y| m_in * gaussian_density(y, sigma_in))
            .collect();
        let k = DMatrix::from_fn(grid_x.len(), grid_y.len(), |i, j| {
            gaussian_density(grid_x.nodes()[i] - grid_y.nodes()[j], sigma_k)
        });
        let c = Self { grid_x, grid_y, a, m, r_in, k, b: None, d_slow: None };
        c.validate()?;
        Ok(c)
    }

    /// Unnormalized Gaussian family `K(x,y) = exp(-alpha (x-y)^2)`,
    /// `R_in(y) = exp(-beta y^2)`, `m = 1`, whose reduced kernel is known in
    /// closed form (see [`closed_form_reduced`]).  The net rate `a` is not
    /// part of this family and is set to zero.
    pub fn gaussian_unnormalized(
        grid_x: TraitGrid,
        grid_y: TraitGrid,
        alpha: f64,
        beta: f64,
    ) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::InvalidCoefficients(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        if !(2.0 * alpha + beta > 0.0) {
            return Err(Error::InvalidCoefficients(format!(
                "need 2*alpha + beta > 0 for an integrable reduction, got alpha = {alpha}, beta = {beta}"
            )));
        }
        let a = vec![0.0; grid_x.len()];
        let m = vec![1.0; grid_y.len()];
        let r_in = grid_y.nodes().iter().map(|&y| (-beta * y * y).exp()).collect();
        let k = DMatrix::from_fn(grid_x.len(), grid_y.len(), |i, j| {
            let d = grid_x.nodes()[i] - grid_y.nodes()[j];
            (-alpha * d * d).exp()
        });
        let c = Self { grid_x, grid_y, a, m, r_in, k, b: None, d_slow: None };
        c.validate()?;
        Ok(c)
    }

    /// Loads coefficient tables from three CSV files: `(x, a)` rows, then
    /// `(y, m, R_in)` rows, then a dense `K` matrix whose header row holds
    /// the resource nodes and whose first column holds the trait nodes.
    /// Grids are reconstructed from the node columns and must be uniform.
    pub fn from_csv_files(
        xa_path: &std::path::Path,
        ymr_path: &std::path::Path,
        k_path: &std::path::Path,
    ) -> Result<Self> {
        let (xs, columns_xa) = read_columns(xa_path, &["x", "a"])?;
        let (ys, columns_ymr) = read_columns(ymr_path, &["y", "m", "R_in"])?;
        let grid_x = TraitGrid::from_nodes(&xs)?;
        let grid_y = TraitGrid::from_nodes(&ys)?;
        let k = read_kernel_matrix(k_path, &xs, &ys)?;
        let c = Self {
            grid_x,
            grid_y,
            a: columns_xa.into_iter().next().expect("one value column"),
            m: columns_ymr[0].clone(),
            r_in: columns_ymr[1].clone(),
            k,
            b: None,
            d_slow: None,
        };
        c.validate()?;
        Ok(c)
    }

    /// Checks all structural requirements: array lengths against the grids,
    /// `K >= 0`, `m > 0`, `R_in > 0`, everything finite, and consistency of
    /// the optional `a = b - d_slow` split to `1e-12`.
    pub fn validate(&self) -> Result<()> {
        let nx = self.grid_x.len();
        let ny = self.grid_y.len();
        let mut problems = Vec::new();
        if self.a.len() != nx {
            problems.push(format!("a has {} entries for {} trait nodes", self.a.len(), nx));
        }
        if self.m.len() != ny {
            problems.push(format!("m has {} entries for {} resource nodes", self.m.len(), ny));
        }
        if self.r_in.len() != ny {
            problems.push(format!(
                "R_in has {} entries for {} resource nodes",
                self.r_in.len(),
                ny
            ));
        }
        if self.k.nrows() != nx || self.k.ncols() != ny {
            problems.push(format!(
                "K is {}x{}, expected {}x{}",
                self.k.nrows(),
                self.k.ncols(),
                nx,
                ny
            ));
        }
        if let Some(i) = self.a.iter().position(|v| !v.is_finite()) {
            problems.push(format!("a is not finite at node {i}"));
        }
        if let Some(i) = self.m.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
            problems.push(format!("m must be strictly positive and finite, offending node {i}"));
        }
        if let Some(i) = self.r_in.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
            problems.push(format!(
                "R_in must be strictly positive and finite, offending node {i}"
            ));
        }
        if let Some(bad) = self.k.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
            problems.push(format!(
                "K must be nonnegative and finite, offending entry index {bad}"
            ));
        }
        match (&self.b, &self.d_slow) {
            (Some(b), Some(d)) => {
                if b.len() != nx || d.len() != nx {
                    problems.push("b and d_slow must match the trait grid length".into());
                } else {
                    for i in 0..nx {
                        if (self.a[i] - (b[i] - d[i])).abs() > 1e-12 {
                            problems.push(format!(
                                "a != b - d_slow at node {i}: {} vs {}",
                                self.a[i],
                                b[i] - d[i]
                            ));
                            break;
                        }
                    }
                }
            }
            (None, None) => {}
            _ => problems.push("b and d_slow must be given together".into()),
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidCoefficients(problems.join("; ")))
        }
    }
}

fn read_csv_rows(path: &std::path::Path) -> Result<Vec<Vec<String>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Csv {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        rows.push(rec.iter().map(|s| s.to_string()).collect());
    }
    Ok(rows)
}

fn parse_f64(path: &std::path::Path, what: &str, s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::Csv {
        path: path.display().to_string(),
        detail: format!("{what}: cannot parse {s:?} as a number"),
    })
}

/// Reads a CSV with an exact header (`names`) and returns the node column
/// plus the remaining value columns.
fn read_columns(path: &std::path::Path, names: &[&str]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let rows = read_csv_rows(path)?;
    if rows.is_empty() {
        return Err(Error::Csv { path: path.display().to_string(), detail: "empty file".into() });
    }
    let header: Vec<&str> = rows[0].iter().map(|s| s.as_str()).collect();
    if header != names {
        return Err(Error::Csv {
            path: path.display().to_string(),
            detail: format!("expected header {names:?}, found {header:?}"),
        });
    }
    let mut nodes = Vec::new();
    let mut cols = vec![Vec::new(); names.len() - 1];
    for (r, row) in rows.iter().enumerate().skip(1) {
        if row.len() != names.len() {
            return Err(Error::Csv {
                path: path.display().to_string(),
                detail: format!("row {r} has {} fields, expected {}", row.len(), names.len()),
            });
        }
        nodes.push(parse_f64(path, names[0], &row[0])?);
        for (c, col) in cols.iter_mut().enumerate() {
            col.push(parse_f64(path, names[c + 1], &row[c + 1])?);
        }
    }
    Ok((nodes, cols))
}

/// Reads the dense kernel matrix, checking its header nodes against the
/// `(x, a)` and `(y, m, R_in)` tables to `1e-9`.
fn read_kernel_matrix(path: &std::path::Path, xs: &[f64], ys: &[f64]) -> Result<DMatrix<f64>> {
    let rows = read_csv_rows(path)?;
    let csv_err = |detail: String| Error::Csv { path: path.display().to_string(), detail };
    if rows.len() != xs.len() + 1 {
        return Err(csv_err(format!(
            "expected {} rows (header + one per trait node), found {}",
            xs.len() + 1,
            rows.len()
        )));
    }
    let header = &rows[0];
    if header.len() != ys.len() + 1 {
        return Err(csv_err(format!(
            "header has {} fields, expected corner cell + {} resource nodes",
            header.len(),
            ys.len()
        )));
    }
    for (j, y) in ys.iter().enumerate() {
        let v = parse_f64(path, "header node", &header[j + 1])?;
        if (v - y).abs() > 1e-9 {
            return Err(csv_err(format!(
                "header node {j} is {v}, but the (y, m, R_in) table has {y}"
            )));
        }
    }
    let mut k = DMatrix::zeros(xs.len(), ys.len());
    for (i, row) in rows.iter().enumerate().skip(1) {
        if row.len() != ys.len() + 1 {
            return Err(csv_err(format!("row {i} has {} fields, expected {}", row.len(), ys.len() + 1)));
        }
        let x = parse_f64(path, "row node", &row[0])?;
        if (x - xs[i - 1]).abs() > 1e-9 {
            return Err(csv_err(format!(
                "row node {i} is {x}, but the (x, a) table has {}",
                xs[i - 1]
            )));
        }
        for j in 0..ys.len() {
            k[(i - 1, j)] = parse_f64(path, "kernel entry", &row[j + 1])?;
        }
    }
    Ok(k)
}

/// The direct-competition kernel on the trait grid.
#[derive(Debug, Clone)]
pub struct ReducedKernel {
    pub grid_x: TraitGrid,
    pub c: DMatrix<f64>,
}

impl ReducedKernel {
    /// Eigenvalue range of `W^{1/2} C W^{1/2}` where `W` holds the quadrature
    /// weights; this is the operator whose nonnegativity makes the
    /// direct-competition Lyapunov functional dissipate.
    pub fn weighted_eigen_bounds(&self) -> (f64, f64) {
        let n = self.grid_x.len();
        let w = self.grid_x.weights();
        let b = DMatrix::from_fn(n, n, |i, j| w[i].sqrt() * self.c[(i, j)] * w[j].sqrt());
        let eig = SymmetricEigen::new(b);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &l in eig.eigenvalues.iter() {
            lo = lo.min(l);
            hi = hi.max(l);
        }
        (lo, hi)
    }
}

/// Shared row computation: entries `c[i][j]` for `j >= i`, summed over the
/// resource grid in fixed index order so that the sequential and parallel
/// paths produce bit-identical results.
fn reduced_row_upper(kt: &DMatrix<f64>, g: &[f64], i: usize) -> Vec<f64> {
    let nx = kt.ncols();
    let ny = kt.nrows();
    let ki = kt.column(i);
    let mut out = Vec::with_capacity(nx - i);
    for j in i..nx {
        let kj = kt.column(j);
        let mut acc = 0.0;
        for y in 0..ny {
            acc += ki[y] * g[y] * kj[y];
        }
        out.push(acc);
    }
    out
}

fn assemble_reduced(coeffs: &Coefficients, rows: Vec<Vec<f64>>) -> ReducedKernel {
    let nx = coeffs.grid_x.len();
    let mut c = DMatrix::zeros(nx, nx);
    for (i, row) in rows.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let j = i + off;
            // Symmetrized accumulation: mirror the computed upper triangle so
            // c[i][j] and c[j][i] are the same f64, not merely close.
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    ReducedKernel { grid_x: coeffs.grid_x.clone(), c }
}

fn reduction_inputs(coeffs: &Coefficients) -> Result<(DMatrix<f64>, Vec<f64>)> {
    coeffs.validate()?;
    let g: Vec<f64> = coeffs
        .grid_y
        .weights()
        .iter()
        .zip(coeffs.r_in.iter().zip(&coeffs.m))
        .map(|(w, (r, m))| w * r / m)
        .collect();
    Ok((coeffs.k.transpose(), g))
}

/// Quadrature reduction `c(x, x') = Integral K(x,y) R_in(y)/m(y) K(x',y) dy`
/// over the resource grid.  Rows are computed in parallel when the `parallel`
/// feature is enabled; the result is bit-identical to [`reduce_kernel_seq`].
pub fn reduce_kernel(coeffs: &Coefficients) -> Result<ReducedKernel> {
    #[cfg(feature = "parallel")]
    {
        let (kt, g) = reduction_inputs(coeffs)?;
        let nx = coeffs.grid_x.len();
        let rows: Vec<Vec<f64>> =
            (0..nx).into_par_iter().map(|i| reduced_row_upper(&kt, &g, i)).collect();
        Ok(assemble_reduced(coeffs, rows))
    }
    #[cfg(not(feature = "parallel"))]
    {
        reduce_kernel_seq(coeffs)
    }
}

/// Sequential reference implementation of [`reduce_kernel`].
pub fn reduce_kernel_seq(coeffs: &Coefficients) -> Result<ReducedKernel> {
    let (kt, g) = reduction_inputs(coeffs)?;
    let nx = coeffs.grid_x.len();
    let rows: Vec<Vec<f64>> = (0..nx).map(|i| reduced_row_upper(&kt, &g, i)).collect();
    Ok(assemble_reduced(coeffs, rows))
}

/// Closed form of the reduced kernel for the unnormalized Gaussian family:
/// `c(x,x') = sqrt(pi/(2 alpha + beta)) * exp(gamma (x+x')^2 - alpha (x^2 + x'^2))`
/// with `gamma = alpha^2 / (2 alpha + beta)`.
#[derive(Debug, Clone, Copy)]
pub struct ClosedFormReducedKernel {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    prefactor: f64,
}

impl ClosedFormReducedKernel {
    pub fn eval(&self, x: f64, xp: f64) -> f64 {
        let s = x + xp;
        (self.gamma * s * s - self.alpha * (x * x + xp * xp)).exp() * self.prefactor
    }
}

/// Builds the closed form; requires `alpha > 0` and `2 alpha + beta > 0`.
pub fn closed_form_reduced(alpha: f64, beta: f64) -> Result<ClosedFormReducedKernel> {
    if !(alpha > 0.0) || !(2.0 * alpha + beta > 0.0) {
        return Err(Error::InvalidCoefficients(format!(
            "closed form needs alpha > 0 and 2*alpha + beta > 0, got alpha = {alpha}, beta = {beta}"
        )));
    }
    let denom = 2.0 * alpha + beta;
    Ok(ClosedFormReducedKernel {
        alpha,
        beta,
        gamma: alpha * alpha / denom,
        prefactor: (std::f64::consts::PI / denom).sqrt(),
    })
}

/// Uptake integral `U(y) = Integral K(x, y) n(x) dx` on the resource grid,
/// accumulated in node order (deterministic bit for bit).
///
/// Panics if `n` does not match the trait grid.
pub fn uptake(coeffs: &Coefficients, n: &[f64]) -> Vec<f64> {
    assert_eq!(
        n.len(),
        coeffs.grid_x.len(),
        "uptake: density length {} does not match trait grid length {}",
        n.len(),
        coeffs.grid_x.len()
    );
    let wx = coeffs.grid_x.weights();
    let nx = coeffs.grid_x.len();
    let ny = coeffs.grid_y.len();
    let mut u = vec![0.0; ny];
    for (j, uj) in u.iter_mut().enumerate() {
        let col = coeffs.k.column(j);
        let mut acc = 0.0;
        for i in 0..nx {
            acc += wx[i] * col[i] * n[i];
        }
        *uj = acc;
    }
    u
}

/// Largest variation of `c` along lines of constant `x - x'`, relative to the
/// largest kernel entry.  Zero for translation-invariant kernels, where `c`
/// depends on `x - x'` only.
pub fn translation_invariance_defect(rk: &ReducedKernel) -> f64 {
    let n = rk.grid_x.len();
    let max_abs = rk.c.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
    if max_abs == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0_f64;
    // On a uniform grid, pairs with equal index offset share x - x'.
    for off in 0..n {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n - off {
            let v = rk.c[(i, i + off)];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        worst = worst.max(hi - lo);
    }
    worst / max_abs
}
