//! The discretized integral criterion.
//!
//! With `x̂` tabulated on the smoother grid, the criterion compares `x̂(t)`
//! with `ξ + ∫₀ᵗ F(x̂(s); θ) ds`. All integrals use the trapezoid rule on
//! that grid: cumulatively for the inner integral and with the matching
//! quadrature weights for the outer one. For a separable field the
//! criterion is quadratic in `(ξ, θ_L)`, and [`solve_linear`] finds its
//! exact minimizer for fixed `θ_NL` through the normal equations written
//! in Schur-complement form.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::model::{FieldWorkspace, ParamSplit, SeparableModel};
use crate::smoothing::SmootherFit;

/// Condition number of `B̂` above which a ridge is added.
pub const RIDGE_COND_THRESHOLD: f64 = 1e12;
/// Ridge size relative to `trace(B̂) / p_l`.
pub const RIDGE_SCALE: f64 = 1e-10;

/// Trapezoid quadrature weights for `grid`.
pub fn trapezoid_weights(grid: &[f64]) -> Vec<f64> {
    let m = grid.len();
    let mut w = vec![0.0; m];
    for i in 0..m.saturating_sub(1) {
        let h = 0.5 * (grid[i + 1] - grid[i]);
        w[i] += h;
        w[i + 1] += h;
    }
    w
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("quadrature grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Cumulative trapezoid integral of each column of `values` (`m × k`).
/// Row 0 of the result is zero.
pub fn cumtrapz(grid: &[f64], values: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_dim("cumtrapz rows", grid.len(), values.nrows())?;
    check_grid(grid)?;
    let mut out = values.clone();
    cumtrapz_in_place(grid, &mut out);
    Ok(out)
}

fn cumtrapz_in_place(grid: &[f64], values: &mut DMatrix<f64>) {
    let m = grid.len();
    for mut col in values.column_iter_mut() {
        let mut acc = 0.0;
        let mut prev = col[0];
        col[0] = 0.0;
        for i in 1..m {
            let cur = col[i];
            acc += 0.5 * (grid[i] - grid[i - 1]) * (prev + cur);
            prev = cur;
            col[i] = acc;
        }
    }
}

/// Trapezoid integral of one sampled function.
pub fn trapz(grid: &[f64], values: &[f64]) -> f64 {
    grid.windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// Cumulative integrals of the separable pieces along `x̂` for one `θ_NL`.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    theta_nl: Vec<f64>,
    d: usize,
    p_l: usize,
    /// `m × (d·p_l)`; column `k·d + i` holds `Ĝ_{ik}(t)`.
    g_grid: DMatrix<f64>,
    /// `m × d`.
    h_grid: DMatrix<f64>,
    a_hat: DMatrix<f64>,
    b_hat: DMatrix<f64>,
}

impl Design {
    pub fn theta_nl(&self) -> &[f64] {
        &self.theta_nl
    }
    pub fn g_grid(&self) -> &DMatrix<f64> {
        &self.g_grid
    }
    pub fn h_grid(&self) -> &DMatrix<f64> {
        &self.h_grid
    }
    pub fn a_hat(&self) -> &DMatrix<f64> {
        &self.a_hat
    }
    pub fn b_hat(&self) -> &DMatrix<f64> {
        &self.b_hat
    }

    /// `Ĝ` at grid row `row` as a `d × p_l` matrix.
    pub fn g_at(&self, row: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.d, self.p_l, |i, k| self.g_grid[(row, k * self.d + i)])
    }

    pub fn g_column(&self, state: usize, param: usize) -> Vec<f64> {
        self.g_grid.column(param * self.d + state).iter().copied().collect()
    }
}

/// Tabulates `g` and `h` along `x̂` and integrates them.
pub fn build_design(model: &SeparableModel, fit: &SmootherFit, theta_nl: &[f64]) -> Result<Design> {
    check_dim("theta_nl", model.p_nl(), theta_nl.len())?;
    check_dim("smoother states", model.d(), fit.d())?;
    let (d, p_l) = (model.d(), model.p_l());
    let grid = fit.grid();
    let m = grid.len();
    let xs = fit.values();
    let floor = model.state_floor();

    let mut g_grid = DMatrix::zeros(m, d * p_l);
    let mut h_grid = DMatrix::zeros(m, d);
    let mut ws = FieldWorkspace::new(model);
    let mut x = vec![0.0; d];
    let has_offset = model.field().has_offset();
    for (r, &t) in grid.iter().enumerate() {
        for j in 0..d {
            x[j] = match floor {
                Some(f) => xs[(r, j)].max(f),
                None => xs[(r, j)],
            };
        }
        ws.eval(model, t, &x, theta_nl);
        for k in 0..p_l {
            for i in 0..d {
                g_grid[(r, k * d + i)] = ws.g[(i, k)];
            }
        }
        if has_offset {
            for i in 0..d {
                h_grid[(r, i)] = ws.h[i];
            }
        }
    }
    if g_grid.iter().chain(h_grid.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Evaluation {
            theta_nl: theta_nl.to_vec(),
        });
    }
    cumtrapz_in_place(grid, &mut g_grid);
    cumtrapz_in_place(grid, &mut h_grid);

    let w = trapezoid_weights(grid);
    let a_hat = DMatrix::from_fn(d, p_l, |i, k| weighted_dot(&w, g_grid.column(k * d + i).as_slice(), None));
    let mut b_hat = DMatrix::zeros(p_l, p_l);
    for k in 0..p_l {
        for l in k..p_l {
            let v: f64 = (0..d)
                .map(|i| {
                    weighted_dot(
                        &w,
                        g_grid.column(k * d + i).as_slice(),
                        Some(g_grid.column(l * d + i).as_slice()),
                    )
                })
                .sum();
            b_hat[(k, l)] = v;
            b_hat[(l, k)] = v;
        }
    }
    if a_hat.iter().chain(b_hat.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Evaluation {
            theta_nl: theta_nl.to_vec(),
        });
    }
    Ok(Design {
        theta_nl: theta_nl.to_vec(),
        d,
        p_l,
        g_grid,
        h_grid,
        a_hat,
        b_hat,
    })
}

fn weighted_dot(w: &[f64], a: &[f64], b: Option<&[f64]>) -> f64 {
    match b {
        Some(b) => w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum(),
        None => w.iter().zip(a).map(|(w, a)| w * a).sum(),
    }
}

/// Closed-form `(ξ̂, θ̂_L)` for fixed `θ_NL`, with the design that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSolveResult {
    pub xi_hat: Vec<f64>,
    pub theta_l_hat: Vec<f64>,
    pub design: Design,
    pub cond_b: f64,
    pub ridge_used: bool,
}

impl LinearSolveResult {
    pub fn params(&self) -> ParamSplit {
        ParamSplit::new(
            self.design.theta_nl.clone(),
            self.theta_l_hat.clone(),
            self.xi_hat.clone(),
        )
    }
}

/// Condition number from the symmetric eigenvalues; infinite for a
/// singular or indefinite matrix.
pub fn condition_estimate(b: &DMatrix<f64>) -> f64 {
    if b.nrows() == 0 {
        return 1.0;
    }
    let eig = b.clone().symmetric_eigen();
    let lmax = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lmin = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if !(lmin > 0.0) || !lmax.is_finite() {
        f64::INFINITY
    } else {
        (lmax / lmin).max(1.0)
    }
}

fn offending_columns(b: &DMatrix<f64>) -> Vec<usize> {
    let max_diag = (0..b.nrows()).map(|k| b[(k, k)].abs()).fold(0.0, f64::max);
    let cols: Vec<usize> = (0..b.nrows())
        .filter(|&k| !(b[(k, k)].abs() > 1e-14 * max_diag) || !b[(k, k)].is_finite())
        .collect();
    if cols.is_empty() {
        (0..b.nrows()).collect()
    } else {
        cols
    }
}

/// Minimizes the criterion over `(ξ, θ_L)` with `θ_NL` fixed by `design`.
///
/// `ξ̂ = (T·I − Â B̂⁻¹ Âᵀ)⁻¹ ∫ (I − Â B̂⁻¹ Ĝᵀ(t)) z(t) dt` and
/// `θ̂_L = B̂⁻¹ ∫ Ĝᵀ(t) (z(t) − ξ̂) dt` with `z = x̂ − Ĥ`.
pub fn solve_linear(design: Design, fit: &SmootherFit) -> Result<LinearSolveResult> {
    check_dim("design grid", fit.m(), design.g_grid.nrows())?;
    let (d, p_l) = (design.d, design.p_l);
    let grid = fit.grid();
    let w = trapezoid_weights(grid);
    let horizon: f64 = w.iter().sum();
    let z = fit.values() - &design.h_grid;

    let zbar = DVector::from_fn(d, |i, _| weighted_dot(&w, z.column(i).as_slice(), None));
    if p_l == 0 {
        return Ok(LinearSolveResult {
            xi_hat: (zbar / horizon).iter().copied().collect(),
            theta_l_hat: Vec::new(),
            design,
            cond_b: 1.0,
            ridge_used: false,
        });
    }
    let gz = DVector::from_fn(p_l, |k, _| {
        (0..d)
            .map(|i| {
                weighted_dot(
                    &w,
                    design.g_grid.column(k * d + i).as_slice(),
                    Some(z.column(i).as_slice()),
                )
            })
            .sum()
    });

    let cond_b = condition_estimate(&design.b_hat);
    let mut b = design.b_hat.clone();
    let mut ridge_used = false;
    if cond_b > RIDGE_COND_THRESHOLD {
        let ridge = RIDGE_SCALE * b.trace() / p_l as f64;
        if !(ridge > 0.0) || !ridge.is_finite() {
            return Err(Error::Singular {
                columns: offending_columns(&design.b_hat),
            });
        }
        for k in 0..p_l {
            b[(k, k)] += ridge;
        }
        ridge_used = true;
    }
    let chol = b.clone().cholesky().ok_or_else(|| Error::Singular {
        columns: offending_columns(&design.b_hat),
    })?;

    let a = &design.a_hat;
    // B⁻¹Âᵀ and B⁻¹∫Ĝᵀz
    let binv_at = chol.solve(&a.transpose());
    let binv_gz = chol.solve(&gz);
    let schur = DMatrix::identity(d, d) * horizon - a * &binv_at;
    let rhs = &zbar - a * &binv_gz;
    let xi = match schur.clone().cholesky() {
        Some(c) => c.solve(&rhs),
        None => schur.lu().solve(&rhs).ok_or(Error::Singular { columns: Vec::new() })?,
    };
    let theta = &binv_gz - &binv_at * &xi;
    if xi.iter().chain(theta.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Singular {
            columns: offending_columns(&design.b_hat),
        });
    }
    Ok(LinearSolveResult {
        xi_hat: xi.iter().copied().collect(),
        theta_l_hat: theta.iter().copied().collect(),
        design,
        cond_b,
        ridge_used,
    })
}

/// Value of the criterion at the closed-form `(ξ̂, θ̂_L)`, using the
/// quantities already in `lin`.
fn residual_norm(lin: &LinearSolveResult, fit: &SmootherFit) -> f64 {
    let design = &lin.design;
    let (d, p_l) = (design.d, design.p_l);
    let grid = fit.grid();
    let w = trapezoid_weights(grid);
    let xs = fit.values();
    let mut total = 0.0;
    for (r, wr) in w.iter().enumerate() {
        let mut sq = 0.0;
        for i in 0..d {
            let mut pred = lin.xi_hat[i] + design.h_grid[(r, i)];
            for k in 0..p_l {
                pred += design.g_grid[(r, k * d + i)] * lin.theta_l_hat[k];
            }
            let e = xs[(r, i)] - pred;
            sq += e * e;
        }
        total += wr * sq;
    }
    total
}

/// Variable-projection criterion `M(θ_NL)` and the inner solve.
pub fn reduced_criterion(
    model: &SeparableModel,
    fit: &SmootherFit,
    theta_nl: &[f64],
) -> Result<(f64, LinearSolveResult)> {
    let design = build_design(model, fit, theta_nl)?;
    let lin = solve_linear(design, fit)?;
    let value = residual_norm(&lin, fit);
    if !value.is_finite() {
        return Err(Error::Evaluation {
            theta_nl: theta_nl.to_vec(),
        });
    }
    Ok((value, lin))
}

/// `M(θ_NL)`, or `+∞` wherever it cannot be evaluated.
pub fn reduced_or_infeasible(model: &SeparableModel, fit: &SmootherFit, theta_nl: &[f64]) -> f64 {
    reduced_criterion(model, fit, theta_nl).map_or(f64::INFINITY, |(v, _)| v)
}

/// Full criterion over `(ξ, θ)`, with the field treated as a black box.
/// Non-finite field values give `+∞`.
pub fn full_criterion(model: &SeparableModel, fit: &SmootherFit, params: &ParamSplit) -> Result<f64> {
    model.check_params(params)?;
    check_dim("smoother states", model.d(), fit.d())?;
    let d = model.d();
    let grid = fit.grid();
    let m = grid.len();
    let xs = fit.values();
    let floor = model.state_floor();
    let mut ws = FieldWorkspace::new(model);
    let mut x = vec![0.0; d];
    let mut f = vec![0.0; d];
    let mut integrand = DMatrix::zeros(m, d);
    for (r, &t) in grid.iter().enumerate() {
        for j in 0..d {
            x[j] = match floor {
                Some(fl) => xs[(r, j)].max(fl),
                None => xs[(r, j)],
            };
        }
        ws.full(model, t, &x, params, &mut f);
        for i in 0..d {
            integrand[(r, i)] = f[i];
        }
    }
    if integrand.iter().any(|v| !v.is_finite()) {
        return Ok(f64::INFINITY);
    }
    cumtrapz_in_place(grid, &mut integrand);
    let w = trapezoid_weights(grid);
    let mut total = 0.0;
    for (r, wr) in w.iter().enumerate() {
        let mut sq = 0.0;
        for i in 0..d {
            let e = xs[(r, i)] - params.xi[i] - integrand[(r, i)];
            sq += e * e;
        }
        total += wr * sq;
    }
    Ok(if total.is_finite() { total } else { f64::INFINITY })
}
