//! Nonparametric state estimates from noisy samples.
//!
//! Each state coordinate is fitted with a natural cubic smoothing spline
//! minimizing `Σ (y_i − f(t_i))² + λ ∫ f''²`, using the Reinsch
//! formulation with knots at the sample times. The penalized system is
//! pentadiagonal, so one fit costs `O(n)`, and the trace of the hat matrix
//! needed for generalized cross-validation comes from the band of the
//! inverse (Hutchinson & de Hoog recursion).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ObservationSet;

pub const MIN_GRID_POINTS: usize = 201;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmootherMethod {
    CubicSmoothingSpline,
    /// Supplied directly, e.g. an exact trajectory.
    Given,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GcvScore {
    pub lambda: f64,
    pub score: f64,
}

/// `x̂` tabulated on a dense uniform grid over `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmootherFit {
    grid: Vec<f64>,
    values: DMatrix<f64>,
    lambda: Vec<f64>,
    method: SmootherMethod,
    gcv_scores: Vec<Vec<GcvScore>>,
}

impl SmootherFit {
    /// Wraps precomputed values, e.g. an exact trajectory, as a smoother.
    pub fn from_values(grid: Vec<f64>, values: DMatrix<f64>) -> Result<Self> {
        if grid.len() < 2 || values.nrows() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "grid of {} points does not match {} value rows",
                grid.len(),
                values.nrows()
            )));
        }
        if grid[0] != 0.0 {
            return Err(Error::InvalidInput("smoother grid must start at 0".into()));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("smoother grid must be strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite smoother value".into()));
        }
        let d = values.ncols();
        Ok(Self {
            grid,
            values,
            lambda: vec![0.0; d],
            method: SmootherMethod::Given,
            gcv_scores: vec![Vec::new(); d],
        })
    }

    /// Tabulates `f` on a uniform grid of `m` points over `[0, horizon]`.
    pub fn from_fn(horizon: f64, m: usize, d: usize, f: impl Fn(f64) -> Vec<f64>) -> Result<Self> {
        let grid = uniform_grid(horizon, m);
        let mut values = DMatrix::zeros(m, d);
        for (i, &t) in grid.iter().enumerate() {
            let row = f(t);
            if row.len() != d {
                return Err(Error::Dimension {
                    context: "smoother row",
                    expected: d,
                    actual: row.len(),
                });
            }
            for j in 0..d {
                values[(i, j)] = row[j];
            }
        }
        Self::from_values(grid, values)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }
    /// `m × d` matrix of smoothed states at the grid nodes.
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }
    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }
    pub fn method(&self) -> SmootherMethod {
        self.method
    }
    pub fn gcv_scores(&self) -> &[Vec<GcvScore>] {
        &self.gcv_scores
    }
    pub fn horizon(&self) -> f64 {
        *self.grid.last().expect("grid is nonempty")
    }
    pub fn m(&self) -> usize {
        self.grid.len()
    }
    pub fn d(&self) -> usize {
        self.values.ncols()
    }
}

pub fn uniform_grid(horizon: f64, m: usize) -> Vec<f64> {
    let step = horizon / (m - 1) as f64;
    let mut grid: Vec<f64> = (0..m).map(|i| i as f64 * step).collect();
    grid[m - 1] = horizon;
    grid
}

pub fn dense_grid_size(n: usize) -> usize {
    MIN_GRID_POINTS.max(10 * n)
}

/// 25 log-spaced values from `1e-6·R` to `1e2·R` with `R = (T/n)³·n`.
pub fn default_lambda_grid(horizon: f64, n: usize) -> Vec<f64> {
    let scale = (horizon / n as f64).powi(3) * n as f64;
    log_spaced(1e-6 * scale, 1e2 * scale, 25)
}

pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Fits one smoothing spline per state and tabulates it on the dense grid.
pub fn fit_smoother(obs: &ObservationSet, horizon: f64, lambda_grid: &[f64]) -> Result<SmootherFit> {
    if lambda_grid.is_empty() {
        return Err(Error::InvalidInput("lambda grid is empty".into()));
    }
    if let Some(l) = lambda_grid.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return Err(Error::InvalidInput(format!("smoothing parameters must be positive, got {l}")));
    }
    if !(horizon > 0.0) {
        return Err(Error::InvalidInput(format!("horizon must be positive, got {horizon}")));
    }
    let m = dense_grid_size(obs.n());
    let grid = uniform_grid(horizon, m);
    let d = obs.d();
    let mut values = DMatrix::zeros(m, d);
    let mut lambda = Vec::with_capacity(d);
    let mut gcv_scores = Vec::with_capacity(d);
    let basis = SplineBasis::new(obs.times())?;
    for j in 0..d {
        let y: Vec<f64> = obs.values().column(j).iter().copied().collect();
        let (spline, scores) = basis.fit_gcv(&y, lambda_grid)?;
        for (i, &t) in grid.iter().enumerate() {
            values[(i, j)] = spline.eval(t);
        }
        lambda.push(spline.lambda);
        gcv_scores.push(scores);
    }
    Ok(SmootherFit {
        grid,
        values,
        lambda,
        method: SmootherMethod::CubicSmoothingSpline,
        gcv_scores,
    })
}

/// Linear interpolation between adjacent grid nodes.
pub fn eval_smoother(fit: &SmootherFit, t: f64) -> Result<Vec<f64>> {
    let horizon = fit.horizon();
    if !(t >= 0.0 && t <= horizon) {
        return Err(Error::OutOfRange { t, horizon });
    }
    let grid = &fit.grid;
    let i = grid.partition_point(|&g| g <= t);
    if i == 0 {
        return Ok(fit.values.row(0).iter().copied().collect());
    }
    if i >= grid.len() {
        return Ok(fit.values.row(grid.len() - 1).iter().copied().collect());
    }
    let (lo, hi) = (i - 1, i);
    let w = (t - grid[lo]) / (grid[hi] - grid[lo]);
    if w == 0.0 {
        return Ok(fit.values.row(lo).iter().copied().collect());
    }
    Ok((0..fit.d())
        .map(|j| (1.0 - w) * fit.values[(lo, j)] + w * fit.values[(hi, j)])
        .collect())
}

/// Knot geometry shared by every fit on the same sample times.
#[derive(Debug, Clone)]
pub struct SplineBasis {
    knots: Vec<f64>,
    h: Vec<f64>,
    // Q has columns j = 0..n-2 with entries at rows j, j+1, j+2.
    qa: Vec<f64>,
    qb: Vec<f64>,
    qc: Vec<f64>,
    // R (tridiagonal) and QᵀQ (pentadiagonal) bands.
    r0: Vec<f64>,
    r1: Vec<f64>,
    p0: Vec<f64>,
    p1: Vec<f64>,
    p2: Vec<f64>,
}

/// A fitted natural cubic spline.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    knots: Vec<f64>,
    fitted: Vec<f64>,
    // Second derivatives at all knots; zero at both ends.
    second: Vec<f64>,
    lambda: f64,
    roughness: f64,
    edf: f64,
    rss: f64,
}

impl CubicSpline {
    pub fn eval(&self, t: f64) -> f64 {
        let k = &self.knots;
        let n = k.len();
        let f = &self.fitted;
        let s = &self.second;
        if t <= k[0] {
            let h = k[1] - k[0];
            let slope = (f[1] - f[0]) / h - h * s[1] / 6.0;
            return f[0] - (k[0] - t) * slope;
        }
        if t >= k[n - 1] {
            let h = k[n - 1] - k[n - 2];
            let slope = (f[n - 1] - f[n - 2]) / h + h * s[n - 2] / 6.0;
            return f[n - 1] + (t - k[n - 1]) * slope;
        }
        let i = k.partition_point(|&x| x <= t) - 1;
        let h = k[i + 1] - k[i];
        let (a, b) = (t - k[i], k[i + 1] - t);
        (a * f[i + 1] + b * f[i]) / h
            - a * b / 6.0 * ((1.0 + a / h) * s[i + 1] + (1.0 + b / h) * s[i])
    }

    pub fn fitted(&self) -> &[f64] {
        &self.fitted
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    /// `∫ f''²` of the fitted spline.
    pub fn roughness(&self) -> f64 {
        self.roughness
    }
    /// Trace of the hat matrix.
    pub fn edf(&self) -> f64 {
        self.edf
    }
    pub fn rss(&self) -> f64 {
        self.rss
    }
}

impl SplineBasis {
    pub fn new(times: &[f64]) -> Result<Self> {
        let n = times.len();
        if n < ObservationSet::MIN_SAMPLES {
            return Err(Error::InvalidInput(format!("need at least 4 knots, got {n}")));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("knots must be strictly increasing".into()));
        }
        let h: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
        let ni = n - 2;
        let qa: Vec<f64> = (0..ni).map(|j| 1.0 / h[j]).collect();
        let qb: Vec<f64> = (0..ni).map(|j| -1.0 / h[j] - 1.0 / h[j + 1]).collect();
        let qc: Vec<f64> = (0..ni).map(|j| 1.0 / h[j + 1]).collect();
        let r0: Vec<f64> = (0..ni).map(|j| (h[j] + h[j + 1]) / 3.0).collect();
        let r1: Vec<f64> = (0..ni.saturating_sub(1)).map(|j| h[j + 1] / 6.0).collect();
        let p0: Vec<f64> = (0..ni).map(|j| qa[j] * qa[j] + qb[j] * qb[j] + qc[j] * qc[j]).collect();
        let p1: Vec<f64> = (0..ni.saturating_sub(1))
            .map(|j| qb[j] * qa[j + 1] + qc[j] * qb[j + 1])
            .collect();
        let p2: Vec<f64> = (0..ni.saturating_sub(2)).map(|j| qc[j] * qa[j + 2]).collect();
        Ok(Self {
            knots: times.to_vec(),
            h,
            qa,
            qb,
            qc,
            r0,
            r1,
            p0,
            p1,
            p2,
        })
    }

    pub fn n(&self) -> usize {
        self.knots.len()
    }

    /// Fits at one smoothing parameter.
    pub fn fit(&self, y: &[f64], lambda: f64) -> Result<CubicSpline> {
        if y.len() != self.n() {
            return Err(Error::Dimension {
                context: "spline data",
                expected: self.n(),
                actual: y.len(),
            });
        }
        let n = self.n();
        let ni = n - 2;
        let band0: Vec<f64> = (0..ni).map(|j| self.r0[j] + lambda * self.p0[j]).collect();
        let band1: Vec<f64> = (0..ni.saturating_sub(1))
            .map(|j| self.r1[j] + lambda * self.p1[j])
            .collect();
        let band2: Vec<f64> = self.p2.iter().map(|p| lambda * p).collect();
        let ldl = PentaLdl::factor(&band0, &band1, &band2)?;

        let qty: Vec<f64> = (0..ni)
            .map(|j| self.qa[j] * y[j] + self.qb[j] * y[j + 1] + self.qc[j] * y[j + 2])
            .collect();
        let gamma = ldl.solve(&qty);

        let mut fitted = y.to_vec();
        for j in 0..ni {
            fitted[j] -= lambda * self.qa[j] * gamma[j];
            fitted[j + 1] -= lambda * self.qb[j] * gamma[j];
            fitted[j + 2] -= lambda * self.qc[j] * gamma[j];
        }
        let rss: f64 = y.iter().zip(&fitted).map(|(a, b)| (a - b) * (a - b)).sum();

        let mut roughness = 0.0;
        for j in 0..ni {
            roughness += self.r0[j] * gamma[j] * gamma[j];
            if j + 1 < ni {
                roughness += 2.0 * self.r1[j] * gamma[j] * gamma[j + 1];
            }
        }

        // n - tr(A) = λ tr(M⁻¹ QᵀQ), which only needs the central band of M⁻¹.
        let (s0, s1, s2) = ldl.inverse_band();
        let mut tr = 0.0;
        for j in 0..ni {
            tr += s0[j] * self.p0[j];
            if j + 1 < ni {
                tr += 2.0 * s1[j] * self.p1[j];
            }
            if j + 2 < ni {
                tr += 2.0 * s2[j] * self.p2[j];
            }
        }
        let edf = n as f64 - lambda * tr;

        let mut second = vec![0.0; n];
        second[1..n - 1].copy_from_slice(&gamma);
        Ok(CubicSpline {
            knots: self.knots.clone(),
            fitted,
            second,
            lambda,
            roughness,
            edf,
            rss,
        })
    }

    /// Picks λ from `lambda_grid` minimizing `n·RSS / (n − tr A)²`. Ties
    /// resolve to the earliest grid entry.
    pub fn fit_gcv(&self, y: &[f64], lambda_grid: &[f64]) -> Result<(CubicSpline, Vec<GcvScore>)> {
        let n = self.n() as f64;
        let mut best: Option<(f64, CubicSpline)> = None;
        let mut scores = Vec::with_capacity(lambda_grid.len());
        for &lambda in lambda_grid {
            let spline = self.fit(y, lambda)?;
            let resid_df = n - spline.edf;
            let score = if resid_df > 0.0 {
                n * spline.rss / (resid_df * resid_df)
            } else {
                f64::INFINITY
            };
            scores.push(GcvScore { lambda, score });
            let better = match &best {
                None => true,
                Some((s, _)) => score < *s,
            };
            if better {
                best = Some((score, spline));
            }
        }
        let (_, spline) = best.expect("lambda grid is nonempty");
        Ok((spline, scores))
    }

    pub fn spacing(&self) -> &[f64] {
        &self.h
    }
}

/// `LDLᵀ` factorization of a symmetric pentadiagonal matrix.
struct PentaLdl {
    d: Vec<f64>,
    l1: Vec<f64>,
    l2: Vec<f64>,
}

impl PentaLdl {
    fn factor(band0: &[f64], band1: &[f64], band2: &[f64]) -> Result<Self> {
        let n = band0.len();
        let mut d = vec![0.0; n];
        // l1[i] = L[i, i-1], l2[i] = L[i, i-2]
        let mut l1 = vec![0.0; n];
        let mut l2 = vec![0.0; n];
        for i in 0..n {
            if i >= 2 {
                l2[i] = band2[i - 2] / d[i - 2];
            }
            if i >= 1 {
                let mut v = band1[i - 1];
                if i >= 2 {
                    v -= l2[i] * l1[i - 1] * d[i - 2];
                }
                l1[i] = v / d[i - 1];
            }
            let mut di = band0[i];
            if i >= 1 {
                di -= l1[i] * l1[i] * d[i - 1];
            }
            if i >= 2 {
                di -= l2[i] * l2[i] * d[i - 2];
            }
            if !(di > 0.0) || !di.is_finite() {
                return Err(Error::InvalidInput("smoothing system is not positive definite".into()));
            }
            d[i] = di;
        }
        Ok(Self { d, l1, l2 })
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.d.len();
        let mut u = rhs.to_vec();
        for i in 0..n {
            if i >= 1 {
                u[i] -= self.l1[i] * u[i - 1];
            }
            if i >= 2 {
                u[i] -= self.l2[i] * u[i - 2];
            }
        }
        for i in 0..n {
            u[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            if i + 1 < n {
                u[i] -= self.l1[i + 1] * u[i + 1];
            }
            if i + 2 < n {
                u[i] -= self.l2[i + 2] * u[i + 2];
            }
        }
        u
    }

    /// Diagonal and first two super-diagonals of the inverse.
    fn inverse_band(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.d.len();
        let mut s0 = vec![0.0; n];
        let mut s1 = vec![0.0; n.saturating_sub(1)];
        let mut s2 = vec![0.0; n.saturating_sub(2)];
        for i in (0..n).rev() {
            let l1 = if i + 1 < n { self.l1[i + 1] } else { 0.0 };
            let l2 = if i + 2 < n { self.l2[i + 2] } else { 0.0 };
            if i + 2 < n {
                s2[i] = -l1 * s1[i + 1] - l2 * s0[i + 2];
            }
            if i + 1 < n {
                let s12 = if i + 2 < n { s1[i + 1] } else { 0.0 };
                s1[i] = -l1 * s0[i + 1] - l2 * s12;
            }
            let mut v = 1.0 / self.d[i];
            if i + 1 < n {
                v -= l1 * s1[i];
            }
            if i + 2 < n {
                v -= l2 * s2[i];
            }
            s0[i] = v;
        }
        (s0, s1, s2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn obs(times: Vec<f64>, cols: Vec<Vec<f64>>) -> ObservationSet {
        let n = times.len();
        let y = DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]);
        ObservationSet::new(times, y).unwrap()
    }

    /// Dense reference: hat matrix A = (I + λ Q R⁻¹ Qᵀ)⁻¹.
    fn dense_hat(times: &[f64], lambda: f64) -> DMatrix<f64> {
        let n = times.len();
        let h: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
        let mut q = DMatrix::zeros(n, n - 2);
        let mut r = DMatrix::zeros(n - 2, n - 2);
        for j in 0..n - 2 {
            q[(j, j)] = 1.0 / h[j];
            q[(j + 1, j)] = -1.0 / h[j] - 1.0 / h[j + 1];
            q[(j + 2, j)] = 1.0 / h[j + 1];
            r[(j, j)] = (h[j] + h[j + 1]) / 3.0;
            if j + 1 < n - 2 {
                r[(j, j + 1)] = h[j + 1] / 6.0;
                r[(j + 1, j)] = h[j + 1] / 6.0;
            }
        }
        let k = &q * r.try_inverse().unwrap() * q.transpose();
        (DMatrix::identity(n, n) + k * lambda).try_inverse().unwrap()
    }

    #[test]
    fn banded_fit_matches_dense_hat_matrix() {
        let times = vec![0.0, 0.3, 1.1, 1.5, 2.6, 3.0, 3.2, 4.7];
        let y: Vec<f64> = times.iter().map(|t: &f64| (1.3 * t).sin() + 0.1 * t * t).collect();
        let basis = SplineBasis::new(&times).unwrap();
        for &lambda in &[1e-4, 0.05, 1.0, 30.0] {
            let fit = basis.fit(&y, lambda).unwrap();
            let hat = dense_hat(&times, lambda);
            let expect = &hat * nalgebra::DVector::from_vec(y.clone());
            for i in 0..times.len() {
                assert!((fit.fitted()[i] - expect[i]).abs() < 1e-10);
                assert!((fit.eval(times[i]) - fit.fitted()[i]).abs() < 1e-12);
            }
            assert!((fit.edf() - hat.trace()).abs() < 1e-9, "{} vs {}", fit.edf(), hat.trace());
        }
    }

    #[test]
    fn line_is_reproduced_for_every_lambda() {
        let times: Vec<f64> = (0..12).map(|i| i as f64 * 0.5).collect();
        let y: Vec<f64> = times.iter().map(|t| 2.0 + 3.0 * t).collect();
        let basis = SplineBasis::new(&times).unwrap();
        for lambda in log_spaced(1e-6, 1e4, 11) {
            let fit = basis.fit(&y, lambda).unwrap();
            for (f, yy) in fit.fitted().iter().zip(&y) {
                assert!((f - yy).abs() < 1e-8);
            }
        }
        let o = obs(times.clone(), vec![y]);
        let fit = fit_smoother(&o, 6.0, &default_lambda_grid(6.0, 12)).unwrap();
        for (t, v) in fit.grid().iter().zip(fit.values().column(0).iter()) {
            assert!((v - (2.0 + 3.0 * t)).abs() < 1e-8);
        }
    }

    #[test]
    fn constant_data_gives_constant_fit() {
        let times: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let o = obs(times, vec![vec![5.0; 10]]);
        let fit = fit_smoother(&o, 9.0, &default_lambda_grid(9.0, 10)).unwrap();
        assert!(fit.values().iter().all(|v| (v - 5.0).abs() < 1e-10));
    }

    #[test]
    fn noisy_sine_recovered_within_three_sigma() {
        let n = 200;
        let sigma = 0.1;
        let times: Vec<f64> = (0..n).map(|i| 20.0 * i as f64 / (n - 1) as f64).collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        let noise = Normal::new(0.0, sigma).unwrap();
        let y: Vec<f64> = times.iter().map(|t| t.sin() + noise.sample(&mut rng)).collect();
        let o = obs(times, vec![y]);
        let fit = fit_smoother(&o, 20.0, &default_lambda_grid(20.0, n)).unwrap();
        assert_eq!(fit.m(), 2000);
        let err = fit
            .grid()
            .iter()
            .zip(fit.values().column(0).iter())
            .map(|(t, v)| (v - t.sin()).abs())
            .fold(0.0, f64::max);
        assert!(err < 3.0 * sigma, "max error {err}");
    }

    #[test]
    fn gcv_selection_is_deterministic() {
        let times: Vec<f64> = (0..30).map(|i| i as f64 / 3.0).collect();
        let y: Vec<f64> = times.iter().map(|t| (t * 0.7).cos() + 0.05 * ((t * 37.0).sin())).collect();
        let o = obs(times, vec![y.clone(), y]);
        let grid = default_lambda_grid(10.0, 30);
        let a = fit_smoother(&o, 10.0, &grid).unwrap();
        let b = fit_smoother(&o, 10.0, &grid).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.gcv_scores()[0].len(), 25);
    }

    #[test]
    fn roughness_decreases_with_lambda() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 0.3).unwrap();
        let times: Vec<f64> = (0..40).map(|i| i as f64 * 0.25).collect();
        let y: Vec<f64> = times.iter().map(|t| t.sin() + noise.sample(&mut rng)).collect();
        let basis = SplineBasis::new(&times).unwrap();
        let rough: Vec<f64> = default_lambda_grid(10.0, 40)
            .into_iter()
            .map(|l| basis.fit(&y, l).unwrap().roughness())
            .collect();
        for w in rough.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "{w:?}");
        }
    }

    #[test]
    fn grid_spans_horizon() {
        let times: Vec<f64> = (0..50).map(|i| 0.1 + i as f64 * 0.1).collect();
        let y: Vec<f64> = times.iter().map(|t| t * t).collect();
        let fit = fit_smoother(&obs(times, vec![y]), 5.5, &[1e-3]).unwrap();
        assert_eq!(fit.m(), 500);
        assert_eq!(fit.grid()[0], 0.0);
        assert_eq!(*fit.grid().last().unwrap(), 5.5);
    }

    #[test]
    fn rejects_bad_inputs() {
        let times: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let o = obs(times, vec![vec![1.0; 6]]);
        assert!(fit_smoother(&o, 5.0, &[]).is_err());
        assert!(fit_smoother(&o, 5.0, &[-1.0]).is_err());
        assert!(SplineBasis::new(&[0.0, 1.0, 1.0, 2.0]).is_err());
    }

    #[test]
    fn interpolation_between_nodes() {
        let grid = vec![0.0, 1.0, 2.0];
        let values = DMatrix::from_row_slice(3, 1, &[1.0, 3.0, 4.0]);
        let fit = SmootherFit::from_values(grid, values).unwrap();
        assert_eq!(eval_smoother(&fit, 1.0).unwrap(), vec![3.0]);
        assert_eq!(eval_smoother(&fit, 0.5).unwrap(), vec![2.0]);
        assert_eq!(eval_smoother(&fit, 0.0).unwrap(), vec![1.0]);
        assert_eq!(eval_smoother(&fit, 2.0).unwrap(), vec![4.0]);
        assert!(matches!(eval_smoother(&fit, 2.5), Err(Error::OutOfRange { .. })));
        assert!(eval_smoother(&fit, -0.1).is_err());
    }
}
