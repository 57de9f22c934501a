//! Estimation drivers.
//!
//! [`fit_sls`] searches over `θ_NL` only and recovers `(ξ, θ_L)` from the
//! closed-form inner solve; [`fit_nls`] searches over `(ξ, θ_NL, θ_L)`
//! jointly on the full criterion. Both use the same smoother, the same
//! optimizer and the same termination rules, and time only the search.

mod quasi_newton;
mod simplex;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::criterion::{full_criterion, reduced_criterion, reduced_or_infeasible};
use crate::error::{check_dim, Error, Result};
use crate::model::{
    Diagnostics, EstimationResult, Method, ObservationSet, ParamSplit, SeparableModel, Termination,
};
use crate::smoothing::{default_lambda_grid, eval_smoother, fit_smoother, SmootherFit};

pub(crate) type Objective<'a> = dyn FnMut(&[f64]) -> f64 + 'a;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Projected BFGS with finite-difference gradients, falling back to the
    /// simplex search after two failed line searches.
    QuasiNewton,
    Simplex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub algorithm: Algorithm,
    pub max_iters: usize,
    /// Relative criterion-change tolerance.
    pub tol: f64,
    /// Relative finite-difference step.
    pub fd_step: f64,
    /// Number of search passes; each extra pass restarts from the previous
    /// optimum with a fresh curvature estimate.
    pub restarts: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::QuasiNewton,
            max_iters: 500,
            tol: 1e-8,
            fd_step: 1e-6,
            restarts: 1,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidInput(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidInput("max_iters must be at least 1".into()));
        }
        if !(self.fd_step > 0.0) {
            return Err(Error::InvalidInput("fd_step must be positive".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidInput("restarts must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Outcome {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
    pub used_simplex: bool,
}

pub(crate) fn clamp_into(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].max(lower[i]).min(upper[i]);
    }
}

/// Minimizes `f` over the box `[lower, upper]` (infinite bounds allowed).
/// Non-finite values mark infeasible points.
pub fn minimize_box(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    cfg: &OptimizerConfig,
) -> MinimizeResult {
    let out = run_passes(&mut f, x0, lower, upper, cfg);
    MinimizeResult {
        x: out.x,
        value: out.fx,
        iterations: out.iterations,
        evaluations: out.evaluations,
        termination: out.termination,
        used_simplex: out.used_simplex,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
    pub used_simplex: bool,
}

fn run_passes(
    f: &mut Objective<'_>,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    cfg: &OptimizerConfig,
) -> Outcome {
    let mut total: Option<Outcome> = None;
    let mut start = x0.to_vec();
    for _ in 0..cfg.restarts {
        let out = match cfg.algorithm {
            Algorithm::QuasiNewton => quasi_newton::minimize(f, &start, lower, upper, cfg),
            Algorithm::Simplex => simplex::nelder_mead(
                f,
                &start,
                lower,
                upper,
                simplex::SimplexOptions {
                    max_iters: cfg.max_iters,
                    tol: cfg.tol,
                },
            ),
        };
        total = Some(match total {
            None => out,
            Some(prev) => {
                let better = out.fx < prev.fx;
                let mut merged = if better { out.clone() } else { prev.clone() };
                merged.iterations = prev.iterations + out.iterations;
                merged.evaluations = prev.evaluations + out.evaluations;
                merged.used_simplex = prev.used_simplex || out.used_simplex;
                merged.termination = out.termination;
                merged
            }
        });
        let cur = total.as_ref().expect("one pass ran");
        if !cur.fx.is_finite() {
            break;
        }
        start = cur.x.clone();
    }
    total.expect("restarts >= 1")
}

/// Smoother with the default λ grid for `obs`.
pub fn default_smoother(model: &SeparableModel, obs: &ObservationSet) -> Result<SmootherFit> {
    check_dim("observed states", model.d(), obs.d())?;
    let horizon = model.horizon();
    fit_smoother(obs, horizon, &default_lambda_grid(horizon, obs.n()))
}

/// Initial values for NLS read off the smoother at `t = 0`.
pub fn smoother_initial_values(fit: &SmootherFit) -> Vec<f64> {
    eval_smoother(fit, 0.0).expect("t = 0 is on every grid")
}

/// Separable least squares. Only the nonlinear block needs a starting
/// point.
pub fn fit_sls(
    model: &SeparableModel,
    obs: &ObservationSet,
    theta_nl_init: &[f64],
    cfg: &OptimizerConfig,
) -> Result<EstimationResult> {
    let fit = default_smoother(model, obs)?;
    fit_sls_with_smoother(model, &fit, theta_nl_init, cfg)
}

pub fn fit_sls_with_smoother(
    model: &SeparableModel,
    fit: &SmootherFit,
    theta_nl_init: &[f64],
    cfg: &OptimizerConfig,
) -> Result<EstimationResult> {
    cfg.validate()?;
    check_dim("theta_nl init", model.p_nl(), theta_nl_init.len())?;
    check_dim("smoother states", model.d(), fit.d())?;
    let started = Instant::now();

    if model.p_nl() == 0 {
        let solved = reduced_criterion(model, fit, &[]);
        let wall_time = started.elapsed().as_secs_f64();
        return Ok(match solved {
            Ok((loss, lin)) => EstimationResult {
                method: Method::Sls,
                estimate: lin.params(),
                loss,
                iterations: 0,
                wall_time,
                converged: true,
                diagnostics: Diagnostics {
                    cond_b: Some(lin.cond_b),
                    ridge_used: lin.ridge_used,
                    termination: Termination::ClosedForm,
                    evaluations: 1,
                    used_simplex: false,
                },
            },
            Err(_) => infeasible_result(model, Method::Sls, theta_nl_init, 0, 1, wall_time),
        });
    }

    let lower: Vec<f64> = model.bounds_nl().iter().map(|b| b.lower).collect();
    let upper: Vec<f64> = model.bounds_nl().iter().map(|b| b.upper).collect();
    let mut objective = |theta: &[f64]| reduced_or_infeasible(model, fit, theta);
    let out = run_passes(&mut objective, theta_nl_init, &lower, &upper, cfg);
    let result = match reduced_criterion(model, fit, &out.x) {
        Ok((loss, lin)) if out.fx.is_finite() => EstimationResult {
            method: Method::Sls,
            estimate: lin.params(),
            loss,
            iterations: out.iterations,
            wall_time: 0.0,
            converged: out.termination.converged(),
            diagnostics: Diagnostics {
                cond_b: Some(lin.cond_b),
                ridge_used: lin.ridge_used,
                termination: out.termination,
                evaluations: out.evaluations + 1,
                used_simplex: out.used_simplex,
            },
        },
        _ => infeasible_result(model, Method::Sls, &out.x, out.iterations, out.evaluations, 0.0),
    };
    Ok(EstimationResult {
        wall_time: started.elapsed().as_secs_f64(),
        ..result
    })
}

/// Joint nonlinear least squares over `(ξ, θ_NL, θ_L)`.
pub fn fit_nls(
    model: &SeparableModel,
    obs: &ObservationSet,
    init: &ParamSplit,
    cfg: &OptimizerConfig,
) -> Result<EstimationResult> {
    let fit = default_smoother(model, obs)?;
    fit_nls_with_smoother(model, &fit, init, cfg)
}

pub fn fit_nls_with_smoother(
    model: &SeparableModel,
    fit: &SmootherFit,
    init: &ParamSplit,
    cfg: &OptimizerConfig,
) -> Result<EstimationResult> {
    cfg.validate()?;
    model.check_params(init)?;
    check_dim("smoother states", model.d(), fit.d())?;
    let (d, p_nl, p_l) = (model.d(), model.p_nl(), model.p_l());
    let started = Instant::now();

    let mut lower = vec![f64::NEG_INFINITY; d];
    let mut upper = vec![f64::INFINITY; d];
    lower.extend(model.bounds_nl().iter().map(|b| b.lower));
    upper.extend(model.bounds_nl().iter().map(|b| b.upper));
    for &positive in model.positivity_l() {
        lower.push(if positive { 0.0 } else { f64::NEG_INFINITY });
        upper.push(f64::INFINITY);
    }
    let x0: Vec<f64> = init
        .xi
        .iter()
        .chain(&init.theta_nl)
        .chain(&init.theta_l)
        .copied()
        .collect();
    let unpack = |z: &[f64]| {
        ParamSplit::new(
            z[d..d + p_nl].to_vec(),
            z[d + p_nl..d + p_nl + p_l].to_vec(),
            z[..d].to_vec(),
        )
    };
    let mut objective = |z: &[f64]| full_criterion(model, fit, &unpack(z)).unwrap_or(f64::INFINITY);
    let out = run_passes(&mut objective, &x0, &lower, &upper, cfg);
    let wall_time = started.elapsed().as_secs_f64();
    if !out.fx.is_finite() {
        let mut res = infeasible_result(model, Method::Nls, &init.theta_nl, out.iterations, out.evaluations, wall_time);
        res.diagnostics.used_simplex = out.used_simplex;
        return Ok(res);
    }
    Ok(EstimationResult {
        method: Method::Nls,
        estimate: unpack(&out.x),
        loss: out.fx,
        iterations: out.iterations,
        wall_time,
        converged: out.termination.converged(),
        diagnostics: Diagnostics {
            cond_b: None,
            ridge_used: false,
            termination: out.termination,
            evaluations: out.evaluations,
            used_simplex: out.used_simplex,
        },
    })
}

fn infeasible_result(
    model: &SeparableModel,
    method: Method,
    theta_nl: &[f64],
    iterations: usize,
    evaluations: usize,
    wall_time: f64,
) -> EstimationResult {
    EstimationResult {
        method,
        estimate: ParamSplit::new(
            theta_nl.to_vec(),
            vec![f64::NAN; model.p_l()],
            vec![f64::NAN; model.d()],
        ),
        loss: f64::INFINITY,
        iterations,
        wall_time,
        converged: false,
        diagnostics: Diagnostics {
            cond_b: None,
            ridge_used: false,
            termination: Termination::Infeasible,
            evaluations,
            used_simplex: false,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn unconstrained_rosenbrock() {
        let inf = f64::INFINITY;
        let cfg = OptimizerConfig {
            tol: 1e-14,
            max_iters: 2000,
            ..Default::default()
        };
        let r = minimize_box(rosenbrock, &[-1.2, 1.0], &[-inf; 2], &[inf; 2], &cfg);
        assert!(r.termination.converged(), "{r:?}");
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4, "{r:?}");
    }

    #[test]
    fn active_bound_is_respected() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2);
        let r = minimize_box(f, &[0.5, 0.5], &[0.0, 0.0], &[2.0, 2.0], &OptimizerConfig::default());
        assert!(r.termination.converged());
        assert!((r.x[0] - 2.0).abs() < 1e-9 && r.x[1].abs() < 1e-9, "{:?}", r.x);
    }

    #[test]
    fn routes_around_infeasible_region() {
        // infeasible for x < 0.5, minimum at the edge of feasibility
        let f = |x: &[f64]| if x[0] < 0.5 { f64::INFINITY } else { (x[0] - 0.2).powi(2) };
        let r = minimize_box(f, &[0.9], &[0.0], &[1.0], &OptimizerConfig::default());
        assert!(r.value.is_finite());
        assert!((r.x[0] - 0.5).abs() < 1e-3, "{:?}", r.x);
    }

    #[test]
    fn all_infeasible_is_reported() {
        let r = minimize_box(|_| f64::INFINITY, &[0.3, 0.3], &[0.0; 2], &[1.0; 2], &OptimizerConfig::default());
        assert_eq!(r.termination, Termination::Infeasible);
        assert!(!r.termination.converged());
    }

    #[test]
    fn simplex_algorithm() {
        let cfg = OptimizerConfig {
            algorithm: Algorithm::Simplex,
            max_iters: 5000,
            tol: 1e-12,
            ..Default::default()
        };
        let inf = f64::INFINITY;
        let r = minimize_box(rosenbrock, &[-1.2, 1.0], &[-inf; 2], &[inf; 2], &cfg);
        assert!(r.termination.converged());
        assert!((r.x[0] - 1.0).abs() < 1e-3 && (r.x[1] - 1.0).abs() < 1e-3, "{r:?}");
    }

    #[test]
    fn stationary_start_stops_immediately() {
        let f = |x: &[f64]| 1.0 + (x[0] - 0.3).powi(2) + 2.0 * (x[1] - 0.7).powi(2);
        let r = minimize_box(f, &[0.3, 0.7], &[0.0; 2], &[1.0; 2], &OptimizerConfig::default());
        assert!(r.termination.converged());
        assert!(r.iterations <= 2, "{r:?}");
        assert!((r.value - 1.0).abs() <= 1e-8);
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::default().validate().is_ok());
        let bad = OptimizerConfig {
            tol: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = OptimizerConfig {
            max_iters: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
