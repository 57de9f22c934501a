//! Projected BFGS with central finite-difference gradients.
//!
//! Variables sitting on a bound with the gradient pushing outward are held
//! fixed for the iteration; the step is projected back onto the box and
//! accepted by an Armijo test along the projected path. Two failed line
//! searches hand the problem to the simplex search.

use nalgebra::{DMatrix, DVector};

use super::simplex::{nelder_mead, SimplexOptions};
use super::{clamp_into, Objective, OptimizerConfig, Outcome};
use crate::model::Termination;

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;

struct Counted<'a, 'b> {
    f: &'a mut Objective<'b>,
    evaluations: usize,
}

impl Counted<'_, '_> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evaluations += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }

    /// Central differences, one-sided next to a bound or an infeasible
    /// neighbour. Also returns the lowest probe value.
    fn gradient(&mut self, x: &[f64], fx: f64, lower: &[f64], upper: &[f64], rel_step: f64) -> (Vec<f64>, f64) {
        let n = x.len();
        let mut g = vec![0.0; n];
        let mut lowest = f64::INFINITY;
        let mut probe = x.to_vec();
        for i in 0..n {
            let h = rel_step * x[i].abs().max(1.0);
            let up_ok = x[i] + h <= upper[i];
            let down_ok = x[i] - h >= lower[i];
            let mut fp = f64::INFINITY;
            let mut fm = f64::INFINITY;
            if up_ok {
                probe[i] = x[i] + h;
                fp = self.eval(&probe);
            }
            if down_ok {
                probe[i] = x[i] - h;
                fm = self.eval(&probe);
            }
            probe[i] = x[i];
            lowest = lowest.min(fp).min(fm);
            g[i] = match (fp.is_finite(), fm.is_finite()) {
                (true, true) => (fp - fm) / (2.0 * h),
                (true, false) => (fp - fx) / h,
                (false, true) => (fx - fm) / h,
                (false, false) => 0.0,
            };
        }
        (g, lowest)
    }
}

pub(crate) fn minimize(
    f: &mut Objective<'_>,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    cfg: &OptimizerConfig,
) -> Outcome {
    let n = x0.len();
    let mut obj = Counted { f, evaluations: 0 };
    let mut x = x0.to_vec();
    clamp_into(&mut x, lower, upper);
    let mut fx = obj.eval(&x);
    if !fx.is_finite() {
        let evals = obj.evaluations;
        let mut out = nelder_mead(
            obj.f,
            &x,
            lower,
            upper,
            SimplexOptions {
                max_iters: cfg.max_iters,
                tol: cfg.tol,
            },
        );
        out.evaluations += evals;
        return out;
    }
    let (mut g, mut lowest_probe) = obj.gradient(&x, fx, lower, upper, cfg.fd_step);
    let mut hinv = DMatrix::<f64>::identity(n, n);
    let mut fresh = true;
    let mut line_failures = 0;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        iterations += 1;
        let free: Vec<bool> = (0..n)
            .map(|i| !((x[i] <= lower[i] && g[i] > 0.0) || (x[i] >= upper[i] && g[i] < 0.0)))
            .collect();
        let proj_grad = (0..n)
            .map(|i| {
                let target = (x[i] - g[i]).clamp(lower[i], upper[i]);
                (target - x[i]).abs()
            })
            .fold(0.0, f64::max);
        if proj_grad == 0.0 {
            return done(x, fx, iterations, obj.evaluations, Termination::Stationary);
        }

        let gv = DVector::from_iterator(n, (0..n).map(|i| if free[i] { g[i] } else { 0.0 }));
        let mut dir = -(&hinv * &gv);
        for i in 0..n {
            if !free[i] {
                dir[i] = 0.0;
            }
        }
        if dir.dot(&gv) >= 0.0 {
            hinv = DMatrix::identity(n, n);
            fresh = true;
            dir = -gv.clone();
        }
        let mut alpha = if fresh {
            let dmax = dir.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let xmax = x.iter().fold(1.0f64, |a, v| a.max(v.abs()));
            (0.1 * xmax / dmax).min(1.0)
        } else {
            1.0
        };

        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let mut trial: Vec<f64> = (0..n).map(|i| x[i] + alpha * dir[i]).collect();
            clamp_into(&mut trial, lower, upper);
            let decrease: f64 = (0..n).map(|i| g[i] * (trial[i] - x[i])).sum();
            if decrease < 0.0 {
                let ft = obj.eval(&trial);
                if ft.is_finite() && ft <= fx + ARMIJO * decrease {
                    accepted = Some((trial, ft));
                    break;
                }
            }
            alpha *= 0.5;
        }

        let Some((x_new, f_new)) = accepted else {
            // no finite-difference neighbour improves on x by more than tol
            if lowest_probe >= fx - cfg.tol * fx.abs() {
                return done(x, fx, iterations, obj.evaluations, Termination::Stationary);
            }
            line_failures += 1;
            if line_failures >= 2 {
                let evals = obj.evaluations;
                let mut out = nelder_mead(
                    obj.f,
                    &x,
                    lower,
                    upper,
                    SimplexOptions {
                        max_iters: cfg.max_iters.saturating_sub(iterations),
                        tol: cfg.tol,
                    },
                );
                out.iterations += iterations;
                out.evaluations += evals;
                if out.fx > fx {
                    out.x = x;
                    out.fx = fx;
                }
                return out;
            }
            hinv = DMatrix::identity(n, n);
            fresh = true;
            continue;
        };

        let (g_new, probe) = obj.gradient(&x_new, f_new, lower, upper, cfg.fd_step);
        lowest_probe = probe;
        let change = fx - f_new;
        let s = DVector::from_iterator(n, (0..n).map(|i| x_new[i] - x[i]));
        let y = DVector::from_iterator(n, (0..n).map(|i| g_new[i] - g[i]));
        x = x_new;
        let f_old = fx;
        fx = f_new;
        g = g_new;
        if change <= cfg.tol * f_old.abs().max(fx.abs()).max(1e-300) {
            return done(x, fx, iterations, obj.evaluations, Termination::Tolerance);
        }

        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() && sy > 0.0 {
            if fresh {
                hinv *= sy / y.dot(&y);
                fresh = false;
            }
            let rho = 1.0 / sy;
            let hy = &hinv * &y;
            let yhy = y.dot(&hy);
            // H ← H − ρ(H y sᵀ + s yᵀ H) + (ρ² yᵀHy + ρ) s sᵀ
            hinv -= (&hy * s.transpose() + &s * hy.transpose()) * rho;
            hinv += (&s * s.transpose()) * (rho * rho * yhy + rho);
        }
    }
    done(x, fx, iterations, obj.evaluations, Termination::MaxIterations)
}

fn done(x: Vec<f64>, fx: f64, iterations: usize, evaluations: usize, termination: Termination) -> Outcome {
    Outcome {
        x,
        fx,
        iterations,
        evaluations,
        termination,
        used_simplex: false,
    }
}
