//! Nelder–Mead on a box, by clamping trial points.

use super::{clamp_into, Objective, Outcome};
use crate::model::Termination;

pub(crate) struct SimplexOptions {
    pub max_iters: usize,
    pub tol: f64,
}

pub(crate) fn nelder_mead(
    f: &mut Objective<'_>,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: SimplexOptions,
) -> Outcome {
    let n = x0.len();
    let mut evaluations = 0;
    let mut eval = |x: &[f64], evaluations: &mut usize| {
        *evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut start = x0.to_vec();
    clamp_into(&mut start, lower, upper);
    let mut simplex = vec![start.clone()];
    for i in 0..n {
        let mut v = start.clone();
        let width = upper[i] - lower[i];
        let step = if width.is_finite() {
            0.1 * width
        } else if v[i] != 0.0 {
            0.05 * v[i].abs()
        } else {
            2.5e-4
        };
        v[i] = if v[i] + step <= upper[i] { v[i] + step } else { v[i] - step };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v, &mut evaluations)).collect();
    if values.iter().all(|v| !v.is_finite()) {
        return Outcome {
            x: start,
            fx: f64::INFINITY,
            iterations: 0,
            evaluations,
            termination: Termination::Infeasible,
            used_simplex: true,
        };
    }

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut iterations = 0;
    let mut termination = Termination::MaxIterations;
    while iterations < opts.max_iters {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let best = values[0];
        let worst = values[n];
        let spread_f = worst - best;
        let spread_x = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        let scale_x = simplex[0].iter().fold(1.0f64, |a, v| a.max(v.abs()));
        if best.is_finite() && spread_f <= opts.tol * best.abs().max(1e-300) && spread_x <= 1e-8 * scale_x {
            termination = Termination::Tolerance;
            break;
        }
        // collapsed simplex
        if best.is_finite() && spread_x <= 1e-10 * scale_x {
            termination = Termination::Tolerance;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let along = |t: f64| {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (c - w))
                .collect();
            clamp_into(&mut p, lower, upper);
            p
        };
        let xr = along(alpha);
        let fr = eval(&xr, &mut evaluations);
        if fr < values[0] {
            let xe = along(gamma);
            let fe = eval(&xe, &mut evaluations);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[n] {
            let xc = along(rho);
            let fc = eval(&xc, &mut evaluations);
            (xc, fc)
        } else {
            let xc = along(-rho);
            let fc = eval(&xc, &mut evaluations);
            (xc, fc)
        };
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        let best_pt = simplex[0].clone();
        for i in 1..=n {
            for (x, b) in simplex[i].iter_mut().zip(&best_pt) {
                *x = b + sigma * (*x - b);
            }
            values[i] = eval(&simplex[i], &mut evaluations);
        }
    }
    let ib = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    Outcome {
        x: simplex[ib].clone(),
        fx: values[ib],
        iterations,
        evaluations,
        termination,
        used_simplex: true,
    }
}
