//! Adaptive Dormand–Prince 5(4) integration of model trajectories.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{FieldWorkspace, ParamSplit, SeparableModel};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            max_steps: 1_000_000,
        }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Difference between the 5th and embedded 4th order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates `y' = f(t, y)` from `(0, y0)` and returns the state at each
/// of `times` (`n × d`). Steps are shortened to land exactly on the
/// requested times.
pub fn dopri5<F>(mut f: F, y0: &[f64], times: &[f64], opts: OdeOptions) -> Result<DMatrix<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let d = y0.len();
    let n = times.len();
    if times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return Err(Error::InvalidInput("output times must be finite and non-negative".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("output times must be increasing".into()));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite initial state".into()));
    }
    let mut out = DMatrix::zeros(n, d);
    let mut t = 0.0;
    let mut y = y0.to_vec();
    let mut k = vec![vec![0.0; d]; 7];
    let mut ytmp = vec![0.0; d];
    let mut ynew = vec![0.0; d];
    f(t, &y, &mut k[0]);

    let end = times.last().copied().unwrap_or(0.0);
    let mut h = if end > 0.0 {
        initial_step(&mut f, t, &y, &k[0], end, opts)
    } else {
        0.0
    };
    let mut steps = 0;
    let mut next = 0;
    while next < n && times[next] <= t {
        out.row_mut(next).copy_from_slice(&y);
        next += 1;
    }
    let mut last_rejected = false;
    while next < n {
        let target = times[next];
        let mut step = h.min(target - t);
        let hits = step >= target - t;
        if hits {
            step = target - t;
        }
        if step < 1e-14 * t.abs().max(1.0) {
            return Err(Error::Integration {
                t,
                reason: "step size underflow".into(),
            });
        }
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::Integration {
                t,
                reason: "too many steps".into(),
            });
        }
        for s in 1..7 {
            for i in 0..d {
                let mut acc = y[i];
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += step * A[s][j] * kj[i];
                }
                ytmp[i] = acc;
            }
            f(t + C[s] * step, &ytmp, &mut k[s]);
            if s == 6 {
                ynew.copy_from_slice(&ytmp);
            }
        }
        let mut err = 0.0;
        for i in 0..d {
            let e: f64 = step * (0..7).map(|s| E[s] * k[s][i]).sum::<f64>();
            let sc = opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs());
            err += (e / sc) * (e / sc);
        }
        let err = (err / d as f64).sqrt();
        if !err.is_finite() || ynew.iter().any(|v| !v.is_finite()) {
            h = step * 0.2;
            last_rejected = true;
            continue;
        }
        if err <= 1.0 {
            t = if hits { target } else { t + step };
            y.copy_from_slice(&ynew);
            let k6 = k[6].clone();
            k[0].copy_from_slice(&k6);
            let mut fac = if err == 0.0 { 10.0 } else { 0.9 * err.powf(-0.2) };
            fac = fac.clamp(0.2, 10.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            // a step shortened to land on an output keeps the longer proposal
            h = if hits && step < h { h.max(step * fac) } else { step * fac };
            last_rejected = false;
            while next < n && times[next] <= t {
                out.row_mut(next).copy_from_slice(&y);
                next += 1;
            }
        } else {
            let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            h = step * fac;
            last_rejected = true;
        }
    }
    Ok(out)
}

fn initial_step<F>(f: &mut F, t0: f64, y0: &[f64], f0: &[f64], span: f64, opts: OdeOptions) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let d = y0.len() as f64;
    let sc: Vec<f64> = y0.iter().map(|y| opts.atol + opts.rtol * y.abs()).collect();
    let norm = |v: &[f64]| (v.iter().zip(&sc).map(|(a, s)| (a / s) * (a / s)).sum::<f64>() / d).sqrt();
    let d0 = norm(y0);
    let d1 = norm(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
    let mut f1 = vec![0.0; y0.len()];
    f(t0 + h0, &y1, &mut f1);
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span)
}

/// Simulates `model` at `params` from `x(0) = ξ` and samples the state at
/// `times`.
pub fn integrate(model: &SeparableModel, params: &ParamSplit, times: &[f64]) -> Result<DMatrix<f64>> {
    model.check_params(params)?;
    if !params.is_finite() {
        return Err(Error::InvalidInput("non-finite parameters".into()));
    }
    let mut ws = FieldWorkspace::new(model);
    dopri5(
        |t, x, dx| ws.full(model, t, x, params, dx),
        &params.xi,
        times,
        OdeOptions::default(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth() {
        let y = dopri5(|_, x, dx| dx[0] = x[0], &[1.0], &[0.0, 0.5, 1.0], OdeOptions::default()).unwrap();
        assert_eq!(y[(0, 0)], 1.0);
        assert!((y[(1, 0)] - 0.5f64.exp()).abs() < 1e-7);
        assert!((y[(2, 0)] - 1f64.exp()).abs() < 1e-6);
    }

    #[test]
    fn constant_slope() {
        let y = dopri5(|_, _, dx| dx[0] = 2.0, &[3.0], &[2.0], OdeOptions::default()).unwrap();
        assert!((y[(0, 0)] - 7.0).abs() < 1e-10);
    }

    #[test]
    fn harmonic_oscillator_at_many_outputs() {
        let times: Vec<f64> = (0..101).map(|i| i as f64 * 0.1).collect();
        let y = dopri5(
            |_, x, dx| {
                dx[0] = x[1];
                dx[1] = -x[0];
            },
            &[1.0, 0.0],
            &times,
            OdeOptions::default(),
        )
        .unwrap();
        for (i, t) in times.iter().enumerate() {
            assert!((y[(i, 0)] - t.cos()).abs() < 1e-7);
            assert!((y[(i, 1)] + t.sin()).abs() < 1e-7);
        }
    }

    #[test]
    fn blow_up_reports_failure_time() {
        // x' = x², x(0) = 1 explodes at t = 1
        let err = dopri5(|_, x, dx| dx[0] = x[0] * x[0], &[1.0], &[2.0], OdeOptions::default()).unwrap_err();
        match err {
            Error::Integration { t, .. } => assert!(t > 0.9 && t < 1.01, "{t}"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
