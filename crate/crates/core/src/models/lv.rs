use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::Result;
use crate::model::{Bounds, SeparableField, SeparableModel};

pub const LV_HORIZON: f64 = 25.0;

/// Predator–prey model with seasonally forced predation,
/// `s(t) = 1 + ε sin(2π(t/T + ω))`.
///
/// Linear block `(α, β, δ, γ)`, nonlinear block `(ε, ω)`.
#[derive(Debug, Clone)]
pub struct ForcedLotkaVolterra {
    pub period: f64,
}

impl ForcedLotkaVolterra {
    pub fn forcing(&self, t: f64, eps: f64, omega: f64) -> f64 {
        1.0 + eps * (2.0 * PI * (t / self.period + omega)).sin()
    }
}

impl SeparableField for ForcedLotkaVolterra {
    fn linear_part(&self, t: f64, x: &[f64], theta_nl: &[f64], g: &mut DMatrix<f64>) {
        let s = self.forcing(t, theta_nl[0], theta_nl[1]);
        let inter = s * x[0] * x[1];
        g[(0, 0)] = x[0];
        g[(0, 1)] = -inter;
        g[(1, 2)] = inter;
        g[(1, 3)] = -x[1];
    }
}

pub fn make_lv_forced(horizon: f64) -> Result<SeparableModel> {
    let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    SeparableModel::new(
        "lv",
        names(&["x1", "x2"]),
        names(&["epsilon", "omega"]),
        names(&["alpha", "beta", "delta", "gamma"]),
        horizon,
        Arc::new(ForcedLotkaVolterra { period: horizon }),
    )?
    .with_bounds_nl(vec![Bounds::new(0.0, 1.0); 2])?
    .with_positivity_l(vec![true; 4])
}
