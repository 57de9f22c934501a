use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{Bounds, SeparableField, SeparableModel};

/// Horizon (weeks) of the single-season benchmark epidemic.
pub const SIR_HORIZON: f64 = 20.0;

/// Age-structured multi-season SIR.
///
/// States are ordered season-major: `(S_{1,1}, I_{1,1}, S_{2,1}, I_{2,1}, …)`.
/// The linear block is `(β_{1,1}, β_{1,2}, …, β_{M,M}, γ)` with β row-major;
/// the nonlinear block is the relative infectivities `κ_2..κ_L`.
#[derive(Debug, Clone)]
pub struct AgeSeasonSir {
    pub groups: usize,
    pub seasons: usize,
}

impl AgeSeasonSir {
    fn s(&self, a: usize, y: usize) -> usize {
        2 * (y * self.groups + a)
    }
    fn i(&self, a: usize, y: usize) -> usize {
        2 * (y * self.groups + a) + 1
    }
}

impl SeparableField for AgeSeasonSir {
    fn linear_part(&self, _t: f64, x: &[f64], theta_nl: &[f64], g: &mut DMatrix<f64>) {
        let m = self.groups;
        let gamma_col = m * m;
        for y in 0..self.seasons {
            let kappa = if y == 0 { 1.0 } else { theta_nl[y - 1] };
            for a in 0..m {
                let (si, ii) = (self.s(a, y), self.i(a, y));
                let s = x[si];
                for j in 0..m {
                    let force = s * kappa * x[self.i(j, y)];
                    g[(si, a * m + j)] = -force;
                    g[(ii, a * m + j)] = force;
                }
                g[(ii, gamma_col)] = -x[ii];
            }
        }
    }
}

pub fn make_sir(groups: usize, seasons: usize) -> Result<SeparableModel> {
    if groups == 0 || seasons == 0 {
        return Err(Error::InvalidInput("SIR needs at least one age group and one season".into()));
    }
    let field = AgeSeasonSir { groups, seasons };
    let single = groups == 1 && seasons == 1;
    let mut states = Vec::with_capacity(2 * groups * seasons);
    for y in 1..=seasons {
        for a in 1..=groups {
            if single {
                states.push("S".to_string());
                states.push("I".to_string());
            } else {
                states.push(format!("S_{a}_{y}"));
                states.push(format!("I_{a}_{y}"));
            }
        }
    }
    let mut linear = Vec::with_capacity(groups * groups + 1);
    for a in 1..=groups {
        for j in 1..=groups {
            linear.push(if groups == 1 { "beta".to_string() } else { format!("beta_{a}_{j}") });
        }
    }
    linear.push("gamma".to_string());
    let nonlinear: Vec<String> = (2..=seasons).map(|y| format!("kappa_{y}")).collect();
    let p_l = linear.len();
    let p_nl = nonlinear.len();
    SeparableModel::new("sir", states, nonlinear, linear, SIR_HORIZON, Arc::new(field))?
        .with_bounds_nl(vec![Bounds::new(0.01, 10.0); p_nl])?
        .with_positivity_l(vec![true; p_l])
}
