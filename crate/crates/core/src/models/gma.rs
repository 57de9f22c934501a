use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::Result;
use crate::model::{Bounds, SeparableField, SeparableModel};

pub const GMA_HORIZON: f64 = 4.0;
/// Smoothed states are clipped here before fractional powers are taken.
pub const GMA_STATE_FLOOR: f64 = 1e-8;

/// Three-variable generalized mass action pathway.
///
/// ```text
/// x1' = γ11 x2^f121 x3^f131 − γ12 x1^f112 x2^f122 − γ13 x1^f113 x3^f133
/// x2' = γ12 x1^f112 x2^f122 − γ22 x2^f222
/// x3' = γ13 x1^f113 x3^f133 − γ32 x3^f332
/// ```
///
/// Linear block `(γ11, γ12, γ13, γ22, γ32)`; nonlinear block
/// `(f121, f131, f112, f122, f113, f133, f222, f332)`. Powers of
/// non-positive states come out non-finite, which the criterion treats as
/// infeasible.
#[derive(Debug, Clone, Copy)]
pub struct Gma;

impl SeparableField for Gma {
    fn linear_part(&self, _t: f64, x: &[f64], f: &[f64], g: &mut DMatrix<f64>) {
        let (x1, x2, x3) = (x[0], x[1], x[2]);
        let influx = x2.powf(f[0]) * x3.powf(f[1]);
        let flux12 = x1.powf(f[2]) * x2.powf(f[3]);
        let flux13 = x1.powf(f[4]) * x3.powf(f[5]);
        g[(0, 0)] = influx;
        g[(0, 1)] = -flux12;
        g[(0, 2)] = -flux13;
        g[(1, 1)] = flux12;
        g[(1, 3)] = -x2.powf(f[6]);
        g[(2, 2)] = flux13;
        g[(2, 4)] = -x3.powf(f[7]);
    }
}

pub fn make_gma() -> Result<SeparableModel> {
    let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    Ok(SeparableModel::new(
        "gma",
        names(&["x1", "x2", "x3"]),
        names(&["f121", "f131", "f112", "f122", "f113", "f133", "f222", "f332"]),
        names(&["gamma11", "gamma12", "gamma13", "gamma22", "gamma32"]),
        GMA_HORIZON,
        Arc::new(Gma),
    )?
    .with_bounds_nl(vec![Bounds::new(-2.0, 2.0); 8])?
    .with_state_floor(GMA_STATE_FLOOR))
}
