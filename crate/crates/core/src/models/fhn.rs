use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::Result;
use crate::model::{Bounds, SeparableField, SeparableModel};

pub const FHN_HORIZON: f64 = 20.0;

/// FitzHugh–Nagumo spike model,
///
/// ```text
/// x1' = c (x1 − x1³/3 + x2)
/// x2' = −(x1 − a + b x2) / c
/// ```
///
/// Linear in `(a, b)`, nonlinear in `c`. The terms carrying no linear
/// parameter live in the offset.
#[derive(Debug, Clone, Copy)]
pub struct FitzHughNagumo;

impl SeparableField for FitzHughNagumo {
    fn linear_part(&self, _t: f64, x: &[f64], theta_nl: &[f64], g: &mut DMatrix<f64>) {
        let c = theta_nl[0];
        g[(1, 0)] = 1.0 / c;
        g[(1, 1)] = -x[1] / c;
    }

    fn offset(&self, _t: f64, x: &[f64], theta_nl: &[f64], h: &mut [f64]) {
        let c = theta_nl[0];
        h[0] = c * (x[0] - x[0].powi(3) / 3.0 + x[1]);
        h[1] = -x[0] / c;
    }

    fn has_offset(&self) -> bool {
        true
    }
}

pub fn make_fhn() -> Result<SeparableModel> {
    let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    SeparableModel::new(
        "fhn",
        names(&["V", "R"]),
        names(&["c"]),
        names(&["a", "b"]),
        FHN_HORIZON,
        Arc::new(FitzHughNagumo),
    )?
    .with_bounds_nl(vec![Bounds::new(0.1, 10.0)])?
    .with_positivity_l(vec![true; 2])
}
