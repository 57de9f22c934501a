//! The four benchmark systems, trajectory simulation and noisy data.

mod fhn;
mod gma;
mod lv;
pub mod ode;
mod sir;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::model::{ObservationSet, ParamSplit, SeparableModel};

pub use fhn::{make_fhn, FitzHughNagumo, FHN_HORIZON};
pub use gma::{make_gma, Gma, GMA_HORIZON, GMA_STATE_FLOOR};
pub use lv::{make_lv_forced, ForcedLotkaVolterra, LV_HORIZON};
pub use ode::{dopri5, integrate, OdeOptions};
pub use sir::{make_sir, AgeSeasonSir, SIR_HORIZON};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchmarkKind {
    #[serde(alias = "SIR")]
    Sir,
    #[serde(alias = "ltk")]
    Lv,
    Gma,
    #[serde(alias = "ftz")]
    Fhn,
}

impl BenchmarkKind {
    pub const ALL: [BenchmarkKind; 4] = [Self::Sir, Self::Lv, Self::Gma, Self::Fhn];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Sir => "sir",
            Self::Lv => "lv",
            Self::Gma => "gma",
            Self::Fhn => "fhn",
        }
    }

    pub fn spec(self) -> BenchmarkSpec {
        BenchmarkSpec::new(self)
    }
}

impl fmt::Display for BenchmarkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BenchmarkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sir" => Ok(Self::Sir),
            "lv" | "ltk" => Ok(Self::Lv),
            "gma" => Ok(Self::Gma),
            "fhn" | "ftz" => Ok(Self::Fhn),
            other => Err(Error::InvalidInput(format!("unknown benchmark '{other}'"))),
        }
    }
}

/// Prior-quality levels, as coefficients of variation of the initial-guess
/// distribution for the linear parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorLevels {
    pub high: f64,
    pub medium: f64,
    pub low: f64,
}

impl PriorLevels {
    pub fn as_array(&self) -> [f64; 3] {
        [self.high, self.medium, self.low]
    }

    pub fn label(&self, cv: f64) -> Option<&'static str> {
        if cv == self.high {
            Some("high")
        } else if cv == self.medium {
            Some("medium")
        } else if cv == self.low {
            Some("low")
        } else {
            None
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkSpec {
    pub kind: BenchmarkKind,
    pub model: SeparableModel,
    pub theta_true: ParamSplit,
    /// Small and large sample sizes.
    pub sample_sizes: [usize; 2],
    /// Low and high noise divisors.
    pub snr_levels: [f64; 2],
    pub prior_qualities: PriorLevels,
    pub mc_reps: usize,
}

impl BenchmarkSpec {
    pub fn new(kind: BenchmarkKind) -> Self {
        let (model, theta_true, sample_sizes, prior) = match kind {
            BenchmarkKind::Sir => (
                make_sir(1, 1).expect("valid SIR"),
                ParamSplit::new(vec![], vec![6.0, 2.3], vec![0.56, 1e-4]),
                [18, 36],
                [0.1, 0.2, 0.3],
            ),
            BenchmarkKind::Lv => (
                make_lv_forced(LV_HORIZON).expect("valid LV"),
                ParamSplit::new(vec![0.2, 0.5], vec![2.0 / 3.0, 4.0 / 3.0, 1.0, 1.0], vec![0.9, 0.9]),
                [100, 200],
                [0.05, 0.1, 0.2],
            ),
            BenchmarkKind::Gma => (
                make_gma().expect("valid GMA"),
                ParamSplit::new(
                    vec![-1.0, -1.0, 0.5, -0.1, 0.75, -0.2, 0.5, 0.5],
                    vec![0.4, 3.0, 2.0, 1.5, 5.0],
                    vec![0.5, 0.5, 1.0],
                ),
                [100, 200],
                [0.1, 0.3, 0.5],
            ),
            BenchmarkKind::Fhn => (
                make_fhn().expect("valid FHN"),
                ParamSplit::new(vec![3.0], vec![0.2, 0.2], vec![-1.0, 1.0]),
                [20, 40],
                [0.5, 1.0, 3.0],
            ),
        };
        Self {
            kind,
            model,
            theta_true,
            sample_sizes,
            snr_levels: [10.0, 5.0],
            prior_qualities: PriorLevels {
                high: prior[0],
                medium: prior[1],
                low: prior[2],
            },
            mc_reps: 500,
        }
    }
}

/// `n` equally spaced times covering `[0, horizon]` including both ends.
pub fn sample_times(horizon: f64, n: usize) -> Vec<f64> {
    crate::smoothing::uniform_grid(horizon, n.max(2))
}

/// Sample standard deviation (denominator `n − 1`).
pub fn sample_std(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count();
    if n < 2 {
        return 0.0;
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    (ss / (n - 1) as f64).sqrt()
}

/// Adds independent Gaussian noise to each column of `traj` with standard
/// deviation `std(column) / snr_divisor`. An infinite divisor gives
/// noiseless data. Draws are taken row by row, so the noise stream does not
/// depend on the divisor.
pub fn generate_observations<R: Rng + ?Sized>(
    times: &[f64],
    traj: &DMatrix<f64>,
    snr_divisor: f64,
    rng: &mut R,
) -> Result<ObservationSet> {
    check_dim("trajectory rows", times.len(), traj.nrows())?;
    if !(snr_divisor > 0.0) {
        return Err(Error::InvalidInput(format!("snr divisor must be positive, got {snr_divisor}")));
    }
    let (n, d) = traj.shape();
    let sigma: Vec<f64> = (0..d)
        .map(|j| sample_std(traj.column(j).iter().copied()) / snr_divisor)
        .collect();
    let mut y = traj.clone();
    for i in 0..n {
        for j in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            y[(i, j)] += sigma[j] * z;
        }
    }
    ObservationSet::new(times.to_vec(), y)?.with_noise_sd(sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::eval_full_field;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sir_single_group_field() {
        let spec = BenchmarkKind::Sir.spec();
        let m = &spec.model;
        assert_eq!((m.p_nl(), m.p_l(), m.d()), (0, 2, 2));
        let f = eval_full_field(m, 0.0, &[0.56, 1e-4], &spec.theta_true).unwrap();
        assert!((f[0] + 3.36e-4).abs() < 1e-15);
        assert!((f[1] - 1.06e-4).abs() < 1e-15);

        let p = ParamSplit::new(vec![], vec![0.0, 2.3], vec![0.0; 2]);
        let f = eval_full_field(m, 0.0, &[0.4, 0.01], &p).unwrap();
        assert_eq!(f[0], 0.0);
        assert!((f[1] + 2.3 * 0.01).abs() < 1e-15);
    }

    #[test]
    fn sir_general_dimensions() {
        let m = make_sir(2, 3).unwrap();
        assert_eq!((m.d(), m.p_l(), m.p_nl()), (12, 5, 2));
        assert!(make_sir(0, 1).is_err());
    }

    #[test]
    fn lv_field_at_truth() {
        let spec = BenchmarkKind::Lv.spec();
        let f = eval_full_field(&spec.model, 0.0, &[0.9, 0.9], &spec.theta_true).unwrap();
        assert!((f[0] + 0.48).abs() < 1e-12, "{}", f[0]);
        assert!((f[1] - (0.81 - 0.9)).abs() < 1e-12);

        let lv = ForcedLotkaVolterra { period: 25.0 };
        assert!((lv.forcing(0.0, 0.2, 0.5) - 1.0).abs() < 1e-15);
        for k in 0..20 {
            let t = 1.37 * k as f64;
            assert!((lv.forcing(t, 0.3, 0.1) - lv.forcing(t + 25.0, 0.3, 0.1)).abs() < 1e-12);
            assert_eq!(lv.forcing(t, 0.0, 0.7), 1.0);
        }
    }

    #[test]
    fn gma_field_at_truth() {
        let spec = BenchmarkKind::Gma.spec();
        let f = eval_full_field(&spec.model, 0.0, &[0.5, 0.5, 1.0], &spec.theta_true).unwrap();
        let expect = 3.0 * 0.5f64.powf(0.5) * 0.5f64.powf(-0.1) - 1.5 * 0.5f64.powf(0.5);
        assert!((f[1] - expect).abs() < 1e-14);
        assert!((f[1] - 1.212915).abs() < 1e-6, "{}", f[1]);

        let g = spec.model.g_eval(0.0, &[0.7, 1.3, 2.1], &spec.theta_true.theta_nl).unwrap();
        assert_eq!(g.iter().filter(|v| **v != 0.0).count(), 7);

        let g = spec.model.g_eval(0.0, &[0.7, 1.3, 2.1], &[0.0; 8]).unwrap();
        assert!(g.iter().all(|v| *v == 0.0 || v.abs() == 1.0));

        let g = spec.model.g_eval(0.0, &[-0.1, 1.0, 1.0], &spec.theta_true.theta_nl).unwrap();
        assert!(g.iter().any(|v| !v.is_finite()));
    }

    #[test]
    fn fhn_field() {
        let spec = BenchmarkKind::Fhn.spec();
        let f = eval_full_field(&spec.model, 0.0, &[-1.0, 1.0], &spec.theta_true).unwrap();
        assert!((f[0] - 1.0).abs() < 1e-14);
        assert!((f[1] - 1.0 / 3.0).abs() < 1e-14);

        let zero = ParamSplit::new(vec![3.0], vec![0.0, 0.0], vec![0.0; 2]);
        let f = eval_full_field(&spec.model, 0.0, &[0.4, 0.7], &zero).unwrap();
        assert_eq!(f[1], -0.4 / 3.0);

        let h1 = spec.model.h_eval(0.0, &[0.4, 0.7], &[3.0]).unwrap();
        let h2 = spec.model.h_eval(0.0, &[0.4, 0.7], &[3.0]).unwrap();
        assert_eq!(h1, h2);
    }

    #[test]
    fn fhn_trajectory_stays_bounded() {
        let spec = BenchmarkKind::Fhn.spec();
        let times = sample_times(20.0, 2001);
        let traj = integrate(&spec.model, &spec.theta_true, &times).unwrap();
        let peak = traj.column(0).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(peak <= 2.5, "{peak}");
    }

    #[test]
    fn noise_levels() {
        let times: Vec<f64> = (0..5).map(|i| i as f64).collect();
        let traj = DMatrix::from_fn(5, 2, |i, j| if j == 0 { 3.0 } else { i as f64 });
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let obs = generate_observations(&times, &traj, 10.0, &mut rng).unwrap();
        assert_eq!(obs.noise_sd().unwrap()[0], 0.0);
        assert!(obs.values().column(0).iter().all(|v| *v == 3.0));

        // stds (1, 4) with divisor 5
        let a = [-1.0, 1.0, -1.0, 1.0];
        let s = sample_std(a.iter().copied());
        let traj = DMatrix::from_fn(4, 2, |i, j| a[i] / s * if j == 0 { 1.0 } else { 4.0 });
        let obs = generate_observations(&times[..4], &traj, 5.0, &mut rng).unwrap();
        let sd = obs.noise_sd().unwrap();
        assert!((sd[0] - 0.2).abs() < 1e-12 && (sd[1] - 0.8).abs() < 1e-12);

        let obs = generate_observations(&times[..4], &traj, f64::INFINITY, &mut rng).unwrap();
        assert_eq!(obs.values(), &traj);
        assert!(generate_observations(&times[..4], &traj, 0.0, &mut rng).is_err());
    }

    #[test]
    fn benchmark_names_round_trip() {
        for kind in BenchmarkKind::ALL {
            assert_eq!(kind.as_str().parse::<BenchmarkKind>().unwrap(), kind);
            let spec = kind.spec();
            let levels = spec.prior_qualities.as_array();
            assert!(levels[0] < levels[1] && levels[1] < levels[2]);
            assert_eq!(spec.model.bounds_nl().len(), spec.model.p_nl());
        }
        assert_eq!("ltk".parse::<BenchmarkKind>().unwrap(), BenchmarkKind::Lv);
        assert!("xyz".parse::<BenchmarkKind>().is_err());
    }
}
