//! Monte-Carlo comparison of SLS and NLS.
//!
//! Every replication owns three random streams derived from
//! `(master_seed, rep_index)`: one for measurement noise, one for the shared
//! nonlinear starting point and one for the NLS linear starting point. SLS
//! never touches the third stream, so its results do not depend on
//! `prior_cv`. Replications run on the current rayon pool and are collected
//! in index order, so results do not depend on the worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Bounds, EstimationResult, ParamSplit};
use crate::models::{generate_observations, integrate, sample_times, BenchmarkKind, BenchmarkSpec};
use crate::optimize::{
    default_smoother, fit_nls_with_smoother, fit_sls_with_smoother, smoother_initial_values,
    OptimizerConfig,
};

/// Redraws allowed for a positive-flagged guess before falling back to `|value|`.
pub const MAX_REDRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Sum per-parameter MSEs within a block, then divide.
    BlockSum,
    /// Average the per-parameter MSE ratios within a block.
    MeanOfRatios,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub benchmark: BenchmarkKind,
    pub n: usize,
    /// `None` means noiseless data.
    pub snr_divisor: Option<f64>,
    pub prior_cv: f64,
    pub mc_reps: usize,
    pub master_seed: u64,
    pub optimizer: OptimizerConfig,
    pub exclude_nonconverged: bool,
    pub aggregation: Aggregation,
}

impl ExperimentConfig {
    pub fn new(benchmark: BenchmarkKind, n: usize, snr_divisor: Option<f64>, prior_cv: f64) -> Self {
        Self {
            benchmark,
            n,
            snr_divisor,
            prior_cv,
            mc_reps: benchmark.spec().mc_reps,
            master_seed: 0,
            optimizer: OptimizerConfig::default(),
            exclude_nonconverged: true,
            aggregation: Aggregation::BlockSum,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mc_reps == 0 {
            return Err(Error::InvalidInput("mc_reps must be at least 1".into()));
        }
        if !(self.prior_cv >= 0.0) || !self.prior_cv.is_finite() {
            return Err(Error::InvalidInput(format!("prior_cv must be nonnegative, got {}", self.prior_cv)));
        }
        if let Some(s) = self.snr_divisor {
            if !(s > 0.0) {
                return Err(Error::InvalidInput(format!("snr divisor must be positive, got {s}")));
            }
        }
        if self.n < crate::model::ObservationSet::MIN_SAMPLES {
            return Err(Error::InvalidInput(format!("n = {} is too small", self.n)));
        }
        self.optimizer.validate()
    }
}

/// Independent random streams of one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Noise = 0,
    NonlinearGuess = 1,
    LinearGuess = 2,
}

pub fn child_rng(master_seed: u64, rep_index: usize, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(rep_index as u64 * 4 + stream as u64);
    rng
}

/// Gaussian guess around `truth` with standard deviation `prior_cv·|truth|`
/// per component. Flagged components are redrawn until positive.
pub fn make_prior_guess<R: Rng + ?Sized>(truth: &[f64], prior_cv: f64, positivity: &[bool], rng: &mut R) -> Vec<f64> {
    truth
        .iter()
        .enumerate()
        .map(|(k, &mu)| {
            let sd = prior_cv * mu.abs();
            let mut v = mu + sd * rng.sample::<f64, _>(StandardNormal);
            if positivity.get(k).copied().unwrap_or(false) {
                let mut tries = 0;
                while v <= 0.0 && tries < MAX_REDRAWS {
                    v = mu + sd * rng.sample::<f64, _>(StandardNormal);
                    tries += 1;
                }
                if v <= 0.0 {
                    v = v.abs();
                }
            }
            v
        })
        .collect()
}

/// Uniform draw inside each (finite) bound interval.
pub fn make_nl_guess<R: Rng + ?Sized>(bounds: &[Bounds], rng: &mut R) -> Result<Vec<f64>> {
    bounds
        .iter()
        .map(|b| {
            if !b.is_finite() {
                return Err(Error::InvalidInput("nonlinear guesses need finite bounds".into()));
            }
            let u: f64 = rng.random();
            Ok(b.lower + u * (b.upper - b.lower))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub rep_index: usize,
    pub prior_cv: f64,
    pub theta_nl_init: Vec<f64>,
    pub nls_init: ParamSplit,
    pub sls: EstimationResult,
    pub nls: EstimationResult,
}

impl ReplicationRecord {
    pub fn same_outcome(&self, other: &Self) -> bool {
        self.rep_index == other.rep_index
            && self.prior_cv.to_bits() == other.prior_cv.to_bits()
            && self.theta_nl_init == other.theta_nl_init
            && self.nls_init == other.nls_init
            && self.sls.same_outcome(&other.sls)
            && self.nls.same_outcome(&other.nls)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ReplicationOutcome {
    Completed(ReplicationRecord),
    Skipped { rep_index: usize, reason: String },
}

impl ReplicationOutcome {
    pub fn rep_index(&self) -> usize {
        match self {
            Self::Completed(r) => r.rep_index,
            Self::Skipped { rep_index, .. } => *rep_index,
        }
    }

    pub fn record(&self) -> Option<&ReplicationRecord> {
        match self {
            Self::Completed(r) => Some(r),
            Self::Skipped { .. } => None,
        }
    }
}

/// One replication at a single prior level.
pub fn run_replication(cfg: &ExperimentConfig, rep_index: usize) -> Result<ReplicationOutcome> {
    cfg.validate()?;
    let spec = cfg.benchmark.spec();
    let mut out = replicate(&spec, cfg, &[cfg.prior_cv], rep_index)?;
    Ok(out.pop().expect("one prior level"))
}

/// All replications of one cell.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ReplicationOutcome>> {
    let mut cells = run_prior_sweep(cfg, &[cfg.prior_cv])?;
    Ok(cells.pop().expect("one prior level"))
}

/// Runs every prior level of a cell on shared data. Each replication simulates
/// and smooths once, fits SLS once and NLS once per level; the output for each
/// level equals what [`run_experiment`] gives at that `prior_cv`.
pub fn run_prior_sweep(cfg: &ExperimentConfig, prior_cvs: &[f64]) -> Result<Vec<Vec<ReplicationOutcome>>> {
    cfg.validate()?;
    for &cv in prior_cvs {
        if !(cv >= 0.0) || !cv.is_finite() {
            return Err(Error::InvalidInput(format!("prior_cv must be nonnegative, got {cv}")));
        }
    }
    let spec = cfg.benchmark.spec();
    let per_rep: Vec<Vec<ReplicationOutcome>> = (0..cfg.mc_reps)
        .into_par_iter()
        .map(|r| replicate(&spec, cfg, prior_cvs, r))
        .collect::<Result<_>>()?;
    let mut by_prior: Vec<Vec<ReplicationOutcome>> = vec![Vec::with_capacity(cfg.mc_reps); prior_cvs.len()];
    for reps in per_rep {
        for (k, rec) in reps.into_iter().enumerate() {
            by_prior[k].push(rec);
        }
    }
    Ok(by_prior)
}

fn replicate(
    spec: &BenchmarkSpec,
    cfg: &ExperimentConfig,
    prior_cvs: &[f64],
    rep_index: usize,
) -> Result<Vec<ReplicationOutcome>> {
    let skipped = |reason: String| {
        prior_cvs
            .iter()
            .map(|_| ReplicationOutcome::Skipped {
                rep_index,
                reason: reason.clone(),
            })
            .collect()
    };
    let model = &spec.model;
    let truth = &spec.theta_true;
    let times = sample_times(model.horizon(), cfg.n);
    let traj = match integrate(model, truth, &times) {
        Ok(t) => t,
        Err(e) => return Ok(skipped(e.to_string())),
    };
    let mut noise = child_rng(cfg.master_seed, rep_index, Stream::Noise);
    let obs = generate_observations(&times, &traj, cfg.snr_divisor.unwrap_or(f64::INFINITY), &mut noise)?;
    let fit = match default_smoother(model, &obs) {
        Ok(f) => f,
        Err(e) => return Ok(skipped(e.to_string())),
    };
    let theta_nl_init = make_nl_guess(model.bounds_nl(), &mut child_rng(cfg.master_seed, rep_index, Stream::NonlinearGuess))?;
    let sls = fit_sls_with_smoother(model, &fit, &theta_nl_init, &cfg.optimizer)?;
    let xi_init = smoother_initial_values(&fit);

    prior_cvs
        .iter()
        .map(|&cv| {
            let mut lin_rng = child_rng(cfg.master_seed, rep_index, Stream::LinearGuess);
            let theta_l_init = make_prior_guess(&truth.theta_l, cv, model.positivity_l(), &mut lin_rng);
            let nls_init = ParamSplit::new(theta_nl_init.clone(), theta_l_init, xi_init.clone());
            let nls = fit_nls_with_smoother(model, &fit, &nls_init, &cfg.optimizer)?;
            Ok(ReplicationOutcome::Completed(ReplicationRecord {
                rep_index,
                prior_cv: cv,
                theta_nl_init: theta_nl_init.clone(),
                nls_init,
                sls: sls.clone(),
                nls,
            }))
        })
        .collect()
}

/// Per-method aggregate over included replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub mse_linear: Vec<f64>,
    pub mse_nonlinear: Vec<f64>,
    pub mse_initial: Vec<f64>,
    pub block_mse_linear: f64,
    pub block_mse_nonlinear: f64,
    pub included: usize,
    pub nonconverged: usize,
    pub losses: Vec<f64>,
    pub wall_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub benchmark: BenchmarkKind,
    pub n: usize,
    pub snr_divisor: Option<f64>,
    pub prior_cv: f64,
    pub mc_reps: usize,
    pub skipped: usize,
    pub aggregation: Aggregation,
    pub nls: MethodSummary,
    pub sls: MethodSummary,
    /// NLS over SLS; `None` when the SLS block MSE is zero or the block is empty.
    pub linear_ratio: Option<f64>,
    pub nonlinear_ratio: Option<f64>,
    pub records: Vec<ReplicationOutcome>,
}

pub fn squared_errors(estimate: &[f64], truth: &[f64]) -> Vec<f64> {
    estimate.iter().zip(truth).map(|(e, t)| (e - t) * (e - t)).collect()
}

fn method_summary<'a>(
    records: impl Iterator<Item = &'a EstimationResult>,
    truth: &ParamSplit,
    exclude_nonconverged: bool,
) -> MethodSummary {
    let mut sum_l = vec![0.0; truth.theta_l.len()];
    let mut sum_nl = vec![0.0; truth.theta_nl.len()];
    let mut sum_xi = vec![0.0; truth.xi.len()];
    let (mut included, mut nonconverged) = (0, 0);
    let mut losses = Vec::new();
    let mut wall_times = Vec::new();
    for r in records {
        if !r.converged {
            nonconverged += 1;
            if exclude_nonconverged {
                continue;
            }
        }
        if !r.estimate.is_finite() {
            continue;
        }
        included += 1;
        for (acc, se) in [
            (&mut sum_l, squared_errors(&r.estimate.theta_l, &truth.theta_l)),
            (&mut sum_nl, squared_errors(&r.estimate.theta_nl, &truth.theta_nl)),
            (&mut sum_xi, squared_errors(&r.estimate.xi, &truth.xi)),
        ] {
            for (a, s) in acc.iter_mut().zip(se) {
                *a += s;
            }
        }
        losses.push(r.loss);
        wall_times.push(r.wall_time);
    }
    let mean = |v: Vec<f64>| -> Vec<f64> {
        v.into_iter()
            .map(|s| if included > 0 { s / included as f64 } else { f64::NAN })
            .collect()
    };
    let mse_linear = mean(sum_l);
    let mse_nonlinear = mean(sum_nl);
    MethodSummary {
        block_mse_linear: mse_linear.iter().fold(0.0, |a, b| a + b),
        block_mse_nonlinear: mse_nonlinear.iter().fold(0.0, |a, b| a + b),
        mse_linear,
        mse_nonlinear,
        mse_initial: mean(sum_xi),
        included,
        nonconverged,
        losses,
        wall_times,
    }
}

/// NLS/SLS ratio for one parameter block.
pub fn block_ratio(nls: &[f64], sls: &[f64], aggregation: Aggregation) -> Option<f64> {
    if nls.is_empty() || nls.len() != sls.len() {
        return None;
    }
    match aggregation {
        Aggregation::BlockSum => {
            let (a, b): (f64, f64) = (nls.iter().sum(), sls.iter().sum());
            (b > 0.0 && a.is_finite() && b.is_finite()).then(|| a / b)
        }
        Aggregation::MeanOfRatios => {
            if sls.iter().any(|&v| !(v > 0.0) || !v.is_finite()) || nls.iter().any(|v| !v.is_finite()) {
                return None;
            }
            Some(nls.iter().zip(sls).map(|(a, b)| a / b).sum::<f64>() / nls.len() as f64)
        }
    }
}

/// Aggregates one cell. Records may come in any order.
pub fn summarize(records: &[ReplicationOutcome], cfg: &ExperimentConfig) -> Result<McSummary> {
    let spec = cfg.benchmark.spec();
    let truth = &spec.theta_true;
    let mut sorted: Vec<ReplicationOutcome> = records.to_vec();
    sorted.sort_by_key(|r| r.rep_index());
    let completed: Vec<&ReplicationRecord> = sorted.iter().filter_map(|r| r.record()).collect();
    let skipped = sorted.len() - completed.len();
    let nls = method_summary(completed.iter().map(|r| &r.nls), truth, cfg.exclude_nonconverged);
    let sls = method_summary(completed.iter().map(|r| &r.sls), truth, cfg.exclude_nonconverged);
    for (name, m) in [("nls", &nls), ("sls", &sls)] {
        if m.included == 0 {
            return Err(Error::Summary(format!(
                "{name} has no usable replications out of {}",
                sorted.len()
            )));
        }
    }
    Ok(McSummary {
        benchmark: cfg.benchmark,
        n: cfg.n,
        snr_divisor: cfg.snr_divisor,
        prior_cv: cfg.prior_cv,
        mc_reps: cfg.mc_reps,
        skipped,
        aggregation: cfg.aggregation,
        linear_ratio: block_ratio(&nls.mse_linear, &sls.mse_linear, cfg.aggregation),
        nonlinear_ratio: block_ratio(&nls.mse_nonlinear, &sls.mse_nonlinear, cfg.aggregation),
        nls,
        sls,
        records: sorted,
    })
}

pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[k] } else { 0.5 * (v[k - 1] + v[k]) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Diagnostics, Method, Termination};

    fn result(method: Method, theta_l: Vec<f64>, converged: bool) -> EstimationResult {
        EstimationResult {
            method,
            estimate: ParamSplit::new(vec![], theta_l, vec![0.56, 1e-4]),
            loss: 1.0,
            iterations: 1,
            wall_time: 0.0,
            converged,
            diagnostics: Diagnostics {
                cond_b: None,
                ridge_used: false,
                termination: Termination::Tolerance,
                evaluations: 1,
                used_simplex: false,
            },
        }
    }

    fn record(rep: usize, nls: Vec<f64>, sls: Vec<f64>) -> ReplicationOutcome {
        ReplicationOutcome::Completed(ReplicationRecord {
            rep_index: rep,
            prior_cv: 0.1,
            theta_nl_init: vec![],
            nls_init: ParamSplit::new(vec![], vec![6.0, 2.3], vec![0.56, 1e-4]),
            sls: result(Method::Sls, sls, true),
            nls: result(Method::Nls, nls, true),
        })
    }

    fn sir_cfg() -> ExperimentConfig {
        let mut c = ExperimentConfig::new(BenchmarkKind::Sir, 18, Some(10.0), 0.1);
        c.mc_reps = 1;
        c
    }

    #[test]
    fn single_replication_ratio() {
        // squared errors (4, 1) against (1, 1)
        let recs = vec![record(0, vec![8.0, 3.3], vec![7.0, 1.3])];
        let s = summarize(&recs, &sir_cfg()).unwrap();
        assert!((s.linear_ratio.unwrap() - 2.5).abs() < 1e-12);
        assert!(s.nonlinear_ratio.is_none());
    }

    #[test]
    fn identical_streams_give_unit_ratio() {
        let recs: Vec<_> = (0..5).map(|r| record(r, vec![6.0 + r as f64, 2.0], vec![6.0 + r as f64, 2.0])).collect();
        let s = summarize(&recs, &sir_cfg()).unwrap();
        assert_eq!(s.linear_ratio, Some(1.0));
    }

    #[test]
    fn nonconverged_runs_are_excluded_and_counted() {
        let mut rec = record(0, vec![100.0, 2.3], vec![7.0, 2.3]);
        if let ReplicationOutcome::Completed(r) = &mut rec {
            r.nls.converged = false;
        }
        let recs = vec![rec, record(1, vec![8.0, 2.3], vec![7.0, 2.3])];
        let s = summarize(&recs, &sir_cfg()).unwrap();
        assert_eq!(s.nls.nonconverged, 1);
        assert_eq!(s.nls.included, 1);
        assert!((s.linear_ratio.unwrap() - 4.0).abs() < 1e-12);

        let mut keep = sir_cfg();
        keep.exclude_nonconverged = false;
        let s = summarize(&recs, &keep).unwrap();
        assert_eq!(s.nls.included, 2);
    }

    #[test]
    fn no_usable_records_is_an_error() {
        let recs = vec![ReplicationOutcome::Skipped {
            rep_index: 0,
            reason: "x".into(),
        }];
        assert!(matches!(summarize(&recs, &sir_cfg()), Err(Error::Summary(_))));
    }

    #[test]
    fn mean_of_ratios() {
        assert_eq!(block_ratio(&[4.0, 1.0], &[1.0, 1.0], Aggregation::MeanOfRatios), Some(2.5));
        assert_eq!(block_ratio(&[4.0, 2.0], &[1.0, 1.0], Aggregation::MeanOfRatios), Some(3.0));
        assert_eq!(block_ratio(&[4.0], &[0.0], Aggregation::BlockSum), None);
    }

    #[test]
    fn zero_cv_guess_is_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = make_prior_guess(&[6.0, -2.0], 0.0, &[true, false], &mut rng);
        assert_eq!(g, vec![6.0, -2.0]);
    }

    #[test]
    fn prior_guess_spread() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws: Vec<f64> = (0..100_000)
            .map(|_| make_prior_guess(&[6.0], 0.3, &[false], &mut rng)[0])
            .collect();
        let sd = crate::models::sample_std(draws.iter().copied());
        assert!((1.78..=1.82).contains(&sd), "{sd}");
    }

    #[test]
    fn positive_guesses_stay_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let g = make_prior_guess(&[0.2, 0.2], 3.0, &[true, true], &mut rng);
            assert!(g.iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn uniform_nonlinear_guess() {
        let b = [Bounds::new(0.0, 1.0), Bounds::new(0.0, 1.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut mean = [0.0; 2];
        let k = 100_000;
        for _ in 0..k {
            let v = make_nl_guess(&b, &mut rng).unwrap();
            assert!(v.iter().all(|x| (0.0..=1.0).contains(x)));
            mean[0] += v[0] / k as f64;
            mean[1] += v[1] / k as f64;
        }
        assert!(mean.iter().all(|m| (0.497..=0.503).contains(m)), "{mean:?}");
        assert!(make_nl_guess(&[], &mut rng).unwrap().is_empty());
        assert_eq!(
            make_nl_guess(&b, &mut child_rng(4, 2, Stream::NonlinearGuess)).unwrap(),
            make_nl_guess(&b, &mut child_rng(4, 2, Stream::NonlinearGuess)).unwrap()
        );
    }

    #[test]
    fn streams_are_distinct() {
        let a: u64 = child_rng(1, 0, Stream::Noise).random();
        let b: u64 = child_rng(1, 0, Stream::LinearGuess).random();
        let c: u64 = child_rng(1, 1, Stream::Noise).random();
        assert!(a != b && a != c && b != c);
    }

    #[test]
    fn median_of_samples() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }
}
