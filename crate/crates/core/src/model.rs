//! Shared domain types: the separable model abstraction, observations,
//! parameter vectors and estimation results.
//!
//! A separable model has a vector field of the form
//!
//! ```text
//! F(t, x; θ) = g(t, x; θ_NL) · θ_L + h(t, x; θ_NL)
//! ```
//!
//! where `g` is a `d × p_l` matrix and `h` a `d`-vector offset that does not
//! depend on the linear parameters. Systems without an offset leave
//! [`SeparableField::offset`] at its zero default.
//!
//! An S-system, `x_j' = α_j Π x_k^{g_jk} − β_j Π x_k^{h_jk}`, is linear in the
//! rate constants and nonlinear in the kinetic orders:
//!
//! ```
//! use nalgebra::DMatrix;
//! use sepode::model::{Bounds, SeparableField, SeparableModel};
//! use std::sync::Arc;
//!
//! /// θ_L = (α_1, β_1, …, α_d, β_d); θ_NL = (g_11..g_dd, h_11..h_dd).
//! #[derive(Debug)]
//! struct SSystem {
//!     d: usize,
//! }
//!
//! impl SeparableField for SSystem {
//!     fn linear_part(&self, _t: f64, x: &[f64], theta_nl: &[f64], g: &mut DMatrix<f64>) {
//!         let d = self.d;
//!         let (gk, hk) = theta_nl.split_at(d * d);
//!         for j in 0..d {
//!             let influx: f64 = (0..d).map(|k| x[k].powf(gk[j * d + k])).product();
//!             let efflux: f64 = (0..d).map(|k| x[k].powf(hk[j * d + k])).product();
//!             g[(j, 2 * j)] = influx;
//!             g[(j, 2 * j + 1)] = -efflux;
//!         }
//!     }
//! }
//!
//! let d = 2;
//! let nl: Vec<String> = (0..2 * d * d).map(|i| format!("k{i}")).collect();
//! let l: Vec<String> = (0..2 * d).map(|i| format!("r{i}")).collect();
//! let model = SeparableModel::new(
//!     "s-system",
//!     vec!["x1".into(), "x2".into()],
//!     nl,
//!     l,
//!     10.0,
//!     Arc::new(SSystem { d }),
//! )
//! .unwrap()
//! .with_bounds_nl(vec![Bounds::new(-2.0, 2.0); 2 * d * d])
//! .unwrap();
//! assert_eq!(model.p(), 12);
//! ```

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// The vector-field pieces of a separable model. Implementations must be
/// pure functions of their arguments.
pub trait SeparableField: Send + Sync + fmt::Debug {
    /// Writes `g(t, x; θ_NL)` into `g`, a zeroed `d × p_l` matrix.
    fn linear_part(&self, t: f64, x: &[f64], theta_nl: &[f64], g: &mut DMatrix<f64>);

    /// Writes the offset `h(t, x; θ_NL)` into `h`, a zeroed `d`-vector.
    fn offset(&self, _t: f64, _x: &[f64], _theta_nl: &[f64], _h: &mut [f64]) {}

    /// Whether [`offset`](Self::offset) can be nonzero.
    fn has_offset(&self) -> bool {
        false
    }
}

/// Closed interval for one nonlinear parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub const fn new(lower: f64, upper: f64) -> Self {
        Self { lower, upper }
    }

    pub const fn unbounded() -> Self {
        Self::new(f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lower && v <= self.upper
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.max(self.lower).min(self.upper)
    }

    pub fn is_finite(&self) -> bool {
        self.lower.is_finite() && self.upper.is_finite()
    }
}

#[derive(Clone)]
pub struct SeparableModel {
    name: String,
    state_names: Vec<String>,
    param_names_nl: Vec<String>,
    param_names_l: Vec<String>,
    horizon: f64,
    bounds_nl: Vec<Bounds>,
    positivity_l: Vec<bool>,
    state_floor: Option<f64>,
    field: Arc<dyn SeparableField>,
}

impl fmt::Debug for SeparableModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SeparableModel")
            .field("name", &self.name)
            .field("d", &self.d())
            .field("p_nl", &self.p_nl())
            .field("p_l", &self.p_l())
            .field("horizon", &self.horizon)
            .finish()
    }
}

impl SeparableModel {
    /// Creates a model with unbounded nonlinear parameters and no positivity
    /// constraints on the linear ones.
    pub fn new(
        name: impl Into<String>,
        state_names: Vec<String>,
        param_names_nl: Vec<String>,
        param_names_l: Vec<String>,
        horizon: f64,
        field: Arc<dyn SeparableField>,
    ) -> Result<Self> {
        if state_names.is_empty() {
            return Err(Error::InvalidInput("model needs at least one state".into()));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidInput(format!("horizon must be positive, got {horizon}")));
        }
        let p_nl = param_names_nl.len();
        let p_l = param_names_l.len();
        Ok(Self {
            name: name.into(),
            state_names,
            param_names_nl,
            param_names_l,
            horizon,
            bounds_nl: vec![Bounds::unbounded(); p_nl],
            positivity_l: vec![false; p_l],
            state_floor: None,
            field,
        })
    }

    pub fn with_bounds_nl(mut self, bounds: Vec<Bounds>) -> Result<Self> {
        check_dim("bounds_nl", self.p_nl(), bounds.len())?;
        if let Some(b) = bounds.iter().find(|b| !(b.lower <= b.upper)) {
            return Err(Error::InvalidInput(format!("empty bound interval {b:?}")));
        }
        self.bounds_nl = bounds;
        Ok(self)
    }

    pub fn with_positivity_l(mut self, flags: Vec<bool>) -> Result<Self> {
        check_dim("positivity_l", self.p_l(), flags.len())?;
        self.positivity_l = flags;
        Ok(self)
    }

    /// Smoothed states are clipped below at `floor` before the vector field
    /// is evaluated inside the criterion.
    pub fn with_state_floor(mut self, floor: f64) -> Self {
        self.state_floor = Some(floor);
        self
    }

    pub fn with_horizon(mut self, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidInput(format!("horizon must be positive, got {horizon}")));
        }
        self.horizon = horizon;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn d(&self) -> usize {
        self.state_names.len()
    }
    pub fn p_nl(&self) -> usize {
        self.param_names_nl.len()
    }
    pub fn p_l(&self) -> usize {
        self.param_names_l.len()
    }
    pub fn p(&self) -> usize {
        self.p_nl() + self.p_l()
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }
    pub fn param_names_nl(&self) -> &[String] {
        &self.param_names_nl
    }
    pub fn param_names_l(&self) -> &[String] {
        &self.param_names_l
    }
    pub fn bounds_nl(&self) -> &[Bounds] {
        &self.bounds_nl
    }
    pub fn positivity_l(&self) -> &[bool] {
        &self.positivity_l
    }
    pub fn state_floor(&self) -> Option<f64> {
        self.state_floor
    }
    pub fn field(&self) -> &dyn SeparableField {
        self.field.as_ref()
    }

    pub fn g_eval(&self, t: f64, x: &[f64], theta_nl: &[f64]) -> Result<DMatrix<f64>> {
        check_dim("state", self.d(), x.len())?;
        check_dim("theta_nl", self.p_nl(), theta_nl.len())?;
        let mut g = DMatrix::zeros(self.d(), self.p_l());
        self.field.linear_part(t, x, theta_nl, &mut g);
        Ok(g)
    }

    pub fn h_eval(&self, t: f64, x: &[f64], theta_nl: &[f64]) -> Result<Vec<f64>> {
        check_dim("state", self.d(), x.len())?;
        check_dim("theta_nl", self.p_nl(), theta_nl.len())?;
        let mut h = vec![0.0; self.d()];
        self.field.offset(t, x, theta_nl, &mut h);
        Ok(h)
    }

    pub fn check_params(&self, params: &ParamSplit) -> Result<()> {
        check_dim("theta_nl", self.p_nl(), params.theta_nl.len())?;
        check_dim("theta_l", self.p_l(), params.theta_l.len())?;
        check_dim("xi", self.d(), params.xi.len())
    }

    /// Names of all parameters in estimation order: initial values, then
    /// nonlinear, then linear parameters.
    pub fn all_param_names(&self) -> Vec<String> {
        self.state_names
            .iter()
            .map(|s| format!("{s}(0)"))
            .chain(self.param_names_nl.iter().cloned())
            .chain(self.param_names_l.iter().cloned())
            .collect()
    }
}

/// Evaluates `g·θ_L + h` at one point.
pub fn eval_full_field(
    model: &SeparableModel,
    t: f64,
    x: &[f64],
    params: &ParamSplit,
) -> Result<Vec<f64>> {
    check_dim("theta_l", model.p_l(), params.theta_l.len())?;
    let g = model.g_eval(t, x, &params.theta_nl)?;
    let mut out = model.h_eval(t, x, &params.theta_nl)?;
    for (i, o) in out.iter_mut().enumerate() {
        *o += (0..model.p_l()).map(|k| g[(i, k)] * params.theta_l[k]).sum::<f64>();
    }
    Ok(out)
}

/// Reusable buffers for repeated field evaluations along a trajectory.
pub(crate) struct FieldWorkspace {
    pub g: DMatrix<f64>,
    pub h: Vec<f64>,
}

impl FieldWorkspace {
    pub fn new(model: &SeparableModel) -> Self {
        Self {
            g: DMatrix::zeros(model.d(), model.p_l()),
            h: vec![0.0; model.d()],
        }
    }

    /// Evaluates `g` and `h` in place.
    pub fn eval(&mut self, model: &SeparableModel, t: f64, x: &[f64], theta_nl: &[f64]) {
        self.g.fill(0.0);
        self.h.fill(0.0);
        model.field.linear_part(t, x, theta_nl, &mut self.g);
        model.field.offset(t, x, theta_nl, &mut self.h);
    }

    /// Evaluates the full field into `out`.
    pub fn full(
        &mut self,
        model: &SeparableModel,
        t: f64,
        x: &[f64],
        params: &ParamSplit,
        out: &mut [f64],
    ) {
        self.eval(model, t, x, &params.theta_nl);
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = self.h[i];
            for (k, th) in params.theta_l.iter().enumerate() {
                acc += self.g[(i, k)] * th;
            }
            *o = acc;
        }
    }
}

/// Sampled measurements `Y` (`n × d`) at strictly increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    times: Vec<f64>,
    values: DMatrix<f64>,
    noise_sd: Option<Vec<f64>>,
}

impl ObservationSet {
    pub const MIN_SAMPLES: usize = 4;

    pub fn new(times: Vec<f64>, values: DMatrix<f64>) -> Result<Self> {
        check_dim("observation rows", times.len(), values.nrows())?;
        if times.len() < Self::MIN_SAMPLES {
            return Err(Error::InvalidInput(format!(
                "need at least {} samples, got {}",
                Self::MIN_SAMPLES,
                times.len()
            )));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidInput("non-finite sample time".into()));
        }
        if let Some(w) = times.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(format!(
                "sample times must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite measurement".into()));
        }
        Ok(Self {
            times,
            values,
            noise_sd: None,
        })
    }

    pub fn with_noise_sd(mut self, sd: Vec<f64>) -> Result<Self> {
        check_dim("noise_sd", self.d(), sd.len())?;
        self.noise_sd = Some(sd);
        Ok(self)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }
    pub fn noise_sd(&self) -> Option<&[f64]> {
        self.noise_sd.as_deref()
    }
    pub fn n(&self) -> usize {
        self.times.len()
    }
    pub fn d(&self) -> usize {
        self.values.ncols()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSplit {
    pub theta_nl: Vec<f64>,
    pub theta_l: Vec<f64>,
    pub xi: Vec<f64>,
}

impl ParamSplit {
    pub fn new(theta_nl: Vec<f64>, theta_l: Vec<f64>, xi: Vec<f64>) -> Self {
        Self {
            theta_nl,
            theta_l,
            xi,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.theta_nl
            .iter()
            .chain(&self.theta_l)
            .chain(&self.xi)
            .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Nls,
    Sls,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Nls => "nls",
            Method::Sls => "sls",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Relative change of the criterion fell below the tolerance.
    Tolerance,
    /// Projected gradient vanished.
    Stationary,
    /// No free parameters; closed-form solution.
    ClosedForm,
    MaxIterations,
    /// Every evaluated point was infeasible.
    Infeasible,
}

impl Termination {
    pub fn converged(self) -> bool {
        matches!(
            self,
            Termination::Tolerance | Termination::Stationary | Termination::ClosedForm
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Condition estimate of the linear design Gram matrix at the optimum
    /// (SLS only).
    pub cond_b: Option<f64>,
    pub ridge_used: bool,
    pub termination: Termination,
    pub evaluations: usize,
    /// The simplex fallback took over from the quasi-Newton search.
    pub used_simplex: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub method: Method,
    pub estimate: ParamSplit,
    pub loss: f64,
    pub iterations: usize,
    pub wall_time: f64,
    pub converged: bool,
    pub diagnostics: Diagnostics,
}

impl EstimationResult {
    /// Equality on every field except `wall_time`.
    pub fn same_outcome(&self, other: &Self) -> bool {
        self.method == other.method
            && self.estimate == other.estimate
            && self.loss.to_bits() == other.loss.to_bits()
            && self.iterations == other.iterations
            && self.converged == other.converged
            && self.diagnostics == other.diagnostics
    }
}
