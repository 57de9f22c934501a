//! Parameter estimation for ODE systems whose vector field is linear in a
//! subset of the parameters.
//!
//! The data are smoothed, the smoother is plugged into an integral
//! criterion, and the parameters are estimated either jointly (NLS) or with
//! the linear block and the initial values profiled out in closed form
//! (SLS). The [`harness`] module runs Monte-Carlo comparisons of the two on
//! the benchmark systems in [`models`].

pub mod cli;
pub mod criterion;
pub mod error;
pub mod harness;
pub mod model;
pub mod models;
pub mod optimize;
pub mod smoothing;

pub use error::{Error, Result};
pub use model::{
    eval_full_field, Bounds, EstimationResult, Method, ObservationSet, ParamSplit, SeparableField,
    SeparableModel,
};
