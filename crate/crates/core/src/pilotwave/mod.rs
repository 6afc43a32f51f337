//! de Broglie trajectories and ensembles of hidden configurations.
//!
//! Each trajectory carries `ln J`, the log-Jacobian of the flow map, when the
//! guiding field supplies `∇·v`. Equivariance then gives an exact per-sample
//! monitor: `f(t)/f(0) = |Ψ(X₀,t₀)|² / (J |Ψ(X,t)|²)` must equal 1.

mod ensemble;
mod integrator;

pub use ensemble::{
    propagate_ensemble, sample_ensemble, DistributionSpec, Ensemble, HistogramDensity, PropagationReport, MAX_FAILURE_FRACTION,
};
pub use integrator::{integrate_trajectory, Tolerances, Trajectory};

use thiserror::Error;

use crate::wavefield::WavefieldError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PilotwaveError {
    #[error("step size underflow near a node at t = {t}, X = {position:?}")]
    StepUnderflow { t: f64, position: Vec<f64> },
    #[error("trajectory left the domain beyond tolerance at X = {0:?}")]
    Excursion(Vec<f64>),
    #[error("initial configuration {0:?} lies on a node of Ψ")]
    StartAtNode(Vec<f64>),
    #[error("initial configuration {0:?} lies outside the domain")]
    OutsideDomain(Vec<f64>),
    #[error("step budget of {0} exhausted")]
    TooManySteps(usize),
    #[error("{failed} of {total} trajectories failed, above the allowed fraction")]
    ExcessFailures { failed: usize, total: usize },
    #[error("ensemble is empty")]
    EmptyEnsemble,
    #[error("distribution has no support overlap with the domain: {0}")]
    NotAbsolutelyContinuous(String),
    #[error("{0}")]
    Unsupported(&'static str),
    #[error(transparent)]
    Field(#[from] WavefieldError),
}
