//! Subquantum measurement with a nonequilibrium pointer, trajectory-based
//! discrimination of nonorthogonal states, and the two-particle quench that
//! exposes nonlocal signals in nonequilibrium ensembles.

mod distinguish;
mod measurement;
mod signaling;

pub use distinguish::{distinguish_nonorthogonal, DistinguishConfig, DistinguishReport, TrackedState};
pub use measurement::{box_ground_autocorrelation, subq_measure, MeasurementRun, MeasurementSummary, SubqMeasurementConfig};
pub use signaling::{
    correlated_gaussian_density, signaling_experiment, InitialEnsemble, ProbeResult, Quench, SignalingConfig, SignalingReport,
};

use thiserror::Error;

use crate::pilotwave::PilotwaveError;
use crate::wavefield::WavefieldError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SubquantumError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("the two states have identical velocity fields and cannot be told apart by trajectories")]
    DegenerateStates,
    #[error(transparent)]
    Pilotwave(#[from] PilotwaveError),
    #[error(transparent)]
    Field(#[from] WavefieldError),
}
