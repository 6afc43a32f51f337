//! Pilot-wave dynamics, quantum nonequilibrium and stochastic collapse models.
//!
//! The library has two halves. [`wavefield`], [`pilotwave`], [`relaxation`],
//! [`subquantum`] and [`hvmodels`] cover de Broglie trajectories, relaxation
//! toward `|Ψ|²` and the anomalies of nonequilibrium ensembles. [`collapse`]
//! covers continuous spontaneous localization, its master equation and the
//! spontaneous-localization hitting process.
//!
//! Numerical kernels are generic over [`scalar::Real`]; exact measure
//! arithmetic in [`hvmodels`] also accepts [`Rational`].

pub mod collapse;
pub mod hvmodels;
pub mod linalg;
pub mod pilotwave;
pub mod relaxation;
pub mod rng;
pub mod scalar;
pub mod subquantum;
pub mod wavefield;

use thiserror::Error;

pub type Rational = num_rational::Rational64;

pub type Scalar = f64;
pub type Complex = num_complex::Complex<f64>;
pub type Ensemble = pilotwave::Ensemble<f64>;
pub type HvDistribution = hvmodels::HvDistribution<Rational>;
pub type ExactRect = hvmodels::Rect<Rational>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Wavefield(#[from] wavefield::WavefieldError),
    #[error(transparent)]
    Pilotwave(#[from] pilotwave::PilotwaveError),
    #[error(transparent)]
    Relaxation(#[from] relaxation::RelaxationError),
    #[error(transparent)]
    Subquantum(#[from] subquantum::SubquantumError),
    #[error(transparent)]
    Hv(#[from] hvmodels::HvError),
    #[error(transparent)]
    Collapse(#[from] collapse::CollapseError),
}
