//! Deterministic hidden-variable models on the unit square.
//!
//! A model maps measurement settings and a hidden variable `λ ∈ [0,1)²` to a
//! pair of outcomes. Distributions are piecewise constant on rectangles, so
//! every measure below is an exact sum of rectangle areas and works over
//! rationals as well as floats.

mod measure;
mod singlet;
mod transmission;

pub use measure::{HvDistribution, Rect};
pub use singlet::{
    builtin_singlet_model, ensemble_statistics, exact_statistics, transition_sets, EnsembleStatistics, ExactStatistics, HvModel, Setting,
    SingletModel, TransitionSetReport,
};
pub use transmission::{additivity_defect, two_state_transmission, CosineFit, Density1d, TransmissionCurve};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HvError {
    #[error("negative density {0}")]
    NegativeDensity(String),
    #[error("rectangle {0} is empty or leaves the unit square")]
    BadRectangle(String),
    #[error("rectangles {0} and {1} overlap")]
    Overlap(usize, usize),
    #[error("distribution has zero total mass")]
    ZeroMass,
    #[error("invalid one-dimensional density: {0}")]
    BadDensity1d(String),
    #[error("need at least {0} samples")]
    TooFewSamples(usize),
}
