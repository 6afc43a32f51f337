//! Stochastic collapse models: continuous spontaneous localization on finite
//! Hilbert spaces, its ensemble density matrix, the one-particle grid master
//! equation, discrete spontaneous-localization hits, and closed-form
//! consequences of the collapse dynamics.

mod csl;
mod density;
mod excitation;
mod gambler;
mod martingale;
mod master;
mod params;
mod sl;


pub use csl::{
    simulate_csl, simulate_csl_ensemble, weighted_mean, CollapseOperatorSet, CollapseRun, CslConfig, CslEnsemble, NoiseScheme,
    COMMUTATOR_TOLERANCE, HERMITICITY_TOLERANCE,
};
pub use density::{density_matrix_csl, lindblad_consistency, lindblad_rhs, DensityEvolution, DensitySummary, POSITIVITY_FLOOR};
pub use excitation::{excitation_rate, ExcitationReport, TwoBodyOscillator};
pub use gambler::{gambler_ruin, GamblerReport};
pub use martingale::{martingale_diagnostics, MartingaleReport, SUM_RULE_TOLERANCE};
pub use master::{collapse_kernel, kinetic_energy, particle_master_equation, GridDensityMatrix, MasterReport};
pub use params::{
    constants, energy_gain_rate, energy_gain_rate_ev, interference_criterion, random_walk_predictions, sphere_nucleons, Constants,
    CouplingLimits, CslParams, InterferenceVerdict, PhysicalConstants, SlParameters, UnitSystem, WalkPrediction,
};
pub use sl::{clump_collapse, sl_ensemble, sl_hit_process, ClumpConfig, ClumpReport, HitEvent, SlConfig, SlRun};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CollapseError {
    #[error("no collapse operators given")]
    NoOperators,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("operator {0} is not Hermitian")]
    NotHermitian(usize),
    #[error("operators {0} and {1} do not commute")]
    NotCommuting(usize, usize),
    #[error("initial state has squared norm {0}, expected 1")]
    NotNormalized(f64),
    #[error("time step {dt} exceeds the stability limit {limit}")]
    DtTooLarge { dt: f64, limit: f64 },
    #[error("importance weight of run {run} underflowed")]
    WeightUnderflow { run: u64 },
    #[error("runs do not share one configuration")]
    MismatchedRuns,
    #[error("density matrix is not physical: {0}")]
    NonPhysicalDensity(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
