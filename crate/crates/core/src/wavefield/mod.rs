//! Wave functions: exact box-eigenmode superpositions, free Gaussian packets
//! and uniform-grid states evolved by split-step Fourier.
//!
//! Units are natural throughout this module: `ħ = 1`, masses default to 1 and
//! the box side to 1. Phase gradients are always formed as `Im(∇Ψ/Ψ)` so no
//! phase unwrapping ever happens.

mod eigenmode;
mod fft;
mod gaussian;
mod grid;

pub use eigenmode::{build_box_superposition, evolve_analytic, BoxMode, EigenmodeWaveFunction, Phases, SpectrumStats, MAX_MODE_INDEX};
pub use gaussian::FreeGaussianPacket;
pub use grid::{
    evolve_splitstep, position_variance, Boundary, GridAxis, GridField, GridHamiltonian, GridWaveFunction, SplitStepPropagator,
    RESOLUTION_TOLERANCE,
};

use thiserror::Error;

use crate::scalar::Real;

/// Relative node threshold: `|Ψ|²` below this multiple of the domain-mean
/// density marks a node where the guidance velocity is undefined.
pub const NODE_THRESHOLD_FACTOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WavefieldError {
    #[error("superposition needs at least one mode")]
    EmptyModes,
    #[error("duplicate mode index {0:?}")]
    DuplicateMode(Vec<u32>),
    #[error("mode index {0:?} invalid: indices must be >= 1 and match the dimension")]
    InvalidModeIndex(Vec<u32>),
    #[error("all mode amplitudes are zero")]
    ZeroAmplitudes,
    #[error("dimension must be 1 or 2, got {0}")]
    UnsupportedDimension(usize),
    #[error("time step {dt} too large: dt·max|V| must stay below π (limit {limit})")]
    DtTooLarge { dt: f64, limit: f64 },
    #[error("time step must be positive and finite, got {0}")]
    InvalidDt(f64),
    #[error("velocity undefined here: |Ψ|² = {density:e} is below the node threshold {threshold:e}")]
    Node { density: f64, threshold: f64 },
    #[error("point {0:?} lies outside the domain")]
    OutsideDomain(Vec<f64>),
    #[error("grid does not resolve the state: spectral tail fraction {0:e}")]
    Unresolved(f64),
    #[error("{0}")]
    Unsupported(&'static str),
    #[error("grid shape mismatch: {0}")]
    Shape(String),
}

/// Density, phase gradient `∇S` (with `ħ = 1`) and probability current at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalState<T> {
    pub density: T,
    pub phase_gradient: [T; 2],
    pub current: [T; 2],
}

/// Quantities the trajectory integrator needs at a configuration point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldSample<T> {
    pub density: T,
    pub velocity: [T; 2],
    /// `∇·v`, when the field can supply it analytically.
    pub divergence: Option<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainKind {
    /// Hard walls at the bounds; `Ψ` vanishes there.
    Box,
    Periodic,
    Unbounded,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Domain<T> {
    pub kind: DomainKind,
    pub lower: [T; 2],
    pub upper: [T; 2],
}

impl<T: Real> Domain<T> {
    /// Whether `x` lies in the domain, allowing an excursion of `tol`.
    pub fn contains(&self, x: &[T; 2], dims: usize, tol: T) -> bool {
        match self.kind {
            DomainKind::Unbounded => x[..dims].iter().all(|v| v.is_finite()),
            _ => (0..dims).all(|k| x[k] >= self.lower[k] - tol && x[k] <= self.upper[k] + tol),
        }
    }

    pub fn volume(&self, dims: usize) -> T {
        (0..dims).map(|k| self.upper[k] - self.lower[k]).fold(T::one(), |a, b| a * b)
    }
}

/// A wave function that can guide de Broglie trajectories.
pub trait GuidingField<T: Real>: Sync {
    fn dims(&self) -> usize;

    fn domain(&self) -> Domain<T>;

    /// Density, velocity `Im(∇Ψ/Ψ)/m` and optionally `∇·v` at `(x, t)`.
    /// The velocity is meaningless when the density is below
    /// [`GuidingField::node_threshold`].
    fn sample(&self, x: &[T; 2], t: T) -> FieldSample<T>;

    /// `|Ψ(x, t)|²`
    fn density(&self, x: &[T; 2], t: T) -> T {
        self.sample(x, t).density
    }

    fn node_threshold(&self) -> T;

    /// Particle mass along each axis.
    fn masses(&self) -> [T; 2] {
        [T::one(), T::one()]
    }

    /// Upper bound on `|Ψ|²` over the domain at time `t`, if known cheaply.
    fn density_bound(&self, _t: T) -> Option<T> {
        None
    }
}

/// `(|Ψ|², ∇S, J)` at a point, or a node error where the velocity is undefined.
pub fn density_phase_current<T: Real, F: GuidingField<T> + ?Sized>(
    field: &F,
    point: &[T; 2],
    t: T,
) -> Result<LocalState<T>, WavefieldError> {
    let dims = field.dims();
    if !field.domain().contains(point, dims, T::zero()) {
        return Err(WavefieldError::OutsideDomain(point[..dims].iter().map(|v| v.to_f64_lossy()).collect()));
    }
    let s = field.sample(point, t);
    let threshold = field.node_threshold();
    if !(s.density >= threshold) {
        return Err(WavefieldError::Node { density: s.density.to_f64_lossy(), threshold: threshold.to_f64_lossy() });
    }
    let masses = field.masses();
    let mut grad = [T::zero(); 2];
    let mut current = [T::zero(); 2];
    for k in 0..dims {
        grad[k] = s.velocity[k] * masses[k];
        current[k] = s.density * s.velocity[k];
    }
    Ok(LocalState { density: s.density, phase_gradient: grad, current })
}
