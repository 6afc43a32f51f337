use serde::Serialize;

use super::params::CslParams;
use super::CollapseError;
use crate::scalar::{sq, Real};

/// Two particles on a line bound by `½ μ ω² (x₁ − x₂)²`, centre of mass in an
/// eigenstate of zero mean position. Internal levels are `|n⟩` of the
/// relative oscillator.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TwoBodyOscillator<T> {
    pub masses: [T; 2],
    pub omega: T,
}

impl<T: Real> TwoBodyOscillator<T> {
    pub fn total_mass(&self) -> T {
        self.masses[0] + self.masses[1]
    }

    pub fn reduced_mass(&self) -> T {
        self.masses[0] * self.masses[1] / self.total_mass()
    }

    /// Oscillator length `(ħ/μω)^{1/2}` of the relative coordinate.
    pub fn relative_length(&self, hbar: T) -> T {
        (hbar / (self.reduced_mass() * self.omega)).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExcitationReport<T> {
    /// `⟨n| Σ g_i x̂_i |0⟩`
    pub matrix_element: T,
    /// `(λ/2a²) |⟨n| Σ g_i x̂_i |0⟩|²`
    pub dipole_rate: T,
    /// Order-of-magnitude size of the next term, `λ (ℓ/a)⁴`; not a prediction.
    pub quadrupole_estimate: T,
}

/// Collapse-induced excitation rate from the internal ground state to level `n`.
pub fn excitation_rate<T: Real>(
    system: &TwoBodyOscillator<T>,
    params: &CslParams<T>,
    level: usize,
) -> Result<ExcitationReport<T>, CollapseError> {
    params.validate()?;
    if params.masses.len() != 2 {
        return Err(CollapseError::InvalidParameter("the toy system has two particles".into()));
    }
    if !(system.omega > T::zero()) || system.masses.iter().any(|m| !(*m > T::zero())) {
        return Err(CollapseError::InvalidParameter("need positive masses and frequency".into()));
    }
    if level == 0 {
        return Err(CollapseError::InvalidParameter("target level must differ from the initial ground state".into()));
    }
    let [m1, m2] = system.masses;
    let (g1, g2) = (params.coupling(0), params.coupling(1));
    // Σ g x = (g₁ + g₂) X + ((g₁m₂ − g₂m₁)/M) r; ⟨X⟩ = 0 in the centre-of-mass state.
    let c = (g1 * m2 - g2 * m1) / system.total_mass();
    let ell = system.relative_length(params.hbar());
    let matrix_element = if level == 1 { c * ell / T::lit(2.0).sqrt() } else { T::zero() };
    Ok(ExcitationReport {
        dipole_rate: params.lambda / (T::lit(2.0) * sq(params.a)) * sq(matrix_element),
        quadrupole_estimate: params.lambda * sq(sq(ell / params.a)),
        matrix_element,
    })
}
