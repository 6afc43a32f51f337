use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::CollapseError;
use crate::scalar::{sq, Real};

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub proton_mass: f64,
    pub neutron_mass: f64,
    pub electron_mass: f64,
    pub electron_volt: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
pub struct SlParameters {
    pub lambda: f64,
    pub a: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
pub struct CouplingLimits {
    pub electron: f64,
    pub neutron: f64,
}

/// Contents of `data/constants.toml`.
#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
pub struct Constants {
    pub physical: PhysicalConstants,
    pub sl: SlParameters,
    pub coupling_limits: CouplingLimits,
}

const CONSTANTS_TOML: &str = include_str!("../../data/constants.toml");

pub fn constants() -> &'static Constants {
    static CELL: OnceLock<Constants> = OnceLock::new();
    CELL.get_or_init(|| toml::from_str(CONSTANTS_TOML).expect("bundled constants table parses"))
}

impl CouplingLimits {
    /// Whether `g_e/g_p` and `g_n/g_p` lie inside the experimental bounds.
    pub fn allows(&self, c: &PhysicalConstants, ge_over_gp: f64, gn_over_gp: f64) -> bool {
        let me = c.electron_mass / c.proton_mass;
        let mn = c.neutron_mass / c.proton_mass;
        (ge_over_gp - me).abs() < self.electron * me
            && (gn_over_gp - mn).abs() < self.neutron * (c.neutron_mass - c.proton_mass) / c.proton_mass
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnitSystem {
    /// `ħ = 1`, masses in units of the reference mass, lengths in a chosen unit.
    Natural,
    Si,
}

/// Collapse-model parameters.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CslParams<T> {
    /// Collapse rate `λ_c` per reference mass.
    pub lambda: T,
    /// Smearing length.
    pub a: T,
    pub masses: Vec<T>,
    pub reference_mass: T,
    /// Couplings `g_i`; `None` means `m_i / m_p`.
    pub couplings: Option<Vec<T>>,
    pub units: UnitSystem,
}

impl<T: Real> CslParams<T> {
    /// Nucleon-mass particles with the bundled SL rate and width, in SI.
    pub fn sl_nucleons(n: usize) -> Self {
        let c = constants();
        Self {
            lambda: T::lit(c.sl.lambda),
            a: T::lit(c.sl.a),
            masses: vec![T::lit(c.physical.proton_mass); n],
            reference_mass: T::lit(c.physical.proton_mass),
            couplings: None,
            units: UnitSystem::Si,
        }
    }

    pub fn validate(&self) -> Result<(), CollapseError> {
        let bad = |m: &str| Err(CollapseError::InvalidParameter(m.into()));
        if !(self.lambda >= T::zero()) {
            return bad("lambda must be >= 0");
        }
        if !(self.a > T::zero()) {
            return bad("a must be > 0");
        }
        if !(self.reference_mass > T::zero()) || self.masses.iter().any(|m| !(*m > T::zero())) {
            return bad("masses must be > 0");
        }
        if let Some(g) = &self.couplings {
            if g.len() != self.masses.len() {
                return bad("one coupling per mass");
            }
        }
        Ok(())
    }

    pub fn hbar(&self) -> T {
        match self.units {
            UnitSystem::Natural => T::one(),
            UnitSystem::Si => T::lit(constants().physical.hbar),
        }
    }

    pub fn coupling(&self, i: usize) -> T {
        match &self.couplings {
            Some(g) => g[i],
            None => self.masses[i] / self.reference_mass,
        }
    }

    /// Converts SI parameters to natural units with `ħ = 1`, the reference
    /// mass as mass unit and `length_unit` metres as length unit.
    pub fn to_natural(&self, length_unit: T) -> Result<Self, CollapseError> {
        if self.units != UnitSystem::Si {
            return Err(CollapseError::InvalidParameter("already natural".into()));
        }
        let hbar = T::lit(constants().physical.hbar);
        let time_unit = self.reference_mass * sq(length_unit) / hbar;
        Ok(Self {
            lambda: self.lambda * time_unit,
            a: self.a / length_unit,
            masses: self.masses.iter().map(|m| *m / self.reference_mass).collect(),
            reference_mass: T::one(),
            couplings: self.couplings.clone(),
            units: UnitSystem::Natural,
        })
    }

    /// Inverse of [`CslParams::to_natural`].
    pub fn to_si(&self, length_unit: T, reference_mass_kg: T) -> Result<Self, CollapseError> {
        if self.units != UnitSystem::Natural {
            return Err(CollapseError::InvalidParameter("already SI".into()));
        }
        let hbar = T::lit(constants().physical.hbar);
        let mass_unit = reference_mass_kg / self.reference_mass;
        let time_unit = mass_unit * sq(length_unit) / hbar;
        Ok(Self {
            lambda: self.lambda / time_unit,
            a: self.a * length_unit,
            masses: self.masses.iter().map(|m| *m * mass_unit).collect(),
            reference_mass: reference_mass_kg,
            couplings: self.couplings.clone(),
            units: UnitSystem::Si,
        })
    }
}

/// `d⟨Ĥ⟩/dt = Σ_i 3λ g_i² ħ² / (4 m_i a²)`, in the parameters' energy unit per time unit.
pub fn energy_gain_rate<T: Real>(params: &CslParams<T>) -> Result<T, CollapseError> {
    params.validate()?;
    let hbar = params.hbar();
    Ok((0..params.masses.len())
        .map(|i| T::lit(3.0) * params.lambda * sq(params.coupling(i)) * sq(hbar) / (T::lit(4.0) * params.masses[i] * sq(params.a)))
        .sum())
}

/// Same rate in eV/s for SI parameters.
pub fn energy_gain_rate_ev<T: Real>(params: &CslParams<T>) -> Result<T, CollapseError> {
    if params.units != UnitSystem::Si {
        return Err(CollapseError::InvalidParameter("eV conversion needs SI parameters".into()));
    }
    Ok(energy_gain_rate(params)? / T::lit(constants().physical.electron_volt))
}

/// Collapse-driven random walk of a clump of `N` nucleons smaller than `a`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WalkPrediction<T> {
    /// Equilibrium packet size `s = [a²ħ/(λ m_p N³)]^{1/4}`.
    pub size: T,
    /// Settling time `τ_s = N m_p s²/ħ`.
    pub settle_time: T,
    /// Scale `ħ λ^{1/2} t^{3/2}/(m_p a)`.
    pub delta_q_scale: T,
    /// Per-axis rms displacement of the centre of mass, `delta_q_scale/√6`.
    pub rms_displacement: T,
    pub t: T,
}

/// Nucleon count of a sphere of the given radius and mass density, both SI.
pub fn sphere_nucleons<T: Real>(radius: T, density: T) -> T {
    T::lit(4.0) / T::lit(3.0) * T::PI() * radius * radius * radius * density / T::lit(constants().physical.proton_mass)
}

pub fn random_walk_predictions<T: Real>(n: T, params: &CslParams<T>, t: T) -> Result<WalkPrediction<T>, CollapseError> {
    params.validate()?;
    if !(n > T::zero()) || !(t >= T::zero()) || !(params.lambda > T::zero()) {
        return Err(CollapseError::InvalidParameter("need N > 0, t >= 0, lambda > 0".into()));
    }
    let (hbar, mp, a, lambda) = (params.hbar(), params.reference_mass, params.a, params.lambda);
    let size = (sq(a) * hbar / (lambda * mp * n * n * n)).powf(T::lit(0.25));
    let settle_time = n * mp * sq(size) / hbar;
    let delta_q_scale = hbar * lambda.sqrt() * t.powf(T::lit(1.5)) / (mp * a);
    Ok(WalkPrediction { size, settle_time, rms_displacement: delta_q_scale / T::lit(6.0).sqrt(), delta_q_scale, t })
}

/// Outcome of the interference-visibility criterion.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InterferenceVerdict<T> {
    /// `exp(−λ N² ΔT)`
    pub decay_factor: T,
    /// `100 N² ΔT`: the smallest `λ⁻¹` still compatible with 1 % agreement.
    pub threshold: T,
    /// `λ⁻¹ > 100 N² ΔT`
    pub agrees_with_qt: bool,
    /// The collapse model would wash the pattern out at the 1 % level, to
    /// within a factor of two: `λ · 100 N² ΔT ≥ ½`.
    pub testable: bool,
}

pub fn interference_criterion<T: Real>(n: T, delta_t: T, lambda: T) -> Result<InterferenceVerdict<T>, CollapseError> {
    if !(n > T::zero()) || !(delta_t > T::zero()) || !(lambda >= T::zero()) {
        return Err(CollapseError::InvalidParameter("need N > 0, dT > 0, lambda >= 0".into()));
    }
    let threshold = T::lit(100.0) * n * n * delta_t;
    Ok(InterferenceVerdict {
        decay_factor: (-lambda * n * n * delta_t).exp(),
        threshold,
        agrees_with_qt: lambda * threshold < T::one(),
        testable: lambda * threshold >= T::lit(0.5),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_constants_load() {
        let c = constants();
        assert_eq!(c.sl.lambda, 1e-16);
        assert_eq!(c.sl.a, 1e-7);
        let p = &c.physical;
        assert!(c.coupling_limits.allows(p, p.electron_mass / p.proton_mass, p.neutron_mass / p.proton_mass));
        assert!(!c.coupling_limits.allows(p, 0.0, 1.5));
    }

    #[test]
    fn nucleon_energy_gain() {
        let p = CslParams::<f64>::sl_nucleons(1);
        let ev = energy_gain_rate_ev(&p).unwrap();
        assert!((ev / 3.1125e-25 - 1.0).abs() < 1e-3, "{ev}");
        let zero = CslParams { lambda: 0.0, ..p };
        assert_eq!(energy_gain_rate(&zero).unwrap(), 0.0);
    }

    #[test]
    fn unit_round_trip() {
        let p = CslParams {
            masses: vec![1.67262192369e-27, 9.1093837015e-31],
            couplings: Some(vec![1.0, 0.25]),
            ..CslParams::<f64>::sl_nucleons(2)
        };
        for l in [1e-7, 1e-9, 2.5e-3] {
            let back = p.to_natural(l).unwrap().to_si(l, p.reference_mass).unwrap();
            let rel = |x: f64, y: f64| ((x - y) / y).abs();
            assert!(rel(back.lambda, p.lambda) < 1e-12);
            assert!(rel(back.a, p.a) < 1e-12);
            for (m, n) in back.masses.iter().zip(&p.masses) {
                assert!(rel(*m, *n) < 1e-12);
            }
        }
        let nat = p.to_natural(1e-7).unwrap();
        assert!(
            (energy_gain_rate(&nat).unwrap()
                - energy_gain_rate(&p).unwrap() / (1.054571817e-34f64.powi(3) / (1.67262192369e-27f64.powi(2) * 1e-28)))
                .abs()
                / energy_gain_rate(&nat).unwrap()
                < 1e-12
        );
    }

    #[test]
    fn random_walk_matches_quoted_scales() {
        let p = CslParams::<f64>::sl_nucleons(1);
        let n = sphere_nucleons(1e-7, 1000.0);
        let day = random_walk_predictions(n, &p, 86400.0).unwrap();
        assert!((day.size - 4.47e-9).abs() < 0.01e-9, "{}", day.size);
        assert!((day.settle_time - 0.79).abs() < 0.01, "{}", day.settle_time);
        assert!((day.rms_displacement - 0.0654).abs() < 0.001, "{}", day.rms_displacement);
        assert_eq!(random_walk_predictions(n, &p, 0.0).unwrap().rms_displacement, 0.0);
        let t = random_walk_predictions(n, &p, 100.0).unwrap();
        let t4 = random_walk_predictions(n, &p, 400.0).unwrap();
        assert!((t4.rms_displacement / t.rms_displacement - 8.0).abs() < 1e-12);
    }

    #[test]
    fn interference_examples() {
        let lambda = constants().sl.lambda;
        let small = interference_criterion(1e3, 1.0, lambda).unwrap();
        assert!(small.agrees_with_qt && !small.testable);
        assert!(1.0 - small.decay_factor < 1e-9);
        let mercury = interference_criterion(1e8, 0.01, lambda).unwrap();
        assert!((mercury.threshold / 1e16 - 1.0).abs() < 1e-12);
        assert!(mercury.testable);
        let none = interference_criterion(1e20, 1e3, 0.0).unwrap();
        assert!(none.agrees_with_qt && !none.testable);
    }
}
