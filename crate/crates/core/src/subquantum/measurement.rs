use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::SubquantumError;
use crate::relaxation::gauss_legendre;
use crate::rng;
use crate::scalar::{sq, Real};

/// Impulsive measurement `Ĥ = a x̂ p̂_y` of a particle in the box ground
/// state on `[0, system_width]` by a pointer whose wave function is the
/// box ground state of width `pointer_width` centred at 0.
///
/// The pointer position is in nonequilibrium: uniform on `[−w/2, w/2]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubqMeasurementConfig<T> {
    pub system_width: T,
    pub pointer_width: T,
    /// Support width `w` of the pointer distribution.
    pub w: T,
    /// Coupling `a`.
    pub coupling: T,
    /// Interaction time `t`.
    pub duration: T,
    pub runs: usize,
    pub seed: u64,
}

impl<T: Real> SubqMeasurementConfig<T> {
    fn validate(&self) -> Result<(), SubquantumError> {
        let bad = |m: &str| Err(SubquantumError::InvalidConfig(m.into()));
        if !(self.w > T::zero()) {
            return bad("w must be positive");
        }
        if !(self.coupling * self.duration > T::zero()) {
            return bad("a·t must be positive");
        }
        if !(self.system_width > T::zero() && self.pointer_width > T::zero()) {
            return bad("widths must be positive");
        }
        if self.w > self.pointer_width {
            return bad("pointer support w must lie inside the pointer wave function");
        }
        if self.runs == 0 {
            return bad("runs must be >= 1");
        }
        Ok(())
    }

    /// `w / (2 a t)`
    pub fn error_bound(&self) -> T {
        self.w / (T::lit(2.0) * self.coupling * self.duration)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeasurementRun<T> {
    pub x0: T,
    pub y0: T,
    pub y_meas: T,
    pub estimate: T,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasurementSummary<T> {
    pub runs: Vec<MeasurementRun<T>>,
    pub max_error: T,
    pub error_bound: T,
    /// Every run satisfied `|x̂₀ − x₀| ≤ w/(2at)` up to rounding.
    pub all_within_bound: bool,
    /// `1 − ⟨ψ₀|ρ_x(t)|ψ₀⟩` for the reduced system state after coupling.
    pub disturbance: T,
}

/// `∫ g(y) g(y + s) dy` for the box ground state `g` of width `l`.
pub fn box_ground_autocorrelation<T: Real>(s: T, l: T) -> T {
    let u = s.abs();
    if u >= l {
        return T::zero();
    }
    let k = T::PI() / l;
    (T::one() - u / l) * (k * u).cos() + (k * u).sin() / T::PI()
}

fn disturbance<T: Real>(cfg: &SubqMeasurementConfig<T>) -> T {
    // 1 − ∫∫ |ψ₀(x)|² |ψ₀(x')|² C(a t (x − x')) dx dx'
    let (gx, gw) = gauss_legendre(48);
    let l = cfg.system_width;
    let half = l / T::lit(2.0);
    let at = cfg.coupling * cfg.duration;
    let pts: Vec<(T, T)> = gx
        .iter()
        .zip(&gw)
        .map(|(&x, &w)| {
            let xx = half * T::lit(1.0 + x);
            let rho = T::lit(2.0) / l * sq((T::PI() * xx / l).sin());
            (xx, T::lit(w) * half * rho)
        })
        .collect();
    let mut overlap = T::zero();
    for &(x, wx) in &pts {
        for &(y, wy) in &pts {
            let c = box_ground_autocorrelation(at * (x - y), cfg.pointer_width);
            // 1 − C is accumulated directly to avoid cancellation for tiny a t.
            overlap += wx * wy * (T::one() - c);
        }
    }
    overlap.max(T::zero())
}

fn sample_box_ground<T: Real, R: Rng>(rng: &mut R, l: T) -> T {
    loop {
        let u: f64 = rng.random();
        let v: f64 = rng.random();
        let x = l * T::lit(u);
        if T::lit(v) < sq((T::PI() * x / l).sin()) {
            return x;
        }
    }
}

/// Exact trajectories `x(t) = x₀`, `y(t) = y₀ + a x₀ t` and the estimate
/// `x̂₀ = y(t)/(a t)` for each run.
pub fn subq_measure<T: Real>(cfg: &SubqMeasurementConfig<T>) -> Result<MeasurementSummary<T>, SubquantumError> {
    cfg.validate()?;
    let at = cfg.coupling * cfg.duration;
    let runs: Vec<MeasurementRun<T>> = (0..cfg.runs)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(cfg.seed, i as u64);
            let x0 = sample_box_ground(&mut r, cfg.system_width);
            let u: f64 = r.random();
            let y0 = cfg.w * (T::lit(u) - T::lit(0.5));
            let y_meas = y0 + cfg.coupling * x0 * cfg.duration;
            MeasurementRun { x0, y0, y_meas, estimate: y_meas / at }
        })
        .collect();
    let bound = cfg.error_bound();
    let eps = T::epsilon() * T::lit(8.0);
    let mut max_error = T::zero();
    let mut ok = true;
    for r in &runs {
        let e = (r.estimate - r.x0).abs();
        max_error = max_error.max(e);
        // Rounding in y/(a t) is a few ulps of the operands.
        if e > bound + eps * (r.x0.abs() + bound) {
            ok = false;
        }
    }
    Ok(MeasurementSummary { runs, max_error, error_bound: bound, all_within_bound: ok, disturbance: disturbance(cfg) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pilotwave::{integrate_trajectory, Tolerances};
    use crate::wavefield::{Domain, DomainKind, FieldSample, GuidingField};

    fn cfg(w: f64, at: f64) -> SubqMeasurementConfig<f64> {
        SubqMeasurementConfig { system_width: 1.0, pointer_width: 1.0, w, coupling: at, duration: 1.0, runs: 1000, seed: 5 }
    }

    #[test]
    fn autocorrelation_matches_quadrature() {
        let g = |y: f64| if y.abs() <= 0.5 { 2f64.sqrt() * (std::f64::consts::PI * y).cos() } else { 0.0 };
        for &s in &[0.0, 0.1, 0.37, 0.8, 1.2] {
            let h = 1e-5;
            let direct: f64 = (0..200_000).map(|i| -1.0 + (i as f64 + 0.5) * h).map(|y| g(y) * g(y + s) * h).sum();
            assert!((direct - box_ground_autocorrelation(s, 1.0)).abs() < 1e-8, "s={s}");
        }
    }

    #[test]
    fn every_run_respects_the_bound() {
        let s = subq_measure(&cfg(1e-3, 1e-1)).unwrap();
        assert!(s.all_within_bound);
        assert!(s.max_error <= s.error_bound * (1.0 + 1e-12));
        assert!(s.max_error > 0.9 * s.error_bound);
    }

    #[test]
    fn error_is_linear_in_w() {
        let e: Vec<f64> = [1e-2, 1e-3, 1e-4].iter().map(|&w| subq_measure(&cfg(w, 0.5)).unwrap().max_error).collect();
        assert!((e[0] / e[1] - 10.0).abs() < 1e-9);
        assert!((e[1] / e[2] - 10.0).abs() < 1e-9);
    }

    #[test]
    fn disturbance_vanishes_in_the_joint_limit() {
        let seq = [(1e-3, 1e-1), (1e-5, 1e-2), (1e-7, 1e-3)];
        let mut prev = f64::INFINITY;
        for (w, at) in seq {
            let s = subq_measure(&cfg(w, at)).unwrap();
            assert!(s.disturbance < prev);
            prev = s.disturbance;
        }
        assert!(prev < 1e-4);
    }

    struct Coupling(f64);

    impl GuidingField<f64> for Coupling {
        fn dims(&self) -> usize {
            2
        }
        fn domain(&self) -> Domain<f64> {
            Domain { kind: DomainKind::Unbounded, lower: [f64::NEG_INFINITY; 2], upper: [f64::INFINITY; 2] }
        }
        fn sample(&self, x: &[f64; 2], _t: f64) -> FieldSample<f64> {
            FieldSample { density: 1.0, velocity: [0.0, self.0 * x[0]], divergence: Some(0.0) }
        }
        fn node_threshold(&self) -> f64 {
            0.0
        }
    }

    #[test]
    fn closed_form_agrees_with_integrated_flow() {
        let c = SubqMeasurementConfig { coupling: 0.3, duration: 2.0, runs: 20, ..cfg(1e-3, 1.0) };
        let s = subq_measure(&c).unwrap();
        for r in &s.runs {
            let tr = integrate_trajectory(&Coupling(0.3), [r.x0, r.y0], 0.0, 2.0, &Tolerances::default(), &[]).unwrap();
            assert!((tr.final_position()[1] - r.y_meas).abs() < 1e-9);
            assert_eq!(tr.final_position()[0], r.x0);
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(subq_measure(&cfg(0.0, 0.1)).is_err());
        assert!(subq_measure(&cfg(1e-3, 0.0)).is_err());
    }
}
