use std::collections::HashSet;

use num_complex::Complex;
use num_traits::{One, Zero};
use rand::Rng;
use serde::Serialize;

use super::{Domain, DomainKind, FieldSample, GuidingField, WavefieldError, NODE_THRESHOLD_FACTOR};
use crate::rng;
use crate::scalar::{sq, Real};

/// Highest per-axis mode index supported by the stack buffers of the evaluator.
pub const MAX_MODE_INDEX: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct BoxMode<T> {
    /// Per-axis quantum numbers, each `>= 1`.
    pub index: [u32; 2],
    pub amplitude: Complex<T>,
}

/// Superposition of hard-wall box eigenmodes on `[0, L]^d`, `d ∈ {1, 2}`.
///
/// Amplitudes refer to time `t0`; evaluation at any absolute time applies
/// `exp(−i E (t − t0))` per mode, so evolution is exact.
#[derive(Clone, Debug)]
pub struct EigenmodeWaveFunction<T> {
    dims: usize,
    box_side: T,
    modes: Vec<BoxMode<T>>,
    t0: T,
    max_index: [usize; 2],
}

/// How mode phases are assigned when building a superposition.
#[derive(Clone, Copy, Debug)]
pub enum Phases {
    /// Use the complex amplitudes exactly as given.
    Explicit,
    /// Keep each modulus and draw the phase uniformly in `[0, 2π)`.
    Seeded(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectrumStats<T> {
    pub mean_energy: T,
    pub energy_spread: T,
}

/// Normalized superposition of box modes.
pub fn build_box_superposition<T: Real>(
    mode_amplitudes: &[(Vec<u32>, Complex<T>)],
    box_side: T,
    phases: Phases,
) -> Result<EigenmodeWaveFunction<T>, WavefieldError> {
    let (first, _) = mode_amplitudes.first().ok_or(WavefieldError::EmptyModes)?;
    let dims = first.len();
    if dims != 1 && dims != 2 {
        return Err(WavefieldError::UnsupportedDimension(dims));
    }
    let mut seen = HashSet::new();
    let mut modes = Vec::with_capacity(mode_amplitudes.len());
    let mut phase_rng = match phases {
        Phases::Seeded(seed) => Some(rng::stream(seed, 0)),
        Phases::Explicit => None,
    };
    for (index, amp) in mode_amplitudes {
        if index.len() != dims || index.iter().any(|&n| n == 0 || n as usize > MAX_MODE_INDEX) {
            return Err(WavefieldError::InvalidModeIndex(index.clone()));
        }
        if !seen.insert(index.clone()) {
            return Err(WavefieldError::DuplicateMode(index.clone()));
        }
        let amplitude = match phase_rng.as_mut() {
            Some(r) => {
                let theta: f64 = r.random::<f64>() * std::f64::consts::TAU;
                Complex::from_polar(amp.norm(), T::lit(theta))
            }
            None => *amp,
        };
        let mut idx = [0u32; 2];
        idx[..dims].copy_from_slice(index);
        modes.push(BoxMode { index: idx, amplitude });
    }
    let norm_sq: T = modes.iter().map(|m| m.amplitude.norm_sqr()).sum();
    if norm_sq <= T::zero() {
        return Err(WavefieldError::ZeroAmplitudes);
    }
    if (norm_sq - T::one()).abs() > T::lit(1e-12) {
        let inv = T::one() / norm_sq.sqrt();
        for m in &mut modes {
            m.amplitude = m.amplitude * inv;
        }
    }
    Ok(EigenmodeWaveFunction::from_parts(dims, box_side, modes, T::zero()))
}

/// Advances every amplitude by `exp(−i E t)`.
pub fn evolve_analytic<T: Real>(wf: &EigenmodeWaveFunction<T>, t: T) -> EigenmodeWaveFunction<T> {
    let modes = wf
        .modes
        .iter()
        .map(|m| BoxMode { index: m.index, amplitude: m.amplitude * Complex::from_polar(T::one(), -wf.mode_energy(m.index) * t) })
        .collect();
    EigenmodeWaveFunction::from_parts(wf.dims, wf.box_side, modes, wf.t0 + t)
}

impl<T: Real> EigenmodeWaveFunction<T> {
    fn from_parts(dims: usize, box_side: T, modes: Vec<BoxMode<T>>, t0: T) -> Self {
        let mut max_index = [0usize; 2];
        for m in &modes {
            for k in 0..dims {
                max_index[k] = max_index[k].max(m.index[k] as usize);
            }
        }
        Self { dims, box_side, modes, t0, max_index }
    }

    /// Equal-weight superposition of all modes with indices `1..=per_axis`
    /// on every axis, with seeded random phases.
    pub fn equal_weight_grid(dims: usize, per_axis: u32, box_side: T, phase_seed: u64) -> Result<Self, WavefieldError> {
        let mut spec = Vec::new();
        match dims {
            1 => {
                for n in 1..=per_axis {
                    spec.push((vec![n], Complex::one()));
                }
            }
            2 => {
                for nx in 1..=per_axis {
                    for ny in 1..=per_axis {
                        spec.push((vec![nx, ny], Complex::one()));
                    }
                }
            }
            d => return Err(WavefieldError::UnsupportedDimension(d)),
        }
        build_box_superposition(&spec, box_side, Phases::Seeded(phase_seed))
    }

    /// A single normalized eigenmode.
    pub fn single_mode(index: &[u32], box_side: T) -> Result<Self, WavefieldError> {
        build_box_superposition(&[(index.to_vec(), Complex::one())], box_side, Phases::Explicit)
    }

    pub fn modes(&self) -> &[BoxMode<T>] {
        &self.modes
    }

    pub fn box_side(&self) -> T {
        self.box_side
    }

    pub fn t0(&self) -> T {
        self.t0
    }

    pub fn norm_sqr(&self) -> T {
        self.modes.iter().map(|m| m.amplitude.norm_sqr()).sum()
    }

    /// `E = π² |n|² / (2 L²)` with `ħ = m = 1`.
    pub fn mode_energy(&self, index: [u32; 2]) -> T {
        let n2: T = (0..self.dims).map(|k| sq(T::of_usize(index[k] as usize))).sum();
        sq(T::PI()) * n2 / (T::lit(2.0) * sq(self.box_side))
    }

    pub fn spectrum_stats(&self) -> SpectrumStats<T> {
        let w = self.norm_sqr();
        let mean = self.modes.iter().map(|m| m.amplitude.norm_sqr() * self.mode_energy(m.index)).sum::<T>() / w;
        let var = self.modes.iter().map(|m| m.amplitude.norm_sqr() * sq(self.mode_energy(m.index) - mean)).sum::<T>() / w;
        SpectrumStats { mean_energy: mean, energy_spread: var.max(T::zero()).sqrt() }
    }

    /// Amplitude of each mode at absolute time `t`.
    pub fn amplitudes_at(&self, t: T) -> Vec<Complex<T>> {
        self.modes.iter().map(|m| m.amplitude * Complex::from_polar(T::one(), -self.mode_energy(m.index) * (t - self.t0))).collect()
    }

    /// `Ψ(x, t)`.
    pub fn psi(&self, x: &[T; 2], t: T) -> Complex<T> {
        self.evaluate(x, t, false).0
    }

    /// Returns `(Ψ, ∇Ψ, ∇²Ψ)` at `(x, t)`; the Laplacian only when requested.
    #[inline]
    pub fn evaluate(&self, x: &[T; 2], t: T, laplacian: bool) -> (Complex<T>, [Complex<T>; 2], Complex<T>) {
        if self.max_index[0].max(self.max_index[1]) < 16 {
            self.evaluate_with::<16>(x, t, laplacian)
        } else {
            self.evaluate_with::<{ MAX_MODE_INDEX + 1 }>(x, t, laplacian)
        }
    }

    #[inline]
    fn evaluate_with<const N: usize>(&self, x: &[T; 2], t: T, laplacian: bool) -> (Complex<T>, [Complex<T>; 2], Complex<T>) {
        let l = self.box_side;
        let pi_over_l = T::PI() / l;
        let tau = t - self.t0;
        let alpha = sq(pi_over_l) * tau / T::lit(2.0);
        let norm = (T::lit(2.0) / l).sqrt();

        let mut sin = [[T::zero(); N]; 2];
        let mut cos = [[T::zero(); N]; 2];
        let mut phase = [[Complex::<T>::zero(); N]; 2];
        for k in 0..self.dims {
            let theta = pi_over_l * x[k];
            let (s1, c1) = theta.sin_cos();
            let two_c = c1 + c1;
            sin[k][0] = T::zero();
            cos[k][0] = T::one();
            sin[k][1] = s1;
            cos[k][1] = c1;
            for n in 2..=self.max_index[k] {
                sin[k][n] = two_c * sin[k][n - 1] - sin[k][n - 2];
                cos[k][n] = two_c * cos[k][n - 1] - cos[k][n - 2];
            }
            // e^{-i α n²}: successive ratios are e^{-i α (2n+1)}.
            let q = Complex::from_polar(T::one(), -alpha);
            let q2 = q * q;
            let mut z = q;
            let mut step = q * q2;
            phase[k][1] = z;
            for n in 2..=self.max_index[k] {
                z = z * step;
                step = step * q2;
                phase[k][n] = z;
            }
        }

        let mut psi = Complex::zero();
        let mut grad = [Complex::zero(); 2];
        let mut lap = Complex::zero();
        for m in &self.modes {
            let nx = m.index[0] as usize;
            if self.dims == 1 {
                let c = m.amplitude * phase[0][nx] * norm;
                let val = c * sin[0][nx];
                psi = psi + val;
                grad[0] = grad[0] + c * (cos[0][nx] * pi_over_l * T::of_usize(nx));
                if laplacian {
                    lap = lap - val * sq(pi_over_l * T::of_usize(nx));
                }
            } else {
                let ny = m.index[1] as usize;
                let c = m.amplitude * (phase[0][nx] * phase[1][ny]) * (norm * norm);
                let sx = sin[0][nx];
                let sy = sin[1][ny];
                let val = c * (sx * sy);
                psi = psi + val;
                grad[0] = grad[0] + c * (cos[0][nx] * sy * pi_over_l * T::of_usize(nx));
                grad[1] = grad[1] + c * (sx * cos[1][ny] * pi_over_l * T::of_usize(ny));
                if laplacian {
                    let n2 = T::of_usize(nx * nx + ny * ny);
                    lap = lap - val * (sq(pi_over_l) * n2);
                }
            }
        }
        (psi, grad, lap)
    }
}

impl<T: Real> GuidingField<T> for EigenmodeWaveFunction<T> {
    fn dims(&self) -> usize {
        self.dims
    }

    fn domain(&self) -> Domain<T> {
        let mut upper = [T::zero(); 2];
        for u in upper.iter_mut().take(self.dims) {
            *u = self.box_side;
        }
        Domain { kind: DomainKind::Box, lower: [T::zero(); 2], upper }
    }

    #[inline]
    fn sample(&self, x: &[T; 2], t: T) -> FieldSample<T> {
        let (psi, grad, lap) = self.evaluate(x, t, true);
        let density = psi.norm_sqr();
        let inv = if density > T::zero() { T::one() / density } else { T::zero() };
        let mut velocity = [T::zero(); 2];
        let mut div = (lap * psi.conj()).im * inv;
        for k in 0..self.dims {
            let g = grad[k] * psi.conj() * inv;
            velocity[k] = g.im;
            div -= T::lit(2.0) * g.re * g.im;
        }
        FieldSample { density, velocity, divergence: Some(div) }
    }

    fn density(&self, x: &[T; 2], t: T) -> T {
        self.evaluate(x, t, false).0.norm_sqr()
    }

    fn node_threshold(&self) -> T {
        T::lit(NODE_THRESHOLD_FACTOR) / self.box_side.powi(self.dims as i32)
    }

    fn density_bound(&self, _t: T) -> Option<T> {
        let sum_abs: T = self.modes.iter().map(|m| m.amplitude.norm()).sum();
        Some(sq(sum_abs) * (T::lit(2.0) / self.box_side).powi(self.dims as i32))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavefield::density_phase_current;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn ground_state_is_normalized() {
        let wf = EigenmodeWaveFunction::<f64>::single_mode(&[1, 1], 1.0).unwrap();
        assert_eq!(wf.modes().len(), 1);
        assert!((wf.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sixteen_seeded_modes() {
        let wf = EigenmodeWaveFunction::<f64>::equal_weight_grid(2, 4, 1.0, 11).unwrap();
        assert_eq!(wf.modes().len(), 16);
        assert!((wf.norm_sqr() - 1.0).abs() < 1e-12);
        let distinct: HashSet<[u32; 2]> = wf.modes().iter().map(|m| m.index).collect();
        assert_eq!(distinct.len(), 16);
        for m in wf.modes() {
            assert!((m.amplitude.norm() - 0.25).abs() < 1e-12);
        }
        // reproducible phases
        let again = EigenmodeWaveFunction::<f64>::equal_weight_grid(2, 4, 1.0, 11).unwrap();
        assert_eq!(wf.modes(), again.modes());
    }

    #[test]
    fn explicit_amplitudes_kept() {
        let wf = build_box_superposition(&[(vec![1], c(0.6, 0.0)), (vec![2], c(0.0, 0.8))], 1.0, Phases::Explicit).unwrap();
        assert_eq!(wf.modes()[0].amplitude, c(0.6, 0.0));
        assert_eq!(wf.modes()[1].amplitude, c(0.0, 0.8));
        assert!((wf.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn construction_errors() {
        let empty: Vec<(Vec<u32>, Complex<f64>)> = vec![];
        assert_eq!(build_box_superposition(&empty, 1.0, Phases::Explicit).unwrap_err(), WavefieldError::EmptyModes);
        let dup = vec![(vec![1, 2], c(1.0, 0.0)), (vec![1, 2], c(1.0, 0.0))];
        assert!(matches!(build_box_superposition(&dup, 1.0, Phases::Explicit), Err(WavefieldError::DuplicateMode(_))));
        let zero_idx = vec![(vec![0, 2], c(1.0, 0.0))];
        assert!(matches!(build_box_superposition(&zero_idx, 1.0, Phases::Explicit), Err(WavefieldError::InvalidModeIndex(_))));
        let zeros = vec![(vec![1], c(0.0, 0.0))];
        assert_eq!(build_box_superposition(&zeros, 1.0, Phases::Explicit).unwrap_err(), WavefieldError::ZeroAmplitudes);
    }

    #[test]
    fn stationary_ground_state() {
        let wf = EigenmodeWaveFunction::<f64>::single_mode(&[1, 1], 1.0).unwrap();
        for &(x, y) in &[(0.1, 0.2), (0.5, 0.5), (0.77, 0.31)] {
            let p = [x, y];
            let d0 = wf.density(&p, 0.0);
            for &t in &[0.3, 1.7, 12.0] {
                assert!((wf.density(&p, t) - d0).abs() < 1e-12);
            }
            let local = density_phase_current(&wf, &p, 0.9).unwrap();
            assert!(local.phase_gradient[0].abs() < 1e-12 && local.phase_gradient[1].abs() < 1e-12);
        }
    }

    #[test]
    fn evolve_zero_is_identity_and_norm_preserved() {
        let wf = EigenmodeWaveFunction::<f64>::equal_weight_grid(2, 3, 1.0, 5).unwrap();
        let same = evolve_analytic(&wf, 0.0);
        assert_eq!(same.modes(), wf.modes());
        let later = evolve_analytic(&wf, 3.7);
        assert!((later.norm_sqr() - 1.0).abs() < 1e-12);
        // evaluation at absolute time agrees between the two representations
        let p = [0.3, 0.6];
        assert!((later.psi(&p, 3.7) - wf.psi(&p, 3.7)).norm() < 1e-12);
    }

    #[test]
    fn half_period_phases_by_hand() {
        let s = 0.5f64.sqrt();
        let wf = build_box_superposition(&[(vec![1], c(s, 0.0)), (vec![2], c(s, 0.0))], 1.0, Phases::Explicit).unwrap();
        let pi2 = std::f64::consts::PI.powi(2);
        let (e1, e2) = (pi2 / 2.0, 2.0 * pi2);
        let period = 2.0 * std::f64::consts::PI / (e2 - e1);
        let t = period / 2.0;
        let out = evolve_analytic(&wf, t);
        let a1 = Complex::from_polar(s, -e1 * t);
        let a2 = Complex::from_polar(s, -e2 * t);
        assert!((out.modes()[0].amplitude - a1).norm() < 1e-13);
        assert!((out.modes()[1].amplitude - a2).norm() < 1e-13);
        // relative phase flipped by π
        let rel = out.modes()[1].amplitude / out.modes()[0].amplitude;
        assert!((rel - c(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn phase_gradient_matches_finite_difference() {
        let wf = build_box_superposition(&[(vec![1], c(0.8, 0.0)), (vec![3], c(0.0, 0.6))], 1.0, Phases::Explicit).unwrap();
        let t = 0.137;
        let x = 0.41;
        let local = density_phase_current(&wf, &[x, 0.0], t).unwrap();
        // Oracle: central difference of the unwrapped phase arg Ψ.
        let h = 1e-6;
        let phase = |x: f64| wf.psi(&[x, 0.0], t).arg();
        let mut d = phase(x + h) - phase(x - h);
        if d > std::f64::consts::PI {
            d -= std::f64::consts::TAU;
        } else if d < -std::f64::consts::PI {
            d += std::f64::consts::TAU;
        }
        let fd = d / (2.0 * h);
        assert!((local.phase_gradient[0] - fd).abs() < 1e-6, "{} vs {}", local.phase_gradient[0], fd);
        assert!((local.current[0] - local.density * local.phase_gradient[0]).abs() < 1e-14);
    }

    #[test]
    fn divergence_matches_finite_difference() {
        let wf = EigenmodeWaveFunction::<f64>::equal_weight_grid(2, 3, 1.0, 2).unwrap();
        let (x, t, h) = ([0.37, 0.58], 0.21, 1e-5);
        let s = wf.sample(&x, t);
        let vx = |x0: f64| wf.sample(&[x0, x[1]], t).velocity[0];
        let vy = |x1: f64| wf.sample(&[x[0], x1], t).velocity[1];
        let fd = (vx(x[0] + h) - vx(x[0] - h) + vy(x[1] + h) - vy(x[1] - h)) / (2.0 * h);
        assert!((s.divergence.unwrap() - fd).abs() < 1e-5 * (1.0 + fd.abs()));
    }

    #[test]
    fn node_is_reported() {
        // mode 2 in 1D vanishes at the box centre
        let wf = EigenmodeWaveFunction::<f64>::single_mode(&[2], 1.0).unwrap();
        let err = density_phase_current(&wf, &[0.5, 0.0], 0.0).unwrap_err();
        assert!(matches!(err, WavefieldError::Node { .. }));
    }

    #[test]
    fn spectrum_of_two_modes() {
        let s = 0.5f64.sqrt();
        let wf = build_box_superposition(&[(vec![1], c(s, 0.0)), (vec![2], c(s, 0.0))], 1.0, Phases::Explicit).unwrap();
        let stats = wf.spectrum_stats();
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((stats.mean_energy - 1.25 * pi2).abs() < 1e-12);
        assert!((stats.energy_spread - 0.75 * pi2).abs() < 1e-12);
    }

    #[test]
    fn single_precision_evaluation() {
        let wf = EigenmodeWaveFunction::<f32>::equal_weight_grid(2, 2, 1.0, 3).unwrap();
        assert!((wf.norm_sqr() - 1.0).abs() < 1e-6);
        let d = wf.density(&[0.4, 0.7], 0.5);
        assert!(d.is_finite() && d >= 0.0);
    }
}
