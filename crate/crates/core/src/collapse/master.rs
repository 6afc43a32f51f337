use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftNum, FftPlanner};
use serde::Serialize;

use super::params::CslParams;
use super::CollapseError;
use crate::scalar::{sq, Real};
use crate::wavefield::{Boundary, GridAxis};

/// One-particle density matrix `ρ(x, x′)` on a periodic 1D grid, row-major in `x`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridDensityMatrix<T> {
    pub axis: GridAxis<T>,
    pub values: Vec<Complex<T>>,
}

impl<T: Real> GridDensityMatrix<T> {
    /// `ψ(x) ψ*(x′)` for a wave function normalized on the grid.
    pub fn pure(axis: GridAxis<T>, psi: &[Complex<T>]) -> Self {
        let n = axis.n;
        let mut values = vec![Complex::new(T::zero(), T::zero()); n * n];
        for i in 0..n {
            for j in 0..n {
                values[i * n + j] = psi[i] * psi[j].conj();
            }
        }
        Self { axis, values }
    }

    pub fn n(&self) -> usize {
        self.axis.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        self.values[i * self.n() + j]
    }

    /// `∫ ρ(x, x) dx`
    pub fn trace(&self) -> T {
        let n = self.n();
        (0..n).map(|i| self.values[i * n + i].re).sum::<T>() * self.axis.spacing(Boundary::Periodic)
    }

    pub fn populations(&self) -> Vec<T> {
        let n = self.n();
        (0..n).map(|i| self.values[i * n + i].re).collect()
    }
}

struct Kinetic<T: FftNum> {
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
    k: Vec<T>,
}

impl<T: Real + FftNum> Kinetic<T> {
    fn new(axis: &GridAxis<T>) -> Self {
        let n = axis.n;
        let mut planner = FftPlanner::new();
        let len = axis.upper - axis.lower;
        let k = (0..n)
            .map(|m| {
                let s = if m <= n / 2 { T::of_usize(m) } else { T::of_usize(m) - T::of_usize(n) };
                T::lit(2.0) * T::PI() * s / len
            })
            .collect();
        Self { fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n), k }
    }

    /// Applies the spectral multiplier `f(k)` to `line` in place.
    fn apply(&self, line: &mut [Complex<T>], f: &[Complex<T>]) {
        self.fwd.process(line);
        let scale = T::one() / T::of_usize(line.len());
        for (z, m) in line.iter_mut().zip(f) {
            *z = *z * *m * scale;
        }
        self.inv.process(line);
    }
}

/// Summary of a master-equation run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MasterReport<T> {
    pub trace_error: T,
    pub steps: usize,
}

/// Decay kernel `λ g² (1 − exp(−(x − x′)²/4a²))`.
pub fn collapse_kernel<T: Real>(lambda: T, g: T, a: T, separation: T) -> T {
    lambda * sq(g) * (T::one() - (-sq(separation) / (T::lit(4.0) * sq(a))).exp())
}

/// Evolves `ρ` for `steps` steps of `dt` under `Ĥ = p²/2m + V` and the
/// one-particle collapse term for particle `particle` of `params`.
///
/// Each step is `D(dt/2) U(dt) D(dt/2)` where `D` multiplies `ρ(x, x′)` by the
/// exact decay factor and `U` is the split-step unitary `ρ → UρU†`.
pub fn particle_master_equation<T: Real + FftNum>(
    rho: &mut GridDensityMatrix<T>,
    particle: usize,
    params: &CslParams<T>,
    potential: Option<&[T]>,
    dt: T,
    steps: usize,
) -> Result<MasterReport<T>, CollapseError> {
    params.validate()?;
    if particle >= params.masses.len() {
        return Err(CollapseError::InvalidParameter("particle index out of range".into()));
    }
    let n = rho.n();
    if let Some(v) = potential {
        if v.len() != n {
            return Err(CollapseError::DimensionMismatch { expected: n, found: v.len() });
        }
    }
    let hbar = params.hbar();
    let vmax = potential.map_or(T::zero(), |v| v.iter().fold(T::zero(), |m, x| m.max(x.abs())));
    if dt * vmax / hbar > T::PI() {
        return Err(CollapseError::DtTooLarge { dt: dt.to_f64_lossy(), limit: (T::PI() * hbar / vmax).to_f64_lossy() });
    }
    let mass = params.masses[particle];
    let g = params.coupling(particle);
    let t0 = rho.trace();
    let xs: Vec<T> = (0..n).map(|i| rho.axis.coord(i, Boundary::Periodic)).collect();
    let decay: Vec<T> = (0..n * n)
        .map(|idx| {
            let s = xs[idx / n] - xs[idx % n];
            (-collapse_kernel(params.lambda, g, params.a, s) * dt / T::lit(2.0)).exp()
        })
        .collect();
    let kin = Kinetic::new(&rho.axis);
    let phase: Vec<Complex<T>> = kin.k.iter().map(|k| Complex::from_polar(T::one(), -hbar * sq(*k) * dt / (T::lit(2.0) * mass))).collect();
    let half_v: Option<Vec<Complex<T>>> =
        potential.map(|v| v.iter().map(|x| Complex::from_polar(T::one(), -*x * dt / (T::lit(2.0) * hbar))).collect());
    let mut line = vec![Complex::new(T::zero(), T::zero()); n];
    let apply_u = |line: &mut [Complex<T>]| {
        if let Some(hv) = &half_v {
            for (z, p) in line.iter_mut().zip(hv) {
                *z = *z * *p;
            }
        }
        kin.apply(line, &phase);
        if let Some(hv) = &half_v {
            for (z, p) in line.iter_mut().zip(hv) {
                *z = *z * *p;
            }
        }
    };
    for _ in 0..steps {
        for (z, d) in rho.values.iter_mut().zip(&decay) {
            *z = *z * *d;
        }
        // Columns: ρ → Uρ.
        for j in 0..n {
            for i in 0..n {
                line[i] = rho.values[i * n + j];
            }
            apply_u(&mut line);
            for i in 0..n {
                rho.values[i * n + j] = line[i];
            }
        }
        // Rows: ρ → ρU†, i.e. each row by conj(U).
        for i in 0..n {
            let row = &mut rho.values[i * n..(i + 1) * n];
            for (l, z) in line.iter_mut().zip(row.iter()) {
                *l = z.conj();
            }
            apply_u(&mut line);
            for (z, l) in row.iter_mut().zip(&line) {
                *z = l.conj();
            }
        }
        for (z, d) in rho.values.iter_mut().zip(&decay) {
            *z = *z * *d;
        }
    }
    Ok(MasterReport { trace_error: (rho.trace() - t0).abs(), steps })
}

/// `Tr[p̂²/2m ρ]`, with the momentum taken spectrally.
pub fn kinetic_energy<T: Real + FftNum>(rho: &GridDensityMatrix<T>, mass: T, hbar: T) -> T {
    let n = rho.n();
    let kin = Kinetic::new(&rho.axis);
    let mult: Vec<Complex<T>> = kin
        .k
        .iter()
        .enumerate()
        .map(|(m, k)| {
            // The Nyquist mode has no symmetric partner; drop it.
            let k2 = if n % 2 == 0 && m == n / 2 { T::zero() } else { sq(*k) };
            Complex::new(sq(hbar) * k2 / (T::lit(2.0) * mass), T::zero())
        })
        .collect();
    let mut line = vec![Complex::new(T::zero(), T::zero()); n];
    let mut total = T::zero();
    for j in 0..n {
        for i in 0..n {
            line[i] = rho.values[i * n + j];
        }
        kin.apply(&mut line, &mult);
        total += line[j].re;
    }
    total * rho.axis.spacing(Boundary::Periodic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collapse::params::UnitSystem;

    fn natural(lambda: f64, a: f64, mass: f64, g: Option<f64>) -> CslParams<f64> {
        CslParams { lambda, a, masses: vec![mass], reference_mass: 1.0, couplings: g.map(|g| vec![g]), units: UnitSystem::Natural }
    }

    fn packets(axis: GridAxis<f64>, centers: &[f64], sigma: f64) -> Vec<Complex<f64>> {
        let mut psi: Vec<Complex<f64>> = (0..axis.n)
            .map(|i| {
                let x = axis.coord(i, Boundary::Periodic);
                let v: f64 = centers.iter().map(|c| (-(x - c) * (x - c) / (4.0 * sigma * sigma)).exp()).sum();
                Complex::new(v, 0.0)
            })
            .collect();
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * axis.spacing(Boundary::Periodic);
        for z in psi.iter_mut() {
            *z /= norm.sqrt();
        }
        psi
    }

    fn coherence_rate(g: f64) -> f64 {
        let axis = GridAxis::new(-16.0, 16.0, 128);
        let psi = packets(axis, &[-5.0, 5.0], 0.5);
        let (il, ir) = (44, 84);
        let t = 0.5;
        let steps = 50;
        let mut with = GridDensityMatrix::pure(axis, &psi);
        let mut without = with.clone();
        particle_master_equation(&mut with, 0, &natural(1.0, 1.0, 1.0, Some(g)), None, t / steps as f64, steps).unwrap();
        particle_master_equation(&mut without, 0, &natural(0.0, 1.0, 1.0, Some(g)), None, t / steps as f64, steps).unwrap();
        -(with.get(il, ir).norm() / without.get(il, ir).norm()).ln() / t
    }

    #[test]
    fn far_off_diagonal_decays_at_the_saturated_rate() {
        for g in [1.0, 2.0, 4.0] {
            let rate = coherence_rate(g);
            assert!((rate / (g * g) - 1.0).abs() < 0.01, "g={g} rate={rate}");
        }
    }

    #[test]
    fn populations_untouched_by_collapse_alone() {
        let axis = GridAxis::new(-10.0, 10.0, 64);
        let psi = packets(axis, &[-3.0, 3.0], 0.7);
        let mut rho = GridDensityMatrix::pure(axis, &psi);
        let before = rho.populations();
        // Infinite mass: no kinetic motion, only the decay kernel acts.
        let rep = particle_master_equation(&mut rho, 0, &natural(2.0, 1.0, f64::INFINITY, Some(1.0)), None, 0.01, 100).unwrap();
        for (a, b) in before.iter().zip(rho.populations()) {
            assert!((a - b).abs() < 1e-12, "{a} {b}");
        }
        assert!(rep.trace_error < 1e-12);
        assert!(rho.get(16, 48).norm() < 0.2 * GridDensityMatrix::pure(axis, &psi).get(16, 48).norm());
    }

    #[test]
    fn kinetic_energy_grows_at_the_collapse_rate() {
        let axis = GridAxis::new(-30.0, 30.0, 256);
        let psi = packets(axis, &[0.0], 1.0);
        let p = natural(0.05, 1.0, 1.0, None);
        let mut rho = GridDensityMatrix::pure(axis, &psi);
        let e0 = kinetic_energy(&rho, 1.0, 1.0);
        assert!((e0 - 0.125).abs() < 1e-10);
        let rep = particle_master_equation(&mut rho, 0, &p, None, 0.02, 100).unwrap();
        let slope = (kinetic_energy(&rho, 1.0, 1.0) - e0) / 2.0;
        assert!((slope / (0.05 / 4.0) - 1.0).abs() < 1e-3, "{slope}");
        assert!(rep.trace_error < 1e-10);
    }
}
