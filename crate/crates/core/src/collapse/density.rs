use num_complex::Complex;
use serde::Serialize;

use super::csl::CollapseOperatorSet;
use super::CollapseError;
use crate::linalg::CMatrix;
use crate::scalar::Real;

/// Smallest eigenvalue tolerated before positivity is flagged as lost.
pub const POSITIVITY_FLOOR: f64 = -1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct DensityEvolution<T> {
    pub rho: CMatrix<T>,
    pub trace_error: T,
    /// Smallest eigenvalue seen at the monitoring points.
    pub min_eigenvalue: T,
    pub positivity_ok: bool,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensitySummary<T> {
    pub trace_error: T,
    pub min_eigenvalue: T,
    pub positivity_ok: bool,
    pub steps: usize,
}

impl<T: Real> DensityEvolution<T> {
    pub fn summary(&self) -> DensitySummary<T> {
        DensitySummary {
            trace_error: self.trace_error,
            min_eigenvalue: self.min_eigenvalue,
            positivity_ok: self.positivity_ok,
            steps: self.steps,
        }
    }
}

/// `−i[Ĥ, ρ] − (λ/2) Σ_r [Â^r, [Â^r, ρ]]`
pub fn lindblad_rhs<T: Real>(rho: &CMatrix<T>, ops: &CollapseOperatorSet<T>, lambda: T) -> CMatrix<T> {
    let mut out = CMatrix::zeros(rho.dim());
    if let Some(h) = ops.hamiltonian() {
        out = h.commutator(rho).scale(Complex::new(T::zero(), -T::one()));
    }
    for a in ops.operators() {
        let inner = a.commutator(rho);
        out = &out - &a.commutator(&inner).scale_real(lambda / T::lit(2.0));
    }
    out
}

fn validate_rho<T: Real>(rho: &CMatrix<T>, dim: usize) -> Result<(), CollapseError> {
    if rho.dim() != dim {
        return Err(CollapseError::DimensionMismatch { expected: dim, found: rho.dim() });
    }
    let tr = rho.trace();
    if (tr.re - T::one()).abs() > T::lit(1e-10) || tr.im.abs() > T::lit(1e-10) {
        return Err(CollapseError::NonPhysicalDensity(format!("trace {tr}")));
    }
    if rho.hermiticity_defect() > T::lit(1e-10) {
        return Err(CollapseError::NonPhysicalDensity("not Hermitian".into()));
    }
    let m = rho.min_eigenvalue();
    if m < T::lit(-1e-10) {
        return Err(CollapseError::NonPhysicalDensity(format!("negative eigenvalue {m}")));
    }
    Ok(())
}

/// Ensemble density matrix at time `t`.
///
/// Without a Hamiltonian every element decays in closed form,
/// `ρ_nm(t) = exp(−(λt/2) Σ_r (a^r_n − a^r_m)²) ρ_nm(0)` in the joint eigenbasis;
/// otherwise the Lindblad equation is integrated with classical RK4.
pub fn density_matrix_csl<T: Real>(
    rho0: &CMatrix<T>,
    ops: &CollapseOperatorSet<T>,
    lambda: T,
    t: T,
) -> Result<DensityEvolution<T>, CollapseError> {
    validate_rho(rho0, ops.dim())?;
    if !(lambda >= T::zero()) || !(t >= T::zero()) {
        return Err(CollapseError::InvalidParameter("need lambda >= 0 and t >= 0".into()));
    }
    let b = ops.basis();
    let (rho, steps, min_eig) = if ops.hamiltonian().is_none() {
        let mut r = &(&b.adjoint() * rho0) * b;
        let a = ops.eigenvalues();
        let dim = ops.dim();
        for n in 0..dim {
            for m in 0..dim {
                let d: T = a.iter().map(|ar| crate::scalar::sq(ar[n] - ar[m])).sum();
                r[(n, m)] = r[(n, m)] * (-lambda * t * d / T::lit(2.0)).exp();
            }
        }
        let rho = &(b * &r) * &b.adjoint();
        let me = rho.min_eigenvalue();
        (rho, 0, me)
    } else {
        let rate = ops.rate_scale(lambda).max(T::min_positive_value());
        let steps = (t * rate / T::lit(0.002)).ceil().to_usize().unwrap_or(0).max(1);
        let h = t / T::of_usize(steps);
        let monitor = (steps / 20).max(1);
        let mut rho = rho0.clone();
        let mut min_eig = rho.min_eigenvalue();
        let half = T::lit(0.5);
        for s in 1..=steps {
            let k1 = lindblad_rhs(&rho, ops, lambda);
            let k2 = lindblad_rhs(&(&rho + &k1.scale_real(h * half)), ops, lambda);
            let k3 = lindblad_rhs(&(&rho + &k2.scale_real(h * half)), ops, lambda);
            let k4 = lindblad_rhs(&(&rho + &k3.scale_real(h)), ops, lambda);
            let incr = &(&k1 + &k2.scale_real(T::lit(2.0))) + &(&k3.scale_real(T::lit(2.0)) + &k4);
            rho = &rho + &incr.scale_real(h / T::lit(6.0));
            if s % monitor == 0 || s == steps {
                min_eig = min_eig.min(rho.min_eigenvalue());
            }
        }
        (rho, steps, min_eig)
    };
    let trace_error = (rho.trace() - Complex::new(T::one(), T::zero())).norm();
    Ok(DensityEvolution { trace_error, min_eigenvalue: min_eig, positivity_ok: min_eig >= T::lit(POSITIVITY_FLOOR), rho, steps })
}

/// Finite-difference check of the ensemble-averaged collapse dynamics
/// against [`lindblad_rhs`] at record `k` (centred difference over `k ± 1`).
/// Returns the largest `|z|` over matrix elements.
pub fn lindblad_consistency<T: Real>(
    ensemble: &super::csl::CslEnsemble<T>,
    ops: &CollapseOperatorSet<T>,
    lambda: T,
    k: usize,
) -> Result<T, CollapseError> {
    let runs = &ensemble.runs;
    if runs.len() < 2 || k == 0 || k + 1 >= runs[0].times.len() {
        return Err(CollapseError::InvalidParameter("need two runs and records on both sides of k".into()));
    }
    let span = runs[0].times[k + 1] - runs[0].times[k - 1];
    let dim = ops.dim();
    let w = ensemble.weights();
    let outer = |psi: &[Complex<T>]| CMatrix::outer(psi, psi);
    let residuals: Vec<CMatrix<T>> = runs
        .iter()
        .map(|r| {
            let diff = &outer(&r.states[k + 1]) - &outer(&r.states[k - 1]);
            &diff.scale_real(T::one() / span) - &lindblad_rhs(&outer(&r.states[k]), ops, lambda)
        })
        .collect();
    let mut max_z = T::zero();
    for a in 0..dim {
        for b in a..dim {
            for part in 0..2 {
                let vals: Vec<T> = residuals.iter().map(|m| if part == 0 { m[(a, b)].re } else { m[(a, b)].im }).collect();
                let (mean, se) = super::csl::weighted_mean(&vals, w.as_deref());
                if se > T::zero() {
                    max_z = max_z.max((mean / se).abs());
                } else if mean.abs() > T::lit(1e-12) {
                    max_z = T::infinity();
                }
            }
        }
    }
    Ok(max_z)
}
