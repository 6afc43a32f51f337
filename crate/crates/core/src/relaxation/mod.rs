//! Coarse-grained H-function and the relaxation experiment.
//!
//! `H̄ = Σ P̄ ln(P̄/|Ψ|²‾)` over cells, with `P̄` from particle counts and
//! `|Ψ|²‾` from Gauss–Legendre quadrature of `|Ψ|²` over each cell.
//!
//! The plug-in estimator is biased upward by roughly `(K − 1)/(2n)` for `K`
//! occupied cells and `n` particles; [`HTimeSeries::bias_bound`] records it.

mod fit;

pub use fit::{fit_exponential, ExpFit};

use serde::Serialize;
use thiserror::Error;

use crate::pilotwave::{propagate_ensemble, sample_ensemble, DistributionSpec, Ensemble, PilotwaveError, Tolerances};
use crate::scalar::{sq, Real};
use crate::wavefield::{GuidingField, WavefieldError};

/// Points per axis of the per-cell Gauss–Legendre rule.
const QUAD_ORDER: usize = 6;

/// Coarse-grained `|Ψ|²` below this floor counts as zero.
pub const QUADRATURE_FLOOR: f64 = 1e-14;

/// Fraction of `H̄₀` below which the exponential fit window closes.
pub const FIT_WINDOW_FRACTION: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RelaxationError {
    #[error("cell layouts differ: {0} vs {1}")]
    LayoutMismatch(usize, usize),
    #[error("cell {cell} has P̄ = {p:e} but |Ψ|²‾ = {q:e}")]
    UnsupportedCell { cell: usize, p: f64, q: f64 },
    #[error("invalid coarse graining: {0}")]
    InvalidGraining(String),
    #[error("ensemble is empty")]
    EmptyEnsemble,
    #[error("τ estimate needs positive inputs")]
    NonPositive,
    #[error(transparent)]
    Pilotwave(#[from] PilotwaveError),
    #[error(transparent)]
    Field(#[from] WavefieldError),
}

/// Regular array of cells covering a rectangular domain exactly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoarseGraining<T> {
    pub lower: [T; 2],
    pub upper: [T; 2],
    pub cells: [usize; 2],
    pub dims: usize,
}

impl<T: Real> CoarseGraining<T> {
    pub fn new(lower: [T; 2], upper: [T; 2], cells: [usize; 2], dims: usize) -> Result<Self, RelaxationError> {
        if dims != 1 && dims != 2 {
            return Err(RelaxationError::InvalidGraining(format!("dimension {dims}")));
        }
        for k in 0..dims {
            if cells[k] == 0 || !(upper[k] > lower[k]) {
                return Err(RelaxationError::InvalidGraining("cells must be >= 1 and bounds increasing".into()));
            }
        }
        let mut cells = cells;
        if dims == 1 {
            cells[1] = 1;
        }
        Ok(Self { lower, upper, cells, dims })
    }

    /// Graining that tiles the domain of `field`.
    pub fn for_field<F: GuidingField<T> + ?Sized>(field: &F, cells: [usize; 2]) -> Result<Self, RelaxationError> {
        let d = field.domain();
        Self::new(d.lower, d.upper, cells, field.dims())
    }

    pub fn n_cells(&self) -> usize {
        self.cells[0] * self.cells[1]
    }

    pub fn cell_size(&self) -> [T; 2] {
        let mut h = [T::one(); 2];
        for k in 0..self.dims {
            h[k] = (self.upper[k] - self.lower[k]) / T::of_usize(self.cells[k]);
        }
        h
    }

    /// Coarse-graining length ε: the largest cell side.
    pub fn epsilon(&self) -> T {
        let h = self.cell_size();
        if self.dims == 2 {
            h[0].max(h[1])
        } else {
            h[0]
        }
    }

    /// Cell containing `x`; points on the upper boundary go to the last cell.
    pub fn cell_of(&self, x: &[T; 2]) -> Option<usize> {
        let h = self.cell_size();
        let mut idx = 0;
        for k in 0..self.dims {
            if !(x[k] >= self.lower[k] && x[k] <= self.upper[k]) {
                return None;
            }
            let i = ((x[k] - self.lower[k]) / h[k]).floor().to_usize()?.min(self.cells[k] - 1);
            idx = idx * self.cells[k] + i;
        }
        Some(idx)
    }

    fn cell_lower(&self, cell: usize) -> [T; 2] {
        let h = self.cell_size();
        let ij = [cell / self.cells[1], cell % self.cells[1]];
        let mut lo = self.lower;
        for k in 0..self.dims {
            lo[k] = self.lower[k] + h[k] * T::of_usize(ij[k]);
        }
        lo
    }
}

/// Gauss–Legendre nodes and weights on `[−1, 1]` by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            let dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                let (mut q0, mut q1) = (1.0, 0.0);
                for j in 0..n {
                    let q2 = q1;
                    q1 = q0;
                    q0 = ((2 * j + 1) as f64 * z * q1 - j as f64 * q2) / (j + 1) as f64;
                }
                let dq = n as f64 * (z * q0 - q1) / (z * z - 1.0);
                x[i] = -z;
                w[i] = 2.0 / ((1.0 - z * z) * dq * dq);
                break;
            }
        }
    }
    (x, w)
}

/// `∫ g` over each cell by tensor Gauss–Legendre quadrature.
pub fn cell_integrals<T: Real, G: Fn(&[T; 2]) -> T + Sync>(graining: &CoarseGraining<T>, g: G) -> Vec<T> {
    use rayon::prelude::*;
    let (gx, gw) = gauss_legendre(QUAD_ORDER);
    let h = graining.cell_size();
    let half = [h[0] / T::lit(2.0), h[1] / T::lit(2.0)];
    let ny = if graining.dims == 2 { QUAD_ORDER } else { 1 };
    (0..graining.n_cells())
        .into_par_iter()
        .map(|c| {
            let lo = graining.cell_lower(c);
            let mut acc = T::zero();
            for a in 0..QUAD_ORDER {
                let x0 = lo[0] + half[0] * T::lit(1.0 + gx[a]);
                for b in 0..ny {
                    let (x1, wb) = if graining.dims == 2 {
                        (lo[1] + half[1] * T::lit(1.0 + gx[b]), T::lit(gw[b]) * half[1])
                    } else {
                        (T::zero(), T::one())
                    };
                    acc += T::lit(gw[a]) * half[0] * wb * g(&[x0, x1]);
                }
            }
            acc
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoarseGrained<T> {
    /// Weighted particle fraction per cell.
    pub p_bar: Vec<T>,
    /// Quadrature `∫|Ψ|²` per cell, normalized to sum 1.
    pub psi_bar: Vec<T>,
    /// Number of particles counted.
    pub n: usize,
}

/// `(P̄, |Ψ|²‾)` per cell at the ensemble's current time.
pub fn coarse_grain<T: Real, F: GuidingField<T> + ?Sized>(
    ensemble: &Ensemble<T>,
    field: &F,
    graining: &CoarseGraining<T>,
) -> Result<CoarseGrained<T>, RelaxationError> {
    if ensemble.is_empty() {
        return Err(RelaxationError::EmptyEnsemble);
    }
    let t = ensemble.time;
    let mut q = cell_integrals(graining, |x| field.density(x, t));
    normalize(&mut q);
    Ok(CoarseGrained { p_bar: histogram(ensemble, graining), psi_bar: q, n: ensemble.len() })
}

/// Weighted particle histogram; samples outside the graining are dropped.
pub fn histogram<T: Real>(ensemble: &Ensemble<T>, graining: &CoarseGraining<T>) -> Vec<T> {
    let mut p = vec![T::zero(); graining.n_cells()];
    for (x, w) in ensemble.positions.iter().zip(&ensemble.weights) {
        if let Some(c) = graining.cell_of(x) {
            p[c] += *w;
        }
    }
    normalize(&mut p);
    p
}

fn normalize<T: Real>(v: &mut [T]) {
    let s: T = v.iter().copied().sum();
    if s > T::zero() {
        for x in v.iter_mut() {
            *x /= s;
        }
    }
}

/// `H̄ = Σ P̄ ln(P̄/|Ψ|²‾)` with `0 ln 0 = 0`.
pub fn h_function<T: Real>(p_bar: &[T], psi_bar: &[T]) -> Result<T, RelaxationError> {
    if p_bar.len() != psi_bar.len() {
        return Err(RelaxationError::LayoutMismatch(p_bar.len(), psi_bar.len()));
    }
    let floor = T::lit(QUADRATURE_FLOOR);
    let mut h = T::zero();
    for (c, (&p, &q)) in p_bar.iter().zip(psi_bar).enumerate() {
        if p > T::zero() {
            if !(q > floor) {
                return Err(RelaxationError::UnsupportedCell { cell: c, p: p.to_f64_lossy(), q: q.to_f64_lossy() });
            }
            h += p * (p / q).ln();
        }
    }
    Ok(h)
}

/// Delta-method standard error of the plug-in `H̄` from `n` particles.
pub fn h_sigma<T: Real>(p_bar: &[T], psi_bar: &[T], n: usize) -> T {
    let (mut m1, mut m2) = (T::zero(), T::zero());
    for (&p, &q) in p_bar.iter().zip(psi_bar) {
        if p > T::zero() && q > T::zero() {
            let l = (p / q).ln();
            m1 += p * l;
            m2 += p * l * l;
        }
    }
    ((m2 - m1 * m1).max(T::zero()) / T::of_usize(n.max(1))).sqrt()
}

/// Sums blocks of `factor × factor` cells (2D) or `factor` cells (1D).
pub fn coarsen<T: Real>(values: &[T], cells: [usize; 2], dims: usize, factor: usize) -> Vec<T> {
    let fy = if dims == 2 { factor } else { 1 };
    let (n0, n1) = (cells[0] / factor, cells[1] / fy);
    let mut out = vec![T::zero(); n0 * n1];
    for i in 0..cells[0] {
        for j in 0..cells[1] {
            out[(i / factor) * n1 + j / fy] += values[i * cells[1] + j];
        }
    }
    out
}

/// Pearson goodness-of-fit of an ensemble against `|Ψ|²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

impl ChiSquareTest {
    pub fn passes(&self, significance: f64) -> bool {
        self.p_value > significance
    }
}

/// Cells expected to hold fewer particles than this are pooled into one bin.
const MIN_EXPECTED: f64 = 5.0;

/// Chi-square test of the ensemble's cell counts against the quadrature of
/// `|Ψ|²` at the ensemble time. Sparse cells are pooled.
pub fn born_chi_square<T: Real, F: GuidingField<T> + ?Sized>(
    ensemble: &Ensemble<T>,
    field: &F,
    graining: &CoarseGraining<T>,
) -> Result<ChiSquareTest, RelaxationError> {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    if ensemble.is_empty() {
        return Err(RelaxationError::EmptyEnsemble);
    }
    let t = ensemble.time;
    let mut q = cell_integrals(graining, |x| field.density(x, t));
    normalize(&mut q);
    let mut counts = vec![0usize; graining.n_cells()];
    let mut outside = 0usize;
    for x in &ensemble.positions {
        match graining.cell_of(x) {
            Some(c) => counts[c] += 1,
            None => outside += 1,
        }
    }
    let n = (ensemble.len() - outside) as f64;
    let (mut stat, mut bins) = (0.0, 0usize);
    let (mut pooled_o, mut pooled_e) = (0.0, 0.0);
    for (&o, &p) in counts.iter().zip(&q) {
        let e = n * p.to_f64_lossy();
        if e >= MIN_EXPECTED {
            stat += (o as f64 - e).powi(2) / e;
            bins += 1;
        } else {
            pooled_o += o as f64;
            pooled_e += e;
        }
    }
    if pooled_e > 0.0 {
        stat += (pooled_o - pooled_e).powi(2) / pooled_e;
        bins += 1;
    } else if pooled_o > 0.0 {
        stat = f64::INFINITY;
    }
    let dof = bins.saturating_sub(1).max(1);
    let dist = ChiSquared::new(dof as f64).map_err(|e| RelaxationError::InvalidGraining(e.to_string()))?;
    let p_value = if stat.is_finite() { 1.0 - dist.cdf(stat) } else { 0.0 };
    Ok(ChiSquareTest { statistic: stat, dof, p_value })
}

/// Order-of-magnitude relaxation time `τ ≈ ħ² / (ε m^{1/2} ΔE^{3/2})`.
pub fn tau_estimate<T: Real>(delta_e: T, mass: T, epsilon: T, hbar: T) -> Result<T, RelaxationError> {
    if !(delta_e > T::zero() && mass > T::zero() && epsilon > T::zero() && hbar > T::zero()) {
        return Err(RelaxationError::NonPositive);
    }
    Ok(sq(hbar) / (epsilon * mass.sqrt() * delta_e.powf(T::lit(1.5))))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HTimeSeries<T> {
    pub times: Vec<T>,
    pub h: Vec<T>,
    pub sigma: Vec<T>,
    pub fit: Option<ExpFit<T>>,
    /// Approximate upward bias `(K − 1)/(2n)` of the plug-in estimator.
    pub bias_bound: T,
    /// `H̄(t_k) ≤ H̄(0) + 3σ` at every probe time.
    pub within_noise_of_h0: bool,
    pub failed_trajectories: usize,
    pub max_f_drift: Option<T>,
    /// Goodness of fit of the ensemble against `|Ψ|²` at each probe time.
    pub born_test: Vec<ChiSquareTest>,
}

#[derive(Clone, Debug)]
pub struct RelaxationConfig<T> {
    pub noneq: DistributionSpec<T>,
    pub cells: [usize; 2],
    /// Probe times, increasing, starting at the ensemble time.
    pub times: Vec<T>,
    pub n_samples: usize,
    pub seed: u64,
    pub tolerances: Tolerances<T>,
}

/// Samples `noneq`, carries it along the flow of `field` through
/// `config.times` and records `H̄(t)` with an exponential fit.
pub fn relaxation_experiment<T: Real, F: GuidingField<T> + ?Sized>(
    field: &F,
    config: &RelaxationConfig<T>,
) -> Result<HTimeSeries<T>, RelaxationError> {
    let graining = CoarseGraining::for_field(field, config.cells)?;
    let t0 = config.times.first().copied().unwrap_or(T::zero());
    let mut ens = sample_ensemble(&config.noneq, field, t0, config.n_samples, config.seed)?;
    let mut times = Vec::new();
    let mut hs = Vec::new();
    let mut sigmas = Vec::new();
    let mut drift: Option<T> = None;
    let mut born_test = Vec::new();
    for &t in &config.times {
        if t != ens.time {
            let (next, rep) = propagate_ensemble(&ens, field, t, &config.tolerances)?;
            ens = next;
            if let Some(d) = rep.max_f_drift {
                drift = Some(drift.map_or(d, |m: T| m.max(d)));
            }
        }
        let cg = coarse_grain(&ens, field, &graining)?;
        times.push(t);
        hs.push(h_function(&cg.p_bar, &cg.psi_bar)?);
        sigmas.push(h_sigma(&cg.p_bar, &cg.psi_bar, cg.n));
        born_test.push(born_chi_square(&ens, field, &graining)?);
    }
    let three = T::lit(3.0);
    let within = hs.iter().zip(&sigmas).all(|(&h, &s)| h <= hs[0] + three * (sq(s) + sq(sigmas[0])).sqrt());
    let fit = fit_exponential(&times, &hs, T::lit(FIT_WINDOW_FRACTION));
    Ok(HTimeSeries {
        times,
        h: hs,
        sigma: sigmas,
        fit,
        bias_bound: T::of_usize(graining.n_cells().saturating_sub(1)) / (T::lit(2.0) * T::of_usize(config.n_samples)),
        within_noise_of_h0: within,
        failed_trajectories: ens.failed,
        max_f_drift: drift,
        born_test,
    })
}

/// Mean over cells of the within-cell variance of `Ẋ₀·∇f₀`, with
/// `f₀ = P₀/|Ψ₀|²` supplied as a closure. Reported as a diagnostic only.
pub fn strict_decrease_diagnostic<T: Real, F: GuidingField<T> + ?Sized, G: Fn(&[T; 2]) -> T + Sync>(
    field: &F,
    f0: G,
    graining: &CoarseGraining<T>,
    t0: T,
) -> T {
    let h = graining.epsilon() * T::lit(1e-4);
    let dims = graining.dims;
    let integrand = |x: &[T; 2]| -> T {
        let v = field.sample(x, t0).velocity;
        let mut s = T::zero();
        for k in 0..dims {
            let mut xp = *x;
            let mut xm = *x;
            xp[k] += h;
            xm[k] -= h;
            s += v[k] * (f0(&xp) - f0(&xm)) / (T::lit(2.0) * h);
        }
        s
    };
    let m1 = cell_integrals(graining, integrand);
    let m2 = cell_integrals(graining, |x| sq(integrand(x)));
    let cs = graining.cell_size();
    let vol = if dims == 2 { cs[0] * cs[1] } else { cs[0] };
    let n = T::of_usize(graining.n_cells());
    m1.iter().zip(&m2).map(|(&a, &b)| (b / vol - sq(a / vol)).max(T::zero())).sum::<T>() / n
}
