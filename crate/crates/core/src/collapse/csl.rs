use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use super::CollapseError;
use crate::linalg::{norm_sqr, CMatrix};
use crate::rng;
use crate::scalar::{sq, Real};

/// Mutually commuting Hermitian collapse operators `Â^r` and an optional
/// Hamiltonian, together with their joint eigenbasis.
#[derive(Clone, Debug)]
pub struct CollapseOperatorSet<T> {
    operators: Vec<CMatrix<T>>,
    hamiltonian: Option<CMatrix<T>>,
    basis: CMatrix<T>,
    /// `eigenvalues[r][n]`: eigenvalue of `Â^r` on joint eigenvector `n`.
    eigenvalues: Vec<Vec<T>>,
    hamiltonian_norm: T,
}

pub const HERMITICITY_TOLERANCE: f64 = 1e-12;
pub const COMMUTATOR_TOLERANCE: f64 = 1e-10;

impl<T: Real> CollapseOperatorSet<T> {
    pub fn new(operators: Vec<CMatrix<T>>, hamiltonian: Option<CMatrix<T>>) -> Result<Self, CollapseError> {
        let dim = operators.first().map(|a| a.dim()).ok_or(CollapseError::NoOperators)?;
        for (r, a) in operators.iter().chain(hamiltonian.iter()).enumerate() {
            if a.dim() != dim {
                return Err(CollapseError::DimensionMismatch { expected: dim, found: a.dim() });
            }
            let scale = a.max_abs().max(T::one());
            if a.hermiticity_defect() > T::lit(HERMITICITY_TOLERANCE) * scale {
                return Err(CollapseError::NotHermitian(r));
            }
        }
        for i in 0..operators.len() {
            for j in i + 1..operators.len() {
                let scale = (operators[i].max_abs() * operators[j].max_abs()).max(T::one());
                if operators[i].commutator(&operators[j]).max_abs() > T::lit(COMMUTATOR_TOLERANCE) * scale {
                    return Err(CollapseError::NotCommuting(i, j));
                }
            }
        }
        // Generic combination: its eigenvectors are joint eigenvectors.
        let mut mix = CMatrix::zeros(dim);
        for (r, a) in operators.iter().enumerate() {
            let c = T::one() + T::lit(std::f64::consts::SQRT_2 - 1.0) * T::of_usize(r) + T::lit(0.1234) * sq(T::of_usize(r));
            mix = &mix + &a.scale_real(c);
        }
        let (_, raw) = mix.hermitian_eigen();
        // Order eigenvectors by their dominant component and make that component
        // real and positive, so a diagonal operator keeps the original basis.
        let dominant =
            |col: usize| (0..dim).fold(0, |b, i| if raw[(i, col)].norm() > raw[(b, col)].norm() + T::lit(1e-12) { i } else { b });
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by_key(|&col| dominant(col));
        let mut basis = CMatrix::zeros(dim);
        for (new_col, &col) in order.iter().enumerate() {
            let lead = raw[(dominant(col), col)];
            let phase = lead.conj() / lead.norm();
            for i in 0..dim {
                basis[(i, new_col)] = raw[(i, col)] * phase;
            }
        }
        let eigenvalues = operators
            .iter()
            .map(|a| {
                (0..dim)
                    .map(|n| {
                        let v: Vec<Complex<T>> = (0..dim).map(|i| basis[(i, n)]).collect();
                        let av = a.apply(&v);
                        crate::linalg::inner(&v, &av).re
                    })
                    .collect()
            })
            .collect();
        let hamiltonian_norm = hamiltonian
            .as_ref()
            .map(|h| {
                let (e, _) = h.hermitian_eigen();
                e.iter().fold(T::zero(), |m, x| m.max(x.abs()))
            })
            .unwrap_or(T::zero());
        Ok(Self { operators, hamiltonian, basis, eigenvalues, hamiltonian_norm })
    }

    /// Single diagonal operator with the given spectrum and no Hamiltonian.
    pub fn diagonal(spectrum: &[T]) -> Self {
        Self::new(vec![CMatrix::from_diagonal(spectrum)], None).expect("diagonal operator is valid")
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn operators(&self) -> &[CMatrix<T>] {
        &self.operators
    }

    pub fn hamiltonian(&self) -> Option<&CMatrix<T>> {
        self.hamiltonian.as_ref()
    }

    /// Columns are the joint eigenvectors, in collapse-basis order.
    pub fn basis(&self) -> &CMatrix<T> {
        &self.basis
    }

    pub fn eigenvalues(&self) -> &[Vec<T>] {
        &self.eigenvalues
    }

    /// `Σ_r (max a^r − min a^r)²`
    pub fn spread_sqr(&self) -> T {
        self.eigenvalues
            .iter()
            .map(|a| {
                let hi = a.iter().copied().fold(T::neg_infinity(), T::max);
                let lo = a.iter().copied().fold(T::infinity(), T::min);
                sq(hi - lo)
            })
            .sum()
    }

    pub fn hamiltonian_norm(&self) -> T {
        self.hamiltonian_norm
    }

    /// Largest rate `λΔa² + ‖Ĥ‖` that a time step has to resolve.
    pub fn rate_scale(&self, lambda: T) -> T {
        lambda * self.spread_sqr() + self.hamiltonian_norm
    }

    /// `0.01/(λΔa² + ‖Ĥ‖)`
    pub fn default_dt(&self, lambda: T) -> T {
        let r = self.rate_scale(lambda);
        if r > T::zero() {
            T::lit(0.01) / r
        } else {
            T::lit(0.01)
        }
    }

    pub fn to_collapse_basis(&self, psi: &[Complex<T>]) -> Vec<Complex<T>> {
        self.basis.adjoint().apply(psi)
    }

    pub fn from_collapse_basis(&self, c: &[Complex<T>]) -> Vec<Complex<T>> {
        self.basis.apply(c)
    }
}

/// How the noise `w` is drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseScheme {
    /// Gaussian reference noise of variance `λ/dt`; each path carries the
    /// importance weight `P_t(w)` relative to the reference measure.
    Raw,
    /// Noise drawn from the physical measure `P_t(w)` directly.
    Cooked,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CslConfig<T> {
    pub lambda: T,
    pub dt: T,
    pub t_end: T,
    pub seed: u64,
    pub scheme: NoiseScheme,
    /// Store the state every this many steps (the final step is always kept).
    pub record_every: usize,
    pub record_noise: bool,
    /// Constant added to every noise sample. Only for fault-injection tests
    /// of the martingale diagnostics; keep at zero.
    pub noise_bias: T,
}

impl<T: Real> CslConfig<T> {
    pub fn new(lambda: T, dt: T, t_end: T, seed: u64, scheme: NoiseScheme) -> Self {
        Self { lambda, dt, t_end, seed, scheme, record_every: 1, record_noise: false, noise_bias: T::zero() }
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt - T::lit(1e-9)).ceil().to_usize().unwrap_or(0).max(1)
    }

    /// Step actually used, `t_end / steps`.
    pub fn effective_dt(&self) -> T {
        self.t_end / T::of_usize(self.steps())
    }
}

/// One sampled collapse path.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CollapseRun<T> {
    pub times: Vec<T>,
    /// Normalized state at each recorded time, in the original basis.
    pub states: Vec<Vec<Complex<T>>>,
    /// Squared amplitudes `x_n(t)` in the collapse basis.
    pub x: Vec<Vec<T>>,
    /// `∫ w^r dt` up to each recorded time.
    pub noise_integral: Vec<Vec<T>>,
    /// Per-step noise `w^r(t_j)`, when requested.
    pub noise: Option<Vec<Vec<T>>>,
    /// `ln` of the importance weight (zero for cooked paths).
    pub log_weight: T,
    pub scheme: NoiseScheme,
    pub lambda: T,
    pub dt: T,
    pub run_index: u64,
}

impl<T: Real> CollapseRun<T> {
    pub fn final_x(&self) -> &[T] {
        self.x.last().expect("at least one record")
    }

    /// Index of the largest final squared amplitude.
    pub fn dominant(&self) -> usize {
        let x = self.final_x();
        (0..x.len()).fold(0, |b, i| if x[i] > x[b] { i } else { b })
    }

    /// The outcome, if one amplitude exceeds `threshold`.
    pub fn outcome(&self, threshold: T) -> Option<usize> {
        let n = self.dominant();
        (self.final_x()[n] > threshold).then_some(n)
    }
}

fn normalize<T: Real>(c: &mut [Complex<T>]) -> T {
    let n2 = norm_sqr(c);
    let inv = T::one() / n2.sqrt();
    for z in c.iter_mut() {
        *z = *z * inv;
    }
    n2
}

fn check_inputs<T: Real>(ops: &CollapseOperatorSet<T>, psi0: &[Complex<T>], cfg: &CslConfig<T>) -> Result<(), CollapseError> {
    if psi0.len() != ops.dim() {
        return Err(CollapseError::DimensionMismatch { expected: ops.dim(), found: psi0.len() });
    }
    let n = norm_sqr(psi0);
    if (n - T::one()).abs() > T::lit(1e-10) {
        return Err(CollapseError::NotNormalized(n.to_f64_lossy()));
    }
    if !(cfg.lambda >= T::zero()) || !(cfg.dt > T::zero()) || !(cfg.t_end > T::zero()) {
        return Err(CollapseError::InvalidParameter("need lambda >= 0, dt > 0, t_end > 0".into()));
    }
    let dt = cfg.effective_dt();
    let product = dt * ops.rate_scale(cfg.lambda);
    if product > T::one() {
        return Err(CollapseError::DtTooLarge { dt: dt.to_f64_lossy(), limit: (dt / product).to_f64_lossy() });
    }
    Ok(())
}

struct Stepper<T> {
    half_unitary: Option<CMatrix<T>>,
}

impl<T: Real> Stepper<T> {
    fn new(ops: &CollapseOperatorSet<T>, dt: T) -> Self {
        let half_unitary = ops.hamiltonian().map(|h| {
            let b = ops.basis();
            let he = &(&b.adjoint() * h) * b;
            he.exp_hermitian(Complex::new(T::zero(), -dt / T::lit(2.0)))
        });
        Self { half_unitary }
    }

    fn unitary(&self, c: &mut Vec<Complex<T>>) {
        if let Some(u) = &self.half_unitary {
            *c = u.apply(c);
        }
    }
}

/// Samples one collapse path for work item `run_index`.
pub fn simulate_csl<T: Real>(
    ops: &CollapseOperatorSet<T>,
    psi0: &[Complex<T>],
    cfg: &CslConfig<T>,
    run_index: u64,
) -> Result<CollapseRun<T>, CollapseError> {
    check_inputs(ops, psi0, cfg)?;
    run_path(ops, psi0, cfg, run_index, &Stepper::new(ops, cfg.effective_dt()))
}

fn run_path<T: Real>(
    ops: &CollapseOperatorSet<T>,
    psi0: &[Complex<T>],
    cfg: &CslConfig<T>,
    run_index: u64,
    stepper: &Stepper<T>,
) -> Result<CollapseRun<T>, CollapseError> {
    let steps = cfg.steps();
    let dt = cfg.effective_dt();
    let lambda = cfg.lambda;
    let n_ops = ops.eigenvalues().len();
    let dim = ops.dim();
    let a = ops.eigenvalues();
    let sd = if lambda > T::zero() { (lambda / dt).sqrt() } else { T::zero() };
    let two = T::lit(2.0);
    let four_lambda = T::lit(4.0) * lambda;
    let mut rng = rng::stream(cfg.seed, run_index);

    let mut c = ops.to_collapse_basis(psi0);
    normalize(&mut c);
    let mut log_weight = T::zero();
    let mut integral = vec![T::zero(); n_ops];
    let mut w = vec![T::zero(); n_ops];
    let mut expo = vec![T::zero(); dim];
    let mut noise: Option<Vec<Vec<T>>> = cfg.record_noise.then(|| vec![Vec::with_capacity(steps); n_ops]);

    let record_every = cfg.record_every.max(1);
    let mut run = CollapseRun {
        times: Vec::new(),
        states: Vec::new(),
        x: Vec::new(),
        noise_integral: Vec::new(),
        noise: None,
        log_weight: T::zero(),
        scheme: cfg.scheme,
        lambda,
        dt,
        run_index,
    };
    let record = |run: &mut CollapseRun<T>, t: T, c: &[Complex<T>], integral: &[T]| {
        run.times.push(t);
        run.states.push(ops.from_collapse_basis(c));
        run.x.push(c.iter().map(|z| z.norm_sqr()).collect());
        run.noise_integral.push(integral.to_vec());
    };
    record(&mut run, T::zero(), &c, &integral);

    for step in 1..=steps {
        stepper.unitary(&mut c);
        if lambda > T::zero() {
            match cfg.scheme {
                NoiseScheme::Cooked => {
                    let u = T::lit(rng.random::<f64>());
                    let mut acc = T::zero();
                    let mut pick = dim - 1;
                    for (n, z) in c.iter().enumerate() {
                        acc += z.norm_sqr();
                        if u < acc {
                            pick = n;
                            break;
                        }
                    }
                    for r in 0..n_ops {
                        let z: f64 = rng.sample(StandardNormal);
                        w[r] = two * lambda * a[r][pick] + sd * T::lit(z) + cfg.noise_bias;
                    }
                    for n in 0..dim {
                        expo[n] = -(0..n_ops).map(|r| sq(w[r] - two * lambda * a[r][n])).sum::<T>() * dt / four_lambda;
                    }
                }
                NoiseScheme::Raw => {
                    for wr in w.iter_mut() {
                        let z: f64 = rng.sample(StandardNormal);
                        *wr = sd * T::lit(z) + cfg.noise_bias;
                    }
                    for n in 0..dim {
                        expo[n] = (0..n_ops).map(|r| w[r] * a[r][n] - lambda * sq(a[r][n])).sum::<T>() * dt;
                    }
                }
            }
            let top = expo.iter().copied().fold(T::neg_infinity(), T::max);
            for (z, e) in c.iter_mut().zip(&expo) {
                *z = *z * (*e - top).exp();
            }
            let n2 = normalize(&mut c);
            if cfg.scheme == NoiseScheme::Raw {
                log_weight += two * top + n2.ln();
                if !log_weight.is_finite() || log_weight < T::min_positive_value().ln() {
                    return Err(CollapseError::WeightUnderflow { run: run_index });
                }
            }
            for r in 0..n_ops {
                integral[r] += w[r] * dt;
                if let Some(nz) = noise.as_mut() {
                    nz[r].push(w[r]);
                }
            }
        }
        stepper.unitary(&mut c);
        normalize(&mut c);
        if step % record_every == 0 || step == steps {
            record(&mut run, T::of_usize(step) * dt, &c, &integral);
        }
    }
    run.noise = noise;
    run.log_weight = log_weight;
    Ok(run)
}

/// Independent runs `0..n_runs`; raw-scheme runs whose weight underflows are
/// dropped and counted.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CslEnsemble<T> {
    pub runs: Vec<CollapseRun<T>>,
    pub excluded: usize,
}

pub fn simulate_csl_ensemble<T: Real>(
    ops: &CollapseOperatorSet<T>,
    psi0: &[Complex<T>],
    cfg: &CslConfig<T>,
    n_runs: usize,
) -> Result<CslEnsemble<T>, CollapseError> {
    check_inputs(ops, psi0, cfg)?;
    let stepper = Stepper::new(ops, cfg.effective_dt());
    let results: Vec<_> = (0..n_runs as u64).into_par_iter().map(|i| run_path(ops, psi0, cfg, i, &stepper)).collect();
    let mut runs = Vec::with_capacity(n_runs);
    let mut excluded = 0;
    for r in results {
        match r {
            Ok(run) => runs.push(run),
            Err(CollapseError::WeightUnderflow { .. }) => excluded += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(CslEnsemble { runs, excluded })
}

/// Weighted sample mean and its standard error. `weights = None` means equal
/// weights; otherwise the self-normalized estimator and its delta-method error.
pub fn weighted_mean<T: Real>(values: &[T], weights: Option<&[T]>) -> (T, T) {
    let n = values.len();
    if n == 0 {
        return (T::nan(), T::nan());
    }
    let nf = T::of_usize(n);
    match weights {
        None => {
            let mean = values.iter().copied().sum::<T>() / nf;
            let var = if n > 1 { values.iter().map(|v| sq(*v - mean)).sum::<T>() / (nf - T::one()) } else { T::zero() };
            (mean, (var / nf).sqrt())
        }
        Some(w) => {
            let sw: T = w.iter().copied().sum();
            let mean = values.iter().zip(w).map(|(v, w)| *v * *w).sum::<T>() / sw;
            let var = values.iter().zip(w).map(|(v, w)| sq(*w * (*v - mean))).sum::<T>() / sq(sw);
            (mean, (var * nf / (nf - T::one()).max(T::one())).sqrt())
        }
    }
}

impl<T: Real> CslEnsemble<T> {
    /// Importance weights scaled to mean one, or `None` for cooked runs.
    pub fn weights(&self) -> Option<Vec<T>> {
        if self.runs.iter().all(|r| r.scheme == NoiseScheme::Cooked) {
            return None;
        }
        let top = self.runs.iter().map(|r| r.log_weight).fold(T::neg_infinity(), T::max);
        let w: Vec<T> = self.runs.iter().map(|r| (r.log_weight - top).exp()).collect();
        let mean = w.iter().copied().sum::<T>() / T::of_usize(w.len());
        Some(w.into_iter().map(|x| x / mean).collect())
    }

    /// Kish effective sample size.
    pub fn effective_size(&self) -> T {
        match self.weights() {
            None => T::of_usize(self.runs.len()),
            Some(w) => sq(w.iter().copied().sum::<T>()) / w.iter().map(|x| sq(*x)).sum::<T>(),
        }
    }

    /// Frequency (and standard error) of each dominant final amplitude.
    pub fn outcome_frequencies(&self) -> Vec<(T, T)> {
        let dim = self.runs.first().map_or(0, |r| r.final_x().len());
        let w = self.weights();
        let dominant: Vec<usize> = self.runs.iter().map(|r| r.dominant()).collect();
        (0..dim)
            .map(|n| {
                let ind: Vec<T> = dominant.iter().map(|&d| if d == n { T::one() } else { T::zero() }).collect();
                weighted_mean(&ind, w.as_deref())
            })
            .collect()
    }

    /// Ensemble average of `c_i c_j*` in the collapse basis at record `k`.
    pub fn mean_coherence(&self, ops: &CollapseOperatorSet<T>, k: usize, i: usize, j: usize) -> (Complex<T>, Complex<T>) {
        let w = self.weights();
        let prods: Vec<Complex<T>> = self
            .runs
            .iter()
            .map(|r| {
                let c = ops.to_collapse_basis(&r.states[k]);
                c[i] * c[j].conj()
            })
            .collect();
        let re: Vec<T> = prods.iter().map(|z| z.re).collect();
        let im: Vec<T> = prods.iter().map(|z| z.im).collect();
        let (mr, sr) = weighted_mean(&re, w.as_deref());
        let (mi, si) = weighted_mean(&im, w.as_deref());
        (Complex::new(mr, mi), Complex::new(sr, si))
    }

    /// Ensemble-averaged density matrix at record `k`, original basis.
    pub fn mean_density_matrix(&self, k: usize) -> CMatrix<T> {
        let dim = self.runs[0].states[k].len();
        let w = self.weights();
        let mut rho = CMatrix::zeros(dim);
        let mut total = T::zero();
        for (idx, r) in self.runs.iter().enumerate() {
            let wi = w.as_ref().map_or(T::one(), |w| w[idx]);
            total += wi;
            let psi = &r.states[k];
            for a in 0..dim {
                for b in 0..dim {
                    rho[(a, b)] = rho[(a, b)] + psi[a] * psi[b].conj() * wi;
                }
            }
        }
        rho.scale_real(T::one() / total)
    }
}
