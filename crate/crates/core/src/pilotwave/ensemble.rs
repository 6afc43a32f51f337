use rand::Rng;
use rayon::prelude::*;

use super::{integrate_trajectory, PilotwaveError, Tolerances};
use crate::rng;
use crate::scalar::{sq, Real};
use crate::wavefield::{DomainKind, GuidingField};

/// Largest tolerated fraction of failed trajectories in a propagation.
pub const MAX_FAILURE_FRACTION: f64 = 1e-3;

/// Rejection-sampling attempts per sample before giving up.
const MAX_ATTEMPTS: usize = 1_000_000;

/// Piecewise-constant density on a rectangular array of cells.
#[derive(Clone, Debug, PartialEq)]
pub struct HistogramDensity<T> {
    pub lower: [T; 2],
    pub upper: [T; 2],
    pub cells: [usize; 2],
    /// Unnormalized nonnegative cell weights, row-major.
    pub weights: Vec<T>,
}

impl<T: Real> HistogramDensity<T> {
    fn cell_size(&self, dims: usize) -> [T; 2] {
        let mut h = [T::one(); 2];
        for k in 0..dims {
            h[k] = (self.upper[k] - self.lower[k]) / T::of_usize(self.cells[k]);
        }
        h
    }

    fn total(&self) -> T {
        self.weights.iter().copied().sum()
    }

    pub fn density_at(&self, x: &[T; 2], dims: usize) -> T {
        let h = self.cell_size(dims);
        let mut idx = 0;
        for k in 0..dims {
            if x[k] < self.lower[k] || x[k] >= self.upper[k] {
                return T::zero();
            }
            let i = ((x[k] - self.lower[k]) / h[k]).floor().to_usize().unwrap_or(0).min(self.cells[k] - 1);
            idx = idx * self.cells[k] + i;
        }
        let vol = h[0] * if dims == 2 { h[1] } else { T::one() };
        self.weights[idx] / (self.total() * vol)
    }
}

/// Initial distribution `P(X, t₀)` of an ensemble.
#[derive(Clone, Debug, PartialEq)]
pub enum DistributionSpec<T> {
    /// `P = |Ψ|²`.
    Equilibrium,
    /// `P = |φ_n|²` for the box eigenmode `n` of the field's box domain.
    BoxMode(Vec<u32>),
    Histogram(HistogramDensity<T>),
}

impl<T: Real> DistributionSpec<T> {
    pub fn describe(&self) -> String {
        match self {
            Self::Equilibrium => "equilibrium".into(),
            Self::BoxMode(n) => format!("box-mode {n:?}"),
            Self::Histogram(h) => format!("histogram {}x{}", h.cells[0], h.cells[1]),
        }
    }
}

/// Equal-weight samples of the hidden configuration with their density
/// ratios `f = P/|Ψ|²` fixed at the generating time.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble<T> {
    pub dims: usize,
    pub time: T,
    pub positions: Vec<[T; 2]>,
    pub weights: Vec<T>,
    pub f_labels: Vec<T>,
    /// Index of each sample in the originally generated ensemble.
    pub ids: Vec<usize>,
    /// `|Ψ|²` at each sample's generating point.
    pub density0: Vec<T>,
    /// Accumulated `ln J` of the flow since generation.
    pub log_jacobian: Vec<T>,
    pub distribution: String,
    pub seed: u64,
    /// Trajectories excluded so far.
    pub failed: usize,
}

impl<T: Real> Ensemble<T> {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropagationReport<T> {
    pub failed: usize,
    pub total: usize,
    /// Largest `|f(t)/f(t₀) − 1|` over samples; `None` without `∇·v`.
    pub max_f_drift: Option<T>,
    pub node_encounters: usize,
    pub steps: usize,
    pub rejected: usize,
}

fn uniform_in<T: Real, R: Rng>(rng: &mut R, lower: &[T; 2], upper: &[T; 2], dims: usize) -> [T; 2] {
    let mut x = [T::zero(); 2];
    for k in 0..dims {
        let u: f64 = rng.random();
        x[k] = lower[k] + (upper[k] - lower[k]) * T::lit(u);
    }
    x
}

/// Draws `n` reproducible samples from `spec` relative to `field` at `t0`.
pub fn sample_ensemble<T: Real, F: GuidingField<T> + ?Sized>(
    spec: &DistributionSpec<T>,
    field: &F,
    t0: T,
    n: usize,
    seed: u64,
) -> Result<Ensemble<T>, PilotwaveError> {
    if n == 0 {
        return Err(PilotwaveError::EmptyEnsemble);
    }
    let dims = field.dims();
    let domain = field.domain();
    if domain.kind == DomainKind::Unbounded {
        return Err(PilotwaveError::Unsupported("ensemble sampling needs a bounded domain"));
    }
    let threshold = field.node_threshold();
    let eq_bound = match spec {
        DistributionSpec::Equilibrium => {
            Some(field.density_bound(t0).ok_or(PilotwaveError::Unsupported("field provides no density bound for equilibrium sampling"))?)
        }
        _ => None,
    };
    if let DistributionSpec::Histogram(h) = spec {
        if h.weights.len() != h.cells[0] * if dims == 2 { h.cells[1] } else { 1 } {
            return Err(PilotwaveError::NotAbsolutelyContinuous("histogram weight count does not match its cells".into()));
        }
        if h.weights.iter().any(|w| *w < T::zero()) || !(h.total() > T::zero()) {
            return Err(PilotwaveError::NotAbsolutelyContinuous("histogram weights must be nonnegative, not all zero".into()));
        }
        let overlap = (0..dims).all(|k| h.lower[k] < domain.upper[k] && h.upper[k] > domain.lower[k]);
        if !overlap {
            return Err(PilotwaveError::NotAbsolutelyContinuous("histogram support lies outside the domain".into()));
        }
    }
    if let DistributionSpec::BoxMode(idx) = spec {
        if domain.kind != DomainKind::Box || idx.len() != dims || idx.contains(&0) {
            return Err(PilotwaveError::Unsupported("box-mode distribution needs a box domain and matching indices >= 1"));
        }
    }

    let draw = |i: usize| -> Result<([T; 2], T, T), PilotwaveError> {
        let mut r = rng::stream(seed, i as u64);
        for _ in 0..MAX_ATTEMPTS {
            let (x, p) = match spec {
                DistributionSpec::Equilibrium => {
                    let x = uniform_in(&mut r, &domain.lower, &domain.upper, dims);
                    let rho = field.density(&x, t0);
                    let u: f64 = r.random();
                    if T::lit(u) * eq_bound.unwrap() >= rho {
                        continue;
                    }
                    (x, rho)
                }
                DistributionSpec::BoxMode(idx) => {
                    let mut x = [T::zero(); 2];
                    let mut p = T::one();
                    for k in 0..dims {
                        let l = domain.upper[k] - domain.lower[k];
                        let kn = T::PI() * T::of_usize(idx[k] as usize) / l;
                        loop {
                            let u: f64 = r.random();
                            let v: f64 = r.random();
                            let xk = l * T::lit(u);
                            let s2 = sq((kn * xk).sin());
                            if T::lit(v) < s2 {
                                x[k] = domain.lower[k] + xk;
                                p *= T::lit(2.0) / l * s2;
                                break;
                            }
                        }
                    }
                    (x, p)
                }
                DistributionSpec::Histogram(h) => {
                    let total = h.total();
                    let u: f64 = r.random();
                    let mut target = T::lit(u) * total;
                    let mut cell = h.weights.len() - 1;
                    for (c, w) in h.weights.iter().enumerate() {
                        if target < *w {
                            cell = c;
                            break;
                        }
                        target -= *w;
                    }
                    let size = h.cell_size(dims);
                    let cols = if dims == 2 { h.cells[1] } else { 1 };
                    let ij = [cell / cols, cell % cols];
                    let mut lo = [T::zero(); 2];
                    let mut hi = [T::zero(); 2];
                    for k in 0..dims {
                        lo[k] = h.lower[k] + size[k] * T::of_usize(ij[k]);
                        hi[k] = lo[k] + size[k];
                    }
                    let x = uniform_in(&mut r, &lo, &hi, dims);
                    if !domain.contains(&x, dims, T::zero()) {
                        continue;
                    }
                    (x, h.density_at(&x, dims))
                }
            };
            let rho = field.density(&x, t0);
            if rho < threshold {
                continue;
            }
            return Ok((x, p / rho, rho));
        }
        Err(PilotwaveError::NotAbsolutelyContinuous("rejection sampling found no admissible point".into()))
    };

    let drawn: Result<Vec<_>, _> = (0..n).into_par_iter().map(draw).collect();
    let drawn = drawn?;
    let w = T::one() / T::of_usize(n);
    Ok(Ensemble {
        dims,
        time: t0,
        positions: drawn.iter().map(|d| d.0).collect(),
        weights: vec![w; n],
        f_labels: drawn.iter().map(|d| d.1).collect(),
        ids: (0..n).collect(),
        density0: drawn.iter().map(|d| d.2).collect(),
        log_jacobian: vec![T::zero(); n],
        distribution: spec.describe(),
        seed,
        failed: 0,
    })
}

/// Moves every sample along its trajectory to time `t`.
///
/// Failed trajectories are excluded and counted, never resampled; the call
/// fails if more than [`MAX_FAILURE_FRACTION`] of them fail.
pub fn propagate_ensemble<T: Real, F: GuidingField<T> + ?Sized>(
    ensemble: &Ensemble<T>,
    field: &F,
    t: T,
    tol: &Tolerances<T>,
) -> Result<(Ensemble<T>, PropagationReport<T>), PilotwaveError> {
    if ensemble.is_empty() {
        return Err(PilotwaveError::EmptyEnsemble);
    }
    let total = ensemble.len();
    if t == ensemble.time {
        let report = PropagationReport { failed: 0, total, max_f_drift: None, node_encounters: 0, steps: 0, rejected: 0 };
        return Ok((ensemble.clone(), report));
    }
    let has_div = field.sample(&ensemble.positions[0], ensemble.time).divergence.is_some();
    let results: Vec<_> = ensemble.positions.par_iter().map(|x| integrate_trajectory(field, *x, ensemble.time, t, tol, &[])).collect();

    let mut out = Ensemble {
        positions: Vec::with_capacity(total),
        weights: Vec::with_capacity(total),
        f_labels: Vec::with_capacity(total),
        ids: Vec::with_capacity(total),
        density0: Vec::with_capacity(total),
        log_jacobian: Vec::with_capacity(total),
        time: t,
        ..ensemble.clone()
    };
    let mut report = PropagationReport { failed: 0, total, max_f_drift: None, node_encounters: 0, steps: 0, rejected: 0 };
    let mut drift = T::zero();
    for (i, res) in results.into_iter().enumerate() {
        match res {
            Ok(tr) => {
                report.node_encounters += tr.node_encounters;
                report.steps += tr.steps;
                report.rejected += tr.rejected;
                let lnj = ensemble.log_jacobian[i] + *tr.log_jacobian.last().unwrap();
                let rho = *tr.densities.last().unwrap();
                if has_div {
                    let ratio = ensemble.density0[i] / (lnj.exp() * rho);
                    drift = drift.max((ratio - T::one()).abs());
                }
                out.positions.push(tr.final_position());
                out.f_labels.push(ensemble.f_labels[i]);
                out.ids.push(ensemble.ids[i]);
                out.density0.push(ensemble.density0[i]);
                out.log_jacobian.push(lnj);
            }
            Err(PilotwaveError::Field(e)) => return Err(PilotwaveError::Field(e)),
            Err(_) => report.failed += 1,
        }
    }
    if report.failed as f64 > MAX_FAILURE_FRACTION * total as f64 {
        return Err(PilotwaveError::ExcessFailures { failed: report.failed, total });
    }
    if out.positions.is_empty() {
        return Err(PilotwaveError::EmptyEnsemble);
    }
    let w = T::one() / T::of_usize(out.positions.len());
    out.weights = vec![w; out.positions.len()];
    out.failed = ensemble.failed + report.failed;
    if has_div {
        report.max_f_drift = Some(drift);
    }
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavefield::EigenmodeWaveFunction;

    #[test]
    fn equilibrium_labels_are_one() {
        let wf = EigenmodeWaveFunction::<f64>::single_mode(&[1, 1], 1.0).unwrap();
        let e = sample_ensemble(&DistributionSpec::Equilibrium, &wf, 0.0, 500, 3).unwrap();
        assert!(e.f_labels.iter().all(|f| (f - 1.0).abs() < 1e-12));
        let e = sample_ensemble(&DistributionSpec::BoxMode(vec![1, 1]), &wf, 0.0, 500, 3).unwrap();
        assert!(e.f_labels.iter().all(|f| (f - 1.0).abs() < 1e-12));
        let wsum: f64 = e.weights.iter().sum();
        assert!((wsum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_reproducible_and_thread_independent() {
        let wf = EigenmodeWaveFunction::<f64>::equal_weight_grid(2, 3, 1.0, 9).unwrap();
        let a = sample_ensemble(&DistributionSpec::Equilibrium, &wf, 0.0, 200, 42).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| sample_ensemble(&DistributionSpec::Equilibrium, &wf, 0.0, 200, 42).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn histogram_outside_domain_is_rejected() {
        let wf = EigenmodeWaveFunction::<f64>::single_mode(&[1, 1], 1.0).unwrap();
        let h = HistogramDensity { lower: [2.0, 2.0], upper: [3.0, 3.0], cells: [1, 1], weights: vec![1.0] };
        assert!(matches!(
            sample_ensemble(&DistributionSpec::Histogram(h), &wf, 0.0, 10, 1),
            Err(PilotwaveError::NotAbsolutelyContinuous(_))
        ));
        let h = HistogramDensity { lower: [0.0, 0.0], upper: [0.5, 1.0], cells: [1, 2], weights: vec![1.0, 3.0] };
        let e = sample_ensemble(&DistributionSpec::Histogram(h), &wf, 0.0, 1000, 1).unwrap();
        assert!(e.positions.iter().all(|x| x[0] < 0.5));
        let upper = e.positions.iter().filter(|x| x[1] >= 0.5).count();
        assert!((upper as f64 / 1000.0 - 0.75).abs() < 0.05);
    }

    #[test]
    fn propagation_to_same_time_is_identity() {
        let wf = EigenmodeWaveFunction::<f64>::equal_weight_grid(2, 2, 1.0, 2).unwrap();
        let e = sample_ensemble(&DistributionSpec::Equilibrium, &wf, 0.0, 50, 5).unwrap();
        let (same, rep) = propagate_ensemble(&e, &wf, 0.0, &Tolerances::default()).unwrap();
        assert_eq!(same, e);
        assert_eq!(rep.failed, 0);
    }

    #[test]
    fn labels_ride_along_with_trajectories() {
        let wf = EigenmodeWaveFunction::<f64>::equal_weight_grid(2, 2, 1.0, 2).unwrap();
        let e = sample_ensemble(&DistributionSpec::BoxMode(vec![1, 1]), &wf, 0.0, 100, 5).unwrap();
        let (later, rep) = propagate_ensemble(&e, &wf, 0.5, &Tolerances::default()).unwrap();
        assert_eq!(later.len() + rep.failed, 100);
        for (k, id) in later.ids.iter().enumerate() {
            assert_eq!(later.f_labels[k], e.f_labels[*id]);
        }
        assert!(rep.max_f_drift.unwrap() < 1e-5);
    }
}
