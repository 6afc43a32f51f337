use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::SubquantumError;
use crate::pilotwave::{integrate_trajectory, Tolerances};
use crate::rng;
use crate::scalar::Real;
use crate::wavefield::{EigenmodeWaveFunction, FreeGaussianPacket, GuidingField};

/// Flow-map table resolution.
const TABLE_POINTS: usize = 4001;
/// Quadrature points for each likelihood integral.
const LIKELIHOOD_POINTS: usize = 256;

/// A one-dimensional state whose trajectories can be tracked.
pub trait TrackedState<T: Real>: GuidingField<T> {
    /// Interval holding essentially all of `|Ψ(·, t)|²`.
    fn support(&self, t: T) -> (T, T);
}

impl<T: Real> TrackedState<T> for EigenmodeWaveFunction<T> {
    fn support(&self, _t: T) -> (T, T) {
        (T::zero(), self.box_side())
    }
}

impl<T: Real> TrackedState<T> for FreeGaussianPacket<T> {
    fn support(&self, t: T) -> (T, T) {
        let half = T::lit(10.0) * self.width(t);
        (self.mean_position(t) - half, self.mean_position(t) + half)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistinguishConfig<T> {
    /// Pointer support width `w` of each position measurement.
    pub w: T,
    /// Coupling strength times interaction time, `a t`.
    pub a_t: T,
    /// Length of the tracked trajectory segment.
    pub segment: T,
    pub runs: usize,
    pub seed: u64,
    pub tolerances: Tolerances<T>,
    /// Run (at chance accuracy) instead of failing when the two velocity
    /// fields coincide.
    pub allow_degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistinguishReport<T> {
    pub accuracy: T,
    pub runs: usize,
    pub ties: usize,
    /// Half-width `w/(2 a t)` of each position estimate's error.
    pub resolution: T,
    pub degenerate: bool,
}

struct FlowTable<T> {
    lo: T,
    step: T,
    density: Vec<T>,
    image: Vec<T>,
    cdf: Vec<T>,
}

impl<T: Real> FlowTable<T> {
    fn build<S: TrackedState<T>>(state: &S, segment: T, tol: &Tolerances<T>) -> Self {
        let (lo, hi) = state.support(T::zero());
        let step = (hi - lo) / T::of_usize(TABLE_POINTS - 1);
        let rows: Vec<(T, T)> = (0..TABLE_POINTS)
            .into_par_iter()
            .map(|i| {
                let x = lo + step * T::of_usize(i);
                let rho = state.density(&[x, T::zero()], T::zero());
                let image = integrate_trajectory(state, [x, T::zero()], T::zero(), segment, tol, &[])
                    .map(|tr| tr.final_position()[0])
                    .unwrap_or(T::nan());
                (rho, image)
            })
            .collect();
        let density: Vec<T> = rows.iter().map(|r| r.0).collect();
        let image = rows.iter().map(|r| r.1).collect();
        let mut cdf = vec![T::zero(); TABLE_POINTS];
        for i in 1..TABLE_POINTS {
            cdf[i] = cdf[i - 1] + (density[i] + density[i - 1]) * step / T::lit(2.0);
        }
        let total = cdf[TABLE_POINTS - 1];
        cdf.iter_mut().for_each(|c| *c /= total);
        Self { lo, step, density, image, cdf }
    }

    fn locate(&self, x: T) -> Option<(usize, T)> {
        let u = (x - self.lo) / self.step;
        if !(u >= T::zero()) || u > T::of_usize(TABLE_POINTS - 1) {
            return None;
        }
        let i = u.floor().to_usize()?.min(TABLE_POINTS - 2);
        Some((i, u - T::of_usize(i)))
    }

    fn interp(v: &[T], i: usize, f: T) -> T {
        v[i] * (T::one() - f) + v[i + 1] * f
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> T {
        let u = T::lit(rng.random::<f64>());
        let i = self.cdf.partition_point(|&c| c <= u).clamp(1, TABLE_POINTS - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let f = if c1 > c0 { (u - c0) / (c1 - c0) } else { T::zero() };
        self.lo + self.step * (T::of_usize(i - 1) + f)
    }

    /// `∫ ρ(x) 1[|m1 − X(x)| ≤ δ] dx` over `|x − m0| ≤ δ`.
    fn likelihood(&self, m0: T, m1: T, delta: T) -> T {
        let h = T::lit(2.0) * delta / T::of_usize(LIKELIHOOD_POINTS);
        let mut acc = T::zero();
        for q in 0..LIKELIHOOD_POINTS {
            let x = m0 - delta + h * (T::of_usize(q) + T::lit(0.5));
            if let Some((i, f)) = self.locate(x) {
                let img = Self::interp(&self.image, i, f);
                if img.is_finite() && (m1 - img).abs() <= delta {
                    acc += Self::interp(&self.density, i, f) * h;
                }
            }
        }
        acc
    }
}

fn velocity_fields_coincide<T: Real, A: TrackedState<T>, B: TrackedState<T>>(a: &A, b: &B, segment: T) -> bool {
    let (lo_a, hi_a) = a.support(T::zero());
    let (lo_b, hi_b) = b.support(T::zero());
    let (lo, hi) = (lo_a.min(lo_b), hi_a.max(hi_b));
    let tol = T::lit(1e-12);
    for k in 0..3 {
        let t = segment * T::of_usize(k) / T::lit(2.0);
        for i in 1..64 {
            let x = [lo + (hi - lo) * T::of_usize(i) / T::lit(64.0), T::zero()];
            let (sa, sb) = (a.sample(&x, t), b.sample(&x, t));
            let scale = T::one() + sa.velocity[0].abs().max(sb.velocity[0].abs());
            if (sa.velocity[0] - sb.velocity[0]).abs() > tol * scale || (sa.density - sb.density).abs() > tol * (T::one() + sa.density) {
                return false;
            }
        }
    }
    true
}

/// Prepares `ψ1` or `ψ2` at random, measures the particle position at the
/// start and end of a trajectory segment with pointer width `w`, and
/// classifies the state by likelihood. Ties are broken by a fair coin.
pub fn distinguish_nonorthogonal<T: Real, A: TrackedState<T>, B: TrackedState<T>>(
    psi1: &A,
    psi2: &B,
    cfg: &DistinguishConfig<T>,
) -> Result<DistinguishReport<T>, SubquantumError> {
    if psi1.dims() != 1 || psi2.dims() != 1 {
        return Err(SubquantumError::InvalidConfig("states must be one-dimensional".into()));
    }
    if !(cfg.w > T::zero() && cfg.a_t > T::zero() && cfg.segment > T::zero()) || cfg.runs == 0 {
        return Err(SubquantumError::InvalidConfig("w, a·t, segment and runs must be positive".into()));
    }
    let degenerate = velocity_fields_coincide(psi1, psi2, cfg.segment);
    if degenerate && !cfg.allow_degenerate {
        return Err(SubquantumError::DegenerateStates);
    }
    let delta = cfg.w / (T::lit(2.0) * cfg.a_t);
    let tables = [FlowTable::build(psi1, cfg.segment, &cfg.tolerances), FlowTable::build(psi2, cfg.segment, &cfg.tolerances)];

    let outcomes: Vec<(bool, bool)> = (0..cfg.runs)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(cfg.seed, i as u64);
            let truth = r.random::<bool>();
            let idx = usize::from(truth);
            let x0 = tables[idx].sample(&mut r);
            let end = if truth {
                integrate_trajectory(psi2, [x0, T::zero()], T::zero(), cfg.segment, &cfg.tolerances, &[])
            } else {
                integrate_trajectory(psi1, [x0, T::zero()], T::zero(), cfg.segment, &cfg.tolerances, &[])
            };
            let x1 = match end {
                Ok(tr) => tr.final_position()[0],
                Err(_) => T::nan(),
            };
            let noise = |r: &mut rng::StreamRng| delta * T::lit(2.0 * r.random::<f64>() - 1.0);
            let m0 = x0 + noise(&mut r);
            let m1 = x1 + noise(&mut r);
            let (l1, l2) = (tables[0].likelihood(m0, m1, delta), tables[1].likelihood(m0, m1, delta));
            let coin = r.random::<bool>();
            let (guess, tie) = if l1 > l2 {
                (false, false)
            } else if l2 > l1 {
                (true, false)
            } else {
                (coin, true)
            };
            (guess == truth, tie)
        })
        .collect();
    let correct = outcomes.iter().filter(|o| o.0).count();
    let ties = outcomes.iter().filter(|o| o.1).count();
    Ok(DistinguishReport { accuracy: T::of_usize(correct) / T::of_usize(cfg.runs), runs: cfg.runs, ties, resolution: delta, degenerate })
}
