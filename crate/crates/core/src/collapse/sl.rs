use num_complex::Complex;
use rand::Rng;
use rand_distr::{Exp, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::CollapseError;
use crate::rng;
use crate::scalar::{sq, Real};
use crate::wavefield::{Boundary, GridAxis};

/// One spontaneous localization.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HitEvent<T> {
    pub time: T,
    pub particle: usize,
    pub center: T,
    /// Squared norm just after multiplication by the localizing Gaussian.
    pub norm_before: T,
    /// Squared norm after renormalization.
    pub norm_after: T,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlConfig<T> {
    /// Hit rate per particle.
    pub lambda_hit: T,
    /// Width of the localizing Gaussian `exp(−(x − z)²/2a²)`.
    pub a: T,
    pub t_end: T,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlRun<T> {
    pub hits: Vec<HitEvent<T>>,
    pub final_state: Vec<Complex<T>>,
}

fn grid_norm<T: Real>(psi: &[Complex<T>], dx: T) -> T {
    psi.iter().map(|z| z.norm_sqr()).sum::<T>() * dx
}

/// Hit process for one particle on a 1D grid. Hit centres are drawn with
/// probability proportional to the post-hit norm, which is `x + N(0, a²/2)`
/// with `x` drawn from `|ψ|²`.
pub fn sl_hit_process<T: Real>(
    axis: &GridAxis<T>,
    psi: &[Complex<T>],
    cfg: &SlConfig<T>,
    run_index: u64,
) -> Result<SlRun<T>, CollapseError> {
    if psi.len() != axis.n {
        return Err(CollapseError::DimensionMismatch { expected: axis.n, found: psi.len() });
    }
    let dx = axis.spacing(Boundary::Periodic);
    let n0 = grid_norm(psi, dx);
    if (n0 - T::one()).abs() > T::lit(1e-9) {
        return Err(CollapseError::NotNormalized(n0.to_f64_lossy()));
    }
    if !(cfg.lambda_hit >= T::zero()) || !(cfg.a > T::zero()) || !(cfg.t_end >= T::zero()) {
        return Err(CollapseError::InvalidParameter("need lambda_hit >= 0, a > 0, t_end >= 0".into()));
    }
    let mut rng = rng::stream(cfg.seed, run_index);
    let mut state = psi.to_vec();
    let mut hits = Vec::new();
    if cfg.lambda_hit == T::zero() {
        return Ok(SlRun { hits, final_state: state });
    }
    let waiting = Exp::new(cfg.lambda_hit.to_f64_lossy()).map_err(|e| CollapseError::InvalidParameter(e.to_string()))?;
    let mut t = T::zero();
    let spread = cfg.a / T::lit(2.0).sqrt();
    loop {
        t += T::lit(rng.sample(waiting));
        if t > cfg.t_end {
            break;
        }
        let u = T::lit(rng.random::<f64>()) / dx;
        let mut acc = T::zero();
        let mut pick = axis.n - 1;
        for (i, z) in state.iter().enumerate() {
            acc += z.norm_sqr();
            if u < acc {
                pick = i;
                break;
            }
        }
        let zn: f64 = rng.sample(StandardNormal);
        let center = axis.coord(pick, Boundary::Periodic) + spread * T::lit(zn);
        for (i, z) in state.iter_mut().enumerate() {
            *z = *z * (-sq(axis.coord(i, Boundary::Periodic) - center) / (T::lit(2.0) * sq(cfg.a))).exp();
        }
        let nb = grid_norm(&state, dx);
        let inv = T::one() / nb.sqrt();
        for z in state.iter_mut() {
            *z = *z * inv;
        }
        hits.push(HitEvent { time: t, particle: 0, center, norm_before: nb, norm_after: grid_norm(&state, dx) });
    }
    Ok(SlRun { hits, final_state: state })
}

pub fn sl_ensemble<T: Real>(
    axis: &GridAxis<T>,
    psi: &[Complex<T>],
    cfg: &SlConfig<T>,
    n_runs: usize,
) -> Result<Vec<SlRun<T>>, CollapseError> {
    (0..n_runs as u64).into_par_iter().map(|i| sl_hit_process(axis, psi, cfg, i)).collect()
}

/// `N` particles sharing one two-location superposition
/// `α_L |L…L⟩ + α_R |R…R⟩`, locations `∓separation/2`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClumpConfig<T> {
    pub particles: usize,
    pub amplitudes: [T; 2],
    pub separation: T,
    pub a: T,
    pub lambda_hit: T,
    pub times: Vec<T>,
    pub runs: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClumpReport<T> {
    pub times: Vec<T>,
    /// Ensemble mean of `|c_L c_R|` and its standard error.
    pub coherence: Vec<T>,
    pub sigma: Vec<T>,
    /// Minus the slope of `ln ⟨|c_L c_R|⟩` against `t`.
    pub fitted_rate: T,
    /// Branch frequencies at the last time, for runs that have collapsed.
    pub branch_frequency: [T; 2],
}

pub fn clump_collapse<T: Real>(cfg: &ClumpConfig<T>) -> Result<ClumpReport<T>, CollapseError> {
    if cfg.particles == 0 || cfg.runs < 2 || cfg.times.is_empty() || !(cfg.a > T::zero()) || !(cfg.lambda_hit > T::zero()) {
        return Err(CollapseError::InvalidParameter("need particles, runs >= 2, times, a > 0, lambda_hit > 0".into()));
    }
    if cfg.times.windows(2).any(|w| !(w[1] > w[0])) || cfg.times[0] < T::zero() {
        return Err(CollapseError::InvalidParameter("times must be non-negative and increasing".into()));
    }
    let norm = (sq(cfg.amplitudes[0]) + sq(cfg.amplitudes[1])).sqrt();
    let c0 = [cfg.amplitudes[0] / norm, cfg.amplitudes[1] / norm];
    let pos = [-cfg.separation / T::lit(2.0), cfg.separation / T::lit(2.0)];
    let rate = cfg.lambda_hit * T::of_usize(cfg.particles);
    let waiting = Exp::new(rate.to_f64_lossy()).map_err(|e| CollapseError::InvalidParameter(e.to_string()))?;
    let spread = cfg.a / T::lit(2.0).sqrt();
    let per_run: Vec<(Vec<T>, usize)> = (0..cfg.runs as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(cfg.seed, i);
            let mut c = c0;
            let mut t = T::lit(r.sample(waiting));
            let mut out = Vec::with_capacity(cfg.times.len());
            for &probe in &cfg.times {
                while t <= probe {
                    let b = if T::lit(r.random::<f64>()) < sq(c[0]) { 0 } else { 1 };
                    let zn: f64 = r.sample(StandardNormal);
                    let z = pos[b] + spread * T::lit(zn);
                    // Work with log-amplitudes relative to the larger factor.
                    let e = [0, 1].map(|k| -sq(pos[k] - z) / (T::lit(2.0) * sq(cfg.a)));
                    let top = e[0].max(e[1]);
                    c = [c[0] * (e[0] - top).exp(), c[1] * (e[1] - top).exp()];
                    let n = (sq(c[0]) + sq(c[1])).sqrt();
                    c = [c[0] / n, c[1] / n];
                    t += T::lit(r.sample(waiting));
                }
                out.push((c[0] * c[1]).abs());
            }
            let branch = if sq(c[0]) >= sq(c[1]) { 0 } else { 1 };
            (out, branch)
        })
        .collect();
    let n = T::of_usize(cfg.runs);
    let mut coherence = Vec::with_capacity(cfg.times.len());
    let mut sigma = Vec::with_capacity(cfg.times.len());
    for k in 0..cfg.times.len() {
        let vals: Vec<T> = per_run.iter().map(|(v, _)| v[k]).collect();
        let (m, s) = super::csl::weighted_mean(&vals, None);
        coherence.push(m);
        sigma.push(s);
    }
    let left = per_run.iter().filter(|(_, b)| *b == 0).count();
    let pts: Vec<(T, T)> = cfg.times.iter().zip(&coherence).filter(|(_, c)| **c > T::zero()).map(|(t, c)| (*t, c.ln())).collect();
    let fitted_rate = if pts.len() >= 2 {
        let m = T::of_usize(pts.len());
        let mt = pts.iter().map(|p| p.0).sum::<T>() / m;
        let my = pts.iter().map(|p| p.1).sum::<T>() / m;
        let sxy: T = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
        let sxx: T = pts.iter().map(|p| sq(p.0 - mt)).sum();
        -sxy / sxx
    } else {
        T::nan()
    };
    Ok(ClumpReport {
        times: cfg.times.clone(),
        coherence,
        sigma,
        fitted_rate,
        branch_frequency: [T::of_usize(left) / n, T::of_usize(cfg.runs - left) / n],
    })
}
