use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::CollapseError;
use crate::rng;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GamblerReport<T> {
    pub runs: usize,
    /// Fraction of runs in which player 1 takes everything.
    pub win_frequency: T,
    pub sigma: T,
    /// Steps at which `⟨x₁⟩` was recorded.
    pub steps: Vec<usize>,
    /// `⟨x₁(t)⟩` over runs (absorbed runs keep their final value).
    pub mean_fraction: Vec<T>,
    pub sigma_fraction: Vec<T>,
    /// `max_t |⟨x₁(t)⟩ − x₀| / σ(t)`.
    pub max_abs_z: T,
}

/// Fair-coin gambler's ruin. Player 1 starts with fraction `x0` of the total,
/// each round moves `stake` of the total from one player to the other.
pub fn gambler_ruin<T: Real>(x0: T, stake: T, n_runs: usize, record_steps: &[usize], seed: u64) -> Result<GamblerReport<T>, CollapseError> {
    if !(x0 >= T::zero() && x0 <= T::one()) || !(stake > T::zero()) || n_runs < 2 {
        return Err(CollapseError::InvalidParameter("need 0 <= x0 <= 1, stake > 0, runs >= 2".into()));
    }
    let total_units = T::one() / stake;
    let start_units = x0 / stake;
    let is_whole = |v: T| (v - v.round()).abs() <= T::lit(1e-9) * v.abs().max(T::one());
    if !is_whole(total_units) || !is_whole(start_units) {
        return Err(CollapseError::InvalidParameter("stake must divide both fortunes".into()));
    }
    let total = total_units.round().to_i64().unwrap_or(0);
    let start = start_units.round().to_i64().unwrap_or(0);
    let mut steps: Vec<usize> = record_steps.to_vec();
    steps.sort_unstable();
    steps.dedup();
    let per_run: Vec<(bool, Vec<i64>)> = (0..n_runs as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, i);
            let mut k = start;
            let mut t = 0usize;
            let mut snaps = Vec::with_capacity(steps.len());
            let mut next = 0;
            loop {
                while next < steps.len() && steps[next] == t {
                    snaps.push(k);
                    next += 1;
                }
                if k == 0 || k == total {
                    break;
                }
                k += if r.random::<bool>() { 1 } else { -1 };
                t += 1;
            }
            snaps.resize(steps.len(), k);
            (k == total, snaps)
        })
        .collect();
    let nf = T::of_usize(n_runs);
    let wins = per_run.iter().filter(|(w, _)| *w).count();
    let p = T::of_usize(wins) / nf;
    let tot = T::lit(total as f64);
    let mut mean_fraction = Vec::with_capacity(steps.len());
    let mut sigma_fraction = Vec::with_capacity(steps.len());
    let mut max_abs_z = T::zero();
    for k in 0..steps.len() {
        let vals: Vec<T> = per_run.iter().map(|(_, s)| T::lit(s[k] as f64) / tot).collect();
        let (m, s) = super::csl::weighted_mean(&vals, None);
        if s > T::zero() && (m - x0).abs() > T::lit(1e-12) {
            max_abs_z = max_abs_z.max(((m - x0) / s).abs());
        }
        mean_fraction.push(m);
        sigma_fraction.push(s);
    }
    Ok(GamblerReport {
        runs: n_runs,
        win_frequency: p,
        sigma: (p * (T::one() - p) / nf).sqrt(),
        steps,
        mean_fraction,
        sigma_fraction,
        max_abs_z,
    })
}
