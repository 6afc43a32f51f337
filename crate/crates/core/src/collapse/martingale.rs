use serde::Serialize;

use super::csl::{weighted_mean, CslEnsemble};
use super::CollapseError;
use crate::scalar::Real;

pub const SUM_RULE_TOLERANCE: f64 = 1e-9;

/// Checks of the martingale structure of a set of collapse runs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MartingaleReport<T> {
    /// `max |Σ_n x_n(t) − 1|` over runs and records.
    pub sum_rule_defect: T,
    /// `z[k][n] = (⟨x_n(t_k)⟩ − x_n(0)) / σ`, per record and level.
    pub drift_z: Vec<Vec<T>>,
    pub max_abs_z: T,
    /// `max_{n≠m} ⟨(x_n x_m)^{1/2}⟩` at the final time.
    pub final_coherence: T,
    pub sum_rule_ok: bool,
    pub drift_ok: bool,
}

pub fn martingale_diagnostics<T: Real>(ensemble: &CslEnsemble<T>) -> Result<MartingaleReport<T>, CollapseError> {
    let runs = &ensemble.runs;
    if runs.len() < 2 {
        return Err(CollapseError::InvalidParameter("need at least two runs".into()));
    }
    let first = &runs[0];
    for r in runs.iter().skip(1) {
        if r.times != first.times || r.lambda != first.lambda || r.dt != first.dt || r.scheme != first.scheme {
            return Err(CollapseError::MismatchedRuns);
        }
        if r.x[0].iter().zip(&first.x[0]).any(|(a, b)| (*a - *b).abs() > T::lit(1e-12)) {
            return Err(CollapseError::MismatchedRuns);
        }
    }
    let dim = first.x[0].len();
    let mut sum_rule_defect = T::zero();
    for r in runs {
        for x in &r.x {
            sum_rule_defect = sum_rule_defect.max((x.iter().copied().sum::<T>() - T::one()).abs());
        }
    }
    let w = ensemble.weights();
    let mut drift_z = Vec::with_capacity(first.times.len());
    let mut max_abs_z = T::zero();
    for k in 0..first.times.len() {
        let row: Vec<T> = (0..dim)
            .map(|n| {
                let vals: Vec<T> = runs.iter().map(|r| r.x[k][n]).collect();
                let (mean, se) = weighted_mean(&vals, w.as_deref());
                let diff = mean - first.x[0][n];
                // Summation rounding alone must not register as drift.
                if diff.abs() <= T::lit(1e-12) {
                    T::zero()
                } else if se > T::zero() {
                    diff / se
                } else {
                    T::infinity() * diff.signum()
                }
            })
            .collect();
        max_abs_z = row.iter().fold(max_abs_z, |m, z| m.max(z.abs()));
        drift_z.push(row);
    }
    let last = first.times.len() - 1;
    let mut final_coherence = T::zero();
    for n in 0..dim {
        for m in n + 1..dim {
            let vals: Vec<T> = runs.iter().map(|r| (r.x[last][n] * r.x[last][m]).sqrt()).collect();
            final_coherence = final_coherence.max(weighted_mean(&vals, w.as_deref()).0);
        }
    }
    Ok(MartingaleReport {
        sum_rule_ok: sum_rule_defect <= T::lit(SUM_RULE_TOLERANCE),
        drift_ok: max_abs_z < T::lit(3.0),
        sum_rule_defect,
        drift_z,
        max_abs_z,
        final_coherence,
    })
}
