use serde::Serialize;

use super::HvError;
use crate::scalar::{sq, Real};

/// Distribution of a single hidden variable on `[0, 1)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Density1d<T> {
    Uniform,
    /// `ρ(λ) = (k + 1) λᵏ`, so `ρ(λ) = 2λ` is `k = 1`.
    Power {
        exponent: T,
    },
    /// Piecewise constant on `[edges[i], edges[i+1])`; rescaled to unit mass.
    Piecewise {
        edges: Vec<T>,
        values: Vec<T>,
    },
}

impl<T: Real> Density1d<T> {
    pub fn validate(&self) -> Result<(), HvError> {
        let bad = |m: &str| Err(HvError::BadDensity1d(m.into()));
        match self {
            Density1d::Uniform => Ok(()),
            Density1d::Power { exponent } => {
                if *exponent > -T::one() {
                    Ok(())
                } else {
                    bad("power exponent must exceed -1")
                }
            }
            Density1d::Piecewise { edges, values } => {
                if edges.len() != values.len() + 1 || values.is_empty() {
                    return bad("need one more edge than values");
                }
                if edges[0] != T::zero() || *edges.last().unwrap() != T::one() {
                    return bad("edges must span [0, 1]");
                }
                if edges.windows(2).any(|w| !(w[1] > w[0])) {
                    return bad("edges must increase");
                }
                if values.iter().any(|v| *v < T::zero()) || values.iter().all(|v| *v == T::zero()) {
                    return bad("values must be non-negative and not all zero");
                }
                Ok(())
            }
        }
    }

    pub fn cdf(&self, x: T) -> T {
        let x = x.max(T::zero()).min(T::one());
        match self {
            Density1d::Uniform => x,
            Density1d::Power { exponent } => x.powf(*exponent + T::one()),
            Density1d::Piecewise { edges, values } => {
                let mut acc = T::zero();
                let mut total = T::zero();
                for (i, v) in values.iter().enumerate() {
                    let (a, b) = (edges[i], edges[i + 1]);
                    total += *v * (b - a);
                    if x > a {
                        acc += *v * (x.min(b) - a);
                    }
                }
                acc / total
            }
        }
    }
}

/// Least-squares fit of `½(1 + P′ cos(2Θ + φ))`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CosineFit<T> {
    pub polarization: T,
    pub phase: T,
    pub max_residual: T,
    pub rms_residual: T,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransmissionCurve<T> {
    pub theta: Vec<T>,
    pub p_plus: Vec<T>,
    /// `½(1 + P cos 2Θ)`
    pub p_quantum: Vec<T>,
    /// `max |p⁺ − p⁺_QT|`
    pub max_deviation: T,
    pub fit: CosineFit<T>,
}

fn quantum<T: Real>(theta: T, bloch: T) -> T {
    T::lit(0.5) * (T::one() + bloch * (T::lit(2.0) * theta).cos())
}

/// Transmission probability of a two-state system whose outcome is `+1` iff
/// `λ < ½(1 + P cos 2Θ)`, with `λ` distributed as `rho`.
pub fn two_state_transmission<T: Real>(rho: &Density1d<T>, theta: &[T], bloch: T) -> Result<TransmissionCurve<T>, HvError> {
    rho.validate()?;
    let p_quantum: Vec<T> = theta.iter().map(|t| quantum(*t, bloch)).collect();
    let p_plus: Vec<T> = p_quantum.iter().map(|p| rho.cdf(*p)).collect();
    let max_deviation = p_plus.iter().zip(&p_quantum).map(|(a, b)| (*a - *b).abs()).fold(T::zero(), T::max);
    let fit = fit_cosine(theta, &p_plus);
    Ok(TransmissionCurve { theta: theta.to_vec(), p_plus, p_quantum, max_deviation, fit })
}

fn fit_cosine<T: Real>(theta: &[T], p: &[T]) -> CosineFit<T> {
    // p − ½ = c cos 2Θ + s sin 2Θ with c = ½P′cos φ, s = −½P′sin φ
    let two = T::lit(2.0);
    let (mut cc, mut ss, mut cs, mut cy, mut sy) = (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
    for (t, y) in theta.iter().zip(p) {
        let (c, s) = ((two * *t).cos(), (two * *t).sin());
        let y = *y - T::lit(0.5);
        cc += c * c;
        ss += s * s;
        cs += c * s;
        cy += c * y;
        sy += s * y;
    }
    let det = cc * ss - cs * cs;
    let (c, s) = if det.abs() > T::epsilon() * (cc * ss).max(T::min_positive_value()) {
        ((cy * ss - sy * cs) / det, (sy * cc - cy * cs) / det)
    } else if cc > T::zero() {
        (cy / cc, T::zero())
    } else {
        (T::zero(), T::zero())
    };
    let mut max_r = T::zero();
    let mut sum_r = T::zero();
    for (t, y) in theta.iter().zip(p) {
        let model = T::lit(0.5) + c * (two * *t).cos() + s * (two * *t).sin();
        let r = (*y - model).abs();
        max_r = max_r.max(r);
        sum_r += sq(r);
    }
    let n = T::of_usize(theta.len().max(1));
    CosineFit { polarization: two * (sq(c) + sq(s)).sqrt(), phase: (-s).atan2(c), max_residual: max_r, rms_residual: (sum_r / n).sqrt() }
}

/// Failure of expectation values to be linear in the measurement direction.
///
/// For polarizer angles `Θ₁`, `Θ₂` the Bloch directions `n₁`, `n₂` sit at
/// `2Θ₁`, `2Θ₂`; with `n₃` along `n₁ + n₂` a quantum expectation satisfies
/// `|n₁ + n₂| E(n₃) = E(n₁) + E(n₂)`. Returns the left side minus the right.
pub fn additivity_defect<T: Real>(rho: &Density1d<T>, bloch: T, theta1: T, theta2: T) -> T {
    let e = |t: T| T::lit(2.0) * rho.cdf(quantum(t, bloch)) - T::one();
    let half = T::lit(0.5);
    let len = T::lit(2.0) * (theta1 - theta2).cos().abs();
    let mid = half * (theta1 + theta2) + if (theta1 - theta2).cos() < T::zero() { T::FRAC_PI_2() } else { T::zero() };
    len * e(mid) - e(theta1) - e(theta2)
}
