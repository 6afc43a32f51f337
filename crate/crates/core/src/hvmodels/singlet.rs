use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{HvDistribution, HvError, Rect};
use crate::rng;
use crate::scalar::{Field, Real};

/// Measurement setting: a unit vector in ℝ³.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Setting<T>(pub [T; 3]);

impl<T: Field> Setting<T> {
    pub fn dot(&self, other: &Self) -> T {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }
}

impl<T: Real> Setting<T> {
    /// Unit vector at angle `theta` from the x axis in the xy plane.
    pub fn in_plane(theta: T) -> Self {
        Setting([theta.cos(), theta.sin(), T::zero()])
    }
}

/// Outcome mapping `ω(M, λ) → (σ_A, σ_B) ∈ {−1, +1}²`.
pub trait HvModel<T> {
    fn outcomes(&self, m_a: &Setting<T>, m_b: &Setting<T>, lambda: &[T; 2]) -> (i8, i8);
}

/// Nonlocal threshold model for the singlet state.
///
/// `σ_B = sign(λ₁ − ½)`, and `σ_A = σ_B` when `λ₂ < q`, `−σ_B` otherwise, with
/// `q = (1 − m_A·m_B)/2`. Under uniform `λ` this gives `⟨σ_Aσ_B⟩ = −m_A·m_B`
/// and unbiased marginals exactly.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SingletModel;

/// The reference model shipped with the crate.
pub fn builtin_singlet_model() -> SingletModel {
    SingletModel
}

fn two<T: Field>() -> T {
    T::one() + T::one()
}

impl SingletModel {
    /// Agreement threshold, clamped to `[0, 1]`.
    pub fn threshold<T: Field>(&self, m_a: &Setting<T>, m_b: &Setting<T>) -> T {
        let q = (T::one() - m_a.dot(m_b)) / two();
        if q < T::zero() {
            T::zero()
        } else if q > T::one() {
            T::one()
        } else {
            q
        }
    }
}

impl<T: Field> HvModel<T> for SingletModel {
    fn outcomes(&self, m_a: &Setting<T>, m_b: &Setting<T>, lambda: &[T; 2]) -> (i8, i8) {
        let half = T::one() / two();
        let sb = if lambda[0] >= half { 1 } else { -1 };
        let sa = if lambda[1] < self.threshold(m_a, m_b) { sb } else { -sb };
        (sa, sb)
    }
}

/// Exact outcome statistics of [`SingletModel`] under `ρ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExactStatistics<T> {
    pub p_plus_a: T,
    pub p_plus_b: T,
    pub correlation: T,
}

pub fn exact_statistics<T: Field>(model: &SingletModel, rho: &HvDistribution<T>, m_a: &Setting<T>, m_b: &Setting<T>) -> ExactStatistics<T> {
    let (z, one) = (T::zero(), T::one());
    let half = one / two();
    let q = model.threshold(m_a, m_b);
    let mu = |x0, x1, y0, y1| rho.measure(&Rect::new(x0, x1, y0, y1));
    let plus_same = mu(half, one, z, q);
    let plus_diff = mu(half, one, q, one);
    let minus_same = mu(z, half, z, q);
    let minus_diff = mu(z, half, q, one);
    ExactStatistics {
        p_plus_a: plus_same + minus_diff,
        p_plus_b: plus_same + plus_diff,
        correlation: plus_same + minus_same - plus_diff - minus_diff,
    }
}

/// Sampled outcome statistics with one-standard-error bars.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleStatistics<T> {
    pub n: usize,
    pub p_plus_a: T,
    pub p_plus_b: T,
    pub sigma_p_a: T,
    pub sigma_p_b: T,
    pub correlation: T,
    pub sigma_correlation: T,
}

impl<T: Real> HvDistribution<T> {
    /// Draws `λ` by choosing a rectangle by mass, then a uniform point in it.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [T; 2] {
        let u = T::lit(rng.random::<f64>());
        let mut acc = T::zero();
        let pieces = self.pieces();
        let mut chosen = pieces.len() - 1;
        for (i, (r, d)) in pieces.iter().enumerate() {
            acc += r.area() * *d;
            if u < acc {
                chosen = i;
                break;
            }
        }
        let r = &pieces[chosen].0;
        let a = T::lit(rng.random::<f64>());
        let b = T::lit(rng.random::<f64>());
        [r.x0 + a * (r.x1 - r.x0), r.y0 + b * (r.y1 - r.y0)]
    }
}

const CHUNK: usize = 8192;

pub fn ensemble_statistics<T, M>(
    model: &M,
    rho: &HvDistribution<T>,
    m_a: &Setting<T>,
    m_b: &Setting<T>,
    n: usize,
    seed: u64,
) -> Result<EnsembleStatistics<T>, HvError>
where
    T: Real,
    M: HvModel<T> + Sync,
{
    if n < 2 {
        return Err(HvError::TooFewSamples(2));
    }
    let chunks = n.div_ceil(CHUNK);
    let (plus_a, plus_b, same) = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut r = rng::stream(seed, c as u64);
            let count = CHUNK.min(n - c * CHUNK);
            let mut acc = (0usize, 0usize, 0usize);
            for _ in 0..count {
                let lambda = rho.sample(&mut r);
                let (a, b) = model.outcomes(m_a, m_b, &lambda);
                acc.0 += (a > 0) as usize;
                acc.1 += (b > 0) as usize;
                acc.2 += (a == b) as usize;
            }
            acc
        })
        .reduce(|| (0, 0, 0), |x, y| (x.0 + y.0, x.1 + y.1, x.2 + y.2));
    let nf = T::of_usize(n);
    let frac = |k: usize| T::of_usize(k) / nf;
    let se = |p: T| (p * (T::one() - p) / nf).sqrt();
    let (pa, pb, ps) = (frac(plus_a), frac(plus_b), frac(same));
    Ok(EnsembleStatistics {
        n,
        p_plus_a: pa,
        p_plus_b: pb,
        sigma_p_a: se(pa),
        sigma_p_b: se(pb),
        correlation: T::lit(2.0) * ps - T::one(),
        sigma_correlation: T::lit(2.0) * se(ps),
    })
}

/// Sets of `λ` whose A outcome flips when B's setting changes `m_B → m_B′`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransitionSetReport<T> {
    /// `T_A(−,+)`: regions where `σ_A` goes from −1 to +1.
    pub minus_to_plus: Vec<Rect<T>>,
    /// `T_A(+,−)`
    pub plus_to_minus: Vec<Rect<T>>,
    pub mu_qt_minus_to_plus: T,
    pub mu_qt_plus_to_minus: T,
    pub mu_rho_minus_to_plus: T,
    pub mu_rho_plus_to_minus: T,
    /// Change of `P(σ_A = +1)` under `ρ`.
    pub marginal_shift: T,
}

pub fn transition_sets<T: Field>(
    model: &SingletModel,
    m_a: &Setting<T>,
    m_b: &Setting<T>,
    m_b_new: &Setting<T>,
    rho: &HvDistribution<T>,
) -> TransitionSetReport<T> {
    let (z, one) = (T::zero(), T::one());
    let half = one / two();
    let q = model.threshold(m_a, m_b);
    let q_new = model.threshold(m_a, m_b_new);
    let (lower, upper) = (Rect::new(z, half, z, one), Rect::new(half, one, z, one));
    let (mp, pm) = if q_new > q {
        // λ₂ ∈ [q, q′) switches from σ_A = −σ_B to σ_A = σ_B.
        let band = Rect::new(z, one, q, q_new);
        (vec![band.intersect(&upper)], vec![band.intersect(&lower)])
    } else if q_new < q {
        let band = Rect::new(z, one, q_new, q);
        (vec![band.intersect(&lower)], vec![band.intersect(&upper)])
    } else {
        (vec![], vec![])
    };
    let qt = HvDistribution::uniform();
    let total = |d: &HvDistribution<T>, rs: &[Rect<T>]| rs.iter().fold(T::zero(), |a, r| a + d.measure(r));
    let mu_rho_mp = total(rho, &mp);
    let mu_rho_pm = total(rho, &pm);
    TransitionSetReport {
        mu_qt_minus_to_plus: total(&qt, &mp),
        mu_qt_plus_to_minus: total(&qt, &pm),
        mu_rho_minus_to_plus: mu_rho_mp,
        mu_rho_plus_to_minus: mu_rho_pm,
        marginal_shift: mu_rho_mp - mu_rho_pm,
        minus_to_plus: mp,
        plus_to_minus: pm,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64 as Q;
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> Q {
        Q::new(n, d)
    }

    /// Rational unit vector from the tangent half-angle `t`.
    fn rational_setting(t: Q) -> Setting<Q> {
        let d = Q::from_integer(1) + t * t;
        Setting([(Q::from_integer(1) - t * t) / d, Q::from_integer(2) * t / d, Q::from_integer(0)])
    }

    fn heavier_right() -> HvDistribution<Q> {
        HvDistribution::new(vec![
            (Rect::new(q(0, 1), q(1, 2), q(0, 1), q(1, 1)), q(1, 1)),
            (Rect::new(q(1, 2), q(1, 1), q(0, 1), q(1, 1)), q(2, 1)),
        ])
        .unwrap()
    }

    #[test]
    fn parallel_and_perpendicular_settings() {
        let m = SingletModel;
        let x = Setting([q(1, 1), q(0, 1), q(0, 1)]);
        let y = Setting([q(0, 1), q(1, 1), q(0, 1)]);
        let qt = HvDistribution::uniform();
        for l in [[q(1, 3), q(1, 7)], [q(3, 4), q(9, 10)]] {
            let (a, b) = m.outcomes(&x, &x, &l);
            assert_eq!(a, -b);
        }
        assert_eq!(exact_statistics(&m, &qt, &x, &x).correlation, q(-1, 1));
        assert_eq!(exact_statistics(&m, &qt, &x, &y).correlation, q(0, 1));
    }

    #[test]
    fn sampled_correlation_follows_cosine() {
        let rho = HvDistribution::<f64>::uniform();
        for deg in [0.0f64, 30.0, 60.0, 90.0, 180.0] {
            let th = deg.to_radians();
            let s = ensemble_statistics(&SingletModel, &rho, &Setting::in_plane(0.0), &Setting::in_plane(th), 100_000, 5).unwrap();
            let tol = 3.0 * s.sigma_correlation.max(1e-12);
            assert!((s.correlation + th.cos()).abs() <= tol, "{deg}: {}", s.correlation);
            assert!((s.p_plus_a - 0.5).abs() <= 3.0 * s.sigma_p_a);
            assert!((s.p_plus_b - 0.5).abs() <= 3.0 * s.sigma_p_b);
        }
    }

    #[test]
    fn concentrated_distribution_fixes_b() {
        let rho = HvDistribution::new(vec![(Rect::new(0.0, 0.5, 0.0, 1.0), 1.0)]).unwrap();
        let s = ensemble_statistics(&SingletModel, &rho, &Setting::in_plane(0.0), &Setting::in_plane(1.0), 10_000, 1).unwrap();
        assert_eq!(s.p_plus_b, 0.0);
    }

    #[test]
    fn biased_distribution_breaks_the_cosine() {
        let rho = HvDistribution::new(vec![(Rect::new(q(0, 1), q(1, 1), q(0, 1), q(1, 2)), q(2, 1))]).unwrap();
        let a = rational_setting(q(0, 1));
        let b = rational_setting(q(1, 2));
        let exact = exact_statistics(&SingletModel, &rho, &a, &b);
        // q = 1/5 < 1/2, so P(σ_A = σ_B) = 2q and ⟨σ_Aσ_B⟩ = 4q − 1
        assert_eq!(exact.correlation, q(-1, 5));
        assert_ne!(exact.correlation, -a.dot(&b));
        let rf = HvDistribution::new(vec![(Rect::new(0.0, 1.0, 0.0, 0.5), 2.0)]).unwrap();
        let s = ensemble_statistics(&SingletModel, &rf, &Setting([1.0, 0.0, 0.0]), &Setting([0.6, 0.8, 0.0]), 100_000, 2).unwrap();
        assert!((s.correlation + 0.2f64).abs() < 3.0 * s.sigma_correlation);
    }

    #[test]
    fn doubled_half_square_gives_unequal_transition_measures() {
        let rho = heavier_right();
        let a = rational_setting(q(0, 1));
        let (b, b2) = (rational_setting(q(1, 3)), rational_setting(q(2, 1)));
        let rep = transition_sets(&SingletModel, &a, &b, &b2, &rho);
        assert_eq!(rep.mu_qt_minus_to_plus, rep.mu_qt_plus_to_minus);
        assert_eq!(rep.mu_rho_minus_to_plus, q(2, 1) * rep.mu_rho_plus_to_minus);
        let before = exact_statistics(&SingletModel, &rho, &a, &b).p_plus_a;
        let after = exact_statistics(&SingletModel, &rho, &a, &b2).p_plus_a;
        assert_eq!(after - before, rep.marginal_shift);
        assert!(rep.marginal_shift > q(0, 1));

        let rf = HvDistribution::new(vec![(Rect::new(0.0, 0.5, 0.0, 1.0), 1.0), (Rect::new(0.5, 1.0, 0.0, 1.0), 2.0)]).unwrap();
        let to_f = |s: Setting<Q>| Setting(s.0.map(|c| *c.numer() as f64 / *c.denom() as f64));
        let n = 200_000;
        let s1 = ensemble_statistics(&SingletModel, &rf, &to_f(a), &to_f(b), n, 8).unwrap();
        let s2 = ensemble_statistics(&SingletModel, &rf, &to_f(a), &to_f(b2), n, 9).unwrap();
        let shift = *rep.marginal_shift.numer() as f64 / *rep.marginal_shift.denom() as f64;
        let sigma = (s1.sigma_p_a.powi(2) + s2.sigma_p_a.powi(2)).sqrt();
        assert!((s2.p_plus_a - s1.p_plus_a - shift).abs() < 3.0 * sigma);
    }

    #[test]
    fn unchanged_setting_has_empty_sets() {
        let a = rational_setting(q(1, 5));
        let rep = transition_sets(&SingletModel, &a, &a, &a, &heavier_right());
        assert!(rep.minus_to_plus.is_empty() && rep.plus_to_minus.is_empty());
        assert_eq!(rep.marginal_shift, q(0, 1));
    }

    #[test]
    fn sampling_is_thread_count_independent() {
        let rho = HvDistribution::<f64>::uniform();
        let run = || ensemble_statistics(&SingletModel, &rho, &Setting::in_plane(0.0), &Setting::in_plane(0.7), 50_000, 3).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(run);
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(run);
        assert_eq!(one, four);
    }

    proptest! {
        #[test]
        fn detailed_balance_is_exact(ta in -20i64..20, tb in -20i64..20, tc in -20i64..20, d in 1i64..8) {
            let (a, b, c) = (rational_setting(q(ta, d)), rational_setting(q(tb, d)), rational_setting(q(tc, d)));
            let qt = HvDistribution::uniform();
            let rep = transition_sets(&SingletModel, &a, &b, &c, &qt);
            prop_assert_eq!(rep.mu_qt_minus_to_plus, rep.mu_qt_plus_to_minus);
            prop_assert_eq!(rep.marginal_shift, q(0, 1));
            let before = exact_statistics(&SingletModel, &qt, &a, &b);
            let after = exact_statistics(&SingletModel, &qt, &a, &c);
            prop_assert_eq!(before.p_plus_a, q(1, 2));
            prop_assert_eq!(after.p_plus_a, q(1, 2));
            prop_assert_eq!(before.correlation, -a.dot(&b));
            let other = transition_sets(&SingletModel, &a, &b, &c, &heavier_right());
            prop_assert_eq!(rep.minus_to_plus, other.minus_to_plus);
            prop_assert_eq!(rep.plus_to_minus, other.plus_to_minus);
        }

        #[test]
        fn outcomes_are_deterministic(l1 in 0.0f64..1.0, l2 in 0.0f64..1.0, th in 0.0f64..6.3) {
            let (a, b) = (Setting::in_plane(0.3), Setting::in_plane(th));
            prop_assert_eq!(SingletModel.outcomes(&a, &b, &[l1, l2]), SingletModel.outcomes(&a, &b, &[l1, l2]));
        }
    }
}
