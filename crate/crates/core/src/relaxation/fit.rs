use serde::Serialize;

use crate::scalar::{sq, Real};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExpFit<T> {
    pub h0: T,
    pub t_c: T,
    /// Coefficient of determination on the linear scale.
    pub r2: T,
    /// Number of leading points used.
    pub points: usize,
}

/// Least-squares fit of `h(t) ≈ h0 e^{−t/t_c}` over the leading points,
/// stopping before `h` first drops below `window_fraction · h(t₀)`.
pub fn fit_exponential<T: Real>(times: &[T], h: &[T], window_fraction: T) -> Option<ExpFit<T>> {
    let first = *h.first()?;
    if !(first > T::zero()) {
        return None;
    }
    let end = h.iter().position(|&v| v < window_fraction * first).unwrap_or(h.len());
    if end < 3 {
        return None;
    }
    let (t, y) = (&times[..end], &h[..end]);
    let t0 = t[0];

    // Start from a log-linear fit on the positive points.
    let pts: Vec<(T, T)> = t.iter().zip(y).filter(|(_, &v)| v > T::zero()).map(|(&a, &b)| (a - t0, b.ln())).collect();
    let n = T::of_usize(pts.len());
    let (sx, sy) = pts.iter().fold((T::zero(), T::zero()), |(a, b), (x, l)| (a + *x, b + *l));
    let (mx, my) = (sx / n, sy / n);
    let sxx: T = pts.iter().map(|(x, _)| sq(*x - mx)).sum();
    let sxy: T = pts.iter().map(|(x, l)| (*x - mx) * (*l - my)).sum();
    let slope = if sxx > T::zero() { sxy / sxx } else { -T::one() };
    let mut a = (my - slope * mx).exp();
    let mut k = (-slope).max(T::lit(1e-12));

    // Levenberg–Marquardt on the linear-scale residuals.
    let sse = |a: T, k: T| -> T { t.iter().zip(y).map(|(&ti, &yi)| sq(yi - a * (-k * (ti - t0)).exp())).sum() };
    let mut mu = T::lit(1e-3);
    let mut cur = sse(a, k);
    for _ in 0..200 {
        let (mut jtj, mut jtr) = ([[T::zero(); 2]; 2], [T::zero(); 2]);
        for (&ti, &yi) in t.iter().zip(y) {
            let e = (-k * (ti - t0)).exp();
            let r = yi - a * e;
            let g = [e, -a * (ti - t0) * e];
            for i in 0..2 {
                jtr[i] += g[i] * r;
                for j in 0..2 {
                    jtj[i][j] += g[i] * g[j];
                }
            }
        }
        let m00 = jtj[0][0] * (T::one() + mu);
        let m11 = jtj[1][1] * (T::one() + mu);
        let det = m00 * m11 - jtj[0][1] * jtj[1][0];
        if det == T::zero() {
            break;
        }
        let da = (m11 * jtr[0] - jtj[0][1] * jtr[1]) / det;
        let dk = (m00 * jtr[1] - jtj[1][0] * jtr[0]) / det;
        let (na, nk) = (a + da, k + dk);
        let next = if nk > T::zero() { sse(na, nk) } else { T::infinity() };
        if next < cur {
            let done = (cur - next) <= T::lit(1e-15) * cur;
            a = na;
            k = nk;
            cur = next;
            mu = mu * T::lit(0.3);
            if done {
                break;
            }
        } else {
            mu = mu * T::lit(10.0);
            if mu > T::lit(1e12) {
                break;
            }
        }
    }
    let mean = y.iter().copied().sum::<T>() / T::of_usize(end);
    let sst: T = y.iter().map(|&v| sq(v - mean)).sum();
    let r2 = if sst > T::zero() { T::one() - cur / sst } else { T::one() };
    Some(ExpFit { h0: a, t_c: T::one() / k, r2, points: end })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_exponential() {
        let t: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let h: Vec<f64> = t.iter().map(|x| 0.7 * (-x / 0.45).exp()).collect();
        let f = fit_exponential(&t, &h, 0.05).unwrap();
        assert!((f.t_c - 0.45).abs() < 1e-8);
        assert!((f.h0 - 0.7).abs() < 1e-8);
        assert!(f.r2 > 1.0 - 1e-12);
        // window closes once h < 0.035, i.e. after t = 0.45 ln 20 ≈ 1.35
        assert_eq!(f.points, 14);
    }

    #[test]
    fn too_few_points_give_no_fit() {
        assert!(fit_exponential(&[0.0, 1.0], &[1.0, 0.5], 0.05).is_none());
        assert!(fit_exponential(&[0.0, 1.0, 2.0], &[0.0, 0.0, 0.0], 0.05).is_none());
    }
}
