use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::FftNum;
use serde::Serialize;
use statrs::function::erf::erfc;

use super::SubquantumError;
use crate::pilotwave::PilotwaveError;
use crate::pilotwave::{integrate_trajectory, Tolerances, MAX_FAILURE_FRACTION};
use crate::rng;
use crate::scalar::{sq, Real};
use crate::wavefield::{Boundary, GridAxis, GridField, GridHamiltonian, GridWaveFunction};

/// Change made to particle B's Hamiltonian at `t = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Quench<T> {
    /// `Ĥ_B′ = Ĥ_B`.
    None,
    /// B's kinetic term `p_B²/2m_B` becomes `p_B²/2m_B′`.
    Mass { mass_b: T },
    /// A potential `slope · x_B` is switched on.
    LinearPotential { slope: T },
}

/// Hidden-variable distribution at `t = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialEnsemble<T> {
    Equilibrium,
    /// `|Ψ₀|²` translated by `shift` along `x_B`.
    ShiftedB {
        shift: T,
    },
}

/// Two particles in independent harmonic wells, entangled through the
/// correlated Gaussian `Ψ₀ ∝ exp(−(x_A² + x_B² + 2γ x_A x_B)/2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalingConfig<T> {
    pub gamma: T,
    pub omega: T,
    pub masses: [T; 2],
    /// Periodic grid on `[−half_width, half_width)²`.
    pub half_width: T,
    pub grid_points: usize,
    pub dt: T,
    pub steps_per_snapshot: usize,
    pub quench: Quench<T>,
    pub initial: InitialEnsemble<T>,
    pub probe_times: Vec<T>,
    pub n_samples: usize,
    pub seed: u64,
    /// Bins for `Δp_A`; the first and last are open-ended.
    pub bins: usize,
    pub bin_range: (T, T),
    /// Gaussian kernel width used to spread each sample over the bins.
    pub bandwidth: T,
    pub tolerances: Tolerances<T>,
}

impl<T: Real> SignalingConfig<T> {
    /// Mass quench `m_B′ = m_B/2` on a 128² grid, probed at five times
    /// log-spaced over a decade.
    pub fn standard(initial: InitialEnsemble<T>, quench: Quench<T>, n_samples: usize, seed: u64) -> Self {
        let probe_times = (0..5).map(|k| T::lit(0.02 * 10f64.powf(k as f64 / 4.0))).collect();
        Self {
            gamma: T::lit(0.5),
            omega: T::one(),
            masses: [T::one(), T::one()],
            half_width: T::lit(8.0),
            grid_points: 128,
            dt: T::lit(1e-3),
            steps_per_snapshot: 5,
            quench,
            initial,
            probe_times,
            n_samples,
            seed,
            bins: 24,
            bin_range: (T::lit(-3.0), T::lit(3.0)),
            bandwidth: T::lit(0.05),
            tolerances: Tolerances::default(),
        }
    }

    fn validate(&self) -> Result<(), SubquantumError> {
        let bad = |m: &str| Err(SubquantumError::InvalidConfig(m.into()));
        if !(self.gamma.abs() < T::one()) {
            return bad("|gamma| must be below 1");
        }
        if self.probe_times.is_empty() || self.probe_times.iter().any(|t| !(*t > T::zero())) {
            return bad("probe times must be positive");
        }
        if self.probe_times.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("probe times must increase");
        }
        if self.bins < 2 || !(self.bin_range.1 > self.bin_range.0) || !(self.bandwidth > T::zero()) {
            return bad("need >= 2 bins, an increasing range and a positive bandwidth");
        }
        if self.n_samples < 2 {
            return bad("need at least two samples");
        }
        if let Quench::Mass { mass_b } = self.quench {
            if !(mass_b > T::zero()) {
                return bad("quenched mass must be positive");
            }
        }
        Ok(())
    }
}

/// Normalized `|Ψ₀(x_A, x_B)|²`.
pub fn correlated_gaussian_density<T: Real>(x: &[T; 2], gamma: T) -> T {
    let det = T::lit(4.0) * (T::one() - sq(gamma));
    det.sqrt() / (T::lit(2.0) * T::PI()) * (-(sq(x[0]) + sq(x[1])) - T::lit(2.0) * gamma * x[0] * x[1]).exp()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeResult<T> {
    pub t: T,
    /// Nominal bin centres (the outer bins are open-ended).
    pub centers: Vec<T>,
    /// `p_A(quenched) − p_A(unquenched)` per bin.
    pub delta_p: Vec<T>,
    pub sigma: Vec<T>,
    /// `(Σ Δp²)^{1/2}`
    pub norm: T,
    pub chi2: T,
    pub dof: usize,
    /// `Σ Δp`, zero up to rounding.
    pub integral: T,
    /// Mean displacement of particle A caused by the quench.
    pub mean_shift_a: T,
    /// `χ²/dof` is within `1 + 3(2/dof)^{1/2}`.
    pub consistent_with_zero: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SignalingReport<T> {
    pub probes: Vec<ProbeResult<T>>,
    /// Slope of `ln ‖Δp_A‖` against `ln t`, when every norm is positive.
    pub exponent: Option<T>,
    pub exponent_stderr: Option<T>,
    pub all_consistent_with_zero: bool,
    pub failed: usize,
}

fn normal_cdf<T: Real>(z: T) -> T {
    T::lit(0.5 * erfc(-z.to_f64_lossy() / std::f64::consts::SQRT_2))
}

fn bin_masses<T: Real>(x: T, edges: &[T], h: T, out: &mut [T]) {
    let mut prev = T::zero();
    for (k, e) in edges.iter().enumerate() {
        let c = normal_cdf((*e - x) / h);
        out[k] = c - prev;
        prev = c;
    }
    out[edges.len()] = T::one() - prev;
}

/// Propagates one ensemble under `Ĥ` and under the quenched `Ĥ′` with
/// common initial points, and reports the change `Δp_A` of A's marginal.
pub fn signaling_experiment<T: Real + FftNum>(cfg: &SignalingConfig<T>) -> Result<SignalingReport<T>, SubquantumError> {
    cfg.validate()?;
    let axis = GridAxis::new(-cfg.half_width, cfg.half_width, cfg.grid_points);
    let gamma = cfg.gamma;
    let psi0 = GridWaveFunction::from_fn(&[axis, axis], Boundary::Periodic, |x| {
        Complex::new((-(sq(x[0]) + sq(x[1]) + T::lit(2.0) * gamma * x[0] * x[1]) / T::lit(2.0)).exp(), T::zero())
    })?
    .with_masses(cfg.masses);
    psi0.check_resolved(T::lit(crate::wavefield::RESOLUTION_TOLERANCE))?;

    let w2 = sq(cfg.omega);
    let m = cfg.masses;
    let base = GridHamiltonian::from_fn(&psi0, m, |x| T::lit(0.5) * w2 * (m[0] * sq(x[0]) + m[1] * sq(x[1])));
    let quenched = match cfg.quench {
        Quench::None => base.clone(),
        Quench::Mass { mass_b } => GridHamiltonian { masses: [m[0], mass_b], ..base.clone() },
        Quench::LinearPotential { slope } => {
            let mut h = base.clone();
            for (i, v) in h.potential.iter_mut().enumerate() {
                *v += slope * psi0.node(i)[1];
            }
            h
        }
    };
    let t_max = *cfg.probe_times.last().unwrap();
    let spp = cfg.steps_per_snapshot.max(1);
    let snaps = (t_max / (cfg.dt * T::of_usize(spp))).ceil().to_usize().unwrap_or(1).max(1);
    let field_u = GridField::record(&psi0, &base, cfg.dt, spp, snaps)?;
    let field_q = GridField::record(&psi0, &quenched, cfg.dt, spp, snaps)?;

    let var = T::one() / (T::lit(2.0) * (T::one() - sq(gamma)));
    let sd = var.sqrt();
    let rho = -gamma;
    let shift = match cfg.initial {
        InitialEnsemble::Equilibrium => T::zero(),
        InitialEnsemble::ShiftedB { shift } => shift,
    };
    type Paths<T> = Result<(Vec<T>, Vec<T>), PilotwaveError>;
    let paths: Vec<Paths<T>> = (0..cfg.n_samples)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(cfg.seed, i as u64);
            let z1: f64 = r.sample(StandardNormal);
            let z2: f64 = r.sample(StandardNormal);
            let (z1, z2) = (T::lit(z1), T::lit(z2));
            let x0 = [sd * z1, sd * (rho * z1 + (T::one() - sq(rho)).sqrt() * z2) + shift];
            let a = integrate_trajectory(&field_u, x0, T::zero(), t_max, &cfg.tolerances, &cfg.probe_times)?;
            let b = integrate_trajectory(&field_q, x0, T::zero(), t_max, &cfg.tolerances, &cfg.probe_times)?;
            Ok((a.positions[1..].iter().map(|p| p[0]).collect(), b.positions[1..].iter().map(|p| p[0]).collect()))
        })
        .collect();
    let failed = paths.iter().filter(|p| p.is_err()).count();
    if failed as f64 > MAX_FAILURE_FRACTION * cfg.n_samples as f64 {
        return Err(PilotwaveError::ExcessFailures { failed, total: cfg.n_samples }.into());
    }
    let paths: Vec<(Vec<T>, Vec<T>)> = paths.into_iter().filter_map(Result::ok).collect();
    let n = paths.len();

    let (lo, hi) = cfg.bin_range;
    let width = (hi - lo) / T::of_usize(cfg.bins);
    let edges: Vec<T> = (1..cfg.bins).map(|k| lo + width * T::of_usize(k)).collect();
    let centers: Vec<T> = (0..cfg.bins).map(|k| lo + width * (T::of_usize(k) + T::lit(0.5))).collect();
    let nf = T::of_usize(n);

    let mut probes = Vec::with_capacity(cfg.probe_times.len());
    for (k, &t) in cfg.probe_times.iter().enumerate() {
        let mut sum = vec![T::zero(); cfg.bins];
        let mut sum2 = vec![T::zero(); cfg.bins];
        let mut shift_a = T::zero();
        let mut mu = vec![T::zero(); cfg.bins];
        let mut mq = vec![T::zero(); cfg.bins];
        for (u, q) in &paths {
            bin_masses(u[k], &edges, cfg.bandwidth, &mut mu);
            bin_masses(q[k], &edges, cfg.bandwidth, &mut mq);
            for b in 0..cfg.bins {
                let d = mq[b] - mu[b];
                sum[b] += d;
                sum2[b] += d * d;
            }
            shift_a += q[k] - u[k];
        }
        let delta_p: Vec<T> = sum.iter().map(|s| *s / nf).collect();
        let sigma: Vec<T> =
            sum2.iter().zip(&delta_p).map(|(s2, m)| ((*s2 / nf - sq(*m)).max(T::zero()) / (nf - T::one())).sqrt()).collect();
        let mut chi2 = T::zero();
        let mut used = 0usize;
        for (d, s) in delta_p.iter().zip(&sigma) {
            if *s > T::zero() {
                chi2 += sq(*d / *s);
                used += 1;
            }
        }
        // One linear constraint: the bins sum to zero.
        let dof = used.saturating_sub(1).max(1);
        let dof_t = T::of_usize(dof);
        let consistent = chi2 / dof_t <= T::one() + T::lit(3.0) * (T::lit(2.0) / dof_t).sqrt();
        probes.push(ProbeResult {
            t,
            centers: centers.clone(),
            norm: delta_p.iter().map(|d| sq(*d)).sum::<T>().sqrt(),
            integral: delta_p.iter().copied().sum(),
            delta_p,
            sigma,
            chi2,
            dof,
            mean_shift_a: shift_a / nf,
            consistent_with_zero: consistent,
        });
    }

    let (exponent, stderr) = power_law_slope(&probes);
    Ok(SignalingReport {
        all_consistent_with_zero: probes.iter().all(|p| p.consistent_with_zero),
        probes,
        exponent,
        exponent_stderr: stderr,
        failed,
    })
}

fn power_law_slope<T: Real>(probes: &[ProbeResult<T>]) -> (Option<T>, Option<T>) {
    if probes.len() < 2 || probes.iter().any(|p| !(p.norm > T::zero())) {
        return (None, None);
    }
    let pts: Vec<(T, T)> = probes.iter().map(|p| (p.t.ln(), p.norm.ln())).collect();
    let n = T::of_usize(pts.len());
    let mx = pts.iter().map(|p| p.0).sum::<T>() / n;
    let my = pts.iter().map(|p| p.1).sum::<T>() / n;
    let sxx: T = pts.iter().map(|p| sq(p.0 - mx)).sum();
    let sxy: T = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let stderr = if pts.len() > 2 {
        let res: T = pts.iter().map(|p| sq(p.1 - my - slope * (p.0 - mx))).sum();
        Some((res / (n - T::lit(2.0)) / sxx).sqrt())
    } else {
        None
    };
    (Some(slope), stderr)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_is_normalized() {
        let h = 0.02;
        let mut s = 0.0;
        for i in -400..400 {
            for j in -400..400 {
                s += correlated_gaussian_density(&[i as f64 * h, j as f64 * h], 0.5) * h * h;
            }
        }
        assert!((s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn open_bins_sum_to_one() {
        let edges = [-1.0, 0.0, 1.0];
        let mut out = [0.0; 4];
        bin_masses(0.3, &edges, 0.1, &mut out);
        assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(out[2] > 0.99);
    }

    fn small(initial: InitialEnsemble<f64>, quench: Quench<f64>) -> SignalingConfig<f64> {
        SignalingConfig { grid_points: 64, n_samples: 2000, ..SignalingConfig::standard(initial, quench, 2000, 4) }
    }

    #[test]
    fn unchanged_hamiltonian_gives_exactly_zero() {
        let rep = signaling_experiment(&small(InitialEnsemble::ShiftedB { shift: 0.5 }, Quench::None)).unwrap();
        for p in &rep.probes {
            assert!(p.delta_p.iter().all(|d| *d == 0.0));
            assert_eq!(p.norm, 0.0);
        }
        assert!(rep.exponent.is_none());
    }

    #[test]
    fn nonequilibrium_signal_grows_as_t_squared() {
        let rep = signaling_experiment(&small(InitialEnsemble::ShiftedB { shift: 0.5 }, Quench::Mass { mass_b: 0.5 })).unwrap();
        let e = rep.exponent.unwrap();
        assert!((e - 2.0).abs() < 0.2, "exponent {e}");
        for p in &rep.probes {
            assert!(p.integral.abs() < 1e-10);
            // mean displacement ≈ ½(m/m′ − 1) γ d t²
            let expected = 0.125 * p.t * p.t;
            assert!((p.mean_shift_a / expected - 1.0).abs() < 0.2, "t={} shift {}", p.t, p.mean_shift_a);
        }
    }

    fn larger(initial: InitialEnsemble<f64>, quench: Quench<f64>) -> SignalingConfig<f64> {
        SignalingConfig { grid_points: 64, ..SignalingConfig::standard(initial, quench, 4000, 9) }
    }

    #[test]
    fn equilibrium_shows_no_signal() {
        let rep = signaling_experiment(&larger(InitialEnsemble::Equilibrium, Quench::Mass { mass_b: 0.5 })).unwrap();
        assert!(rep.all_consistent_with_zero);
    }

    #[test]
    fn linear_quench_leaves_a_untouched() {
        // For a Gaussian in harmonic wells a linear kick only displaces B's
        // conditional wave function, and B's trajectory moves with it.
        let init = InitialEnsemble::ShiftedB { shift: 0.5 };
        let mass = signaling_experiment(&larger(init, Quench::Mass { mass_b: 0.5 })).unwrap();
        let mut cfg = larger(init, Quench::LinearPotential { slope: 1.0 });
        cfg.tolerances = Tolerances::default().with_rtol(1e-12);
        let lin = signaling_experiment(&cfg).unwrap();
        for (l, m) in lin.probes.iter().zip(&mass.probes) {
            assert!(l.mean_shift_a.abs() < 1e-4 * m.mean_shift_a.abs(), "t={} {} vs {}", l.t, l.mean_shift_a, m.mean_shift_a);
            assert!(l.norm < 1e-4 * m.norm);
        }
    }
}
