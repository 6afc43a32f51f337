use num_traits::Float;

use super::PilotwaveError;
use crate::scalar::Real;
use crate::wavefield::{DomainKind, GuidingField};

/// Tolerance on wall excursions before a run is failed.
const EXCURSION_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances<T> {
    pub rtol: T,
    pub atol: T,
    /// Upper bound on `|Δx|` per step; `None` uses 1% of the shortest domain side.
    pub max_displacement: Option<T>,
    /// Smallest admissible step before the run is declared failed.
    pub min_step: T,
    pub max_steps: usize,
}

impl<T: Real> Default for Tolerances<T> {
    fn default() -> Self {
        Self { rtol: T::lit(1e-8), atol: T::lit(1e-10), max_displacement: None, min_step: T::lit(1e-12), max_steps: 2_000_000 }
    }
}

impl<T: Real> Tolerances<T> {
    pub fn with_rtol(mut self, rtol: T) -> Self {
        self.rtol = rtol;
        self.atol = rtol * T::lit(1e-2);
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T> {
    pub initial: [T; 2],
    /// Recorded times, starting with `t0`.
    pub times: Vec<T>,
    pub positions: Vec<[T; 2]>,
    /// `ln J` of the flow map since `t0`; zero when `∇·v` is unavailable.
    pub log_jacobian: Vec<T>,
    /// `|Ψ|²` at each recorded point.
    pub densities: Vec<T>,
    pub node_encounters: usize,
    pub steps: usize,
    pub rejected: usize,
}

impl<T: Real> Trajectory<T> {
    pub fn final_position(&self) -> [T; 2] {
        *self.positions.last().expect("trajectory has a start point")
    }

    /// `f(t_k)/f(t0)` from the flow Jacobian; 1 for an exact integration.
    pub fn f_ratio(&self, k: usize) -> T {
        self.densities[0] / (self.log_jacobian[k].exp() * self.densities[k])
    }

    /// Largest `|f(t)/f(t0) − 1|` over the recorded points.
    pub fn max_f_drift(&self) -> T {
        (0..self.times.len()).map(|k| Float::abs(self.f_ratio(k) - T::one())).fold(T::zero(), T::max)
    }

    /// Writes `t, x[, y], f` rows, with `f0` the label at `t0`.
    pub fn write_csv<W: std::io::Write>(&self, dims: usize, f0: T, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t", "x"];
        if dims == 2 {
            header.push("y");
        }
        header.push("f");
        w.write_record(&header)?;
        for k in 0..self.times.len() {
            let mut row = vec![self.times[k].to_f64_lossy().to_string()];
            for d in 0..dims {
                row.push(self.positions[k][d].to_f64_lossy().to_string());
            }
            row.push((f0 * self.f_ratio(k)).to_f64_lossy().to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

type State<T> = [T; 3];

enum Rhs<T> {
    Ok(State<T>, T),
    Node,
}

struct System<'a, T: Real, F: GuidingField<T> + ?Sized> {
    field: &'a F,
    dims: usize,
    threshold: T,
    evals: usize,
}

impl<T: Real, F: GuidingField<T> + ?Sized> System<'_, T, F> {
    fn eval(&mut self, y: &State<T>, t: T) -> Rhs<T> {
        self.evals += 1;
        let s = self.field.sample(&[y[0], y[1]], t);
        if !(s.density >= self.threshold) {
            return Rhs::Node;
        }
        let mut d = [T::zero(); 3];
        d[..self.dims].copy_from_slice(&s.velocity[..self.dims]);
        d[2] = s.divergence.unwrap_or(T::zero());
        Rhs::Ok(d, s.density)
    }
}

/// Integrates `Ẋ = v(X, t)` from `(x0, t0)` to `t_end` with the Dormand–Prince
/// 4(5) pair, recording the configuration at each of `record_times` that lies
/// in `(t0, t_end]` and at `t_end`.
pub fn integrate_trajectory<T: Real, F: GuidingField<T> + ?Sized>(
    field: &F,
    x0: [T; 2],
    t0: T,
    t_end: T,
    tol: &Tolerances<T>,
    record_times: &[T],
) -> Result<Trajectory<T>, PilotwaveError> {
    let dims = field.dims();
    let domain = field.domain();
    let lossy = |x: &[T; 2]| x[..dims].iter().map(|v| v.to_f64_lossy()).collect::<Vec<_>>();
    let bounded = domain.kind == DomainKind::Box;
    if bounded && !domain.contains(&x0, dims, T::zero()) {
        return Err(PilotwaveError::OutsideDomain(lossy(&x0)));
    }
    let mut sys = System { field, dims, threshold: field.node_threshold(), evals: 0 };
    let max_disp = tol.max_displacement.unwrap_or_else(|| {
        if bounded {
            (0..dims).map(|k| domain.upper[k] - domain.lower[k]).fold(T::infinity(), T::min) * T::lit(0.01)
        } else {
            T::infinity()
        }
    });

    let mut y: State<T> = [x0[0], x0[1], T::zero()];
    let mut t = t0;
    let (mut k1, rho0) = match sys.eval(&y, t) {
        Rhs::Ok(d, rho) => (d, rho),
        Rhs::Node => return Err(PilotwaveError::StartAtNode(lossy(&x0))),
    };
    let mut traj = Trajectory {
        initial: x0,
        times: vec![t0],
        positions: vec![x0],
        log_jacobian: vec![T::zero()],
        densities: vec![rho0],
        node_encounters: 0,
        steps: 0,
        rejected: 0,
    };
    let mut targets: Vec<T> = record_times.iter().copied().filter(|&s| s > t0 && s < t_end).collect();
    targets.push(t_end);
    if !(t_end > t0) {
        return Ok(traj);
    }

    let span = t_end - t0;
    let mut h = span.min(T::lit(1e-3));
    let mut in_node = false;
    let fifth = T::lit(0.2);
    let safety = T::lit(0.9);
    for target in targets {
        while t < target {
            if traj.steps + traj.rejected >= tol.max_steps {
                return Err(PilotwaveError::TooManySteps(tol.max_steps));
            }
            let speed = (0..dims).map(|k| k1[k] * k1[k]).sum::<T>().sqrt();
            if speed * h > max_disp {
                h = max_disp / speed;
            }
            let h_free = h;
            let mut last = false;
            if t + h >= target {
                h = target - t;
                last = true;
            }
            if h < tol.min_step && !last {
                return Err(PilotwaveError::StepUnderflow { t: t.to_f64_lossy(), position: lossy(&[y[0], y[1]]) });
            }

            let mut k = [[T::zero(); 3]; 7];
            k[0] = k1;
            let mut node = false;
            let mut rho_new = T::zero();
            for s in 1..7 {
                let mut ys = y;
                for (i, yi) in ys.iter_mut().enumerate() {
                    let mut acc = T::zero();
                    for (j, kj) in k.iter().enumerate().take(s) {
                        acc += T::lit(A[s][j]) * kj[i];
                    }
                    *yi += h * acc;
                }
                match sys.eval(&ys, t + T::lit(C[s]) * h) {
                    Rhs::Ok(d, rho) => {
                        k[s] = d;
                        rho_new = rho;
                    }
                    Rhs::Node => {
                        node = true;
                        break;
                    }
                }
            }
            if node {
                if !in_node {
                    traj.node_encounters += 1;
                    in_node = true;
                }
                traj.rejected += 1;
                h *= T::lit(0.25);
                if h < tol.min_step {
                    return Err(PilotwaveError::StepUnderflow { t: t.to_f64_lossy(), position: lossy(&[y[0], y[1]]) });
                }
                continue;
            }
            in_node = false;

            let mut y_new = y;
            let mut err = T::zero();
            for i in 0..3 {
                if i >= dims && i < 2 {
                    continue;
                }
                let mut inc = T::zero();
                let mut e = T::zero();
                for j in 0..7 {
                    if j < 6 {
                        inc += T::lit(A[6][j]) * k[j][i];
                    }
                    e += T::lit(E[j]) * k[j][i];
                }
                y_new[i] = y[i] + h * inc;
                let scale = tol.atol + tol.rtol * Float::abs(y[i]).max(Float::abs(y_new[i]));
                err = err.max(Float::abs(h * e) / scale);
            }

            if err <= T::one() {
                t = if last { target } else { t + h };
                y = y_new;
                k1 = k[6];
                traj.steps += 1;
                if bounded && !domain.contains(&[y[0], y[1]], dims, T::lit(EXCURSION_TOL)) {
                    return Err(PilotwaveError::Excursion(lossy(&[y[0], y[1]])));
                }
                let grow = if err > T::zero() { safety * err.powf(-fifth) } else { T::lit(5.0) };
                let next = h * grow.min(T::lit(5.0)).max(fifth);
                // A step truncated to land on a record time says nothing
                // about the admissible step size.
                h = if last { h_free.max(next) } else { next };
                if last {
                    traj.times.push(t);
                    traj.positions.push([y[0], y[1]]);
                    traj.log_jacobian.push(y[2]);
                    traj.densities.push(rho_new);
                }
            } else {
                traj.rejected += 1;
                h *= (safety * err.powf(-fifth)).max(fifth);
            }
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavefield::{build_box_superposition, EigenmodeWaveFunction, FreeGaussianPacket, Phases};
    use num_complex::Complex;

    #[test]
    fn ground_state_particle_is_at_rest() {
        let wf = EigenmodeWaveFunction::<f64>::single_mode(&[1, 1], 1.0).unwrap();
        let tr = integrate_trajectory(&wf, [0.3, 0.7], 0.0, 2.0, &Tolerances::default(), &[0.5, 1.0]).unwrap();
        assert_eq!(tr.times, vec![0.0, 0.5, 1.0, 2.0]);
        for p in &tr.positions {
            assert!((p[0] - 0.3).abs() < 1e-14 && (p[1] - 0.7).abs() < 1e-14);
        }
    }

    #[test]
    fn two_mode_trajectory_matches_tight_reference() {
        let s = 0.5f64.sqrt();
        let wf =
            build_box_superposition(&[(vec![1], Complex::new(s, 0.0)), (vec![2], Complex::new(0.0, s))], 1.0, Phases::Explicit).unwrap();
        let loose = Tolerances::default();
        let tight = Tolerances::default().with_rtol(1e-10);
        for &x0 in &[0.2, 0.45, 0.8] {
            let a = integrate_trajectory(&wf, [x0, 0.0], 0.0, 1.0, &loose, &[]).unwrap();
            let b = integrate_trajectory(&wf, [x0, 0.0], 0.0, 1.0, &tight, &[]).unwrap();
            let d = (a.final_position()[0] - b.final_position()[0]).abs();
            assert!(d < 1e-5, "x0={x0}: {d}");
            assert!(a.max_f_drift() < 1e-6, "drift {}", a.max_f_drift());
        }
    }

    #[test]
    fn free_packet_flow_is_a_dilation() {
        // X(t) = X0 · σ(t)/σ0 for a packet at rest
        let p = FreeGaussianPacket::new(0.0, 1.0, 0.0, 1.0);
        let tr = integrate_trajectory(&p, [0.8, 0.0], 0.0, 3.0, &Tolerances::default(), &[]).unwrap();
        let expected = 0.8 * p.width(3.0);
        assert!((tr.final_position()[0] - expected).abs() < 1e-7);
        assert!((tr.log_jacobian[1] - p.width(3.0).ln()).abs() < 1e-7);
    }

    #[test]
    fn start_on_node_is_rejected() {
        let wf = EigenmodeWaveFunction::<f64>::single_mode(&[2], 1.0).unwrap();
        assert!(matches!(
            integrate_trajectory(&wf, [0.5, 0.0], 0.0, 1.0, &Tolerances::default(), &[]),
            Err(PilotwaveError::StartAtNode(_))
        ));
        assert!(matches!(
            integrate_trajectory(&wf, [1.5, 0.0], 0.0, 1.0, &Tolerances::default(), &[]),
            Err(PilotwaveError::OutsideDomain(_))
        ));
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let wf = EigenmodeWaveFunction::<f64>::equal_weight_grid(2, 2, 1.0, 1).unwrap();
        let tr = integrate_trajectory(&wf, [0.3, 0.4], 0.0, 0.2, &Tolerances::default(), &[0.1]).unwrap();
        let mut out = Vec::new();
        tr.write_csv(2, 1.0, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x,y,f");
        assert_eq!(lines.len(), 4);
    }
}
