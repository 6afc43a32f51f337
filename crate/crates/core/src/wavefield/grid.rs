use num_complex::Complex;
use num_traits::Float;
use rustfft::{FftNum, FftPlanner};
use serde::{Deserialize, Serialize};

use super::fft::{for_each_line, AxisTransform};
use super::{Domain, DomainKind, FieldSample, GuidingField, WavefieldError, NODE_THRESHOLD_FACTOR};
use crate::scalar::{sq, Real};

/// Fraction of the highest wavenumbers (per axis) inspected by the
/// resolution check.
const TAIL_BAND: f64 = 0.2;

/// Largest spectral power fraction tolerated in the tail band before a
/// state is declared unresolved.
pub const RESOLUTION_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Nodes at `lower + j·dx`, `j = 0..n`, with `dx = (upper − lower)/n`.
    Periodic,
    /// Interior nodes at `lower + (j+1)·dx`, `dx = (upper − lower)/(n + 1)`;
    /// `Ψ = 0` on both walls.
    HardWall,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridAxis<T> {
    pub lower: T,
    pub upper: T,
    pub n: usize,
}

impl<T: Real> GridAxis<T> {
    pub fn new(lower: T, upper: T, n: usize) -> Self {
        Self { lower, upper, n }
    }

    pub fn spacing(&self, boundary: Boundary) -> T {
        let cells = match boundary {
            Boundary::Periodic => self.n,
            Boundary::HardWall => self.n + 1,
        };
        (self.upper - self.lower) / T::of_usize(cells)
    }

    fn first_node(&self, boundary: Boundary) -> T {
        match boundary {
            Boundary::Periodic => self.lower,
            Boundary::HardWall => self.lower + self.spacing(boundary),
        }
    }

    pub fn coord(&self, j: usize, boundary: Boundary) -> T {
        self.first_node(boundary) + T::of_usize(j) * self.spacing(boundary)
    }

    pub fn length(&self) -> T {
        self.upper - self.lower
    }
}

/// Complex amplitudes on a uniform 1D or 2D lattice, stored row-major
/// (the last axis varies fastest).
#[derive(Clone, Debug)]
pub struct GridWaveFunction<T> {
    dims: usize,
    axes: [GridAxis<T>; 2],
    boundary: Boundary,
    values: Vec<Complex<T>>,
    t: T,
    masses: [T; 2],
}

impl<T: Real> GridWaveFunction<T> {
    /// Samples `f` at every node and normalizes to unit discrete L2 norm.
    pub fn from_fn<F>(axes: &[GridAxis<T>], boundary: Boundary, f: F) -> Result<Self, WavefieldError>
    where
        F: Fn(&[T; 2]) -> Complex<T>,
    {
        let dims = axes.len();
        if dims != 1 && dims != 2 {
            return Err(WavefieldError::UnsupportedDimension(dims));
        }
        if axes.iter().any(|a| a.n < 2 || !(a.upper > a.lower)) {
            return Err(WavefieldError::Shape("each axis needs n >= 2 and upper > lower".into()));
        }
        let mut ax = [axes[0]; 2];
        if dims == 2 {
            ax[1] = axes[1];
        } else {
            ax[1] = GridAxis::new(T::zero(), T::one(), 1);
        }
        let mut wf = Self { dims, axes: ax, boundary, values: Vec::new(), t: T::zero(), masses: [T::one(), T::one()] };
        let values: Vec<Complex<T>> = (0..wf.len()).map(|idx| f(&wf.node(idx))).collect();
        wf.values = values;
        wf.normalize()?;
        Ok(wf)
    }

    /// Replaces the amplitudes, renormalizing them.
    pub fn with_values(&self, values: Vec<Complex<T>>) -> Result<Self, WavefieldError> {
        if values.len() != self.len() {
            return Err(WavefieldError::Shape(format!("expected {} values, got {}", self.len(), values.len())));
        }
        let mut out = self.clone();
        out.values = values;
        out.normalize()?;
        Ok(out)
    }

    pub fn with_masses(mut self, masses: [T; 2]) -> Self {
        self.masses = masses;
        self
    }

    pub fn with_time(mut self, t: T) -> Self {
        self.t = t;
        self
    }

    fn normalize(&mut self) -> Result<(), WavefieldError> {
        let n = self.norm_sqr();
        if !(n > T::zero()) || !n.is_finite() {
            return Err(WavefieldError::ZeroAmplitudes);
        }
        let inv = T::one() / n.sqrt();
        for v in &mut self.values {
            *v = *v * inv;
        }
        Ok(())
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn axes(&self) -> &[GridAxis<T>] {
        &self.axes[..self.dims]
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn time(&self) -> T {
        self.t
    }

    pub fn masses(&self) -> [T; 2] {
        self.masses
    }

    pub fn shape(&self) -> [usize; 2] {
        [self.axes[0].n, if self.dims == 2 { self.axes[1].n } else { 1 }]
    }

    pub fn len(&self) -> usize {
        let s = self.shape();
        s[0] * s[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> [T; 2] {
        [self.axes[0].spacing(self.boundary), self.axes[1].spacing(self.boundary)]
    }

    pub fn cell_volume(&self) -> T {
        let h = self.spacing();
        if self.dims == 2 {
            h[0] * h[1]
        } else {
            h[0]
        }
    }

    /// Coordinates of node `idx` (the second entry is 0 in 1D).
    pub fn node(&self, idx: usize) -> [T; 2] {
        let n1 = self.shape()[1];
        let (i, j) = (idx / n1, idx % n1);
        let mut x = [self.axes[0].coord(i, self.boundary), T::zero()];
        if self.dims == 2 {
            x[1] = self.axes[1].coord(j, self.boundary);
        }
        x
    }

    pub fn norm_sqr(&self) -> T {
        self.values.iter().map(|v| v.norm_sqr()).sum::<T>() * self.cell_volume()
    }

    pub fn density(&self) -> Vec<T> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    pub fn domain(&self) -> Domain<T> {
        Domain {
            kind: match self.boundary {
                Boundary::Periodic => DomainKind::Periodic,
                Boundary::HardWall => DomainKind::Box,
            },
            lower: [self.axes[0].lower, self.axes[1].lower],
            upper: [self.axes[0].upper, self.axes[1].upper],
        }
    }

    /// `|Ψ|²` below this value marks a node.
    pub fn node_threshold(&self) -> T {
        T::lit(NODE_THRESHOLD_FACTOR) / self.domain().volume(self.dims)
    }
}

impl<T: Real + FftNum> GridWaveFunction<T> {
    fn transforms(&self, planner: &mut FftPlanner<T>) -> Vec<AxisTransform<T>> {
        let h = self.spacing();
        (0..self.dims).map(|a| AxisTransform::new(self.axes[a].n, h[a], self.boundary, planner)).collect()
    }

    /// Spectral derivative of `data` along `axis`; the Nyquist mode is dropped.
    pub fn derivative(&self, data: &[Complex<T>], axis: usize) -> Vec<Complex<T>> {
        let mut planner = FftPlanner::new();
        let tr = AxisTransform::new(self.axes[axis].n, self.spacing()[axis], self.boundary, &mut planner);
        let mut out = data.to_vec();
        let mut buf = Vec::new();
        let nyq = tr.nyquist();
        for_each_line(&mut out, self.shape(), self.dims, axis, |line| {
            tr.forward(line, &mut buf);
            for (j, b) in buf.iter_mut().enumerate() {
                *b = if Some(j) == nyq { Complex::new(T::zero(), T::zero()) } else { *b * Complex::new(T::zero(), tr.k[j]) };
            }
            tr.inverse(&mut buf, line);
        });
        out
    }

    /// `∇Ψ` on every node.
    pub fn gradient(&self) -> [Vec<Complex<T>>; 2] {
        let gx = self.derivative(&self.values, 0);
        let gy = if self.dims == 2 { self.derivative(&self.values, 1) } else { vec![Complex::new(T::zero(), T::zero()); self.len()] };
        [gx, gy]
    }

    /// Guidance velocity `Im(∇Ψ/Ψ)/m` per node; zero at nodes of `Ψ`.
    pub fn velocity(&self) -> Vec<[T; 2]> {
        let grad = self.gradient();
        let threshold = self.node_threshold();
        self.values
            .iter()
            .enumerate()
            .map(|(i, psi)| {
                let d = psi.norm_sqr();
                let mut v = [T::zero(); 2];
                if d >= threshold {
                    for a in 0..self.dims {
                        v[a] = (grad[a][i] * psi.conj()).im / (d * self.masses[a]);
                    }
                }
                v
            })
            .collect()
    }

    /// Probability current `Im(Ψ* ∇Ψ)/m` per node.
    pub fn current(&self) -> Vec<[T; 2]> {
        let grad = self.gradient();
        self.values
            .iter()
            .enumerate()
            .map(|(i, psi)| {
                let mut j = [T::zero(); 2];
                for a in 0..self.dims {
                    j[a] = (grad[a][i] * psi.conj()).im / self.masses[a];
                }
                j
            })
            .collect()
    }

    /// Largest fraction of spectral power carried by the top wavenumbers of
    /// any axis. Small values mean the grid resolves the state.
    pub fn nyquist_tail_fraction(&self) -> T {
        let mut planner = FftPlanner::new();
        let mut worst = T::zero();
        for (a, tr) in self.transforms(&mut planner).iter().enumerate() {
            let m = tr.len();
            let cutoff = (1.0 - TAIL_BAND) * (m as f64 / 2.0);
            let mut data = self.values.clone();
            let (mut tail, mut total) = (T::zero(), T::zero());
            let mut buf = Vec::new();
            for_each_line(&mut data, self.shape(), self.dims, a, |line| {
                tr.forward(line, &mut buf);
                for (j, b) in buf.iter().enumerate() {
                    let signed = if j <= m / 2 { j as f64 } else { (m - j) as f64 };
                    let p = b.norm_sqr();
                    total += p;
                    if signed >= cutoff {
                        tail += p;
                    }
                }
            });
            if total > T::zero() {
                worst = worst.max(tail / total);
            }
        }
        worst
    }

    pub fn check_resolved(&self, tolerance: T) -> Result<(), WavefieldError> {
        let tail = self.nyquist_tail_fraction();
        if tail > tolerance {
            Err(WavefieldError::Unresolved(tail.to_f64_lossy()))
        } else {
            Ok(())
        }
    }
}

/// Potential on the grid nodes plus per-axis masses.
#[derive(Clone, Debug)]
pub struct GridHamiltonian<T> {
    pub potential: Vec<T>,
    pub masses: [T; 2],
}

impl<T: Real> GridHamiltonian<T> {
    pub fn free(wf: &GridWaveFunction<T>) -> Self {
        Self { potential: vec![T::zero(); wf.len()], masses: wf.masses() }
    }

    pub fn from_fn<F: Fn(&[T; 2]) -> T>(wf: &GridWaveFunction<T>, masses: [T; 2], v: F) -> Self {
        Self { potential: (0..wf.len()).map(|i| v(&wf.node(i))).collect(), masses }
    }

    pub fn max_abs_potential(&self) -> T {
        self.potential.iter().fold(T::zero(), |m, v| m.max(Float::abs(*v)))
    }

    /// Largest time step passing the stability check.
    pub fn dt_limit(&self) -> T {
        let vmax = self.max_abs_potential();
        if vmax > T::zero() {
            T::PI() / vmax
        } else {
            T::infinity()
        }
    }
}

/// Strang-split propagator `e^{−iV dt/2} e^{−iK dt} e^{−iV dt/2}` with the
/// kinetic factor applied in Fourier (periodic) or sine (hard-wall) space.
pub struct SplitStepPropagator<T: FftNum> {
    dims: usize,
    shape: [usize; 2],
    dt: T,
    masses: [T; 2],
    transforms: Vec<AxisTransform<T>>,
    kinetic: Vec<Vec<Complex<T>>>,
    half_potential: Vec<Complex<T>>,
}

impl<T: Real + FftNum> SplitStepPropagator<T> {
    pub fn new(wf: &GridWaveFunction<T>, ham: &GridHamiltonian<T>, dt: T) -> Result<Self, WavefieldError> {
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(WavefieldError::InvalidDt(dt.to_f64_lossy()));
        }
        if ham.potential.len() != wf.len() {
            return Err(WavefieldError::Shape(format!("potential has {} nodes, grid has {}", ham.potential.len(), wf.len())));
        }
        let limit = ham.dt_limit();
        if dt > limit {
            return Err(WavefieldError::DtTooLarge { dt: dt.to_f64_lossy(), limit: limit.to_f64_lossy() });
        }
        let mut planner = FftPlanner::new();
        let transforms = wf.transforms(&mut planner);
        let kinetic = transforms
            .iter()
            .enumerate()
            .map(|(a, tr)| {
                let scale = dt / (T::lit(2.0) * ham.masses[a]);
                tr.k.iter().map(|&k| Complex::from_polar(T::one(), -scale * k * k)).collect()
            })
            .collect();
        let half = dt / T::lit(2.0);
        let half_potential = ham.potential.iter().map(|&v| Complex::from_polar(T::one(), -v * half)).collect();
        Ok(Self { dims: wf.dims, shape: wf.shape(), dt, masses: ham.masses, transforms, kinetic, half_potential })
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    fn kick(&self, values: &mut [Complex<T>]) {
        for (v, p) in values.iter_mut().zip(&self.half_potential) {
            *v = *v * p;
        }
    }

    fn drift(&self, values: &mut [Complex<T>]) {
        let mut buf = Vec::new();
        for (a, tr) in self.transforms.iter().enumerate() {
            let phase = &self.kinetic[a];
            for_each_line(values, self.shape, self.dims, a, |line| {
                tr.forward(line, &mut buf);
                for (b, p) in buf.iter_mut().zip(phase) {
                    *b = *b * p;
                }
                tr.inverse(&mut buf, line);
            });
        }
    }

    pub fn step(&self, wf: &mut GridWaveFunction<T>) {
        self.advance(wf, 1);
    }

    pub fn advance(&self, wf: &mut GridWaveFunction<T>, n_steps: usize) {
        for _ in 0..n_steps {
            self.kick(&mut wf.values);
            self.drift(&mut wf.values);
            self.kick(&mut wf.values);
        }
        wf.t += self.dt * T::of_usize(n_steps);
        wf.masses = self.masses;
    }
}

/// Evolves `wf` by `n_steps` split-step increments of `dt` under `ham`.
///
/// The returned state carries the masses of `ham`, so guidance velocities
/// computed from it use the post-evolution Hamiltonian.
pub fn evolve_splitstep<T: Real + FftNum>(
    wf: &GridWaveFunction<T>,
    ham: &GridHamiltonian<T>,
    dt: T,
    n_steps: usize,
) -> Result<GridWaveFunction<T>, WavefieldError> {
    let prop = SplitStepPropagator::new(wf, ham, dt)?;
    let mut out = wf.clone();
    if n_steps > 0 {
        prop.advance(&mut out, n_steps);
    }
    Ok(out)
}

/// Density and velocity of a grid state, tabulated at a sequence of times
/// and interpolated bicubically (Catmull–Rom) in space, linearly in time.
#[derive(Clone, Debug)]
pub struct GridField<T> {
    dims: usize,
    axes: [GridAxis<T>; 2],
    boundary: Boundary,
    masses: [T; 2],
    threshold: T,
    times: Vec<T>,
    density: Vec<Vec<T>>,
    velocity: Vec<Vec<[T; 2]>>,
}

impl<T: Real + FftNum> GridField<T> {
    /// Builds the field from snapshots with strictly increasing times.
    pub fn from_snapshots(snapshots: &[GridWaveFunction<T>]) -> Result<Self, WavefieldError> {
        let first = snapshots.first().ok_or_else(|| WavefieldError::Shape("no snapshots".into()))?;
        if snapshots.windows(2).any(|w| !(w[1].t > w[0].t) || w[1].len() != w[0].len()) {
            return Err(WavefieldError::Shape("snapshots need matching grids and increasing times".into()));
        }
        Ok(Self {
            dims: first.dims,
            axes: first.axes,
            boundary: first.boundary,
            masses: snapshots.last().map(|s| s.masses).unwrap_or(first.masses),
            threshold: first.node_threshold(),
            times: snapshots.iter().map(|s| s.t).collect(),
            density: snapshots.iter().map(|s| s.density()).collect(),
            velocity: snapshots.iter().map(|s| s.velocity()).collect(),
        })
    }

    /// A time-independent field from a single state.
    pub fn frozen(wf: &GridWaveFunction<T>) -> Self {
        Self::from_snapshots(std::slice::from_ref(wf)).expect("single snapshot is valid")
    }

    /// Evolves `wf` under `ham`, storing `n_snapshots + 1` equally spaced
    /// snapshots `steps_per_snapshot · dt` apart (the first is `wf` itself).
    pub fn record(
        wf: &GridWaveFunction<T>,
        ham: &GridHamiltonian<T>,
        dt: T,
        steps_per_snapshot: usize,
        n_snapshots: usize,
    ) -> Result<Self, WavefieldError> {
        let prop = SplitStepPropagator::new(wf, ham, dt)?;
        let mut cur = wf.clone();
        // The guidance law after the change uses the new masses from t0 on.
        cur.masses = ham.masses;
        let mut snaps = vec![cur.clone()];
        for _ in 0..n_snapshots {
            prop.advance(&mut cur, steps_per_snapshot.max(1));
            snaps.push(cur.clone());
        }
        Self::from_snapshots(&snaps)
    }
}

impl<T: Real> GridField<T> {
    pub fn times(&self) -> &[T] {
        &self.times
    }

    fn shape(&self) -> [usize; 2] {
        [self.axes[0].n, if self.dims == 2 { self.axes[1].n } else { 1 }]
    }

    /// Stencil start index and Catmull–Rom weights along one axis.
    fn stencil(&self, axis: usize, x: T) -> ([usize; 4], [T; 4]) {
        let ax = &self.axes[axis];
        let h = ax.spacing(self.boundary);
        let n = ax.n as i64;
        let mut u = (x - ax.first_node(self.boundary)) / h;
        if self.boundary == Boundary::Periodic {
            let nn = T::of_usize(ax.n);
            u = u - (u / nn).floor() * nn;
        }
        let base = u.floor();
        let f = u - base;
        let b = base.to_i64().unwrap_or(0);
        let mut idx = [0usize; 4];
        for (s, slot) in idx.iter_mut().enumerate() {
            let j = b - 1 + s as i64;
            *slot = match self.boundary {
                Boundary::Periodic => j.rem_euclid(n) as usize,
                Boundary::HardWall => j.clamp(0, n - 1) as usize,
            };
        }
        let half = T::lit(0.5);
        let (f2, f3) = (f * f, f * f * f);
        let w = [
            half * (-f3 + T::lit(2.0) * f2 - f),
            half * (T::lit(3.0) * f3 - T::lit(5.0) * f2 + T::lit(2.0)),
            half * (T::lit(-3.0) * f3 + T::lit(4.0) * f2 + f),
            half * (f3 - f2),
        ];
        (idx, w)
    }

    fn interpolate_slice(&self, k: usize, x: &[T; 2]) -> (T, [T; 2]) {
        let n1 = self.shape()[1];
        let (ix, wx) = self.stencil(0, x[0]);
        let (iy, wy) = if self.dims == 2 { self.stencil(1, x[1]) } else { ([0; 4], [T::one(), T::zero(), T::zero(), T::zero()]) };
        let ny = if self.dims == 2 { 4 } else { 1 };
        let (dens, vel) = (&self.density[k], &self.velocity[k]);
        let mut d = T::zero();
        let mut v = [T::zero(); 2];
        for a in 0..4 {
            for b in 0..ny {
                let w = wx[a] * wy[b];
                let idx = ix[a] * n1 + iy[b];
                d += w * dens[idx];
                v[0] += w * vel[idx][0];
                v[1] += w * vel[idx][1];
            }
        }
        (d.max(T::zero()), v)
    }
}

impl<T: Real> GuidingField<T> for GridField<T> {
    fn dims(&self) -> usize {
        self.dims
    }

    fn domain(&self) -> Domain<T> {
        Domain {
            kind: match self.boundary {
                Boundary::Periodic => DomainKind::Periodic,
                Boundary::HardWall => DomainKind::Box,
            },
            lower: [self.axes[0].lower, self.axes[1].lower],
            upper: [self.axes[0].upper, self.axes[1].upper],
        }
    }

    fn sample(&self, x: &[T; 2], t: T) -> FieldSample<T> {
        let last = self.times.len() - 1;
        let (d, v) = if last == 0 || t <= self.times[0] {
            self.interpolate_slice(0, x)
        } else if t >= self.times[last] {
            self.interpolate_slice(last, x)
        } else {
            let k = self.times.partition_point(|&s| s <= t).saturating_sub(1).min(last - 1);
            let w = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
            let (d1, v1) = self.interpolate_slice(k, x);
            let (d2, v2) = self.interpolate_slice(k + 1, x);
            if last < 3 {
                let one = T::one();
                (d1 * (one - w) + d2 * w, [v1[0] * (one - w) + v2[0] * w, v1[1] * (one - w) + v2[1] * w])
            } else {
                // Cubic in time; snapshots are assumed evenly spaced.
                let (d0, v0) = self.interpolate_slice(k.saturating_sub(1), x);
                let (d3, v3) = self.interpolate_slice((k + 2).min(last), x);
                let c = catmull_rom_weights(w, k == 0, k + 1 == last);
                let mix = |a: T, b: T, cc: T, d: T| c[0] * a + c[1] * b + c[2] * cc + c[3] * d;
                (mix(d0, d1, d2, d3).max(T::zero()), [mix(v0[0], v1[0], v2[0], v3[0]), mix(v0[1], v1[1], v2[1], v3[1])])
            }
        };
        FieldSample { density: d, velocity: v, divergence: None }
    }

    fn node_threshold(&self) -> T {
        self.threshold
    }

    fn masses(&self) -> [T; 2] {
        self.masses
    }
}

/// Weights on `(p₋₁, p₀, p₁, p₂)` for a cubic through the interval `[p₀, p₁]`.
/// At an end of the record the missing neighbour is replaced by a quadratic
/// extrapolation, which keeps the rule exact for quadratics.
fn catmull_rom_weights<T: Real>(w: T, first: bool, last: bool) -> [T; 4] {
    let half = T::lit(0.5);
    let w2 = w * w;
    let w3 = w2 * w;
    let mut c = [
        half * (-w3 + T::lit(2.0) * w2 - w),
        half * (T::lit(3.0) * w3 - T::lit(5.0) * w2 + T::lit(2.0)),
        half * (-T::lit(3.0) * w3 + T::lit(4.0) * w2 + w),
        half * (w3 - w2),
    ];
    if first {
        // p₋₁ = 3p₀ − 3p₁ + p₂
        let a = c[0];
        c = [T::zero(), c[1] + T::lit(3.0) * a, c[2] - T::lit(3.0) * a, c[3] + a];
    }
    if last {
        // p₂ = p₋₁ − 3p₀ + 3p₁
        let b = c[3];
        c = [c[0] + b, c[1] - T::lit(3.0) * b, c[2] + T::lit(3.0) * b, T::zero()];
    }
    c
}

/// Second moment of `|Ψ|²` about its mean along axis 0.
pub fn position_variance<T: Real>(wf: &GridWaveFunction<T>) -> T {
    let dv = wf.cell_volume();
    let (mut m1, mut m2) = (T::zero(), T::zero());
    for (i, v) in wf.values().iter().enumerate() {
        let x = wf.node(i)[0];
        let p = v.norm_sqr() * dv;
        m1 += p * x;
        m2 += p * sq(x);
    }
    m2 - sq(m1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavefield::{density_phase_current, FreeGaussianPacket};

    #[test]
    fn time_weights_reproduce_quadratics() {
        let p = |t: f64| 0.3 - 1.7 * t + 0.9 * t * t;
        for k in 0..4 {
            for w in [0.0, 0.25, 0.6, 1.0] {
                let c = catmull_rom_weights(w, k == 0, k == 3);
                let base = k as f64;
                let v = c[0] * p(base - 1.0) + c[1] * p(base) + c[2] * p(base + 1.0) + c[3] * p(base + 2.0);
                assert!((v - p(base + w)).abs() < 1e-12);
            }
        }
    }

    fn gaussian_1d(n: usize, half_width: f64, sigma: f64, k0: f64) -> GridWaveFunction<f64> {
        let packet = FreeGaussianPacket::new(0.0, sigma, k0, 1.0);
        GridWaveFunction::from_fn(&[GridAxis::new(-half_width, half_width, n)], Boundary::Periodic, |x| packet.psi(x[0], 0.0)).unwrap()
    }

    #[test]
    fn free_packet_variance_follows_analytic_law() {
        let sigma = 0.5;
        let wf = gaussian_1d(1024, 20.0, sigma, 0.0);
        let ham = GridHamiltonian::free(&wf);
        for &t in &[0.5, 1.0, 2.0] {
            let out = evolve_splitstep(&wf, &ham, 0.01, (t / 0.01_f64).round() as usize).unwrap();
            let expected = sigma * sigma * (1.0 + (t / (2.0 * sigma * sigma)).powi(2));
            let got = position_variance(&out);
            assert!((got / expected - 1.0).abs() < 1e-3, "t={t}: {got} vs {expected}");
            assert!((out.norm_sqr() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_steps_return_input() {
        let wf = gaussian_1d(64, 5.0, 0.7, 1.0);
        let out = evolve_splitstep(&wf, &GridHamiltonian::free(&wf), 0.1, 0).unwrap();
        assert_eq!(out.values(), wf.values());
        assert_eq!(out.time(), wf.time());
    }

    #[test]
    fn splitting_error_is_second_order() {
        let wf = gaussian_1d(256, 8.0, 0.6, 1.5);
        let ham = GridHamiltonian::from_fn(&wf, [1.0, 1.0], |x| 0.5 * x[0] * x[0] + 0.02 * x[0].powi(3));
        let t_end = 1.0;
        let run = |dt: f64| evolve_splitstep(&wf, &ham, dt, (t_end / dt).round() as usize).unwrap();
        let (a, b, c) = (run(0.02), run(0.01), run(0.005));
        let diff = |u: &GridWaveFunction<f64>, v: &GridWaveFunction<f64>| -> f64 {
            u.values().iter().zip(v.values()).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt()
        };
        let order = (diff(&a, &b) / diff(&b, &c)).log2();
        assert!((order - 2.0).abs() < 0.2, "order {order}");
    }

    #[test]
    fn stability_check_rejects_large_dt() {
        let wf = gaussian_1d(64, 5.0, 0.7, 0.0);
        let ham = GridHamiltonian::from_fn(&wf, [1.0, 1.0], |_| 100.0);
        assert!(matches!(evolve_splitstep(&wf, &ham, 0.1, 1), Err(WavefieldError::DtTooLarge { .. })));
        assert!(matches!(evolve_splitstep(&wf, &ham, -0.1, 1), Err(WavefieldError::InvalidDt(_))));
        assert!(evolve_splitstep(&wf, &ham, 0.01, 1).is_ok());
    }

    #[test]
    fn plane_wave_phase_gradient() {
        let k = 2.0 * std::f64::consts::PI * 3.0 / 4.0;
        let wf = GridWaveFunction::from_fn(&[GridAxis::new(0.0, 4.0, 32)], Boundary::Periodic, |x| Complex::from_polar(1.0, k * x[0]))
            .unwrap()
            .with_masses([2.0, 1.0]);
        for v in wf.velocity() {
            assert!((v[0] - k / 2.0).abs() < 1e-12);
        }
        let field = GridField::frozen(&wf);
        let local = density_phase_current(&field, &[1.37, 0.0], 0.0).unwrap();
        assert!((local.phase_gradient[0] - k).abs() < 1e-10);
        assert!((local.current[0] - local.density * k / 2.0).abs() < 1e-10);
    }

    #[test]
    fn continuity_residual_is_small() {
        let packet = FreeGaussianPacket::new(0.0, 0.8, 1.0, 1.0);
        let axes = [GridAxis::new(-8.0, 8.0, 64), GridAxis::new(-8.0, 8.0, 64)];
        let wf = GridWaveFunction::from_fn(&axes, Boundary::Periodic, |x| {
            packet.psi(x[0], 0.0) * packet.psi(x[1] * 1.2, 0.0) * Complex::from_polar(1.0, 0.4 * x[0] * x[1] / 8.0)
        })
        .unwrap();
        let ham = GridHamiltonian::from_fn(&wf, [1.0, 1.0], |x| 0.1 * (x[0] * x[0] + x[1] * x[1]));
        let h = 1e-3;
        let fwd = evolve_splitstep(&wf, &ham, h / 10.0, 10).unwrap();
        let back = evolve_splitstep(&wf, &ham, -h / 10.0, 10);
        assert!(back.is_err());
        let mid = evolve_splitstep(&wf, &ham, h / 10.0, 5).unwrap();
        let j = mid.current();
        let jx: Vec<Complex<f64>> = j.iter().map(|v| Complex::new(v[0], 0.0)).collect();
        let jy: Vec<Complex<f64>> = j.iter().map(|v| Complex::new(v[1], 0.0)).collect();
        let (dx, dy) = (mid.derivative(&jx, 0), mid.derivative(&jy, 1));
        let (d0, d1) = (wf.density(), fwd.density());
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..wf.len() {
            let dt_rho = (d1[i] - d0[i]) / h;
            let r = dt_rho + dx[i].re + dy[i].re;
            worst = worst.max(r.abs());
            scale = scale.max(dt_rho.abs());
        }
        assert!(worst < 1e-4 * scale.max(1.0), "residual {worst} (scale {scale})");
    }

    #[test]
    fn hard_wall_box_mode_is_stationary() {
        let axes = [GridAxis::new(0.0, 1.0, 63)];
        let wf = GridWaveFunction::from_fn(&axes, Boundary::HardWall, |x| Complex::new((std::f64::consts::PI * x[0]).sin(), 0.0)).unwrap();
        let ham = GridHamiltonian::free(&wf);
        let out = evolve_splitstep(&wf, &ham, 1e-3, 500).unwrap();
        // density unchanged, global phase e^{-iE t}
        let e = std::f64::consts::PI.powi(2) / 2.0;
        let phase = Complex::from_polar(1.0, -e * out.time());
        for (a, b) in wf.values().iter().zip(out.values()) {
            assert!((a * phase - b).norm() < 1e-10);
        }
        assert!(wf.nyquist_tail_fraction() < 1e-20);
    }

    #[test]
    fn unresolved_state_is_detected() {
        let wf = GridWaveFunction::from_fn(&[GridAxis::new(0.0, 1.0, 16)], Boundary::Periodic, |x| {
            Complex::new(if x[0] < 0.5 { 1.0 } else { 0.1 }, 0.0)
        })
        .unwrap();
        assert!(matches!(wf.check_resolved(RESOLUTION_TOLERANCE), Err(WavefieldError::Unresolved(_))));
        let smooth = gaussian_1d(128, 10.0, 1.0, 0.0);
        assert!(smooth.check_resolved(RESOLUTION_TOLERANCE).is_ok());
    }

    #[test]
    fn recorded_field_interpolates_between_snapshots() {
        let sigma = 1.0;
        let wf = gaussian_1d(512, 20.0, sigma, 0.0);
        let ham = GridHamiltonian::free(&wf);
        let field = GridField::record(&wf, &ham, 0.01, 10, 20).unwrap();
        let exact = FreeGaussianPacket::new(0.0, sigma, 0.0, 1.0);
        for &(x, t) in &[(0.7, 0.55), (-1.3, 1.23), (2.0, 1.9)] {
            let got = field.sample(&[x, 0.0], t).velocity[0];
            let want = exact.sample(&[x, 0.0], t).velocity[0];
            assert!((got - want).abs() < 1e-3, "x={x} t={t}: {got} vs {want}");
        }
    }
}
