use num_complex::Complex;

use super::{Domain, DomainKind, FieldSample, GuidingField};
use crate::scalar::{sq, Real};

/// Free one-dimensional Gaussian packet with closed-form evolution.
///
/// At `t = 0` the density is normal with mean `center` and standard
/// deviation `sigma0`; the packet carries mean momentum `k0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FreeGaussianPacket<T> {
    pub center: T,
    pub sigma0: T,
    pub k0: T,
    pub mass: T,
}

impl<T: Real> FreeGaussianPacket<T> {
    pub fn new(center: T, sigma0: T, k0: T, mass: T) -> Self {
        Self { center, sigma0, k0, mass }
    }

    fn spread(&self, t: T) -> Complex<T> {
        Complex::new(T::one(), t / (T::lit(2.0) * self.mass * sq(self.sigma0)))
    }

    pub fn mean_position(&self, t: T) -> T {
        self.center + self.k0 * t / self.mass
    }

    /// Standard deviation of `|Ψ|²` at time `t`.
    pub fn width(&self, t: T) -> T {
        self.sigma0 * self.spread(t).norm()
    }

    pub fn psi(&self, x: T, t: T) -> Complex<T> {
        let s = self.spread(t);
        let dx = x - self.mean_position(t);
        let pref = (T::lit(2.0) * T::PI() * sq(self.sigma0)).powf(T::lit(-0.25));
        let expo = Complex::new(-sq(dx), T::zero()) / (s * (T::lit(4.0) * sq(self.sigma0)))
            + Complex::new(T::zero(), self.k0 * (x - self.center) - sq(self.k0) * t / (T::lit(2.0) * self.mass));
        expo.exp() * pref / s.sqrt()
    }

    /// `∂ₓΨ / Ψ`
    fn log_derivative(&self, x: T, t: T) -> Complex<T> {
        let s = self.spread(t);
        let dx = x - self.mean_position(t);
        Complex::new(-dx, T::zero()) / (s * (T::lit(2.0) * sq(self.sigma0))) + Complex::new(T::zero(), self.k0)
    }
}

impl<T: Real> GuidingField<T> for FreeGaussianPacket<T> {
    fn dims(&self) -> usize {
        1
    }

    fn domain(&self) -> Domain<T> {
        Domain { kind: DomainKind::Unbounded, lower: [T::neg_infinity(); 2], upper: [T::infinity(); 2] }
    }

    fn sample(&self, x: &[T; 2], t: T) -> FieldSample<T> {
        let g = self.log_derivative(x[0], t);
        let s = self.spread(t);
        let dg = Complex::new(-T::one(), T::zero()) / (s * (T::lit(2.0) * sq(self.sigma0)));
        FieldSample { density: self.psi(x[0], t).norm_sqr(), velocity: [g.im / self.mass, T::zero()], divergence: Some(dg.im / self.mass) }
    }

    fn density(&self, x: &[T; 2], t: T) -> T {
        self.psi(x[0], t).norm_sqr()
    }

    fn node_threshold(&self) -> T {
        // A Gaussian has no nodes; its velocity is defined even where the
        // density underflows.
        T::zero()
    }

    fn masses(&self) -> [T; 2] {
        [self.mass, self.mass]
    }
}
