use std::fmt::Debug;

use serde::Serialize;

use super::HvError;
use crate::scalar::Field;

/// Half-open rectangle `[x0, x1) × [y0, y1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Rect<T> {
    pub x0: T,
    pub x1: T,
    pub y0: T,
    pub y1: T,
}

fn max<T: PartialOrd>(a: T, b: T) -> T {
    if a >= b {
        a
    } else {
        b
    }
}

fn min<T: PartialOrd>(a: T, b: T) -> T {
    if a <= b {
        a
    } else {
        b
    }
}

impl<T: Field> Rect<T> {
    pub fn new(x0: T, x1: T, y0: T, y1: T) -> Self {
        Self { x0, x1, y0, y1 }
    }

    pub fn unit() -> Self {
        Self::new(T::zero(), T::one(), T::zero(), T::one())
    }

    pub fn area(&self) -> T {
        if self.is_empty() {
            T::zero()
        } else {
            (self.x1 - self.x0) * (self.y1 - self.y0)
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.x1 > self.x0 && self.y1 > self.y0)
    }

    pub fn intersect(&self, other: &Self) -> Self {
        Self::new(max(self.x0, other.x0), min(self.x1, other.x1), max(self.y0, other.y0), min(self.y1, other.y1))
    }

    pub fn contains(&self, p: &[T; 2]) -> bool {
        p[0] >= self.x0 && p[0] < self.x1 && p[1] >= self.y0 && p[1] < self.y1
    }
}

/// Density on `[0,1)²`, constant on each of a set of disjoint rectangles and
/// zero elsewhere. Construction rescales it to unit mass.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HvDistribution<T> {
    pieces: Vec<(Rect<T>, T)>,
}

impl<T: Field> HvDistribution<T> {
    pub fn new(pieces: Vec<(Rect<T>, T)>) -> Result<Self, HvError> {
        let unit = Rect::unit();
        for (r, d) in &pieces {
            if *d < T::zero() {
                return Err(HvError::NegativeDensity(format!("{d:?}")));
            }
            if r.is_empty() || r.intersect(&unit) != *r {
                return Err(HvError::BadRectangle(format!("{r:?}")));
            }
        }
        for i in 0..pieces.len() {
            for j in i + 1..pieces.len() {
                if !pieces[i].0.intersect(&pieces[j].0).is_empty() {
                    return Err(HvError::Overlap(i, j));
                }
            }
        }
        let mass = pieces.iter().fold(T::zero(), |acc, (r, d)| acc + r.area() * *d);
        if mass <= T::zero() {
            return Err(HvError::ZeroMass);
        }
        let pieces = pieces.into_iter().map(|(r, d)| (r, d / mass)).collect();
        Ok(Self { pieces })
    }

    /// The equilibrium measure `ρ_QT`.
    pub fn uniform() -> Self {
        Self { pieces: vec![(Rect::unit(), T::one())] }
    }

    pub fn pieces(&self) -> &[(Rect<T>, T)] {
        &self.pieces
    }

    /// `μ(region) = ∫_region ρ`, exact for rational `T`.
    pub fn measure(&self, region: &Rect<T>) -> T {
        self.pieces.iter().fold(T::zero(), |acc, (r, d)| acc + r.intersect(region).area() * *d)
    }

    pub fn density_at(&self, p: &[T; 2]) -> T {
        self.pieces.iter().find(|(r, _)| r.contains(p)).map_or(T::zero(), |(_, d)| *d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64 as Q;

    fn q(n: i64, d: i64) -> Q {
        Q::new(n, d)
    }

    #[test]
    fn normalizes_exactly() {
        let rho = HvDistribution::new(vec![
            (Rect::new(q(0, 1), q(1, 2), q(0, 1), q(1, 1)), q(1, 1)),
            (Rect::new(q(1, 2), q(1, 1), q(0, 1), q(1, 1)), q(2, 1)),
        ])
        .unwrap();
        assert_eq!(rho.measure(&Rect::unit()), q(1, 1));
        assert_eq!(rho.density_at(&[q(3, 4), q(1, 3)]), q(4, 3));
        assert_eq!(rho.measure(&Rect::new(q(1, 4), q(3, 4), q(0, 1), q(1, 2))), q(1, 4));
    }

    #[test]
    fn rejects_bad_input() {
        let r = Rect::new(q(0, 1), q(1, 2), q(0, 1), q(1, 1));
        assert!(matches!(HvDistribution::new(vec![(r, q(-1, 1))]), Err(HvError::NegativeDensity(_))));
        assert!(matches!(HvDistribution::new(vec![(r, q(1, 1)), (r, q(1, 1))]), Err(HvError::Overlap(0, 1))));
        assert!(matches!(HvDistribution::new(vec![(r, q(0, 1))]), Err(HvError::ZeroMass)));
        let outside = Rect::new(q(1, 2), q(3, 2), q(0, 1), q(1, 1));
        assert!(matches!(HvDistribution::new(vec![(outside, q(1, 1))]), Err(HvError::BadRectangle(_))));
    }
}
