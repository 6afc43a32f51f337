//! Small dense complex matrices for finite-dimensional Hilbert spaces.
//!
//! Dimensions here stay below ~64, so a row-major `Vec` and cyclic Jacobi
//! diagonalization are all that is needed.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix<T> {
    n: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![Complex::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = Complex::one();
        }
        m
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex::new(d, T::zero());
        }
        m
    }

    /// Builds a matrix from rows; panics if the rows are ragged or not square.
    pub fn from_rows(rows: &[Vec<Complex<T>>]) -> Self {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            assert_eq!(row.len(), n, "matrix must be square");
            data.extend_from_slice(row);
        }
        Self { n, data }
    }

    pub fn from_real_rows(rows: &[Vec<T>]) -> Self {
        let rows: Vec<Vec<Complex<T>>> = rows.iter().map(|r| r.iter().map(|&x| Complex::new(x, T::zero())).collect()).collect();
        Self::from_rows(&rows)
    }

    /// Outer product `|u⟩⟨v|`.
    pub fn outer(u: &[Complex<T>], v: &[Complex<T>]) -> Self {
        let n = u.len();
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = u[i] * v[j].conj();
            }
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                m[(j, i)] = self[(i, j)].conj();
            }
        }
        m
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        Self { n: self.n, data: self.data.iter().map(|&z| z * s).collect() }
    }

    pub fn scale_real(&self, s: T) -> Self {
        Self { n: self.n, data: self.data.iter().map(|&z| z * s).collect() }
    }

    pub fn trace(&self) -> Complex<T> {
        (0..self.n).map(|i| self[(i, i)]).fold(Complex::zero(), |a, b| a + b)
    }

    pub fn diagonal_real(&self) -> Vec<T> {
        (0..self.n).map(|i| self[(i, i)].re).collect()
    }

    pub fn apply(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(v.len(), self.n);
        (0..self.n)
            .map(|i| {
                let row = &self.data[i * self.n..(i + 1) * self.n];
                row.iter().zip(v).fold(Complex::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect()
    }

    /// `[A, B] = AB − BA`
    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().map(|z| z.norm()).fold(T::zero(), T::max)
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
    }

    /// Largest deviation from Hermiticity, `max |A_ij − conj(A_ji)|`.
    pub fn hermiticity_defect(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.n {
            for j in i..self.n {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Eigen-decomposition of a Hermitian matrix by cyclic complex Jacobi
    /// rotations. Returns eigenvalues in ascending order and the unitary whose
    /// columns are the matching eigenvectors.
    pub fn hermitian_eigen(&self) -> (Vec<T>, CMatrix<T>) {
        let n = self.n;
        let mut a = self.clone();
        let mut v = CMatrix::identity(n);
        let scale = a.frobenius_norm().max(T::min_positive_value());
        let eps = T::epsilon();
        for _sweep in 0..100 {
            let mut off = T::zero();
            for p in 0..n {
                for q in (p + 1)..n {
                    off += a[(p, q)].norm_sqr();
                }
            }
            if off.sqrt() <= eps * scale * T::lit(1e-2) {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    let mag = apq.norm();
                    if mag <= eps * eps * scale {
                        continue;
                    }
                    // Phase that makes the pivot real and positive, then a real rotation.
                    let phase = apq / mag;
                    let app = a[(p, p)].re;
                    let aqq = a[(q, q)].re;
                    let theta = (aqq - app) / (T::lit(2.0) * mag);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    // G = [[c, s], [-s e^{-iφ}, c e^{-iφ}]] acting on columns p, q.
                    let g_pp = Complex::new(c, T::zero());
                    let g_pq = Complex::new(s, T::zero());
                    let g_qp = -phase.conj() * s;
                    let g_qq = phase.conj() * c;
                    // A <- A G
                    for r in 0..n {
                        let arp = a[(r, p)];
                        let arq = a[(r, q)];
                        a[(r, p)] = arp * g_pp + arq * g_qp;
                        a[(r, q)] = arp * g_pq + arq * g_qq;
                    }
                    // A <- G^H A
                    for r in 0..n {
                        let apr = a[(p, r)];
                        let aqr = a[(q, r)];
                        a[(p, r)] = g_pp.conj() * apr + g_qp.conj() * aqr;
                        a[(q, r)] = g_pq.conj() * apr + g_qq.conj() * aqr;
                    }
                    a[(p, q)] = Complex::zero();
                    a[(q, p)] = Complex::zero();
                    for r in 0..n {
                        let vrp = v[(r, p)];
                        let vrq = v[(r, q)];
                        v[(r, p)] = vrp * g_pp + vrq * g_qp;
                        v[(r, q)] = vrp * g_pq + vrq * g_qq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[(i, i)].re.partial_cmp(&a[(j, j)].re).unwrap());
        let values = order.iter().map(|&i| a[(i, i)].re).collect();
        let mut vectors = CMatrix::zeros(n);
        for (new, &old) in order.iter().enumerate() {
            for r in 0..n {
                vectors[(r, new)] = v[(r, old)];
            }
        }
        (values, vectors)
    }

    /// Smallest eigenvalue of a Hermitian matrix.
    pub fn min_eigenvalue(&self) -> T {
        self.hermitian_eigen().0.first().copied().unwrap_or(T::zero())
    }

    /// `exp(factor · H)` for Hermitian `H`, via its eigen-decomposition.
    pub fn exp_hermitian(&self, factor: Complex<T>) -> Self {
        let (values, vecs) = self.hermitian_eigen();
        let diag: Vec<Complex<T>> = values.iter().map(|&l| (factor * l).exp()).collect();
        let mut scaled = vecs.clone();
        for r in 0..self.n {
            for c in 0..self.n {
                scaled[(r, c)] = scaled[(r, c)] * diag[c];
            }
        }
        &scaled * &vecs.adjoint()
    }
}

impl<T> Index<(usize, usize)> for CMatrix<T> {
    type Output = Complex<T>;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.n + j]
    }
}

impl<T> IndexMut<(usize, usize)> for CMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i * self.n + j]
    }
}

impl<'a, T: Real> Mul<&'a CMatrix<T>> for &'a CMatrix<T> {
    type Output = CMatrix<T>;
    fn mul(self, rhs: &'a CMatrix<T>) -> CMatrix<T> {
        let n = self.n;
        assert_eq!(n, rhs.n);
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] = out.data[i * n + j] + a * rhs.data[k * n + j];
                }
            }
        }
        out
    }
}

impl<'a, T: Real> Add<&'a CMatrix<T>> for &'a CMatrix<T> {
    type Output = CMatrix<T>;
    fn add(self, rhs: &'a CMatrix<T>) -> CMatrix<T> {
        assert_eq!(self.n, rhs.n);
        CMatrix { n: self.n, data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect() }
    }
}

impl<'a, T: Real> Sub<&'a CMatrix<T>> for &'a CMatrix<T> {
    type Output = CMatrix<T>;
    fn sub(self, rhs: &'a CMatrix<T>) -> CMatrix<T> {
        assert_eq!(self.n, rhs.n);
        CMatrix { n: self.n, data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a - b).collect() }
    }
}

/// `⟨u|v⟩`
pub fn inner<T: Real>(u: &[Complex<T>], v: &[Complex<T>]) -> Complex<T> {
    u.iter().zip(v).fold(Complex::zero(), |acc, (&a, &b)| acc + a.conj() * b)
}

pub fn norm_sqr<T: Real>(v: &[Complex<T>]) -> T {
    v.iter().map(|z| z.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn sample_hermitian() -> CMatrix<f64> {
        CMatrix::from_rows(&[
            vec![c(2.0, 0.0), c(0.5, -1.0), c(0.0, 0.3), c(1.0, 0.0)],
            vec![c(0.5, 1.0), c(-1.0, 0.0), c(0.2, 0.2), c(0.0, -0.7)],
            vec![c(0.0, -0.3), c(0.2, -0.2), c(0.5, 0.0), c(0.4, 0.1)],
            vec![c(1.0, 0.0), c(0.0, 0.7), c(0.4, -0.1), c(3.0, 0.0)],
        ])
    }

    #[test]
    fn jacobi_reconstructs_hermitian_matrix() {
        let h = sample_hermitian();
        let (vals, v) = h.hermitian_eigen();
        let recon = &(&v * &CMatrix::from_diagonal(&vals)) * &v.adjoint();
        assert!((&recon - &h).max_abs() < 1e-12);
        let unit = &v.adjoint() * &v;
        assert!((&unit - &CMatrix::identity(4)).max_abs() < 1e-12);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        // trace is the eigenvalue sum
        assert!((vals.iter().sum::<f64>() - h.trace().re).abs() < 1e-12);
    }

    #[test]
    fn degenerate_spectrum_is_handled() {
        let h = CMatrix::from_real_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, -2.0]]);
        let (vals, _) = h.hermitian_eigen();
        assert_eq!(vals, vec![-2.0, 1.0, 1.0]);
    }

    #[test]
    fn exponential_of_pauli_x() {
        let sx = CMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let u = sx.exp_hermitian(c(0.0, -0.3));
        // exp(-iθσx) = cos θ − i sin θ σx
        assert!((u[(0, 0)] - c(0.3f64.cos(), 0.0)).norm() < 1e-14);
        assert!((u[(0, 1)] - c(0.0, -0.3f64.sin())).norm() < 1e-14);
    }

    #[test]
    fn single_precision_jacobi() {
        let h = CMatrix::<f32>::from_real_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let (vals, _) = h.hermitian_eigen();
        assert!((vals[0] - 1.0).abs() < 1e-5 && (vals[1] - 3.0).abs() < 1e-5);
    }
}
