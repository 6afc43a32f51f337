//! One-axis spectral transforms for periodic and hard-wall grids.
//!
//! A hard-wall axis with `n` interior nodes is handled through its odd
//! extension of length `2(n + 1)`, which turns the sine transform into an
//! ordinary FFT whose wavenumbers are `k = π m / L`.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftNum, FftPlanner};

use super::Boundary;
use crate::scalar::Real;

pub(crate) struct AxisTransform<T: FftNum> {
    n: usize,
    boundary: Boundary,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    /// Signed wavenumber of every bin of the (possibly extended) transform.
    pub(crate) k: Vec<T>,
}

impl<T: Real + FftNum> AxisTransform<T> {
    pub(crate) fn new(n: usize, spacing: T, boundary: Boundary, planner: &mut FftPlanner<T>) -> Self {
        let m = Self::extended_len(n, boundary);
        let period = spacing * T::of_usize(m);
        let k = (0..m)
            .map(|j| {
                let signed = if j <= m / 2 { j as f64 } else { j as f64 - m as f64 };
                T::lit(2.0 * std::f64::consts::PI * signed) / period
            })
            .collect();
        Self { n, boundary, forward: planner.plan_fft_forward(m), inverse: planner.plan_fft_inverse(m), k }
    }

    pub(crate) fn extended_len(n: usize, boundary: Boundary) -> usize {
        match boundary {
            Boundary::Periodic => n,
            Boundary::HardWall => 2 * (n + 1),
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.k.len()
    }

    /// Index of the Nyquist bin, if the transform length is even.
    pub(crate) fn nyquist(&self) -> Option<usize> {
        let m = self.len();
        (m % 2 == 0).then_some(m / 2)
    }

    pub(crate) fn forward(&self, line: &[Complex<T>], buf: &mut Vec<Complex<T>>) {
        buf.clear();
        match self.boundary {
            Boundary::Periodic => buf.extend_from_slice(line),
            Boundary::HardWall => {
                buf.push(Complex::new(T::zero(), T::zero()));
                buf.extend_from_slice(line);
                buf.push(Complex::new(T::zero(), T::zero()));
                buf.extend(line.iter().rev().map(|v| -v));
            }
        }
        self.forward.process(buf);
    }

    /// Inverse transform of `buf` (destroyed) back onto the physical nodes.
    pub(crate) fn inverse(&self, buf: &mut [Complex<T>], line: &mut [Complex<T>]) {
        self.inverse.process(buf);
        let scale = T::one() / T::of_usize(self.len());
        let offset = match self.boundary {
            Boundary::Periodic => 0,
            Boundary::HardWall => 1,
        };
        for (dst, src) in line.iter_mut().zip(&buf[offset..offset + self.n]) {
            *dst = src * scale;
        }
    }
}

/// Visits every line of a row-major 1D or 2D array along `axis`.
pub(crate) fn for_each_line<T: Copy, F>(values: &mut [T], shape: [usize; 2], dims: usize, axis: usize, mut f: F)
where
    F: FnMut(&mut [T]),
{
    if dims == 1 || axis == 1 {
        let len = if dims == 1 { shape[0] } else { shape[1] };
        for line in values.chunks_mut(len) {
            f(line);
        }
        return;
    }
    let (n0, n1) = (shape[0], shape[1]);
    let mut line = Vec::with_capacity(n0);
    for j in 0..n1 {
        line.clear();
        line.extend((0..n0).map(|i| values[i * n1 + j]));
        f(&mut line);
        for (i, v) in line.iter().enumerate() {
            values[i * n1 + j] = *v;
        }
    }
}
