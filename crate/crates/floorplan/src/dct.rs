//! Unnormalized DCT-II and its exact inverse, computed through complex FFTs
//! using the even/odd reordering trick, plus separable 2-D wrappers.
//!
//! `forward` computes `T[k] = sum_n x[n] cos(pi k (2n+1) / (2N))`; `inverse`
//! undoes exactly that, so `inverse(forward(x)) == x` up to rounding.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

pub struct Dct {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl Dct {
    pub fn new(n: usize) -> Self {
        assert!(n > 0);
        let mut planner = FftPlanner::new();
        Dct {
            n,
            fft: planner.plan_fft_forward(n),
            ifft: planner.plan_fft_inverse(n),
        }
    }

    pub fn forward(&self, x: &mut [f64]) {
        let n = self.n;
        assert_eq!(x.len(), n);
        let mut v = vec![Complex::new(0.0, 0.0); n];
        for i in 0..n.div_ceil(2) {
            v[i] = Complex::new(x[2 * i], 0.0);
        }
        for i in 0..n / 2 {
            v[n - 1 - i] = Complex::new(x[2 * i + 1], 0.0);
        }
        self.fft.process(&mut v);
        for k in 0..n {
            let phase = -std::f64::consts::PI * k as f64 / (2.0 * n as f64);
            x[k] = (v[k] * Complex::from_polar(1.0, phase)).re;
        }
    }

    pub fn inverse(&self, x: &mut [f64]) {
        let n = self.n;
        assert_eq!(x.len(), n);
        let mut v = vec![Complex::new(0.0, 0.0); n];
        v[0] = Complex::new(x[0], 0.0);
        for k in 1..n {
            let phase = std::f64::consts::PI * k as f64 / (2.0 * n as f64);
            v[k] = Complex::from_polar(1.0, phase) * Complex::new(x[k], -x[n - k]);
        }
        self.ifft.process(&mut v);
        let scale = 1.0 / n as f64;
        for i in 0..n.div_ceil(2) {
            x[2 * i] = v[i].re * scale;
        }
        for i in 0..n / 2 {
            x[2 * i + 1] = v[n - 1 - i].re * scale;
        }
    }
}

/// Separable 2-D transform on a `k x k` grid stored as `grid[ix * k + iy]`.
pub struct Dct2d {
    k: usize,
    dct: Dct,
}

impl Dct2d {
    pub fn new(k: usize) -> Self {
        Dct2d { k, dct: Dct::new(k) }
    }

    fn transpose(&self, grid: &mut [f64]) {
        let k = self.k;
        for a in 0..k {
            for b in a + 1..k {
                grid.swap(a * k + b, b * k + a);
            }
        }
    }

    fn apply(&self, grid: &mut [f64], f: impl Fn(&Dct, &mut [f64])) {
        let k = self.k;
        assert_eq!(grid.len(), k * k);
        for row in grid.chunks_mut(k) {
            f(&self.dct, row);
        }
        self.transpose(grid);
        for row in grid.chunks_mut(k) {
            f(&self.dct, row);
        }
        self.transpose(grid);
    }

    /// `T[u,p] = sum_{i,j} grid[i,j] cos(pi u (2i+1)/(2K)) cos(pi p (2j+1)/(2K))`
    pub fn forward(&self, grid: &mut [f64]) {
        self.apply(grid, Dct::forward);
    }

    pub fn inverse(&self, grid: &mut [f64]) {
        self.apply(grid, Dct::inverse);
    }
}
