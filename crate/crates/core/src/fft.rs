//! FFT plumbing for 1-D and 2-D periodic grids.
//!
//! Two-dimensional spectra are kept in *transposed* layout: after a forward
//! transform the entry at `ky_index * N + kx_index` holds the coefficient of
//! `exp(i (kx x + ky y))`. Fourier multipliers built by [`crate::grid::Grid`]
//! follow the same layout, so callers never need to transpose back.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub struct FftPlan {
    dim: usize,
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FftPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftPlan")
            .field("dim", &self.dim)
            .field("len", &self.len)
            .finish()
    }
}

impl FftPlan {
    pub fn new(dim: usize, len: usize) -> Self {
        let mut planner = FftPlanner::new();
        FftPlan {
            dim,
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    pub fn total(&self) -> usize {
        self.len.pow(self.dim as u32)
    }

    fn scratch_len(&self) -> usize {
        self.forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len())
    }
}

/// A plan plus the scratch memory needed to run it. One per worker.
pub struct Spectral {
    plan: FftPlan,
    scratch: Vec<Complex64>,
}

impl Spectral {
    pub fn new(plan: FftPlan) -> Self {
        let scratch = vec![Complex64::new(0.0, 0.0); plan.scratch_len()];
        Spectral { plan, scratch }
    }

    pub fn len(&self) -> usize {
        self.plan.total()
    }

    pub fn is_empty(&self) -> bool {
        self.plan.total() == 0
    }

    /// Unnormalized forward transform, in place.
    pub fn forward(&mut self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.plan.total());
        let n = self.plan.len;
        self.plan
            .forward
            .process_with_scratch(data, &mut self.scratch);
        if self.plan.dim == 2 {
            transpose_square(data, n);
            self.plan
                .forward
                .process_with_scratch(data, &mut self.scratch);
        }
    }

    /// Inverse transform normalized so that `inverse(forward(u)) == u`.
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.plan.total());
        let n = self.plan.len;
        self.plan
            .inverse
            .process_with_scratch(data, &mut self.scratch);
        if self.plan.dim == 2 {
            transpose_square(data, n);
            self.plan
                .inverse
                .process_with_scratch(data, &mut self.scratch);
        }
        let scale = 1.0 / data.len() as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }
}

const BLOCK: usize = 32;

/// In-place transpose of a row-major `n x n` matrix.
pub fn transpose_square(data: &mut [Complex64], n: usize) {
    for bi in (0..n).step_by(BLOCK) {
        for bj in (bi..n).step_by(BLOCK) {
            let i_end = (bi + BLOCK).min(n);
            let j_end = (bj + BLOCK).min(n);
            for i in bi..i_end {
                let j_start = if bi == bj { i + 1 } else { bj };
                for j in j_start..j_end {
                    data.swap(i * n + j, j * n + i);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transpose_roundtrip() {
        let n = 70;
        let orig: Vec<Complex64> = (0..n * n)
            .map(|k| Complex64::new(k as f64, -(k as f64)))
            .collect();
        let mut data = orig.clone();
        transpose_square(&mut data, n);
        assert_eq!(data[3 * n + 5], orig[5 * n + 3]);
        transpose_square(&mut data, n);
        assert_eq!(data, orig);
    }

    #[test]
    fn forward_inverse_identity_2d() {
        let plan = FftPlan::new(2, 12);
        let mut sp = Spectral::new(plan);
        let orig: Vec<Complex64> = (0..144)
            .map(|k| Complex64::new((k as f64 * 0.37).sin(), (k as f64 * 0.11).cos()))
            .collect();
        let mut data = orig.clone();
        sp.forward(&mut data);
        sp.inverse(&mut data);
        for (a, b) in data.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-13);
        }
    }
}
