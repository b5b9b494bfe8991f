//! Separable multi-dimensional FFT on a cubic periodic grid.
//!
//! Data is row-major over `dim` axes of `n` points each, in natural FFT order
//! (index `j` on an axis carries wavenumber `j mod n`). Both directions are
//! unnormalized: forward uses `e^{-2πi jk/n}`, inverse `e^{+2πi jk/n}`.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub(crate) struct NdFft {
    n: usize,
    dim: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    line: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl NdFft {
    pub(crate) fn new(n: usize, dim: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        NdFft {
            n,
            dim,
            forward,
            inverse,
            line: vec![Complex64::default(); n],
            scratch: vec![Complex64::default(); scratch_len],
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub(crate) fn forward(&mut self, data: &mut [Complex64]) {
        let plan = Arc::clone(&self.forward);
        self.apply(plan.as_ref(), data);
    }

    pub(crate) fn inverse(&mut self, data: &mut [Complex64]) {
        let plan = Arc::clone(&self.inverse);
        self.apply(plan.as_ref(), data);
    }

    fn apply(&mut self, plan: &dyn Fft<f64>, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.len(), "fft buffer length");
        let n = self.n;
        for axis in 0..self.dim {
            let stride = n.pow((self.dim - 1 - axis) as u32);
            if stride == 1 {
                for chunk in data.chunks_exact_mut(n) {
                    plan.process_with_scratch(chunk, &mut self.scratch);
                }
                continue;
            }
            let block = stride * n;
            for outer in (0..data.len()).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for (j, slot) in self.line.iter_mut().enumerate() {
                        *slot = data[base + j * stride];
                    }
                    plan.process_with_scratch(&mut self.line, &mut self.scratch);
                    for (j, value) in self.line.iter().enumerate() {
                        data[base + j * stride] = *value;
                    }
                }
            }
        }
    }
}

/// Signed wavenumber carried by natural FFT index `j` on an axis of `n` points,
/// using the symmetric range `−⌊n/2⌋ ..= ⌈n/2⌉−1`.
pub(crate) fn natural_wavenumber(j: usize, n: usize) -> i64 {
    let j = j as i64;
    let n = n as i64;
    if j >= n - n / 2 {
        j - n
    } else {
        j
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn natural_wavenumbers_cover_symmetric_range() {
        let ks: Vec<i64> = (0..5).map(|j| natural_wavenumber(j, 5)).collect();
        assert_eq!(ks, vec![0, 1, 2, -2, -1]);
        let ks: Vec<i64> = (0..4).map(|j| natural_wavenumber(j, 4)).collect();
        assert_eq!(ks, vec![0, 1, -2, -1]);
    }

    #[test]
    fn two_dimensional_forward_matches_direct_sum() {
        let n = 5;
        let data: Vec<Complex64> = (0..n * n)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 1.3).cos()))
            .collect();
        let mut fast = data.clone();
        NdFft::new(n, 2).forward(&mut fast);
        for k0 in 0..n {
            for k1 in 0..n {
                let mut acc = Complex64::default();
                for j0 in 0..n {
                    for j1 in 0..n {
                        let phase = -2.0 * PI * ((k0 * j0 + k1 * j1) as f64) / n as f64;
                        acc += data[j0 * n + j1] * Complex64::from_polar(1.0, phase);
                    }
                }
                assert!((acc - fast[k0 * n + k1]).norm() < 1e-12);
            }
        }
    }
}
