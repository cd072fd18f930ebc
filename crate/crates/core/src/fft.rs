//! Multidimensional complex FFT on cubic row-major arrays.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Axis-by-axis transform of an `n^dims` array. The forward transform is
/// unnormalised; the inverse divides by `n^dims`.
#[derive(Clone)]
pub struct FftNd {
    n: usize,
    dims: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FftNd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftNd").field("n", &self.n).field("dims", &self.dims).finish()
    }
}

impl FftNd {
    pub fn new(n: usize, dims: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            dims,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dims as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, false, self.n);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, true, self.n);
        let scale = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|c| *c *= scale);
    }

    /// Forward transform of an array that vanishes outside `[0, limit)^dims`.
    /// Lines that are identically zero are skipped.
    pub fn forward_padded(&self, data: &mut [Complex64], limit: usize) {
        self.run(data, false, limit);
    }

    /// Unnormalised inverse transform where only `[0, limit)^dims` of the
    /// result is used; the rest of `data` is left in an unspecified state.
    /// Callers divide by [`FftNd::len`] while cropping.
    pub fn inverse_cropped_unscaled(&self, data: &mut [Complex64], limit: usize) {
        self.run(data, true, limit);
    }

    /// Transforms every axis. Along axis `a` only lines whose indices on the
    /// axes before `a` are below `limit` are processed: for the forward pass
    /// (last axis first) the others are still zero, for the inverse pass
    /// (first axis first) they are never read.
    fn run(&self, data: &mut [Complex64], inverse: bool, limit: usize) {
        assert_eq!(data.len(), self.len(), "FFT buffer length");
        let plan = if inverse { &self.inverse } else { &self.forward };
        let n = self.n;
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        let axes: Vec<usize> =
            if inverse { (0..self.dims).collect() } else { (0..self.dims).rev().collect() };
        let mut buf = Vec::new();
        for a in axes {
            let stride = n.pow((self.dims - 1 - a) as u32);
            let block = n * stride;
            let outer = n.pow(a as u32);
            if stride == 1 && limit >= n {
                // Contiguous lines: one batched call.
                plan.process_with_scratch(data, &mut scratch);
                continue;
            }
            buf.resize(block, Complex64::default());
            for o in 0..outer {
                if limit < n && !digits_below(o, n, a, limit) {
                    continue;
                }
                let chunk = &mut data[o * block..(o + 1) * block];
                if stride == 1 {
                    plan.process_with_scratch(chunk, &mut scratch);
                    continue;
                }
                for (i, row) in chunk.chunks_exact(stride).enumerate() {
                    for (line, &v) in buf.chunks_exact_mut(n).zip(row) {
                        line[i] = v;
                    }
                }
                plan.process_with_scratch(&mut buf, &mut scratch);
                for (i, row) in chunk.chunks_exact_mut(stride).enumerate() {
                    for (line, v) in buf.chunks_exact(n).zip(row) {
                        *v = line[i];
                    }
                }
            }
        }
    }
}

fn digits_below(mut o: usize, n: usize, count: usize, limit: usize) -> bool {
    for _ in 0..count {
        if o % n >= limit {
            return false;
        }
        o /= n;
    }
    true
}
