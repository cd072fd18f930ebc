//! Fourier-multiplier fractional Laplacian and zero-padded Riesz convolution
//! on the periodic box.
//!
//! Transforms use angular wavenumbers `ξ = 2π m / L`. With the unnormalised
//! forward DFT, Parseval reads `h^N Σ|u_j|² = h^N / M^N Σ|û_k|²`.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::FftNd;
use crate::grid::{Field, Grid};
use crate::params::riesz_constant;

/// Reusable transform plan and `|ξ|²` table for one grid.
#[derive(Debug, Clone)]
pub struct Spectral {
    grid: Grid,
    fft: FftNd,
    k2: Vec<f64>,
    /// Distinct values of `|ξ|²` and the class of every mode, so powers are
    /// evaluated once per shell.
    shells: Vec<f64>,
    shell_of: Vec<u32>,
}

impl Spectral {
    pub fn new(grid: Grid) -> Self {
        let k2 = grid.wavenumber_sq();
        let mut shells: Vec<f64> = k2.clone();
        shells.sort_by(f64::total_cmp);
        shells.dedup();
        let shell_of = k2.iter().map(|k| shells.partition_point(|v| v < k) as u32).collect();
        Self { grid, fft: FftNd::new(grid.m, grid.dims), k2, shells, shell_of }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `|ξ|²` per FFT bin.
    pub fn wavenumber_sq(&self) -> &[f64] {
        &self.k2
    }

    pub fn forward(&self, u: &Field) -> Vec<Complex64> {
        debug_assert_eq!(u.grid, self.grid);
        let mut data: Vec<Complex64> = u.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft.forward(&mut data);
        data
    }

    /// Inverse transform, keeping the real part.
    pub fn inverse(&self, mut data: Vec<Complex64>) -> Field {
        self.fft.inverse(&mut data);
        Field { grid: self.grid, values: data.iter().map(|c| c.re).collect() }
    }

    /// Applies the radial multiplier `symbol(|ξ|²)`.
    pub fn apply_symbol(&self, u: &Field, symbol: impl Fn(f64) -> f64) -> Field {
        let mut hat = self.forward(u);
        for (c, &k2) in hat.iter_mut().zip(&self.k2) {
            *c *= symbol(k2);
        }
        self.inverse(hat)
    }

    /// `(-Δ)^s u`; the zero mode maps to zero.
    pub fn fractional_laplacian(&self, u: &Field, s: f64) -> Field {
        let powers: Vec<f64> = self.shells.iter().map(|k| k.powf(s)).collect();
        let mut hat = self.forward(u);
        for (c, &i) in hat.iter_mut().zip(&self.shell_of) {
            *c *= powers[i as usize];
        }
        self.inverse(hat)
    }

    /// Parseval weight `h^N / M^N` turning `Σ|û|²` into `∫|u|²`.
    pub fn parseval_weight(&self) -> f64 {
        self.grid.cell_volume() / self.grid.size() as f64
    }

    /// `Σ_k w(|ξ_k|²) |û_k|²` times the Parseval weight.
    pub fn weighted_energy(&self, hat: &[Complex64], weight: impl Fn(f64) -> f64) -> f64 {
        self.parseval_weight()
            * hat.iter().zip(&self.k2).map(|(c, &k2)| weight(k2) * c.norm_sqr()).sum::<f64>()
    }

    /// `||(-Δ)^{s/2} u||²`.
    pub fn seminorm_sq(&self, u: &Field, s: f64) -> f64 {
        self.weighted_energy(&self.forward(u), |k2| k2.powf(s))
    }

    /// `||u||² + ||(-Δ)^{s/2} u||²`, which with `C_{N,s} = 2` is `||u||²_{2,s}`.
    pub fn hs_norm_sq(&self, u: &Field, s: f64) -> f64 {
        self.weighted_energy(&self.forward(u), |k2| 1.0 + k2.powf(s))
    }
}

pub fn fractional_laplacian(u: &Field, s: f64) -> Field {
    Spectral::new(u.grid).fractional_laplacian(u, s)
}

pub fn hs_norm_sq(u: &Field, s: f64) -> f64 {
    Spectral::new(u.grid).hs_norm_sq(u, s)
}

/// Truncated Riesz kernel `A_α |x|^{α-N}` sampled on the doubled grid, with
/// its transform prepared for linear convolution on the base grid.
#[derive(Debug, Clone)]
pub struct RieszKernel {
    grid: Grid,
    alpha: f64,
    samples: Field,
    spectrum: Vec<Complex64>,
    fft: FftNd,
}

impl RieszKernel {
    pub fn new(grid: Grid, alpha: f64) -> Result<Self> {
        let a_alpha = riesz_constant(grid.dims, alpha)?;
        let n = grid.dims as f64;
        let h = grid.spacing();
        let doubled = grid.doubled();
        let origin_value = a_alpha * h.powf(alpha - n) * unit_cell_integral(grid.dims, alpha);
        let mut idx = vec![0usize; grid.dims];
        let mut samples = Field::zeros(doubled);
        for i in 0..doubled.size() {
            doubled.unravel(i, &mut idx);
            let r2: i64 = idx.iter().map(|&j| doubled.centered(j).pow(2)).sum();
            samples.values[i] = if r2 == 0 {
                origin_value
            } else {
                a_alpha * (r2 as f64).sqrt().powf(alpha - n) * h.powf(alpha - n)
            };
        }
        // Circular layout: offset d lives at index d mod 2M, i.e. the centred
        // samples shifted by M along every axis.
        let fft = FftNd::new(doubled.m, grid.dims);
        let mut spectrum = vec![Complex64::default(); doubled.size()];
        let vol = grid.cell_volume();
        for i in 0..doubled.size() {
            doubled.unravel(i, &mut idx);
            for j in idx.iter_mut() {
                *j = (*j + grid.m) % doubled.m;
            }
            spectrum[doubled.ravel(&idx)] = Complex64::new(samples.values[i] * vol, 0.0);
        }
        fft.forward(&mut spectrum);
        Ok(Self { grid, alpha, samples, spectrum, fft })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Kernel samples on `[-L, L)^N` (doubled grid, centred layout).
    pub fn samples(&self) -> &Field {
        &self.samples
    }

    /// Value used for the kernel at offset `d` (in lattice units).
    pub fn at_offset(&self, d: &[i64]) -> f64 {
        let g = self.samples.grid;
        let idx: Vec<usize> = d.iter().map(|&c| g.wrap(c)).collect();
        self.samples.values[g.ravel(&idx)]
    }

    /// Linear convolution `h^N Σ_j w_j K(x_i - x_j) f_j` over the closed box.
    ///
    /// A node on the seam slice `x_a = -L/2` also stands for its periodic copy
    /// at `x_a = +L/2`. Sources on the seam are split evenly between their
    /// copies (trapezoid end weights) and the output at a seam node is the
    /// average over its copies. The discrete operator then commutes exactly
    /// with every signed permutation of the axes.
    pub fn convolve(&self, f: &Field) -> Result<Field> {
        self.grid.check_same(&f.grid)?;
        let m = self.grid.m;
        let big = self.grid.doubled();
        let dims = self.grid.dims;
        let mut data = vec![Complex64::default(); big.size()];
        let mut idx = vec![0usize; dims];
        let mut copy = vec![0usize; dims];
        let mut seam = Vec::with_capacity(dims);
        for (i, &v) in f.values.iter().enumerate() {
            self.grid.unravel(i, &mut idx);
            if !idx.contains(&0) {
                data[big.ravel(&idx)] = Complex64::new(v, 0.0);
                continue;
            }
            seam_axes(&idx, &mut seam);
            let share = v / (1usize << seam.len()) as f64;
            for mask in 0..1usize << seam.len() {
                seam_copy(&idx, &seam, mask, m, &mut copy);
                data[big.ravel(&copy)] = Complex64::new(share, 0.0);
            }
        }
        self.fft.forward_padded(&mut data, m + 1);
        for (c, k) in data.iter_mut().zip(&self.spectrum) {
            *c *= k;
        }
        self.fft.inverse_cropped_unscaled(&mut data, m + 1);
        let scale = 1.0 / big.size() as f64;
        let values = (0..f.len())
            .map(|i| {
                self.grid.unravel(i, &mut idx);
                if !idx.contains(&0) {
                    return data[big.ravel(&idx)].re * scale;
                }
                seam_axes(&idx, &mut seam);
                let copies = 1usize << seam.len();
                let mut acc = 0.0;
                for mask in 0..copies {
                    seam_copy(&idx, &seam, mask, m, &mut copy);
                    acc += data[big.ravel(&copy)].re;
                }
                acc * scale / copies as f64
            })
            .collect();
        Ok(Field { grid: self.grid, values })
    }
}

fn seam_axes(idx: &[usize], out: &mut Vec<usize>) {
    out.clear();
    out.extend(idx.iter().enumerate().filter(|(_, &j)| j == 0).map(|(a, _)| a));
}

/// Copy of a seam node: axes of `seam` selected by `mask` moved to index `m`.
fn seam_copy(idx: &[usize], seam: &[usize], mask: usize, m: usize, out: &mut [usize]) {
    out.copy_from_slice(idx);
    for (b, &a) in seam.iter().enumerate() {
        if mask >> b & 1 == 1 {
            out[a] = m;
        }
    }
}

pub fn build_riesz_kernel(grid: Grid, alpha: f64) -> Result<RieszKernel> {
    RieszKernel::new(grid, alpha)
}

pub fn riesz_convolve(f: &Field, kernel: &RieszKernel) -> Result<Field> {
    kernel.convolve(f)
}

/// `∫_{[-1/2,1/2]^N} |y|^{α-N} dy`.
///
/// Splitting the cube into `2N` pyramids over its faces and integrating along
/// rays leaves the smooth integral `(N/α) ∫_{[-1/2,1/2]^{N-1}} (1/4 + |z|²)^{(α-N)/2} dz`.
pub fn unit_cell_integral(n: usize, alpha: f64) -> f64 {
    let nf = n as f64;
    let expo = (alpha - nf) / 2.0;
    let face_dims = n - 1;
    // Integrate over the positive orthant of the face and multiply by 2^{N-1}.
    let inner = nested_simpson(face_dims, &mut Vec::with_capacity(face_dims), &|z: &[f64]| {
        (0.25 + z.iter().map(|v| v * v).sum::<f64>()).powf(expo)
    });
    nf / alpha * 2f64.powi(face_dims as i32) * inner
}

fn nested_simpson(depth: usize, prefix: &mut Vec<f64>, f: &dyn Fn(&[f64]) -> f64) -> f64 {
    if depth == 0 {
        return f(prefix);
    }
    let mut g = |t: f64| {
        prefix.push(t);
        let v = nested_simpson(depth - 1, prefix, f);
        prefix.pop();
        v
    };
    adaptive_simpson(&mut g, 0.0, 0.5, 1e-12, 40)
}

pub(crate) fn adaptive_simpson(
    f: &mut dyn FnMut(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &mut dyn FnMut(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
}

/// Largest grid accepted by [`gagliardo_norm_sq`].
pub const GAGLIARDO_MAX_NODES: usize = 4096;

/// Periodic image shells summed into the Gagliardo kernel by default.
pub const GAGLIARDO_IMAGES: usize = 8;

/// Direct double sum `h^{2N} Σ_{x≠y} |u(x)-u(y)|² K(x-y)` with the
/// periodised kernel `K(d) = Σ_n |d + nL|^{-N-2s}` over `images` shells.
///
/// Relates to the spectral seminorm through the true `C_{N,s}` (see
/// [`crate::params::gagliardo_constant`]): `||(-Δ)^{s/2}u||² ≈ (C_{N,s}/2) [u]²`.
pub fn gagliardo_norm_sq(u: &Field, s: f64, images: usize) -> Result<f64> {
    let g = u.grid;
    if g.size() > GAGLIARDO_MAX_NODES {
        return Err(Error::TooLarge { nodes: g.size(), limit: GAGLIARDO_MAX_NODES });
    }
    let dims = g.dims;
    let h = g.spacing();
    let expo = -(dims as f64 + 2.0 * s) / 2.0;
    let m = g.m as i64;
    let img = images as i64;
    let width = 2 * images + 1;
    let shells = width.pow(dims as u32);

    // Kernel per offset residue, offsets in lattice units in [0, M)^dims.
    let mut kernel = vec![0.0; g.size()];
    let mut idx = vec![0usize; dims];
    let mut d = vec![0i64; dims];
    for (i, k) in kernel.iter_mut().enumerate() {
        g.unravel(i, &mut idx);
        for (da, &j) in d.iter_mut().zip(&idx) {
            let c = j as i64;
            *da = if c >= m / 2 { c - m } else { c };
        }
        let mut acc = 0.0;
        for shell in 0..shells {
            let mut r = shell;
            let mut r2 = 0i64;
            for &da in &d {
                let n = (r % width) as i64 - img;
                r /= width;
                r2 += (da + n * m).pow(2);
            }
            if r2 > 0 {
                acc += (r2 as f64 * h * h).powf(expo);
            }
        }
        *k = acc;
    }

    let mut jdx = vec![0usize; dims];
    let mut total = 0.0;
    for x in 0..g.size() {
        g.unravel(x, &mut idx);
        for (off, &k) in kernel.iter().enumerate() {
            if k == 0.0 {
                continue;
            }
            g.unravel(off, &mut jdx);
            for (j, &i) in jdx.iter_mut().zip(&idx) {
                *j = (*j + i) % g.m;
            }
            let diff = u.values[x] - u.values[g.ravel(&jdx)];
            total += k * diff * diff;
        }
    }
    Ok(total * g.cell_volume().powi(2))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    #[test]
    fn single_mode_eigenvalue() {
        let g = Grid::new(3, 16, 10.0).unwrap();
        let u = Field::from_fn(g, |x| (2.0 * PI * x[0] / g.len).cos());
        for s in [0.25, 0.5, 1.0] {
            let lu = fractional_laplacian(&u, s);
            let lambda = (2.0 * PI / g.len).powf(2.0 * s);
            for (a, b) in lu.values.iter().zip(&u.values) {
                assert!((a - lambda * b).abs() < 1e-12 * lambda);
            }
        }
    }

    #[test]
    fn constant_maps_to_zero() {
        let g = Grid::new(2, 8, 3.0).unwrap();
        let u = Field::from_fn(g, |_| 4.2);
        assert!(fractional_laplacian(&u, 0.3).max_abs() < 1e-13);
    }

    #[test]
    fn hs_norm_of_single_mode() {
        let g = Grid::new(3, 16, 8.0).unwrap();
        let s = 0.4;
        let u = Field::from_fn(g, |x| (2.0 * PI * x[0] / g.len).cos());
        let want = g.len.powi(3) / 2.0 * (1.0 + (2.0 * PI / g.len).powf(2.0 * s));
        assert!((hs_norm_sq(&u, s) - want).abs() < 1e-12 * want);
        assert_eq!(hs_norm_sq(&Field::zeros(g), s), 0.0);
    }

    #[test]
    fn kernel_samples() {
        let g = Grid::new(3, 8, 4.0).unwrap();
        let k = RieszKernel::new(g, 2.0).unwrap();
        let h = g.spacing();
        let want = 1.0 / (4.0 * PI) / h;
        assert!((k.at_offset(&[1, 0, 0]) - want).abs() < 1e-14 * want);
        assert_eq!(k.at_offset(&[2, -3, 1]), k.at_offset(&[-2, 3, -1]));
        let corner = 1.0 / (4.0 * PI) / (h * 3f64.sqrt() / 2.0);
        assert!(k.at_offset(&[0, 0, 0]) > corner);
        assert!(RieszKernel::new(g, 3.0).is_err());
    }

    #[test]
    fn unit_cell_integral_values() {
        // N = 1 closed form: 2 (1/2)^α / α.
        for alpha in [0.3, 0.5, 0.9] {
            let want = 2.0 * 0.5f64.powf(alpha) / alpha;
            assert!((unit_cell_integral(1, alpha) - want).abs() < 1e-10 * want);
        }
        // α = N: the integrand is 1, integral is the cell volume.
        assert!((unit_cell_integral(3, 3.0 - 1e-15) - 1.0).abs() < 1e-9);
        // ∫ 1/|y| over the unit cube (mpmath reference).
        assert!((unit_cell_integral(3, 2.0) - UNIT_CUBE_INV_R).abs() < 1e-8 * UNIT_CUBE_INV_R);
    }

    const UNIT_CUBE_INV_R: f64 = 2.380_077_363_979_553_5;

    #[test]
    fn gagliardo_guard_and_constant_field() {
        let big = Grid::new(3, 32, 1.0).unwrap();
        assert!(matches!(
            gagliardo_norm_sq(&Field::zeros(big), 0.5, 1),
            Err(Error::TooLarge { .. })
        ));
        let g = Grid::new(2, 8, 4.0).unwrap();
        assert_eq!(gagliardo_norm_sq(&Field::from_fn(g, |_| 1.5), 0.5, 2).unwrap(), 0.0);
    }
}
