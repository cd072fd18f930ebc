//! Periodic sampling lattice and real fields on it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `M^dims` nodes on `[-L/2, L/2)^dims`, node `j` of an axis at `-L/2 + j L/M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dims: usize,
    pub m: usize,
    pub len: f64,
}

impl Grid {
    pub fn new(dims: usize, m: usize, len: f64) -> Result<Self> {
        if dims == 0 {
            return Err(Error::Domain("grid needs at least one axis".into()));
        }
        if m < 8 || m % 2 != 0 {
            return Err(Error::Domain(format!("M = {m} must be even and >= 8")));
        }
        if !(len > 0.0 && len.is_finite()) {
            return Err(Error::Domain(format!("L = {len} must be positive")));
        }
        Ok(Self { dims, m, len })
    }

    pub fn spacing(&self) -> f64 {
        self.len / self.m as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dims as i32)
    }

    pub fn size(&self) -> usize {
        self.m.pow(self.dims as u32)
    }

    /// The grid on `[-L, L)^dims` with `2M` nodes per axis used for
    /// zero-padded convolutions.
    pub fn doubled(&self) -> Grid {
        Grid { dims: self.dims, m: 2 * self.m, len: 2.0 * self.len }
    }

    /// Per-axis node indices of flat index `i` (row-major, last axis fastest).
    pub fn unravel(&self, mut i: usize, out: &mut [usize]) {
        for a in (0..self.dims).rev() {
            out[a] = i % self.m;
            i /= self.m;
        }
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &j| acc * self.m + j)
    }

    /// Integer offset of node `j` from the origin node `M/2`.
    pub fn centered(&self, j: usize) -> i64 {
        j as i64 - (self.m / 2) as i64
    }

    /// Node index of a centred integer coordinate, taken modulo `M`.
    pub fn wrap(&self, c: i64) -> usize {
        (c + (self.m / 2) as i64).rem_euclid(self.m as i64) as usize
    }

    pub fn coordinate(&self, j: usize) -> f64 {
        self.centered(j) as f64 * self.spacing()
    }

    /// Index of the node at the origin.
    pub fn origin(&self) -> usize {
        self.ravel(&vec![self.m / 2; self.dims])
    }

    /// Coordinates of every node, flattened row-major (`dims` per node).
    pub fn coordinates(&self) -> Vec<f64> {
        let mut idx = vec![0; self.dims];
        let mut out = Vec::with_capacity(self.size() * self.dims);
        for i in 0..self.size() {
            self.unravel(i, &mut idx);
            out.extend(idx.iter().map(|&j| self.coordinate(j)));
        }
        out
    }

    /// Angular wavenumber `2π m / L` of FFT bin `k`, `m` in `[-M/2, M/2)`.
    pub fn wavenumber(&self, k: usize) -> f64 {
        let m = if k < self.m / 2 { k as i64 } else { k as i64 - self.m as i64 };
        2.0 * std::f64::consts::PI * m as f64 / self.len
    }

    /// `|ξ|²` for every FFT bin, in the same flat order as the field.
    pub fn wavenumber_sq(&self) -> Vec<f64> {
        let k1: Vec<f64> = (0..self.m).map(|k| self.wavenumber(k).powi(2)).collect();
        let mut idx = vec![0; self.dims];
        (0..self.size())
            .map(|i| {
                self.unravel(i, &mut idx);
                idx.iter().map(|&k| k1[k]).sum()
            })
            .collect()
    }

    pub fn check_same(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(Error::ShapeMismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }
}

/// Real samples on a [`Grid`], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![0.0; grid.size()] }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.size() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.size()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let mut idx = vec![0; grid.dims];
        let mut x = vec![0.0; grid.dims];
        let values = (0..grid.size())
            .map(|i| {
                grid.unravel(i, &mut idx);
                for (xa, &j) in x.iter_mut().zip(&idx) {
                    *xa = grid.coordinate(j);
                }
                f(&x)
            })
            .collect();
        Self { grid, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, t: f64) -> Field {
        Field { grid: self.grid, values: self.values.iter().map(|v| t * v).collect() }
    }

    pub fn scale(&mut self, t: f64) {
        self.values.iter_mut().for_each(|v| *v *= t);
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &Field) {
        for (v, w) in self.values.iter_mut().zip(&other.values) {
            *v += a * w;
        }
    }

    /// Quadrature `∫ u v dx`.
    pub fn dot(&self, other: &Field) -> f64 {
        self.grid.cell_volume() * self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
