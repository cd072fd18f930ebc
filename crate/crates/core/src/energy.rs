//! The action functional
//! `I(u) = ½(||u||² + ||(-Δ)^{s/2}u||²) - (1/2p) ∫ (K_α ∗ |u|^p)|u|^p`,
//! its L² gradient and the Nehari scaling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::params::ModelParams;
use crate::spectral::{RieszKernel, Spectral};

/// `quad = ½||u||²_{2,s}`, `nonlocal = D(u)`, `total = quad - nonlocal/(2p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub quad: f64,
    pub nonlocal: f64,
    pub total: f64,
}

/// `|u|^p`.
pub(crate) fn abs_pow(v: f64, p: f64) -> f64 {
    if p == 2.0 {
        v * v
    } else {
        v.abs().powf(p)
    }
}

/// `|u|^{p-2} u`, continuous at zero for `p >= 2`.
pub(crate) fn odd_pow(v: f64, p: f64) -> f64 {
    if p == 2.0 {
        v
    } else if v == 0.0 {
        0.0
    } else {
        v.abs().powf(p - 2.0) * v
    }
}

/// `(½ - 1/(2p)) hs^{p/(p-1)} / D^{1/(p-1)}`, the energy on the Nehari set of
/// the ray through a field with `||u||²_{2,s} = hs` and interaction `D`.
pub fn nehari_level(hs: f64, d: f64, p: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::ZeroInteraction);
    }
    Ok((0.5 - 0.5 / p) * hs.powf(p / (p - 1.0)) / d.powf(1.0 / (p - 1.0)))
}

/// `t` with `<I'(tu), tu> = 0`.
pub fn nehari_factor(hs: f64, d: f64, p: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::ZeroInteraction);
    }
    Ok((hs / d).powf(1.0 / (2.0 * p - 2.0)))
}

/// Transform plans and kernel for evaluating `I` on one grid.
#[derive(Debug, Clone)]
pub struct Functional {
    params: ModelParams,
    spectral: Spectral,
    kernel: RieszKernel,
    /// `1 + |ξ|^{2s}` per FFT bin.
    symbol: Vec<f64>,
}

impl Functional {
    pub fn new(params: ModelParams, grid: Grid) -> Result<Self> {
        params.validate()?;
        if grid.dims != params.n {
            return Err(Error::ShapeMismatch(format!(
                "grid has {} axes but N = {}",
                grid.dims, params.n
            )));
        }
        let spectral = Spectral::new(grid);
        let kernel = RieszKernel::new(grid, params.alpha)?;
        let symbol = spectral.wavenumber_sq().iter().map(|&k2| 1.0 + k2.powf(params.s)).collect();
        Ok(Self { params, spectral, kernel, symbol })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn grid(&self) -> &Grid {
        self.spectral.grid()
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    pub fn kernel(&self) -> &RieszKernel {
        &self.kernel
    }

    /// `1 + |ξ|^{2s}` per FFT bin.
    pub fn symbol(&self) -> &[f64] {
        &self.symbol
    }

    pub fn hs_norm_sq(&self, u: &Field) -> f64 {
        let hat = self.spectral.forward(u);
        self.spectral.parseval_weight()
            * hat.iter().zip(&self.symbol).map(|(c, w)| w * c.norm_sqr()).sum::<f64>()
    }

    /// `K_α ∗ |u|^p`.
    pub fn potential(&self, u: &Field) -> Result<Field> {
        let p = self.params.p;
        let pow = Field { grid: u.grid, values: u.values.iter().map(|&v| abs_pow(v, p)).collect() };
        self.kernel.convolve(&pow)
    }

    /// `∫ (K_α ∗ |u|^p)|u|^p` given the potential.
    pub fn interaction_with(&self, u: &Field, potential: &Field) -> f64 {
        let p = self.params.p;
        u.grid.cell_volume()
            * u.values.iter().zip(&potential.values).map(|(&v, &w)| w * abs_pow(v, p)).sum::<f64>()
    }

    pub fn interaction(&self, u: &Field) -> Result<f64> {
        self.grid().check_same(&u.grid)?;
        Ok(self.interaction_with(u, &self.potential(u)?))
    }

    pub fn energy(&self, u: &Field) -> Result<EnergyBreakdown> {
        self.grid().check_same(&u.grid)?;
        let quad = 0.5 * self.hs_norm_sq(u);
        let nonlocal = self.interaction(u)?;
        Ok(EnergyBreakdown { quad, nonlocal, total: quad - nonlocal / (2.0 * self.params.p) })
    }

    /// `(K_α ∗ |u|^p)|u|^{p-2}u`.
    pub fn nonlinearity_with(&self, u: &Field, potential: &Field) -> Field {
        let p = self.params.p;
        Field {
            grid: u.grid,
            values: u.values.iter().zip(&potential.values).map(|(&v, &w)| w * odd_pow(v, p)).collect(),
        }
    }

    /// `(-Δ)^s u + u - (K_α ∗ |u|^p)|u|^{p-2}u`.
    pub fn gradient(&self, u: &Field) -> Result<Field> {
        self.grid().check_same(&u.grid)?;
        let potential = self.potential(u)?;
        Ok(self.gradient_with(u, &potential))
    }

    pub fn gradient_with(&self, u: &Field, potential: &Field) -> Field {
        let mut hat = self.spectral.forward(u);
        for (c, w) in hat.iter_mut().zip(&self.symbol) {
            *c *= w;
        }
        let mut g = self.spectral.inverse(hat);
        g.axpy(-1.0, &self.nonlinearity_with(u, potential));
        g
    }

    pub fn nehari_scale(&self, u: &Field) -> Result<f64> {
        nehari_factor(self.hs_norm_sq(u), self.interaction(u)?, self.params.p)
    }

    pub fn nehari_energy(&self, u: &Field) -> Result<f64> {
        nehari_level(self.hs_norm_sq(u), self.interaction(u)?, self.params.p)
    }

    /// `t u` with `t` from [`Functional::nehari_scale`].
    pub fn nehari_project(&self, u: &Field) -> Result<Field> {
        Ok(u.scaled(self.nehari_scale(u)?))
    }

    /// `<I'(u), u> = ||u||²_{2,s} - D(u)`.
    pub fn nehari_residual(&self, u: &Field) -> Result<f64> {
        Ok(self.hs_norm_sq(u) - self.interaction(u)?)
    }
}

pub fn interaction(u: &Field, params: &ModelParams) -> Result<f64> {
    Functional::new(*params, u.grid)?.interaction(u)
}

pub fn energy(u: &Field, params: &ModelParams) -> Result<EnergyBreakdown> {
    Functional::new(*params, u.grid)?.energy(u)
}

pub fn gradient(u: &Field, params: &ModelParams) -> Result<Field> {
    Functional::new(*params, u.grid)?.gradient(u)
}

pub fn nehari_scale(u: &Field, params: &ModelParams) -> Result<f64> {
    Functional::new(*params, u.grid)?.nehari_scale(u)
}

pub fn nehari_energy(u: &Field, params: &ModelParams) -> Result<f64> {
    Functional::new(*params, u.grid)?.nehari_energy(u)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn setup(m: usize) -> Functional {
        let grid = Grid::new(3, m, 8.0).unwrap();
        Functional::new(ModelParams::new(3, 0.5, 2.0, 2.0), grid).unwrap()
    }

    fn smooth_random(grid: Grid, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let amp = rng.gen_range(0.5..1.5);
        Field::from_fn(grid, |x| {
            let r2: f64 = x.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum();
            amp * (-r2).exp() + 0.1 * (x[0] * x[1]).sin() * (-r2 / 4.0).exp()
        })
    }

    #[test]
    fn zero_field() {
        let f = setup(8);
        let z = Field::zeros(*f.grid());
        assert_eq!(f.energy(&z).unwrap().total, 0.0);
        assert!(f.gradient(&z).unwrap().values.iter().all(|&v| v == 0.0));
        assert!(matches!(f.nehari_scale(&z), Err(Error::ZeroInteraction)));
    }

    #[test]
    fn homogeneity() {
        let f = setup(8);
        let u = smooth_random(*f.grid(), 1);
        let e1 = f.energy(&u).unwrap();
        let e2 = f.energy(&u.scaled(1.7)).unwrap();
        assert!((e2.quad / e1.quad - 1.7f64.powi(2)).abs() < 1e-12);
        assert!((e2.nonlocal / e1.nonlocal - 1.7f64.powi(4)).abs() < 1e-12);
        assert_eq!(e1.total, e1.quad - e1.nonlocal / 4.0);
    }

    #[test]
    fn nehari_closed_form() {
        assert_eq!(nehari_level(4.0, 1.0, 2.0).unwrap(), 4.0);
        assert_eq!(nehari_factor(3.0, 3.0, 2.5).unwrap(), 1.0);
        let f = setup(12);
        let u = smooth_random(*f.grid(), 2);
        let t = f.nehari_scale(&u).unwrap();
        let v = u.scaled(t);
        let direct = f.energy(&v).unwrap().total;
        let closed = f.nehari_energy(&u).unwrap();
        assert!(((direct - closed) / closed).abs() < 1e-12);
        assert!((f.nehari_scale(&v).unwrap() - 1.0).abs() < 1e-12);
        assert!(f.nehari_residual(&v).unwrap().abs() / f.hs_norm_sq(&v) < 1e-12);
        // Scale covariance.
        assert!((f.nehari_scale(&u.scaled(2.0)).unwrap() - t / 2.0).abs() < 1e-12 * t);
    }

    #[test]
    fn gradient_matches_directional_derivative() {
        let f = setup(12);
        let u = smooth_random(*f.grid(), 4);
        let v = smooth_random(*f.grid(), 5);
        let g = f.gradient(&u).unwrap();
        let eps = 1e-5;
        let mut up = u.clone();
        up.axpy(eps, &v);
        let mut um = u.clone();
        um.axpy(-eps, &v);
        let fd = (f.energy(&up).unwrap().total - f.energy(&um).unwrap().total) / (2.0 * eps);
        let exact = g.dot(&v);
        assert!((fd - exact).abs() / exact.abs().max(1e-300) < 1e-6, "{fd} vs {exact}");
    }
}
