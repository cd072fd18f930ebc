//! s-harmonic extension `U(x, y)` of a field to the half space `y > 0`,
//! its weighted Dirichlet energy `∫ y^{1-2s} |∇U|²`, and the identities
//! relating that energy to `||(-Δ)^{s/2} u||²`.
//!
//! In frequency space the extension is `Û(ξ, y) = û(ξ) ψ(|ξ| y)` with
//! `ψ(y) = 2^{1-s}/Γ(s) · y^s K_s(y)`, the decaying solution of
//! `ψ'' + (1-2s)/y ψ' = ψ` with `ψ(0) = 1`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::coxeter::CoxeterGroup;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::params::{extension_constant, gamma};
use crate::spectral::Spectral;
use crate::symmetry::act;

/// Slack allowed on the trace inequality for quadrature error.
pub const TRACE_SLACK: f64 = 0.02;

fn check_order(s: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Domain(format!("s = {s} must lie in (0, 1)")));
    }
    Ok(())
}

/// `e^x K_ν(x)` from `K_ν(x) = ∫_0^∞ e^{-x cosh t} cosh(ν t) dt`, trapezoid
/// rule in `t` (spectrally accurate for this doubly decaying integrand).
pub fn bessel_k_scaled(nu: f64, x: f64) -> f64 {
    assert!(x > 0.0, "K_nu needs x > 0");
    let dt = 0.02;
    let mut sum = 0.5;
    let mut t: f64 = dt;
    loop {
        let expo = -x * (t.cosh() - 1.0);
        let term = (expo + nu.abs() * t).exp() * 0.5 * (1.0 + (-2.0 * nu.abs() * t).exp());
        sum += term;
        if expo + nu.abs() * t < -45.0 {
            break;
        }
        t += dt;
    }
    sum * dt
}

pub fn bessel_k(nu: f64, x: f64) -> f64 {
    bessel_k_scaled(nu, x) * (-x).exp()
}

/// Extension profile `ψ_s(y)`; `ψ(0) = 1`.
pub fn psi_profile(s: f64, y: f64) -> Result<f64> {
    check_order(s)?;
    if !(y >= 0.0) {
        return Err(Error::Domain(format!("y = {y} must be nonnegative")));
    }
    Ok(psi_unchecked(s, y, 2f64.powf(1.0 - s) / gamma(s)))
}

fn psi_unchecked(s: f64, y: f64, norm: f64) -> f64 {
    if y == 0.0 {
        1.0
    } else if y > 700.0 {
        0.0
    } else {
        // y^s e^{-y} (e^y K_s(y)), combined in log space for tiny y.
        norm * (s * y.ln() - y).exp() * bessel_k_scaled(s, y)
    }
}

/// Independent profile: integrate `ψ_tt = 2s ψ_t + e^{2t} ψ` (`t = ln y`)
/// backwards from `y_far`, starting on the decaying branch, then normalise
/// by the limit `ψ - ψ_t/(2s) → ψ(0)` at `y_near`. Returns `(y, ψ(y))` at
/// the requested points (which must lie in `[y_near, y_far]`).
pub fn psi_by_shooting(s: f64, points: &[f64], y_near: f64, y_far: f64, dt: f64) -> Result<Vec<f64>> {
    check_order(s)?;
    let mut targets: Vec<(f64, usize)> = points.iter().enumerate().map(|(i, &y)| (y.ln(), i)).collect();
    targets.sort_by(|a, b| b.0.total_cmp(&a.0));
    let rhs = |t: f64, v: [f64; 2]| -> [f64; 2] { [v[1], 2.0 * s * v[1] + (2.0 * t).exp() * v[0]] };
    let mu = 4.0 * s * s - 1.0;
    let slope = -1.0 + (s - 0.5) / y_far - mu / (8.0 * y_far * y_far);
    // ψ_t = y ψ'; the amplitude is arbitrary and fixed by normalisation.
    let mut v = [1.0, y_far * slope];
    let t_end = y_near.ln();
    let mut t = y_far.ln();
    let mut raw = vec![0.0; points.len()];
    let mut next = 0;
    let steps = ((t - t_end) / dt).ceil() as usize;
    let h = -(t - t_end) / steps as f64;
    let mut prev = (t, v);
    for _ in 0..=steps {
        while next < targets.len() && targets[next].0 >= t - 1e-15 && targets[next].0 <= prev.0 + 1e-15 {
            // Cubic Hermite interpolation between the last two steps.
            let (t0, v0) = prev;
            let (t1, v1) = (t, v);
            let span = t1 - t0;
            let value = if span.abs() < 1e-300 {
                v1[0]
            } else {
                let r = (targets[next].0 - t0) / span;
                let (h00, h10, h01, h11) = (
                    2.0 * r.powi(3) - 3.0 * r * r + 1.0,
                    r.powi(3) - 2.0 * r * r + r,
                    -2.0 * r.powi(3) + 3.0 * r * r,
                    r.powi(3) - r * r,
                );
                h00 * v0[0] + h10 * span * v0[1] + h01 * v1[0] + h11 * span * v1[1]
            };
            raw[targets[next].1] = value;
            next += 1;
        }
        if t <= t_end + 1e-15 {
            break;
        }
        prev = (t, v);
        let k1 = rhs(t, v);
        let k2 = rhs(t + h / 2.0, [v[0] + h / 2.0 * k1[0], v[1] + h / 2.0 * k1[1]]);
        let k3 = rhs(t + h / 2.0, [v[0] + h / 2.0 * k2[0], v[1] + h / 2.0 * k2[1]]);
        let k4 = rhs(t + h, [v[0] + h * k3[0], v[1] + h * k3[1]]);
        for i in 0..2 {
            v[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t += h;
    }
    let at_zero = v[0] - v[1] / (2.0 * s);
    Ok(raw.iter().map(|r| r / at_zero).collect())
}

/// Graded nodes `y_j = Y_max (j/J)^γ`, `j = 1..J`; `y_0 = 0` is the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YGrid {
    pub y_max: f64,
    pub j: usize,
    pub gamma: f64,
    pub nodes: Vec<f64>,
}

impl YGrid {
    pub fn new(y_max: f64, j: usize, gamma: f64) -> Result<Self> {
        if j < 64 {
            return Err(Error::Domain(format!("J = {j} must be at least 64")));
        }
        if !(y_max > 0.0 && gamma >= 1.0) {
            return Err(Error::Domain("need Y_max > 0 and grading >= 1".into()));
        }
        let nodes = (1..=j).map(|i| y_max * (i as f64 / j as f64).powf(gamma)).collect();
        Ok(Self { y_max, j, gamma, nodes })
    }

    /// `γ = 2`, `Y_max = 40/|ξ_min|` with `|ξ_min| = 2π/L`.
    pub fn for_grid(grid: &Grid, j: usize) -> Result<Self> {
        Self::new(40.0 * grid.len / (2.0 * std::f64::consts::PI), j, 2.0)
    }

    /// `0, y_1, …, y_J`.
    pub fn with_origin(&self) -> Vec<f64> {
        std::iter::once(0.0).chain(self.nodes.iter().copied()).collect()
    }
}

/// `U` on the lattice times `{0} ∪ YGrid`; slice 0 is the trace.
#[derive(Debug, Clone)]
pub struct ExtensionField {
    pub grid: Grid,
    pub ygrid: YGrid,
    /// `J + 1` slices, each a field on `grid`.
    pub slices: Vec<Field>,
}

impl ExtensionField {
    pub fn trace(&self) -> &Field {
        &self.slices[0]
    }

    /// Adds `f(x, y)` on every slice with `y > 0`; the trace is untouched.
    pub fn perturb(&mut self, mut f: impl FnMut(&[f64], f64) -> f64) {
        for (slice, &y) in self.slices.iter_mut().skip(1).zip(&self.ygrid.nodes) {
            let add = Field::from_fn(slice.grid, |x| f(x, y));
            slice.axpy(1.0, &add);
        }
    }
}

pub fn harmonic_extend(u: &Field, s: f64, ygrid: &YGrid) -> Result<ExtensionField> {
    check_order(s)?;
    let spectral = Spectral::new(u.grid);
    let hat = spectral.forward(u);
    let k: Vec<f64> = spectral.wavenumber_sq().iter().map(|k2| k2.sqrt()).collect();
    let norm = 2f64.powf(1.0 - s) / gamma(s);
    let mut slices = vec![u.clone()];
    let mut cache: HashMap<u64, f64> = HashMap::new();
    for &y in &ygrid.nodes {
        cache.clear();
        let scaled = hat
            .iter()
            .zip(&k)
            .map(|(c, &kk)| {
                let psi = *cache.entry(kk.to_bits()).or_insert_with(|| psi_unchecked(s, kk * y, norm));
                c * psi
            })
            .collect();
        slices.push(spectral.inverse(scaled));
    }
    Ok(ExtensionField { grid: u.grid, ygrid: ygrid.clone(), slices })
}

/// `∫_a^b y^e dy`.
fn moment(e: f64, a: f64, b: f64) -> f64 {
    (b.powf(e + 1.0) - a.powf(e + 1.0)) / (e + 1.0)
}

/// Quadrature of `∫ y^{1-2s} |∇U|² dx dy`.
///
/// `|∇_x U|²` is evaluated spectrally on every slice and interpolated
/// linearly between slices; `∂_y U` is the cell difference quotient. The
/// weight `y^{1-2s}` is integrated exactly over each cell in both parts.
pub fn extension_energy(v: &ExtensionField, s: f64) -> Result<f64> {
    check_order(s)?;
    let spectral = Spectral::new(v.grid);
    let e = 1.0 - 2.0 * s;
    let ys = v.ygrid.with_origin();
    let grad_x: Vec<f64> = v
        .slices
        .iter()
        .map(|f| spectral.weighted_energy(&spectral.forward(f), |k2| k2))
        .collect();
    let vol = v.grid.cell_volume();
    let mut total = 0.0;
    for j in 0..ys.len() - 1 {
        let (a, b) = (ys[j], ys[j + 1]);
        let dy = b - a;
        let m0 = moment(e, a, b);
        let m1 = moment(e + 1.0, a, b);
        // Linear interpolant in y of the x-gradient energy.
        let wa = (b * m0 - m1) / dy;
        let wb = (m1 - a * m0) / dy;
        total += wa * grad_x[j] + wb * grad_x[j + 1];
        let dsq: f64 = v.slices[j + 1]
            .values
            .iter()
            .zip(&v.slices[j].values)
            .map(|(p, q)| (p - q).powi(2))
            .sum();
        total += vol * dsq / (dy * dy) * m0;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub s: f64,
    pub j: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// `lhs = ∫ y^{1-2s}|∇h_s(u)|²`, `rhs = k_s ||(-Δ)^{s/2}u||²`.
pub fn energy_identity_check(u: &Field, s: f64, ygrid: &YGrid) -> Result<IdentityCheck> {
    let lhs = extension_energy(&harmonic_extend(u, s, ygrid)?, s)?;
    let rhs = extension_constant(s)? * Spectral::new(u.grid).seminorm_sq(u, s);
    Ok(IdentityCheck { s, j: ygrid.j, lhs, rhs, ratio: lhs / rhs })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

/// `||(-Δ)^{s/2} Tr V||² <= k_s^{-1} ∫ y^{1-2s}|∇V|²`, up to [`TRACE_SLACK`].
pub fn trace_inequality_check(v: &ExtensionField, s: f64) -> Result<TraceCheck> {
    let lhs = Spectral::new(v.grid).seminorm_sq(v.trace(), s);
    let rhs = extension_energy(v, s)? / extension_constant(s)?;
    Ok(TraceCheck { lhs, rhs, satisfied: lhs <= rhs * (1.0 + TRACE_SLACK) })
}

/// Whether every slice of `h_s(u)` satisfies `g∘U = φ(g) U` to `1e-12`
/// relative to `max|u|`.
pub fn extend_symmetry_check(u: &Field, group: &CoxeterGroup, s: f64, ygrid: &YGrid) -> Result<bool> {
    let ext = harmonic_extend(u, s, ygrid)?;
    let tol = 1e-12 * u.max_abs().max(f64::MIN_POSITIVE);
    for slice in &ext.slices {
        for (i, g) in group.elements().iter().enumerate() {
            let sign = group.sign_at(i) as f64;
            let moved = act(g, slice)?;
            if moved.values.iter().zip(&slice.values).any(|(a, b)| (a - sign * b).abs() > tol) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Sum of three seeded Gaussians with widths in `[L/8, L/5]`, centred in
/// the middle third of the box: smooth on the lattice and negligible at the
/// faces.
pub fn sample_field(grid: Grid, seed: u64) -> Field {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let bumps: Vec<(Vec<f64>, f64, f64)> = (0..3)
        .map(|_| {
            let c = (0..grid.dims).map(|_| rng.gen_range(-grid.len / 6.0..grid.len / 6.0)).collect();
            let w = rng.gen_range(grid.len / 8.0..grid.len / 5.0);
            (c, w, rng.gen_range(-1.0..1.0))
        })
        .collect();
    Field::from_fn(grid, |x| {
        bumps
            .iter()
            .map(|(c, w, a)| {
                let r2: f64 = x.iter().zip(c).map(|(p, q)| (p - q).powi(2)).sum();
                a * (-r2 / (w * w)).exp()
            })
            .sum()
    })
}
