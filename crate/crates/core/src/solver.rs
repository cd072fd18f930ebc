//! Initial guesses and the Nehari-projected, symmetrised descent that
//! approximates `c_G = inf_{N_G} I`.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis::{self, NodalReport, DEFAULT_EPS_REL};
use crate::coxeter::{dot, CoxeterGroup};
use crate::energy::{nehari_factor, nehari_level, Functional};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::params::ModelParams;
use crate::symmetry::SymmetryPlan;

pub use crate::symmetry::symmetrize;

/// Backtracking halvings tried before a step is declared stalled.
pub const MAX_HALVINGS: u32 = 30;

/// Iterates with `||u||_{L²}` below this are treated as collapsed.
pub const COLLAPSE_NORM: f64 = 1e-10;

/// Radial window (fractions of `L`) used for the decay fit of solutions.
pub const DECAY_WINDOW: (f64, f64) = (0.15, 0.35);

/// Samples of the fibering ray `t ↦ I(t u)` on `[0, 2]`.
pub const RAY_SAMPLES: usize = 101;

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub params: ModelParams,
    pub grid: Grid,
    pub group: CoxeterGroup,
    pub max_iters: usize,
    /// Bound on the projected relative L² gradient residual.
    pub tol: f64,
    /// Initial step `τ`, restored at every iteration.
    pub step: f64,
    pub seed: u64,
    /// Precondition the gradient by `(1 + |ξ|^{2s})^{-1}`.
    pub precondition: bool,
    /// Bump radius for [`init_saddle`]; `None` picks [`default_radius`].
    pub radius: Option<f64>,
}

impl SolverConfig {
    pub fn new(params: ModelParams, grid: Grid, group: CoxeterGroup) -> Self {
        Self {
            params,
            grid,
            group,
            max_iters: 2000,
            tol: 1e-6,
            step: 1.0,
            seed: 0,
            precondition: true,
            radius: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.grid.dims != self.params.n {
            return Err(Error::Config(format!(
                "grid has {} axes but N = {}",
                self.grid.dims, self.params.n
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol = {} must be positive", self.tol)));
        }
        if self.max_iters < 1 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::Config(format!("step = {} must be positive", self.step)));
        }
        if self.group.dim() > self.params.n {
            return Err(Error::RankExceedsDimension { rank: self.group.dim(), dims: self.params.n });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveMetadata {
    pub group: String,
    pub group_order: usize,
    pub params: ModelParams,
    pub grid: Grid,
    pub max_iters: usize,
    pub tol: f64,
    pub step: f64,
    pub seed: u64,
    pub precondition: bool,
    /// Backtracking failed to decrease the energy before the tolerance was met.
    pub stalled: bool,
    pub elapsed_secs: f64,
    pub nodal: NodalReport,
    pub sign_on_chamber: bool,
    pub experimental: bool,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub u: Field,
    pub energy: f64,
    pub residual: f64,
    pub iterations: usize,
    pub nodal_count: usize,
    pub decay_slope: Option<f64>,
    pub converged: bool,
    /// Nehari-restricted energy after every accepted step, starting with the
    /// projected initial guess.
    pub history: Vec<f64>,
    pub metadata: SolveMetadata,
}

/// Cached transforms, kernel and orbit plan for repeated solves on one grid.
#[derive(Debug, Clone)]
pub struct Solver {
    config: SolverConfig,
    functional: Functional,
    plan: SymmetryPlan,
}

struct Iterate {
    u: Field,
    hat: Vec<Complex64>,
    potential: Field,
    hs: f64,
    d: f64,
}

impl Solver {
    pub fn new(config: SolverConfig) -> Result<Self> {
        config.validate()?;
        let functional = Functional::new(config.params, config.grid)?;
        let plan = SymmetryPlan::new(&config.group, config.grid)?;
        Ok(Self { config, functional, plan })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn functional(&self) -> &Functional {
        &self.functional
    }

    pub fn plan(&self) -> &SymmetryPlan {
        &self.plan
    }

    fn evaluate(&self, u: Field, hat: Vec<Complex64>) -> Result<Iterate> {
        let f = &self.functional;
        let hs = f.spectral().parseval_weight()
            * hat.iter().zip(f.symbol()).map(|(c, w)| w * c.norm_sqr()).sum::<f64>();
        let potential = f.potential(&u)?;
        let d = f.interaction_with(&u, &potential);
        Ok(Iterate { u, hat, potential, hs, d })
    }

    fn rescaled(&self, it: Iterate) -> Result<Iterate> {
        let p = self.config.params.p;
        let t = nehari_factor(it.hs, it.d, p)?;
        let tp = t.powf(p);
        Ok(Iterate {
            u: it.u.scaled(t),
            hat: it.hat.iter().map(|c| c * t).collect(),
            potential: it.potential.scaled(tp),
            hs: it.hs * t * t,
            d: it.d * tp * tp,
        })
    }

    fn collapse_check(u: &Field) -> Result<()> {
        let norm = u.norm_sq().sqrt();
        if !(norm >= COLLAPSE_NORM) {
            return Err(Error::CollapseToZero(norm));
        }
        Ok(())
    }

    /// `||g - (<g,u>/||u||²) u|| / ||u||` for the L² gradient `g`.
    fn residual(&self, it: &Iterate) -> f64 {
        let f = &self.functional;
        let mut hat = it.hat.clone();
        for (c, w) in hat.iter_mut().zip(f.symbol()) {
            *c *= w;
        }
        let mut g = f.spectral().inverse(hat);
        g.axpy(-1.0, &f.nonlinearity_with(&it.u, &it.potential));
        let uu = it.u.norm_sq();
        let along = g.dot(&it.u) / uu;
        g.axpy(-along, &it.u);
        (g.norm_sq() / uu).sqrt()
    }

    /// Symmetrises and Nehari-projects `u`.
    pub fn prepare(&self, u: &Field) -> Result<Field> {
        let v = self.plan.project(u)?;
        Self::collapse_check(&v)?;
        self.functional.nehari_project(&v)
    }

    pub fn solve(&self, initial: &Field) -> Result<Solution> {
        let start = Instant::now();
        let cfg = &self.config;
        let f = &self.functional;
        let spectral = f.spectral();
        let p = cfg.params.p;

        let u0 = self.plan.project(initial)?;
        Self::collapse_check(&u0)?;
        let hat0 = spectral.forward(&u0);
        let mut cur = self.rescaled(self.evaluate(u0, hat0)?)?;
        let mut level = nehari_level(cur.hs, cur.d, p)?;
        let mut history = vec![level];
        let mut iterations = 0;
        let mut stalled = false;
        let mut residual = self.residual(&cur);

        while residual > cfg.tol && iterations < cfg.max_iters {
            let nonlin = f.nonlinearity_with(&cur.u, &cur.potential);
            let direction = if cfg.precondition {
                // τ-step towards (1 + |ξ|^{2s})^{-1} N(u).
                let mut nhat = spectral.forward(&nonlin);
                for (c, w) in nhat.iter_mut().zip(f.symbol()) {
                    *c /= w;
                }
                nhat
            } else {
                let mut g = spectral.inverse(
                    cur.hat.iter().zip(f.symbol()).map(|(c, w)| c * w).collect(),
                );
                g.axpy(-1.0, &nonlin);
                spectral.forward(&g)
            };
            let mut tau = cfg.step;
            let mut accepted = None;
            for _ in 0..=MAX_HALVINGS {
                let trial_hat: Vec<Complex64> = if cfg.precondition {
                    cur.hat.iter().zip(&direction).map(|(a, b)| a * (1.0 - tau) + b * tau).collect()
                } else {
                    cur.hat.iter().zip(&direction).map(|(a, b)| a - b * tau).collect()
                };
                let mut v = spectral.inverse(trial_hat);
                self.plan.apply(&mut v.values);
                Self::collapse_check(&v)?;
                let vhat = spectral.forward(&v);
                let trial = self.evaluate(v, vhat)?;
                if trial.d > 0.0 {
                    let trial_level = nehari_level(trial.hs, trial.d, p)?;
                    if trial_level <= level {
                        accepted = Some((trial, trial_level));
                        break;
                    }
                }
                tau *= 0.5;
            }
            let Some((trial, trial_level)) = accepted else {
                stalled = true;
                break;
            };
            cur = self.rescaled(trial)?;
            level = trial_level;
            history.push(level);
            iterations += 1;
            residual = self.residual(&cur);
        }

        let u = cur.u;
        let energy = f.energy(&u)?.total;
        let nodal = analysis::nodal_domains(&u, DEFAULT_EPS_REL);
        let decay_slope = analysis::decay_exponent(&u, DECAY_WINDOW.0, DECAY_WINDOW.1).ok();
        let sign_on_chamber =
            analysis::sign_on_fundamental_domain(&u, &cfg.group, DEFAULT_EPS_REL)?;
        let metadata = SolveMetadata {
            group: cfg.group.name().to_string(),
            group_order: cfg.group.order(),
            params: cfg.params,
            grid: cfg.grid,
            max_iters: cfg.max_iters,
            tol: cfg.tol,
            step: cfg.step,
            seed: cfg.seed,
            precondition: cfg.precondition,
            stalled,
            elapsed_secs: start.elapsed().as_secs_f64(),
            nodal: nodal.clone(),
            sign_on_chamber,
            experimental: cfg.params.experimental,
        };
        Ok(Solution {
            u,
            energy,
            residual,
            iterations,
            nodal_count: nodal.count,
            decay_slope,
            converged: residual <= cfg.tol,
            history,
            metadata,
        })
    }

    pub fn init_groundstate(&self) -> Result<Field> {
        let sigma = self.config.grid.len / 8.0;
        let u = Field::from_fn(self.config.grid, |x| {
            (-x.iter().map(|v| v * v).sum::<f64>() / (sigma * sigma)).exp()
        });
        self.functional.nehari_project(&u)
    }

    /// Signed copies of `profile` (or of a Gaussian bump of width `R/2`) at
    /// the scaled orbit `ℓ_G R G q`, symmetrised and Nehari-projected.
    ///
    /// A Gaussian is placed along a chamber-interior direction `q`. A loaded
    /// profile is assumed to be symmetric for the stabiliser of the ray `q`
    /// off the first wall, and is translated there by a lattice vector.
    pub fn init_saddle(&self, profile: Option<&Field>) -> Result<Field> {
        let cfg = &self.config;
        let group = &cfg.group;
        if group.is_trivial() {
            return self.init_groundstate();
        }
        let chamber = group.chamber()?;
        let q = match profile {
            None => chamber.interior_direction(),
            Some(_) => chamber.ray_direction(0),
        };
        let ell = separation_factor(group, &q);
        let base_radius = cfg.radius.unwrap_or_else(|| default_radius(cfg.grid.len, ell));
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let jitter = cfg.seed != 0;
        for attempt in 0..8 {
            let radius = if jitter || attempt > 0 {
                base_radius * (1.0 + rng.gen_range(-0.15..0.15))
            } else {
                base_radius
            };
            let rho = ell * radius;
            let limit = cfg.grid.len / 2.0 - 3.0 * radius;
            if rho > limit {
                if attempt == 0 && !jitter {
                    return Err(Error::Placement { radius: rho, limit });
                }
                continue;
            }
            let centre: Vec<f64> = (0..cfg.grid.dims)
                .map(|a| if a < q.len() { rho * q[a] } else { 0.0 })
                .collect();
            let mut seedling = match profile {
                None => {
                    let w = radius / 2.0;
                    Field::from_fn(cfg.grid, |x| {
                        let r2: f64 = x.iter().zip(&centre).map(|(a, b)| (a - b).powi(2)).sum();
                        (-r2 / (w * w)).exp()
                    })
                }
                Some(prof) => translate(prof, &centre)?,
            };
            if jitter {
                let amp = 0.02 * seedling.max_abs();
                let w = 2.0 * radius;
                let noise: Vec<f64> = (0..seedling.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let envelope = Field::from_fn(cfg.grid, |x| {
                    let r2: f64 = x.iter().zip(&centre).map(|(a, b)| (a - b).powi(2)).sum();
                    (-r2 / (w * w)).exp()
                });
                for ((v, n), e) in seedling.values.iter_mut().zip(&noise).zip(&envelope.values) {
                    *v += amp * n * e;
                }
            }
            let symmetric = self.plan.project(&seedling)?;
            if symmetric.max_abs() > 0.0 && self.functional.interaction(&symmetric)? > 0.0 {
                return self.functional.nehari_project(&symmetric);
            }
        }
        Err(Error::CollapseToZero(0.0))
    }

    /// `t ↦ I(t u)` at [`RAY_SAMPLES`] points of `[0, 2]`.
    pub fn fibering_ray(&self, u: &Field) -> Result<FiberingRay> {
        let mut samples = Vec::with_capacity(RAY_SAMPLES);
        for i in 0..RAY_SAMPLES {
            let t = 2.0 * i as f64 / (RAY_SAMPLES - 1) as f64;
            samples.push((t, self.functional.energy(&u.scaled(t))?.total));
        }
        let (argmax, max) =
            samples.iter().fold((0.0, f64::NEG_INFINITY), |acc, &(t, e)| if e > acc.1 { (t, e) } else { acc });
        Ok(FiberingRay { samples, argmax, max })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberingRay {
    pub samples: Vec<(f64, f64)>,
    pub argmax: f64,
    pub max: f64,
}

impl FiberingRay {
    pub fn step(&self) -> f64 {
        2.0 / (RAY_SAMPLES - 1) as f64
    }
}

/// `ℓ_G` with `ℓ_G · min_{x≠y ∈ Gq} |x - y| = 6`.
pub fn separation_factor(group: &CoxeterGroup, q: &[f64]) -> f64 {
    let orbit = group.orbit(q);
    let mut dmin = f64::INFINITY;
    for (i, a) in orbit.iter().enumerate() {
        for b in &orbit[..i] {
            let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
            dmin = dmin.min(dot(&d, &d).sqrt());
        }
    }
    if dmin.is_finite() && dmin > 0.0 {
        6.0 / dmin
    } else {
        0.0
    }
}

/// `min(L/8, 0.95 (L/2) / (ℓ_G + 3))`: the nominal `L/8`, shrunk when the
/// copies at `ℓ_G R` would come within `3R` of the box face.
pub fn default_radius(len: f64, ell: f64) -> f64 {
    (len / 8.0).min(0.95 * (len / 2.0) / (ell + 3.0))
}

/// `u(x - c)` with `c` rounded to the nearest lattice vector; samples moved
/// out of the box are dropped and vacated nodes are zero.
pub fn translate(u: &Field, c: &[f64]) -> Result<Field> {
    let g = u.grid;
    if c.len() != g.dims {
        return Err(Error::ShapeMismatch(format!("shift of length {} on {}-d grid", c.len(), g.dims)));
    }
    let shift: Vec<i64> = c.iter().map(|v| (v / g.spacing()).round() as i64).collect();
    let mut out = Field::zeros(g);
    let mut idx = vec![0usize; g.dims];
    'nodes: for i in 0..g.size() {
        g.unravel(i, &mut idx);
        for (j, &s) in idx.iter_mut().zip(&shift) {
            let k = *j as i64 - s;
            if k < 0 || k >= g.m as i64 {
                continue 'nodes;
            }
            *j = k as usize;
        }
        out.values[i] = u.values[g.ravel(&idx)];
    }
    Ok(out)
}

pub fn init_groundstate(grid: Grid, params: &ModelParams) -> Result<Field> {
    Solver::new(SolverConfig::new(*params, grid, CoxeterGroup::trivial()))?.init_groundstate()
}

pub fn init_saddle(
    grid: Grid,
    group: &CoxeterGroup,
    params: &ModelParams,
    radius: Option<f64>,
) -> Result<Field> {
    let mut cfg = SolverConfig::new(*params, grid, group.clone());
    cfg.radius = radius;
    Solver::new(cfg)?.init_saddle(None)
}

pub fn solve(config: SolverConfig, initial: &Field) -> Result<Solution> {
    Solver::new(config)?.solve(initial)
}

/// Solves from the default initial guess: the Gaussian for the trivial group,
/// [`Solver::init_saddle`] otherwise.
pub fn run(config: SolverConfig) -> Result<Solution> {
    let solver = Solver::new(config)?;
    let init = if solver.config().group.is_trivial() {
        solver.init_groundstate()?
    } else {
        solver.init_saddle(None)?
    };
    solver.solve(&init)
}

/// Maximum of `I(t u_G)` over the sampled ray `t ∈ [0, 2]`.
pub fn mountain_pass_check(sol: &Solution, params: &ModelParams) -> Result<FiberingRay> {
    let cfg = SolverConfig::new(*params, sol.u.grid, CoxeterGroup::trivial());
    Solver::new(cfg)?.fibering_ray(&sol.u)
}
