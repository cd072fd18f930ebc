//! Post-processing of computed fields: nodal domains, decay rate, sign on
//! the fundamental chamber.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::coxeter::{CoxeterGroup, GroupElement};
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::solver::{self, Solution, SolverConfig};

pub const DEFAULT_EPS_REL: f64 = 1e-3;

/// Fewest populated shells accepted by [`decay_exponent`].
pub const MIN_SHELLS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodalReport {
    pub count: usize,
    /// Node counts per component, largest first.
    pub component_sizes: Vec<usize>,
    pub threshold: f64,
}

impl NodalReport {
    /// Components smaller than `frac` of the grid, e.g. spurious specks near walls.
    pub fn tiny_components(&self, total_nodes: usize, frac: f64) -> usize {
        self.component_sizes.iter().filter(|&&n| (n as f64) < frac * total_nodes as f64).count()
    }
}

/// Connected components of `{u > ε}` and `{u < -ε}` with `ε = eps_rel·max|u|`,
/// face adjacency, no wrap-around at the box faces.
pub fn nodal_domains(u: &Field, eps_rel: f64) -> NodalReport {
    let g = u.grid;
    let threshold = eps_rel * u.max_abs();
    let class = |v: f64| -> i8 {
        if v > threshold {
            1
        } else if v < -threshold {
            -1
        } else {
            0
        }
    };
    let labels: Vec<i8> = u.values.iter().map(|&v| class(v)).collect();
    let mut visited = vec![false; u.len()];
    let mut sizes = Vec::new();
    let mut stack = Vec::new();
    let mut idx = vec![0usize; g.dims];
    let strides: Vec<usize> = (0..g.dims).map(|a| g.m.pow((g.dims - 1 - a) as u32)).collect();
    for start in 0..u.len() {
        if visited[start] || labels[start] == 0 {
            continue;
        }
        let sign = labels[start];
        visited[start] = true;
        stack.push(start);
        let mut size = 0;
        while let Some(i) = stack.pop() {
            size += 1;
            g.unravel(i, &mut idx);
            for (a, &stride) in strides.iter().enumerate() {
                if idx[a] > 0 {
                    let j = i - stride;
                    if !visited[j] && labels[j] == sign {
                        visited[j] = true;
                        stack.push(j);
                    }
                }
                if idx[a] + 1 < g.m {
                    let j = i + stride;
                    if !visited[j] && labels[j] == sign {
                        visited[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        sizes.push(size);
    }
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    NodalReport { count: sizes.len(), component_sizes: sizes, threshold }
}

/// Least-squares slope of `log max_{shell}|u|` against `log r` over shells of
/// width `h` with radius in `[r_min_frac·L, r_max_frac·L]`, measured from the
/// origin. Each shell contributes the radius of its maximising node.
pub fn decay_exponent(u: &Field, r_min_frac: f64, r_max_frac: f64) -> Result<f64> {
    if !(r_min_frac > 0.0 && r_min_frac < r_max_frac && r_max_frac <= 0.45) {
        return Err(Error::Domain(format!(
            "decay window [{r_min_frac}, {r_max_frac}] must satisfy 0 < min < max <= 0.45"
        )));
    }
    let g = u.grid;
    let h = g.spacing();
    let (r_min, r_max) = (r_min_frac * g.len, r_max_frac * g.len);
    let first = (r_min / h).ceil() as usize;
    let last = (r_max / h).floor() as usize;
    let mut best: Vec<(f64, f64)> = vec![(0.0, 0.0); last + 1];
    let mut idx = vec![0usize; g.dims];
    for (i, &v) in u.values.iter().enumerate() {
        g.unravel(i, &mut idx);
        let r = idx.iter().map(|&j| g.coordinate(j).powi(2)).sum::<f64>().sqrt();
        if r < r_min || r > r_max {
            continue;
        }
        let shell = ((r / h).round() as usize).clamp(first, last);
        if v.abs() > best[shell].1 {
            best[shell] = (r, v.abs());
        }
    }
    let pts: Vec<(f64, f64)> =
        best.iter().filter(|(_, v)| *v > 0.0).map(|&(r, v)| (r.ln(), v.ln())).collect();
    if pts.len() < MIN_SHELLS {
        return Err(Error::TooFewShells(pts.len()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// True iff the nodes strictly inside the fundamental chamber with `|u| > ε`
/// all carry the same sign. The chamber constrains the first `k` coordinates.
pub fn sign_on_fundamental_domain(u: &Field, group: &CoxeterGroup, eps_rel: f64) -> Result<bool> {
    let g = u.grid;
    if group.dim() > g.dims {
        return Err(Error::RankExceedsDimension { rank: group.dim(), dims: g.dims });
    }
    let threshold = eps_rel * u.max_abs();
    let chamber = if group.is_trivial() { None } else { Some(group.chamber()?) };
    let mut idx = vec![0usize; g.dims];
    let mut x = vec![0.0; group.dim()];
    let (mut pos, mut neg) = (false, false);
    for (i, &v) in u.values.iter().enumerate() {
        if v.abs() <= threshold {
            continue;
        }
        if let Some(c) = &chamber {
            g.unravel(i, &mut idx);
            for (xa, &j) in x.iter_mut().zip(&idx) {
                *xa = g.coordinate(j);
            }
            if !c.contains_strictly(&x) {
                continue;
            }
        }
        if v > 0.0 {
            pos = true;
        } else {
            neg = true;
        }
    }
    Ok(!(pos && neg))
}

/// Outcome of one solve as far as the energy table needs it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub energy: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl From<&Solution> for Level {
    fn from(sol: &Solution) -> Self {
        Self {
            energy: sol.energy,
            residual: sol.residual,
            iterations: sol.iterations,
            converged: sol.converged,
        }
    }
}

/// Sorted element matrices of `group`, embedded in `R^n`.
fn embedded(group: &CoxeterGroup, n: usize) -> Vec<Vec<i8>> {
    let k = group.dim();
    let mut out: Vec<Vec<i8>> = group
        .elements()
        .iter()
        .map(|g| {
            let mut m = vec![0i8; n * n];
            for i in 0..n {
                for j in 0..n {
                    m[i * n + j] = if i < k && j < k { g.entry(i, j) } else { (i == j) as i8 };
                }
            }
            m
        })
        .collect();
    out.sort();
    out
}

/// All `2^n n!` signed permutation matrices of `R^n`.
fn signed_permutations(n: usize) -> Vec<GroupElement> {
    let mut perms: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..n {
        perms = perms
            .into_iter()
            .flat_map(|p| {
                (0..n)
                    .filter(|j| !p.contains(j))
                    .map(|j| {
                        let mut q = p.clone();
                        q.push(j);
                        q
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
    }
    let mut out = Vec::new();
    for p in &perms {
        for mask in 0u32..(1 << n) {
            let mut m = vec![0i8; n * n];
            for (i, &j) in p.iter().enumerate() {
                m[i * n + j] = if mask >> i & 1 == 1 { -1 } else { 1 };
            }
            out.push(GroupElement::from_matrix(n, m).expect("signed permutation"));
        }
    }
    out
}

/// Label of the conjugacy class of `group` under signed permutations of the
/// `n` axes. Such conjugations map the lattice to itself, so conjugate
/// groups have the same discrete level.
pub fn conjugacy_key(group: &CoxeterGroup, n: usize) -> Vec<Vec<i8>> {
    let base = embedded(group, n);
    signed_permutations(n)
        .iter()
        .map(|p| {
            let pinv = p.inverse();
            let mut conj: Vec<Vec<i8>> = base
                .iter()
                .map(|m| {
                    let g = GroupElement::from_matrix(n, m.clone()).expect("signed permutation");
                    p.mul(&g).mul(&pinv).matrix().to_vec()
                })
                .collect();
            conj.sort();
            conj
        })
        .min()
        .expect("at least the identity")
}

/// Levels of already solved problems, keyed by the conjugacy class of the
/// group together with everything else that fixes the discrete problem.
#[derive(Debug, Clone, Default)]
pub struct LevelCache {
    entries: HashMap<String, Level>,
}

impl LevelCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn key(cfg: &SolverConfig) -> String {
        format!(
            "{:?}|{:?}|{:?}|{}|{}|{}|{}",
            conjugacy_key(&cfg.group, cfg.params.n),
            cfg.params,
            cfg.grid,
            cfg.tol,
            cfg.max_iters,
            cfg.step,
            cfg.precondition
        )
    }

    pub fn insert(&mut self, cfg: &SolverConfig, level: Level) {
        self.entries.insert(Self::key(cfg), level);
    }

    pub fn get(&self, cfg: &SolverConfig) -> Option<&Level> {
        self.entries.get(&Self::key(cfg))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Cached level, or a fresh [`solver::run`].
    pub fn level(&mut self, cfg: &SolverConfig) -> Result<Level> {
        if let Some(l) = self.get(cfg) {
            return Ok(l.clone());
        }
        let level = Level::from(&solver::run(cfg.clone())?);
        self.insert(cfg, level.clone());
        Ok(level)
    }
}

/// One class of points on `k-1` walls of the chamber.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacetEntry {
    /// The wall the representative stays off.
    pub wall: usize,
    /// Lattice representative (first `k` coordinates).
    pub point: Vec<f64>,
    pub orbit_size: usize,
    pub stabilizer: String,
    pub stabilizer_order: usize,
    pub level: Option<Level>,
    /// `|O_x| c_{S_x}`.
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub group: String,
    pub level: Option<Level>,
    pub facets: Vec<FacetEntry>,
    /// `min |O_x| c_{S_x}`; infinite for the trivial group.
    pub c_star: f64,
    /// `c*_G - c_G`.
    pub margin: f64,
    pub verified: bool,
    pub status: String,
}

impl TableRow {
    pub fn c_g(&self) -> Option<f64> {
        self.level.as_ref().map(|l| l.energy)
    }

    /// `margin / c_G`.
    pub fn relative_margin(&self) -> Option<f64> {
        self.c_g().map(|c| self.margin / c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyTable {
    pub rows: Vec<TableRow>,
}

impl EnergyTable {
    pub const CSV_HEADER: &'static str = "group,cG,cStar,margin,verified";

    pub fn all_verified(&self) -> bool {
        self.rows.iter().all(|r| r.verified)
    }

    pub fn row(&self, group: &str) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.group == group)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let c = r.c_g().map_or("nan".to_string(), |c| c.to_string());
            out.push_str(&format!("{},{},{},{},{}\n", r.group, c, r.c_star, r.margin, r.verified));
        }
        out
    }
}

/// Name of a named group conjugate to `group`, if any.
fn recognise(group: &CoxeterGroup, n: usize) -> Option<&'static str> {
    let key = conjugacy_key(group, n);
    ["trivial", "A1", "A1xA1", "A2", "B2", "B3"].into_iter().find(|name| {
        let g = CoxeterGroup::named(name).expect("named group");
        g.dim() <= n && conjugacy_key(&g, n) == key
    })
}

/// Representatives `round(L/4 · ray_i)` of the classes on `k-1` walls.
fn facet_points(cfg: &SolverConfig) -> Result<Vec<(usize, Vec<i64>)>> {
    let group = &cfg.group;
    let chamber = group.chamber()?;
    let h = cfg.grid.spacing();
    Ok((0..group.rank())
        .map(|i| {
            let q = chamber.ray_direction(i);
            (i, q.iter().map(|v| (cfg.grid.len / 4.0 * v / h).round() as i64).collect())
        })
        .collect())
}

/// `c_G` and `c*_G` for each configuration. Stabiliser problems reuse the
/// row's configuration with the group replaced; solves of conjugate groups
/// are shared through `cache`.
pub fn energy_table_with(configs: &[SolverConfig], cache: &mut LevelCache) -> Result<EnergyTable> {
    if configs.is_empty() {
        return Err(Error::Config("energy table needs at least one group".into()));
    }
    let mut rows = Vec::with_capacity(configs.len());
    for cfg in configs {
        cfg.validate()?;
        let mut status = Vec::new();
        let level = match cache.level(cfg) {
            Ok(l) => Some(l),
            Err(e) => {
                status.push(format!("{}: {e}", cfg.group.name()));
                None
            }
        };
        let mut facets = Vec::new();
        if !cfg.group.is_trivial() {
            let h = cfg.grid.spacing();
            for (wall, c) in facet_points(cfg)? {
                let point: Vec<f64> = c.iter().map(|&v| v as f64 * h).collect();
                let orbit_size = cfg.group.orbit_lattice(&c).len();
                let stab = cfg.group.stabilizer(&point)?;
                let name = recognise(&stab, cfg.params.n)
                    .map_or_else(|| format!("Stab_{}(wall {wall})", cfg.group.name()), str::to_string);
                let mut sub = cfg.clone();
                sub.group = stab.clone().with_name(name.clone());
                let level = match cache.level(&sub) {
                    Ok(l) => Some(l),
                    Err(e) => {
                        status.push(format!("{name}: {e}"));
                        None
                    }
                };
                let bound = level.as_ref().map(|l| orbit_size as f64 * l.energy);
                facets.push(FacetEntry {
                    wall,
                    point,
                    orbit_size,
                    stabilizer: name,
                    stabilizer_order: stab.order(),
                    level,
                    bound,
                });
            }
        }
        let c_star = if cfg.group.is_trivial() {
            f64::INFINITY
        } else {
            facets.iter().map(|f| f.bound.unwrap_or(f64::NAN)).fold(f64::INFINITY, f64::min)
        };
        let c_g = level.as_ref().map_or(f64::NAN, |l| l.energy);
        let margin = c_star - c_g;
        for (what, l) in std::iter::once((cfg.group.name().to_string(), &level))
            .chain(facets.iter().map(|f| (f.stabilizer.clone(), &f.level)))
        {
            if let Some(l) = l {
                if !l.converged {
                    status.push(format!("{what}: not converged (residual {:e})", l.residual));
                }
            }
        }
        if facets.iter().any(|f| f.bound.is_none()) {
            status.push("c* unavailable".into());
        }
        let chain = c_g > 0.0 && c_g < c_star;
        if level.is_some() && !chain {
            status.push(format!("chain fails: c_G = {c_g}, c* = {c_star}"));
        }
        let verified = status.is_empty();
        rows.push(TableRow {
            group: cfg.group.name().to_string(),
            level,
            facets,
            c_star,
            margin,
            verified,
            status: if verified { "ok".into() } else { status.join("; ") },
        });
    }
    Ok(EnergyTable { rows })
}

pub fn energy_table(configs: &[SolverConfig]) -> Result<EnergyTable> {
    energy_table_with(configs, &mut LevelCache::new())
}
