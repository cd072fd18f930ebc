//! Action of a [`CoxeterGroup`] on lattice fields and the projection onto
//! the equivariant subspace `{u : g∘u = φ(g) u}`.
//!
//! The group acts on the first `k` coordinates. Node coordinates are the
//! centred integers `c ∈ [-M/2, M/2)`; the image `M/2` of `-M/2` wraps back
//! to `-M/2`, which is its periodic copy.

use crate::coxeter::{CoxeterGroup, GroupElement};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

fn check_rank(group: &CoxeterGroup, grid: &Grid) -> Result<()> {
    if group.dim() > grid.dims {
        return Err(Error::RankExceedsDimension { rank: group.dim(), dims: grid.dims });
    }
    Ok(())
}

/// Index permutation `i -> index of g x_i`.
fn node_map(g: &GroupElement, grid: &Grid) -> Vec<usize> {
    let k = g.dim();
    let mut idx = vec![0usize; grid.dims];
    let mut c = vec![0i64; k];
    (0..grid.size())
        .map(|i| {
            grid.unravel(i, &mut idx);
            for (ca, &j) in c.iter_mut().zip(&idx) {
                *ca = grid.centered(j);
            }
            for (j, v) in idx.iter_mut().zip(g.apply_int(&c)) {
                *j = grid.wrap(v);
            }
            grid.ravel(&idx)
        })
        .collect()
}

/// `(g∘u)(x) = u(g⁻¹ x)`.
pub fn act(g: &GroupElement, u: &Field) -> Result<Field> {
    if g.dim() > u.grid.dims {
        return Err(Error::RankExceedsDimension { rank: g.dim(), dims: u.grid.dims });
    }
    let map = node_map(&g.inverse(), &u.grid);
    Ok(Field { grid: u.grid, values: map.iter().map(|&j| u.values[j]).collect() })
}

/// True iff `g∘u = φ(g) u` holds bitwise for every group element.
pub fn is_equivariant(u: &Field, group: &CoxeterGroup) -> Result<bool> {
    check_rank(group, &u.grid)?;
    for (i, g) in group.elements().iter().enumerate() {
        let sign = group.sign_at(i) as f64;
        let gu = act(g, u)?;
        if gu.values.iter().zip(&u.values).any(|(a, b)| *a != sign * b) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Precomputed node orbits for `P_G u = |G|⁻¹ Σ_g φ(g) g∘u`.
///
/// On the orbit of a representative `r`, `P_G u` equals `s_j v` at node `j`
/// with `s_j = φ(g)` for any `g` taking `r` to `j`, and
/// `v = |O|⁻¹ Σ_j s_j u_j`. Orbits whose stabiliser contains an element with
/// `φ = -1` are forced to zero. The average is evaluated as
/// `u_r + Σ_j (s_j u_j - u_r) / |O|`, so a field that is already equivariant
/// is returned bitwise unchanged.
#[derive(Debug, Clone)]
pub struct SymmetryPlan {
    grid: Grid,
    order: usize,
    /// Orbit members, grouped by orbit, sorted within each orbit.
    nodes: Vec<u32>,
    signs: Vec<i8>,
    starts: Vec<usize>,
    vanishing: Vec<bool>,
}

impl SymmetryPlan {
    pub fn new(group: &CoxeterGroup, grid: Grid) -> Result<Self> {
        check_rank(group, &grid)?;
        let maps: Vec<Vec<usize>> = group.elements().iter().map(|g| node_map(g, &grid)).collect();
        let signs: Vec<i8> = (0..group.order()).map(|i| group.sign_at(i)).collect();
        Ok(Self::from_maps(grid, &maps, &signs))
    }

    /// Orbits of the node permutations `maps` (a group, identity first) with
    /// the character `signs`.
    fn from_maps(grid: Grid, maps: &[Vec<usize>], element_signs: &[i8]) -> Self {
        let size = grid.size();
        let mut seen = vec![false; size];
        let mut nodes = Vec::with_capacity(size);
        let mut signs = Vec::with_capacity(size);
        let mut starts = vec![0];
        let mut vanishing = Vec::new();
        let mut members: Vec<(usize, i8)> = Vec::new();
        for r in 0..size {
            if seen[r] {
                continue;
            }
            members.clear();
            let mut odd_stabiliser = false;
            for (map, &sign) in maps.iter().zip(element_signs) {
                let j = map[r];
                match members.iter().find(|(n, _)| *n == j) {
                    Some(&(_, s)) if s != sign => odd_stabiliser = true,
                    Some(_) => {}
                    None => members.push((j, sign)),
                }
            }
            members.sort_unstable_by_key(|&(j, _)| j);
            for &(j, sign) in &members {
                seen[j] = true;
                nodes.push(j as u32);
                signs.push(sign);
            }
            starts.push(nodes.len());
            vanishing.push(odd_stabiliser);
        }
        Self { grid, order: maps.len(), nodes, signs, starts, vanishing }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn group_order(&self) -> usize {
        self.order
    }

    pub fn orbit_count(&self) -> usize {
        self.vanishing.len()
    }

    /// Applies `P_G` in place.
    pub fn apply(&self, values: &mut [f64]) {
        assert_eq!(values.len(), self.grid.size(), "field size");
        if self.order == 1 {
            return;
        }
        for (o, &zero) in self.vanishing.iter().enumerate() {
            let range = self.starts[o]..self.starts[o + 1];
            let nodes = &self.nodes[range.clone()];
            let signs = &self.signs[range];
            if zero {
                for &j in nodes {
                    values[j as usize] = 0.0;
                }
                continue;
            }
            // The representative is the first (smallest) node, with sign +1.
            let a = values[nodes[0] as usize];
            let n = nodes.len() as f64;
            let mut v = a;
            for (&j, &s) in nodes.iter().zip(signs) {
                v += (s as f64 * values[j as usize] - a) / n;
            }
            for (&j, &s) in nodes.iter().zip(signs) {
                values[j as usize] = s as f64 * v;
            }
        }
    }

    pub fn project(&self, u: &Field) -> Result<Field> {
        self.grid.check_same(&u.grid)?;
        let mut out = u.clone();
        self.apply(&mut out.values);
        Ok(out)
    }
}

/// `P_G u`, building the orbit plan on the fly.
pub fn symmetrize(u: &Field, group: &CoxeterGroup) -> Result<Field> {
    SymmetryPlan::new(group, u.grid)?.project(u)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn random_field(grid: Grid, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Field::from_values(grid, (0..grid.size()).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .unwrap()
    }

    #[test]
    fn representative_has_positive_sign() {
        let grid = Grid::new(3, 8, 4.0).unwrap();
        for name in ["A1", "A1xA1", "A2", "B2", "B3"] {
            let plan = SymmetryPlan::new(&CoxeterGroup::named(name).unwrap(), grid).unwrap();
            for o in 0..plan.orbit_count() {
                assert_eq!(plan.signs[plan.starts[o]], 1);
            }
            assert_eq!(plan.nodes.len(), grid.size());
        }
    }

    #[test]
    fn projection_is_exact() {
        let grid = Grid::new(3, 8, 4.0).unwrap();
        for name in ["A1", "A1xA1", "A2", "B2", "B3"] {
            let g = CoxeterGroup::named(name).unwrap();
            let pu = symmetrize(&random_field(grid, 3), &g).unwrap();
            assert!(is_equivariant(&pu, &g).unwrap(), "{name}");
            assert_eq!(symmetrize(&pu, &g).unwrap(), pu, "{name}");
        }
    }

    #[test]
    fn matches_group_average() {
        let grid = Grid::new(2, 8, 4.0).unwrap();
        let g = CoxeterGroup::named("B2").unwrap();
        let u = random_field(grid, 9);
        let mut avg = Field::zeros(grid);
        for (i, e) in g.elements().iter().enumerate() {
            avg.axpy(g.sign_at(i) as f64 / g.order() as f64, &act(e, &u).unwrap());
        }
        let pu = symmetrize(&u, &g).unwrap();
        for (a, b) in pu.values.iter().zip(&avg.values) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn odd_projection_kills_even_fields() {
        let grid = Grid::new(3, 8, 4.0).unwrap();
        let even = Field::from_fn(grid, |x| (-x.iter().map(|v| v * v).sum::<f64>()).exp());
        let pu = symmetrize(&even, &CoxeterGroup::named("A1").unwrap()).unwrap();
        assert!(pu.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rank_guard() {
        let grid = Grid::new(2, 8, 4.0).unwrap();
        let err = SymmetryPlan::new(&CoxeterGroup::named("B3").unwrap(), grid).unwrap_err();
        assert!(matches!(err, Error::RankExceedsDimension { .. }));
    }
}
