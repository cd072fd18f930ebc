//! Finite reflection groups generated by signed permutations.
//!
//! Only coordinate sign flips and coordinate swaps are supported as
//! generators. These map the sampling lattice onto itself exactly, which the
//! field symmetrisation relies on. Groups act on the first `dim` coordinates
//! of `R^N` and trivially on the rest.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for comparing real vectors in orbits and stabilisers.
pub const ORBIT_TOL: f64 = 1e-12;

/// A signed permutation matrix, stored row-major with entries in `{-1, 0, 1}`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct GroupElement {
    dim: usize,
    m: Vec<i8>,
}

impl fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[i8]> = self.m.chunks(self.dim.max(1)).collect();
        write!(f, "GroupElement{rows:?}")
    }
}

impl GroupElement {
    pub fn identity(dim: usize) -> Self {
        let mut m = vec![0; dim * dim];
        for i in 0..dim {
            m[i * dim + i] = 1;
        }
        Self { dim, m }
    }

    /// `x_i -> -x_i`.
    pub fn flip(dim: usize, i: usize) -> Self {
        let mut g = Self::identity(dim);
        g.m[i * dim + i] = -1;
        g
    }

    /// `x_i <-> x_j`.
    pub fn swap(dim: usize, i: usize, j: usize) -> Self {
        let mut g = Self::identity(dim);
        g.m[i * dim + i] = 0;
        g.m[j * dim + j] = 0;
        g.m[i * dim + j] = 1;
        g.m[j * dim + i] = 1;
        g
    }

    /// Checks that `m` is a signed permutation matrix.
    pub fn from_matrix(dim: usize, m: Vec<i8>) -> Result<Self> {
        if m.len() != dim * dim {
            return Err(Error::ShapeMismatch(format!(
                "expected {} entries, got {}",
                dim * dim,
                m.len()
            )));
        }
        let row_ok = (0..dim).all(|i| {
            let row = &m[i * dim..(i + 1) * dim];
            row.iter().all(|v| v.abs() <= 1) && row.iter().filter(|v| **v != 0).count() == 1
        });
        let col_ok = (0..dim).all(|j| (0..dim).filter(|&i| m[i * dim + j] != 0).count() == 1);
        if !(row_ok && col_ok) {
            return Err(Error::Domain(format!("{m:?} is not a signed permutation matrix")));
        }
        Ok(Self { dim, m })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> i8 {
        self.m[i * self.dim + j]
    }

    pub fn matrix(&self) -> &[i8] {
        &self.m
    }

    pub fn mul(&self, other: &Self) -> Self {
        let d = self.dim;
        debug_assert_eq!(d, other.dim);
        let mut m = vec![0i8; d * d];
        for i in 0..d {
            for k in 0..d {
                let a = self.m[i * d + k];
                if a == 0 {
                    continue;
                }
                for j in 0..d {
                    m[i * d + j] += a * other.m[k * d + j];
                }
            }
        }
        Self { dim: d, m }
    }

    /// Transpose, which is the inverse for orthogonal matrices.
    pub fn inverse(&self) -> Self {
        let d = self.dim;
        let mut m = vec![0; d * d];
        for i in 0..d {
            for j in 0..d {
                m[j * d + i] = self.m[i * d + j];
            }
        }
        Self { dim: d, m }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity(self.dim)
    }

    pub fn is_orthogonal(&self) -> bool {
        self.mul(&self.inverse()).is_identity()
    }

    /// Determinant: sign of the underlying permutation times the product of signs.
    pub fn det(&self) -> i8 {
        let d = self.dim;
        let mut perm = vec![0usize; d];
        let mut sign = 1i8;
        for i in 0..d {
            for j in 0..d {
                let v = self.m[i * d + j];
                if v != 0 {
                    perm[i] = j;
                    sign *= v;
                }
            }
        }
        let mut seen = vec![false; d];
        for start in 0..d {
            if seen[start] {
                continue;
            }
            let mut len = 0;
            let mut i = start;
            while !seen[i] {
                seen[i] = true;
                i = perm[i];
                len += 1;
            }
            if len % 2 == 0 {
                sign = -sign;
            }
        }
        sign
    }

    /// Symmetric involution with a one-dimensional `-1` eigenspace.
    pub fn is_reflection(&self) -> bool {
        let symmetric = *self == self.inverse();
        let trace: i32 = (0..self.dim).map(|i| self.m[i * self.dim + i] as i32).sum();
        symmetric && self.mul(self).is_identity() && (self.dim as i32 - trace) == 2
    }

    /// Normal of the reflecting hyperplane, scaled so its largest entry is 1.
    pub fn reflection_normal(&self) -> Option<Vec<f64>> {
        if !self.is_reflection() {
            return None;
        }
        let d = self.dim;
        (0..d).find_map(|j| {
            let col: Vec<f64> = (0..d)
                .map(|i| (i == j) as i8 as f64 - self.m[i * d + j] as f64)
                .collect();
            let max = col.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            (max > 0.0).then(|| col.iter().map(|v| v / max).collect())
        })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d)
            .map(|i| (0..d).map(|j| self.m[i * d + j] as f64 * x[j]).sum())
            .collect()
    }

    pub fn apply_int(&self, x: &[i64]) -> Vec<i64> {
        let d = self.dim;
        (0..d)
            .map(|i| (0..d).map(|j| self.m[i * d + j] as i64 * x[j]).sum())
            .collect()
    }
}

/// Generator specification accepted in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    /// Sign flip of coordinate `i` (zero based).
    Flip(usize),
    /// Swap of coordinates `i` and `j` (zero based).
    Swap(usize, usize),
    /// An explicit signed permutation matrix, row-major.
    Matrix(Vec<i8>),
}

/// A finite group generated by signed-permutation reflections.
#[derive(Debug, Clone)]
pub struct CoxeterGroup {
    name: String,
    dim: usize,
    generators: Vec<GroupElement>,
    elements: Vec<GroupElement>,
    signs: Vec<i8>,
    index: HashMap<GroupElement, usize>,
}

impl CoxeterGroup {
    /// Breadth-first closure of the generators under multiplication.
    pub fn generate(dim: usize, generators: Vec<GroupElement>) -> Result<Self> {
        for g in &generators {
            if g.dim != dim {
                return Err(Error::ShapeMismatch(format!(
                    "generator of dimension {} in a group acting on {dim} coordinates",
                    g.dim
                )));
            }
            if !g.is_reflection() {
                return Err(Error::NotAReflection(format!("{g:?}")));
            }
        }
        let id = GroupElement::identity(dim);
        let mut elements = vec![id.clone()];
        let mut index = HashMap::from([(id.clone(), 0usize)]);
        let mut queue = VecDeque::from([id]);
        while let Some(h) = queue.pop_front() {
            for r in &generators {
                let next = h.mul(r);
                if !index.contains_key(&next) {
                    index.insert(next.clone(), elements.len());
                    elements.push(next.clone());
                    queue.push_back(next);
                }
            }
        }
        let signs = elements.iter().map(GroupElement::det).collect();
        let name = format!("<{} generators on R^{dim}>", generators.len());
        Ok(Self { name, dim, generators, elements, signs, index })
    }

    pub fn trivial() -> Self {
        let mut g = Self::generate(0, Vec::new()).expect("empty generator set");
        g.name = "trivial".into();
        g
    }

    /// Named groups with simple-root generators: `A1`, `A1xA1`, `A2`, `B2`, `B3`
    /// and `trivial`.
    pub fn named(name: &str) -> Result<Self> {
        use GroupElement as E;
        let (dim, gens) = match name {
            "trivial" | "1" => return Ok(Self::trivial()),
            "A1" => (1, vec![E::flip(1, 0)]),
            "A1xA1" => (2, vec![E::flip(2, 0), E::flip(2, 1)]),
            "A2" => (3, vec![E::swap(3, 0, 1), E::swap(3, 1, 2)]),
            "B2" => (2, vec![E::swap(2, 0, 1), E::flip(2, 1)]),
            "B3" => (3, vec![E::swap(3, 0, 1), E::swap(3, 1, 2), E::flip(3, 2)]),
            other => return Err(Error::Config(format!("unknown group name {other:?}"))),
        };
        let mut g = Self::generate(dim, gens)?;
        g.name = name.to_string();
        Ok(g)
    }

    pub fn from_specs(dim: usize, specs: &[GeneratorSpec]) -> Result<Self> {
        let gens = specs
            .iter()
            .map(|spec| match spec {
                GeneratorSpec::Flip(i) if *i < dim => Ok(GroupElement::flip(dim, *i)),
                GeneratorSpec::Swap(i, j) if *i < dim && *j < dim && i != j => {
                    Ok(GroupElement::swap(dim, *i, *j))
                }
                GeneratorSpec::Matrix(m) => GroupElement::from_matrix(dim, m.clone()),
                other => Err(Error::Config(format!("generator {other:?} out of range"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let group = Self::generate(dim, gens)?;
        // Make sure a fundamental chamber exists for this generating set.
        group.chamber()?;
        Ok(group)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Number of leading coordinates the group acts on.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of generators.
    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn is_trivial(&self) -> bool {
        self.elements.len() == 1
    }

    pub fn generators(&self) -> &[GroupElement] {
        &self.generators
    }

    pub fn elements(&self) -> &[GroupElement] {
        &self.elements
    }

    /// Sign character of the `i`-th element.
    pub fn sign_at(&self, i: usize) -> i8 {
        self.signs[i]
    }

    pub fn contains(&self, g: &GroupElement) -> bool {
        self.index.contains_key(g)
    }

    pub fn sign_character(&self, g: &GroupElement) -> Result<i8> {
        self.index.get(g).map(|&i| self.signs[i]).ok_or(Error::NotInGroup)
    }

    /// `{g x : g in G}` with duplicates within [`ORBIT_TOL`] removed.
    pub fn orbit(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = Vec::new();
        for g in &self.elements {
            let y = g.apply(x);
            if !out.iter().any(|z| max_dist(z, &y) <= ORBIT_TOL) {
                out.push(y);
            }
        }
        out
    }

    /// Orbit of an integer lattice point, deduplicated exactly.
    pub fn orbit_lattice(&self, x: &[i64]) -> Vec<Vec<i64>> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for g in &self.elements {
            let y = g.apply_int(x);
            if seen.insert(y.clone()) {
                out.push(y);
            }
        }
        out
    }

    pub fn stabilizer_lattice_order(&self, x: &[i64]) -> usize {
        self.elements.iter().filter(|g| g.apply_int(x) == x).count()
    }

    /// Isotropy subgroup `{g : g x = x}`. Its generators are the simple
    /// reflections of the walls through the chamber image of `x`, conjugated
    /// back to `x`.
    pub fn stabilizer(&self, x: &[f64]) -> Result<CoxeterGroup> {
        let members: Vec<&GroupElement> =
            self.elements.iter().filter(|g| max_dist(&g.apply(x), x) <= ORBIT_TOL).collect();
        let gens = if self.is_trivial() {
            Vec::new()
        } else {
            let chamber = self.chamber()?;
            let to_chamber = self
                .elements
                .iter()
                .find(|g| chamber.contains(&g.apply(x)))
                .expect("every orbit meets the fundamental chamber");
            let y = to_chamber.apply(x);
            let back = to_chamber.inverse();
            chamber
                .active_walls(&y)
                .into_iter()
                .map(|i| back.mul(&self.generators[i]).mul(to_chamber))
                .collect()
        };
        let stab = CoxeterGroup::generate(self.dim, gens)?;
        debug_assert_eq!(stab.order(), members.len());
        debug_assert!(members.iter().all(|g| stab.contains(g)));
        Ok(stab.with_name(format!("Stab_{}", self.name)))
    }

    /// Fundamental chamber bounded by the generator walls. Normal signs are
    /// chosen so that the normals pairwise make obtuse (or right) angles.
    pub fn chamber(&self) -> Result<Chamber> {
        let raw: Vec<Vec<f64>> = self
            .generators
            .iter()
            .map(|g| g.reflection_normal().expect("generators are reflections"))
            .collect();
        let k = raw.len();
        for mask in 0u32..(1 << k) {
            let normals: Vec<Vec<f64>> = raw
                .iter()
                .enumerate()
                .map(|(i, n)| {
                    let sign = if mask >> i & 1 == 1 { -1.0 } else { 1.0 };
                    n.iter().map(|v| sign * v).collect()
                })
                .collect();
            let obtuse = (0..k).all(|i| (0..i).all(|j| dot(&normals[i], &normals[j]) <= 1e-12));
            if obtuse {
                let chamber = Chamber { normals };
                if self.chamber_is_fundamental(&chamber) {
                    return Ok(chamber);
                }
            }
        }
        Err(Error::Config(format!(
            "generators of {} do not bound a fundamental chamber",
            self.name
        )))
    }

    fn chamber_is_fundamental(&self, chamber: &Chamber) -> bool {
        if self.dim == 0 {
            return true;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        (0..16).all(|_| {
            let x: Vec<f64> = (0..self.dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let inside = self.orbit(&x).iter().filter(|y| chamber.contains(y)).count();
            inside == 1
        })
    }
}

/// Closed cone `{x : <x, n_i> >= 0}` bounded by reflection walls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chamber {
    pub normals: Vec<Vec<f64>>,
}

impl Chamber {
    pub fn dim(&self) -> usize {
        self.normals.first().map_or(0, Vec::len)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.normals.iter().all(|n| dot(n, x) >= -ORBIT_TOL)
    }

    pub fn contains_strictly(&self, x: &[f64]) -> bool {
        self.normals.iter().all(|n| dot(n, x) > ORBIT_TOL)
    }

    pub fn active_walls(&self, x: &[f64]) -> Vec<usize> {
        (0..self.normals.len()).filter(|&i| dot(&self.normals[i], x).abs() <= ORBIT_TOL).collect()
    }

    /// Dimension of the facet containing `x`: `dim` minus the number of
    /// walls through `x`.
    pub fn facet_dimension(&self, x: &[f64]) -> Result<usize> {
        if !self.contains(x) {
            return Err(Error::OutsideChamber);
        }
        Ok(x.len() - self.active_walls(x).len())
    }

    /// Least-norm solution of `<x, n_j> = b_j`, scaled to unit length unless zero.
    fn point_with_heights(&self, heights: &[f64]) -> Vec<f64> {
        let k = self.normals.len();
        let d = self.dim();
        let mut gram = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                gram[i * k + j] = dot(&self.normals[i], &self.normals[j]);
            }
        }
        let coeffs = solve_dense(&mut gram, heights.to_vec(), k);
        let mut x = vec![0.0; d];
        for (c, n) in coeffs.iter().zip(&self.normals) {
            for (xi, ni) in x.iter_mut().zip(n) {
                *xi += c * ni;
            }
        }
        let norm = dot(&x, &x).sqrt();
        if norm == 0.0 {
            // Rank-one group in one dimension: the facet is the origin.
            return x;
        }
        x.iter().map(|v| v / norm).collect()
    }

    /// A unit vector in the open chamber.
    pub fn interior_direction(&self) -> Vec<f64> {
        self.point_with_heights(&vec![1.0; self.normals.len()])
    }

    /// A unit vector in the relative interior of the facet on wall `i`.
    pub fn facet_direction(&self, wall: usize) -> Vec<f64> {
        let heights: Vec<f64> =
            (0..self.normals.len()).map(|j| if j == wall { 0.0 } else { 1.0 }).collect();
        self.point_with_heights(&heights)
    }

    /// A unit vector on every wall except `wall`, strictly inside that one:
    /// its stabiliser has rank one less than the group.
    pub fn ray_direction(&self, wall: usize) -> Vec<f64> {
        let heights: Vec<f64> =
            (0..self.normals.len()).map(|j| if j == wall { 1.0 } else { 0.0 }).collect();
        self.point_with_heights(&heights)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Gaussian elimination with partial pivoting on a small dense system.
fn solve_dense(a: &mut [f64], mut b: Vec<f64>, n: usize) -> Vec<f64> {
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
            .unwrap();
        if piv != col {
            for j in 0..n {
                a.swap(col * n + j, piv * n + j);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] / d;
            for j in col..n {
                a[row * n + j] -= f * a[col * n + j];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|j| a[row * n + j] * x[j]).sum();
        x[row] = (b[row] - s) / a[row * n + row];
    }
    x
}
