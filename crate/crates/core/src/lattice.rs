//! Integer lattice linear algebra: Smith and Hermite forms, quotient lattices,
//! cones and the face lattice of a full-dimensional lattice polytope.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::error::LatticeError;

pub type IVec = Vec<i64>;
pub type IMat = Vec<Vec<i64>>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lattice {
    pub rank: usize,
}

/// Integer matrix of shape `target.rank x source.rank`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeMap {
    pub source: Lattice,
    pub target: Lattice,
    pub matrix: IMat,
}

impl LatticeMap {
    pub fn new(source: usize, target: usize, matrix: IMat) -> Self {
        debug_assert_eq!(matrix.len(), target);
        debug_assert!(matrix.iter().all(|r| r.len() == source));
        LatticeMap { source: Lattice { rank: source }, target: Lattice { rank: target }, matrix }
    }

    pub fn identity(rank: usize) -> Self {
        Self::new(rank, rank, identity(rank))
    }

    pub fn apply(&self, v: &[i64]) -> IVec {
        mat_vec(&self.matrix, v)
    }

    /// `self` after `first`.
    pub fn compose(&self, first: &LatticeMap) -> LatticeMap {
        assert_eq!(self.source, first.target);
        LatticeMap::new(first.source.rank, self.target.rank, mat_mul_dims(&self.matrix, &first.matrix, self.target.rank, first.source.rank))
    }

    /// Dual map on functionals (row vectors): `m -> m . matrix`.
    pub fn pullback(&self, m: &[i64]) -> IVec {
        assert_eq!(m.len(), self.target.rank);
        (0..self.source.rank)
            .map(|j| (0..self.target.rank).fold(0i64, |acc, i| add(acc, mul(m[i], self.matrix[i][j]))))
            .collect()
    }
}

pub(crate) fn add(a: i64, b: i64) -> i64 {
    a.checked_add(b).expect("integer overflow")
}
pub(crate) fn mul(a: i64, b: i64) -> i64 {
    a.checked_mul(b).expect("integer overflow")
}
fn narrow(x: i128) -> i64 {
    i64::try_from(x).expect("integer overflow")
}

pub fn identity(n: usize) -> IMat {
    (0..n).map(|i| (0..n).map(|j| i64::from(i == j)).collect()).collect()
}

pub fn zeros(r: usize, c: usize) -> IMat {
    vec![vec![0; c]; r]
}

pub fn transpose(m: &IMat, cols: usize) -> IMat {
    (0..cols).map(|j| m.iter().map(|r| r[j]).collect()).collect()
}

pub fn mat_vec(m: &IMat, v: &[i64]) -> IVec {
    m.iter().map(|r| dot(r, v)).collect()
}

pub fn dot(a: &[i64], b: &[i64]) -> i64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0, |acc, (x, y)| add(acc, mul(*x, *y)))
}

pub fn mat_mul(a: &IMat, b: &IMat) -> IMat {
    let cols = b.first().map_or(0, |r| r.len());
    mat_mul_dims(a, b, a.len(), cols)
}

/// Product with explicit output shape, so empty inner or outer dimensions work.
pub fn mat_mul_dims(a: &IMat, b: &IMat, rows: usize, cols: usize) -> IMat {
    let inner = b.len();
    (0..rows)
        .map(|i| (0..cols).map(|j| (0..inner).fold(0, |acc, k| add(acc, mul(a[i][k], b[k][j])))).collect())
        .collect()
}

pub fn vsub(a: &[i64], b: &[i64]) -> IVec {
    a.iter().zip(b).map(|(x, y)| x.checked_sub(*y).expect("integer overflow")).collect()
}

pub fn vadd(a: &[i64], b: &[i64]) -> IVec {
    a.iter().zip(b).map(|(x, y)| add(*x, *y)).collect()
}

pub fn vneg(a: &[i64]) -> IVec {
    a.iter().map(|x| -x).collect()
}

pub fn is_zero(a: &[i64]) -> bool {
    a.iter().all(|x| *x == 0)
}

pub fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub fn primitive(v: &[i64]) -> IVec {
    let g = v.iter().fold(0, |g, x| gcd(g, *x));
    if g == 0 {
        v.to_vec()
    } else {
        v.iter().map(|x| x / g).collect()
    }
}

/// Exact determinant by fraction-free (Bareiss) elimination.
pub fn det(m: &IMat) -> i64 {
    let n = m.len();
    if n == 0 {
        return 1;
    }
    let mut a: Vec<Vec<i128>> = m.iter().map(|r| r.iter().map(|x| *x as i128).collect()).collect();
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n {
        if a[k][k] == 0 {
            match (k + 1..n).find(|&i| a[i][k] != 0) {
                Some(i) => {
                    a.swap(i, k);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
            }
        }
        prev = a[k][k];
    }
    narrow(sign * a[n - 1][n - 1])
}

/// Rank over the rationals.
pub fn rank(m: &IMat) -> usize {
    let (_, d, _) = smith_decompose(m);
    d.iter().enumerate().filter(|(i, r)| r.get(*i).is_some_and(|x| *x != 0)).count()
}

/// Smith normal form: returns `(U, D, V)` with `U * m * V = D`, `U` and `V`
/// unimodular, `D` diagonal with nonnegative entries `d1 | d2 | ...`.
pub fn smith_decompose(m: &IMat) -> (IMat, IMat, IMat) {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    smith_decompose_dims(m, rows, cols)
}

pub fn smith_decompose_dims(m: &IMat, rows: usize, cols: usize) -> (IMat, IMat, IMat) {
    let mut a: Vec<Vec<i128>> = m.iter().map(|r| r.iter().map(|x| *x as i128).collect()).collect();
    let mut u: Vec<Vec<i128>> = (0..rows).map(|i| (0..rows).map(|j| i128::from(i == j)).collect()).collect();
    let mut v: Vec<Vec<i128>> = (0..cols).map(|i| (0..cols).map(|j| i128::from(i == j)).collect()).collect();
    let n = rows.min(cols);
    let mut t = 0;
    while t < n {
        // Pivot: smallest nonzero absolute value in the remaining block.
        let mut best: Option<(usize, usize)> = None;
        for i in t..rows {
            for j in t..cols {
                if a[i][j] != 0 && best.is_none_or(|(bi, bj)| a[i][j].abs() < a[bi][bj].abs()) {
                    best = Some((i, j));
                }
            }
        }
        let Some((pi, pj)) = best else { break };
        a.swap(t, pi);
        u.swap(t, pi);
        for r in a.iter_mut() {
            r.swap(t, pj);
        }
        for r in v.iter_mut() {
            r.swap(t, pj);
        }
        let mut clean = true;
        for i in t + 1..rows {
            let q = a[i][t].div_euclid(a[t][t]);
            if q != 0 {
                for j in 0..cols {
                    a[i][j] -= q * a[t][j];
                }
                for j in 0..rows {
                    u[i][j] -= q * u[t][j];
                }
            }
            if a[i][t] != 0 {
                clean = false;
            }
        }
        for j in t + 1..cols {
            let q = a[t][j].div_euclid(a[t][t]);
            if q != 0 {
                for i in 0..rows {
                    a[i][j] -= q * a[i][t];
                }
                for i in 0..cols {
                    v[i][j] -= q * v[i][t];
                }
            }
            if a[t][j] != 0 {
                clean = false;
            }
        }
        if !clean {
            continue;
        }
        // Divisibility: fold any entry not divisible by the pivot into row t.
        let mut fixed = true;
        'outer: for i in t + 1..rows {
            for j in t + 1..cols {
                if a[i][j] % a[t][t] != 0 {
                    for k in 0..cols {
                        a[t][k] += a[i][k];
                    }
                    for k in 0..rows {
                        u[t][k] += u[i][k];
                    }
                    fixed = false;
                    break 'outer;
                }
            }
        }
        if !fixed {
            continue;
        }
        if a[t][t] < 0 {
            for k in 0..cols {
                a[t][k] = -a[t][k];
            }
            for k in 0..rows {
                u[t][k] = -u[t][k];
            }
        }
        t += 1;
    }
    let cv = |x: Vec<Vec<i128>>| -> IMat { x.into_iter().map(|r| r.into_iter().map(narrow).collect()).collect() };
    (cv(u), cv(a), cv(v))
}

/// Inverse of a unimodular matrix.
pub fn unimodular_inverse(m: &IMat) -> IMat {
    let n = m.len();
    let (u, d, v) = smith_decompose(m);
    assert!((0..n).all(|i| d[i][i] == 1), "matrix is not unimodular");
    // U m V = I, so m^-1 = V U.
    mat_mul_dims(&v, &u, n, n)
}

/// Row-style Hermite normal form of the row lattice of `m`: nonzero rows only,
/// positive pivots, entries above each pivot reduced into `[0, pivot)`.
pub fn hermite_rows(m: &IMat, cols: usize) -> IMat {
    let mut a: Vec<Vec<i128>> = m.iter().map(|r| r.iter().map(|x| *x as i128).collect()).collect();
    let rows = a.len();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        loop {
            let mut best: Option<usize> = None;
            for i in r..rows {
                if a[i][c] != 0 && best.is_none_or(|b| a[i][c].abs() < a[b][c].abs()) {
                    best = Some(i);
                }
            }
            let Some(b) = best else { break };
            a.swap(r, b);
            let mut done = true;
            for i in r + 1..rows {
                let q = a[i][c].div_euclid(a[r][c]);
                if q != 0 {
                    for j in 0..cols {
                        a[i][j] -= q * a[r][j];
                    }
                }
                if a[i][c] != 0 {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        if a[r][c] == 0 {
            continue;
        }
        if a[r][c] < 0 {
            for j in 0..cols {
                a[r][j] = -a[r][j];
            }
        }
        for i in 0..r {
            let q = a[i][c].div_euclid(a[r][c]);
            if q != 0 {
                for j in 0..cols {
                    a[i][j] -= q * a[r][j];
                }
            }
        }
        r += 1;
    }
    a.truncate(r);
    a.into_iter().map(|row| row.into_iter().map(narrow).collect()).collect()
}

/// Basis of the integer kernel `{x : m x = 0}` as columns.
pub fn integer_kernel(m: &IMat, cols: usize) -> Vec<IVec> {
    let rows = m.len();
    let (_, d, v) = smith_decompose_dims(m, rows, cols);
    let r = (0..rows.min(cols)).filter(|&i| d[i][i] != 0).count();
    (r..cols).map(|j| (0..cols).map(|i| v[i][j]).collect()).collect()
}

/// Basis of the saturation `span_R(gens) ∩ Z^n`.
pub fn saturate(gens: &[IVec], n: usize) -> Vec<IVec> {
    if gens.is_empty() {
        return Vec::new();
    }
    let ann = integer_kernel(&gens.to_vec(), n);
    if ann.is_empty() {
        return (0..n).map(|i| (0..n).map(|j| i64::from(i == j)).collect()).collect();
    }
    integer_kernel(&ann, n)
}

/// Right inverse `S` of a surjective integer matrix `p` (`p S = I`).
pub fn right_inverse(p: &IMat, rows: usize, cols: usize) -> Option<IMat> {
    let (u, d, v) = smith_decompose_dims(p, rows, cols);
    if (0..rows).any(|i| d[i][i] != 1) {
        return None;
    }
    // U p V = [I 0]  =>  p (V[:, :rows] U) = I.
    let vr: IMat = (0..cols).map(|i| v[i][..rows].to_vec()).collect();
    Some(mat_mul_dims(&vr, &u, cols, rows))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quotient {
    pub q: Lattice,
    pub proj: LatticeMap,
    pub section: LatticeMap,
}

/// Quotient of `Z^ambient` by the span of `gens`. The projection rows are the
/// Hermite basis of the annihilator; the section is the Smith right inverse.
pub fn quotient_lattice(ambient: Lattice, gens: &[IVec]) -> Result<Quotient, LatticeError> {
    let n = ambient.rank;
    for g in gens {
        if g.len() != n {
            return Err(LatticeError::DimensionMismatch { expected: n, found: g.len() });
        }
    }
    // Columns are generators.
    let a: IMat = (0..n).map(|i| gens.iter().map(|g| g[i]).collect()).collect();
    let (u, d, _) = smith_decompose_dims(&a, n, gens.len());
    let r = (0..n.min(gens.len())).filter(|&i| d[i][i] != 0).count();
    if (0..r).any(|i| d[i][i] != 1) {
        return Err(LatticeError::TorsionQuotient);
    }
    let ann: IMat = u[r..].to_vec();
    let proj = hermite_rows(&ann, n);
    let qr = n - r;
    let section = right_inverse(&proj, qr, n).expect("saturated annihilator is surjective");
    Ok(Quotient {
        q: Lattice { rank: qr },
        proj: LatticeMap::new(n, qr, proj),
        section: LatticeMap::new(qr, n, section),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cone {
    pub ambient: Lattice,
    pub rays: Vec<IVec>,
}

impl Cone {
    pub fn new(ambient: usize, rays: Vec<IVec>) -> Self {
        let mut rays: Vec<IVec> = rays.iter().filter(|r| !is_zero(r)).map(|r| primitive(r)).collect();
        rays.sort();
        rays.dedup();
        Cone { ambient: Lattice { rank: ambient }, rays }
    }

    pub fn dim(&self) -> usize {
        rank(&self.rays)
    }
}

pub fn dual_cone_member(m: &[i64], k: &Cone) -> Result<bool, LatticeError> {
    if m.len() != k.ambient.rank {
        return Err(LatticeError::DimensionMismatch { expected: k.ambient.rank, found: m.len() });
    }
    Ok(k.rays.iter().all(|v| dot(m, v) >= 0))
}

/// True when `m` vanishes on every ray of `k`.
pub fn vanishes_on(m: &[i64], k: &Cone) -> bool {
    k.rays.iter().all(|v| dot(m, v) == 0)
}

/// Inward facet normals of a full-dimensional cone in `Z^k`, found by
/// brute force over (k-1)-subsets of rays. Empty when the cone is not
/// full-dimensional or when `k = 0`.
pub fn cone_facet_normals(rays: &[IVec], k: usize) -> Vec<IVec> {
    if k == 0 || rank(&rays.to_vec()) < k {
        return Vec::new();
    }
    let mut out = BTreeSet::new();
    let mut cur = Vec::new();
    combinations(rays.len(), k - 1, 0, &mut cur, &mut |idx| {
        let sub: IMat = idx.iter().map(|&i| rays[i].clone()).collect();
        let ker = integer_kernel(&sub, k);
        if ker.len() != 1 {
            return;
        }
        let n = primitive(&ker[0]);
        let vals: Vec<i64> = rays.iter().map(|r| dot(&n, r)).collect();
        if vals.iter().all(|x| *x >= 0) {
            out.insert(n);
        } else if vals.iter().all(|x| *x <= 0) {
            out.insert(vneg(&n));
        }
    });
    out.into_iter().collect()
}

/// Membership of `x` in the full-dimensional cone with the given normals.
pub fn in_cone(normals: &[IVec], x: &[i64]) -> bool {
    normals.iter().all(|n| dot(n, x) >= 0)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Face {
    pub vertices: Vec<usize>,
    pub dim: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Facet {
    /// Outward primitive normal `a` with `a . x <= rhs` on the polytope.
    pub normal: IVec,
    pub rhs: i64,
    pub vertices: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolytopeFaceLattice {
    pub dim: usize,
    pub vertices: Vec<IVec>,
    /// Proper faces, ordered lexicographically by sorted vertex index sets.
    pub faces: Vec<Face>,
    pub facets: Vec<Facet>,
}

impl PolytopeFaceLattice {
    pub fn count_by_dim(&self) -> Vec<usize> {
        let mut c = vec![0; self.dim];
        for f in &self.faces {
            c[f.dim] += 1;
        }
        c
    }

    pub fn face_index(&self, verts: &[usize]) -> Option<usize> {
        self.faces.iter().position(|f| f.vertices == verts)
    }
}

pub const MAX_POLYTOPE_DIM: usize = 4;
pub const MAX_POLYTOPE_VERTICES: usize = 64;

fn affine_rank(points: &[&IVec]) -> usize {
    if points.is_empty() {
        return 0;
    }
    let diffs: IMat = points[1..].iter().map(|p| vsub(p, points[0])).collect();
    if diffs.is_empty() {
        0
    } else {
        rank(&diffs)
    }
}

fn combinations(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut dyn FnMut(&[usize])) {
    if cur.len() == k {
        out(cur);
        return;
    }
    for i in start..n {
        if n - i < k - cur.len() {
            break;
        }
        cur.push(i);
        combinations(n, k, i + 1, cur, out);
        cur.pop();
    }
}

/// Face lattice of the convex hull of `vertices`, which must be the vertex
/// set of a full-dimensional polytope with the origin in its interior.
pub fn face_lattice(vertices: &[IVec]) -> Result<PolytopeFaceLattice, LatticeError> {
    let n = vertices.first().map_or(0, |v| v.len());
    if n == 0 || n > MAX_POLYTOPE_DIM || vertices.len() > MAX_POLYTOPE_VERTICES {
        return Err(LatticeError::OutOfScale { dim: n, vertices: vertices.len() });
    }
    if let Some(v) = vertices.iter().find(|v| v.len() != n) {
        return Err(LatticeError::DimensionMismatch { expected: n, found: v.len() });
    }
    let all: Vec<&IVec> = vertices.iter().collect();
    if affine_rank(&all) < n {
        return Err(LatticeError::NotFullDimensional);
    }
    let mut seen = BTreeSet::new();
    let mut facets = Vec::new();
    let mut cur = Vec::new();
    combinations(vertices.len(), n, 0, &mut cur, &mut |idx| {
        let pts: Vec<&IVec> = idx.iter().map(|&i| &vertices[i]).collect();
        if affine_rank(&pts) < n - 1 {
            return;
        }
        let diffs: IMat = pts[1..].iter().map(|p| vsub(p, pts[0])).collect();
        let ker = integer_kernel(&diffs, n);
        let normal = primitive(&ker[0]);
        let c = dot(&normal, pts[0]);
        let vals: Vec<i64> = vertices.iter().map(|v| dot(&normal, v)).collect();
        let (normal, c) = if vals.iter().all(|x| *x <= c) {
            (normal, c)
        } else if vals.iter().all(|x| *x >= c) {
            (vneg(&normal), -c)
        } else {
            return;
        };
        let on: Vec<usize> = (0..vertices.len()).filter(|&i| dot(&normal, &vertices[i]) == c).collect();
        if seen.insert(on.clone()) {
            facets.push(Facet { normal, rhs: c, vertices: on });
        }
    });
    if facets.iter().any(|f| f.rhs <= 0) {
        return Err(LatticeError::OriginNotInterior);
    }
    // Every listed point must be a vertex: the intersection of the facets through it.
    for i in 0..vertices.len() {
        let through: Vec<&Facet> = facets.iter().filter(|f| f.vertices.contains(&i)).collect();
        let mut common: BTreeSet<usize> = (0..vertices.len()).collect();
        for f in &through {
            common = common.intersection(&f.vertices.iter().copied().collect()).copied().collect();
        }
        if common.len() != 1 {
            return Err(LatticeError::NotAVertex { index: i });
        }
    }
    // Close facets under intersection.
    let mut faces: BTreeSet<Vec<usize>> = facets.iter().map(|f| f.vertices.clone()).collect();
    loop {
        let cur: Vec<Vec<usize>> = faces.iter().cloned().collect();
        let mut grew = false;
        for a in &cur {
            for b in &cur {
                let i: Vec<usize> = a.iter().filter(|x| b.contains(x)).copied().collect();
                if !i.is_empty() && faces.insert(i) {
                    grew = true;
                }
            }
        }
        if !grew {
            break;
        }
    }
    let faces: Vec<Face> = faces
        .into_iter()
        .map(|vs| {
            let pts: Vec<&IVec> = vs.iter().map(|&i| &vertices[i]).collect();
            Face { dim: affine_rank(&pts), vertices: vs }
        })
        .collect();
    facets.sort_by(|a, b| a.vertices.cmp(&b.vertices));
    Ok(PolytopeFaceLattice { dim: n, vertices: vertices.to_vec(), faces, facets })
}
