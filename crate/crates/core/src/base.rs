//! The base `(B, P)`: cells, quotient lattices `Q_t`, local fans, the
//! morphism category, and gluing data with cocycle and triviality tests.
//!
//! Lattice conventions: `proj[(t, s)]` is the integer matrix of
//! `p: Q_t -> Q_s` (shape `rank Q_s x rank Q_t`). Functionals are row
//! vectors, so the pullback of `m` in `Q_s^*` is `m . proj`. A value in
//! `Q_s (x) Q^x` is stored by its values on the standard basis of `Q_s^*`.

use std::collections::BTreeMap;

use num_traits::One;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{
    cone_facet_normals, dot, face_lattice, identity, in_cone, integer_kernel, mat_mul_dims, quotient_lattice,
    right_inverse, saturate, IMat, IVec, Lattice, PolytopeFaceLattice,
};
use crate::mult::{eval_character, fmt_q, solve_multiplicative, Q};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaseMode {
    /// Boundary of a reflexive-style polytope; everything is derived.
    Polytope,
    /// Face fan of a polytope: the boundary cells plus an apex cell `o`
    /// (the origin cone) below everything.
    Fan,
    /// User-supplied lattices, maps and fans.
    Abstract,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub name: String,
    pub dim: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaseComplex {
    pub mode: BaseMode,
    pub cells: Vec<Cell>,
    /// `leq[a][b]` iff cell `a` is a face of cell `b` (reflexive).
    pub leq: Vec<Vec<bool>>,
    pub qrank: Vec<usize>,
    /// `p_e` for every `a <= b`, identities included.
    pub proj: BTreeMap<(usize, usize), IMat>,
    /// Rays of `K_{a -> b}` in `Q_a` for every `a <= b`.
    pub fan: BTreeMap<(usize, usize), Vec<IVec>>,
    pub max_cells: Vec<usize>,
    /// Vertex index sets, present for polytope-derived bases.
    pub vertex_sets: Option<Vec<Vec<usize>>>,
}

impl BaseComplex {
    pub fn cell_index(&self, name: &str) -> Option<usize> {
        self.cells.iter().position(|c| c.name == name)
    }

    pub fn name(&self, i: usize) -> &str {
        &self.cells[i].name
    }

    pub fn le(&self, a: usize, b: usize) -> bool {
        self.leq[a][b]
    }

    pub fn lt(&self, a: usize, b: usize) -> bool {
        a != b && self.leq[a][b]
    }

    pub fn p(&self, a: usize, b: usize) -> &IMat {
        &self.proj[&(a, b)]
    }

    pub fn cone(&self, a: usize, b: usize) -> &[IVec] {
        &self.fan[&(a, b)]
    }

    pub fn is_max(&self, a: usize) -> bool {
        self.max_cells.contains(&a)
    }

    /// Maximal cells containing `a`, in index order.
    pub fn max_over(&self, a: usize) -> Vec<usize> {
        self.max_cells.iter().copied().filter(|&s| self.le(a, s)).collect()
    }

    /// Strict morphisms `a -> b` in lexicographic index order.
    pub fn morphisms(&self) -> Vec<(usize, usize)> {
        let n = self.cells.len();
        let mut out = Vec::new();
        for a in 0..n {
            for b in 0..n {
                if self.lt(a, b) {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// Strict chains `a < b < c`.
    pub fn chains3(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for (a, b) in self.morphisms() {
            for c in 0..self.cells.len() {
                if self.lt(b, c) {
                    out.push((a, b, c));
                }
            }
        }
        out
    }

    /// Greatest common face of two cells, when it exists and is unique.
    pub fn meet(&self, a: usize, b: usize) -> Option<usize> {
        let lower: Vec<usize> = (0..self.cells.len()).filter(|&c| self.le(c, a) && self.le(c, b)).collect();
        let tops: Vec<usize> = lower.iter().copied().filter(|&c| lower.iter().all(|&d| self.le(d, c))).collect();
        match tops.as_slice() {
            [c] => Some(*c),
            _ => None,
        }
    }

    pub fn max_dim(&self) -> usize {
        self.max_cells.iter().map(|&s| self.cells[s].dim).max().unwrap_or(0)
    }

    /// Right inverse of `p_{a -> b}`: `p . S = Id`.
    pub fn p_section(&self, a: usize, b: usize) -> IMat {
        right_inverse(self.p(a, b), self.qrank[b], self.qrank[a]).expect("projection is surjective")
    }

    /// The functional `d` in `Q_a^*` as an element of `p^* Q_b^*`, if it is one.
    pub fn descend(&self, a: usize, b: usize, d: &[i64]) -> Option<IVec> {
        let s = self.p_section(a, b);
        let d2 = row_times(d, &s, self.qrank[b]);
        (row_times(&d2, self.p(a, b), self.qrank[a]) == d).then_some(d2)
    }

    pub fn pull(&self, a: usize, b: usize, m: &[i64]) -> IVec {
        row_times(m, self.p(a, b), self.qrank[a])
    }

    /// Sub-poset of cells containing `a`, with `a` as apex.
    pub fn star(&self, a: usize) -> (BaseComplex, Vec<usize>) {
        let keep: Vec<usize> = (0..self.cells.len()).filter(|&c| self.le(a, c)).collect();
        let pos = |c: usize| keep.iter().position(|&k| k == c).unwrap();
        let mut proj = BTreeMap::new();
        let mut fan = BTreeMap::new();
        for &x in &keep {
            for &y in &keep {
                if self.le(x, y) {
                    proj.insert((pos(x), pos(y)), self.proj[&(x, y)].clone());
                    fan.insert((pos(x), pos(y)), self.fan[&(x, y)].clone());
                }
            }
        }
        let b = BaseComplex {
            mode: BaseMode::Abstract,
            cells: keep.iter().map(|&c| self.cells[c].clone()).collect(),
            leq: keep.iter().map(|&x| keep.iter().map(|&y| self.le(x, y)).collect()).collect(),
            qrank: keep.iter().map(|&c| self.qrank[c]).collect(),
            proj,
            fan,
            max_cells: keep.iter().enumerate().filter(|(_, c)| self.is_max(**c)).map(|(i, _)| i).collect(),
            vertex_sets: None,
        };
        (b, keep)
    }

    /// Checks functoriality, surjectivity, fan compatibility and
    /// completeness of every local fan. Returns human-readable violations.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut out = Vec::new();
        let n = self.cells.len();
        for a in 0..n {
            if self.proj.get(&(a, a)) != Some(&identity(self.qrank[a])) {
                out.push(format!("p_id at {} is not the identity", self.name(a)));
            }
        }
        for (a, b) in self.morphisms() {
            let p = self.p(a, b);
            if p.len() != self.qrank[b] || p.iter().any(|r| r.len() != self.qrank[a]) {
                out.push(format!("p_{}->{} has the wrong shape", self.name(a), self.name(b)));
                continue;
            }
            if right_inverse(p, self.qrank[b], self.qrank[a]).is_none() {
                out.push(format!("p_{}->{} is not surjective", self.name(a), self.name(b)));
            }
        }
        if !out.is_empty() {
            return out;
        }
        for (a, b, c) in self.chains3() {
            let comp = mat_mul_dims(self.p(b, c), self.p(a, b), self.qrank[c], self.qrank[a]);
            if &comp != self.p(a, c) {
                out.push(format!("functoriality fails on {} < {} < {}", self.name(a), self.name(b), self.name(c)));
            }
        }
        for (a, b) in self.morphisms() {
            for c in 0..n {
                if !self.le(b, c) {
                    continue;
                }
                let image = Cone::from(self.cone(a, c).iter().map(|r| mat_vec_dims(self.p(a, b), r)).collect::<Vec<IVec>>());
                if image != Cone::from(self.cone(b, c).to_vec()) {
                    out.push(format!(
                        "fan image of K_{}->{} under p_{}->{} differs from K_{}->{}",
                        self.name(a),
                        self.name(c),
                        self.name(a),
                        self.name(b),
                        self.name(b),
                        self.name(c)
                    ));
                }
            }
        }
        for a in 0..n {
            if !self.fan_is_complete(a) {
                out.push(format!("fan at {} is not complete", self.name(a)));
            }
        }
        out
    }

    /// Every generic direction of `Q_a (x) R` lies in some maximal cone.
    pub fn fan_is_complete(&self, a: usize) -> bool {
        let k = self.qrank[a];
        if k == 0 {
            return true;
        }
        let normals: Vec<Vec<IVec>> = self.max_over(a).iter().map(|&s| cone_facet_normals(&self.cone(a, s).to_vec(), k)).collect();
        // Small grid of directions, perturbed off every rational hyperplane
        // with small coefficients.
        let pert: IVec = (0..k).map(|i| 1 + 7 * i as i64 + (i * i) as i64 * 13).collect();
        let mut dir = vec![-2i64; k];
        loop {
            let x: IVec = dir.iter().zip(&pert).map(|(d, p)| d * 1000 + p).collect();
            if !normals.iter().any(|ns| !ns.is_empty() && in_cone(ns, &x)) {
                return false;
            }
            let mut i = 0;
            while i < k {
                dir[i] += 1;
                if dir[i] <= 2 {
                    break;
                }
                dir[i] = -2;
                i += 1;
            }
            if i == k {
                return true;
            }
        }
    }
}

/// Canonical cone for equality tests: primitive, sorted, deduplicated rays.
#[derive(PartialEq, Eq, Debug)]
struct Cone(Vec<IVec>);

impl From<Vec<IVec>> for Cone {
    fn from(rays: Vec<IVec>) -> Self {
        Cone(crate::lattice::Cone::new(rays.first().map_or(0, |r| r.len()), rays).rays)
    }
}

pub fn mat_vec_dims(m: &IMat, v: &[i64]) -> IVec {
    m.iter().map(|r| dot(r, v)).collect()
}

/// `m . a` for a row vector `m` and `a` with `cols` columns.
pub fn row_times(m: &[i64], a: &IMat, cols: usize) -> IVec {
    assert_eq!(m.len(), a.len(), "functional length mismatch");
    (0..cols).map(|j| m.iter().zip(a).fold(0i64, |acc, (x, r)| acc + x * r[j])).collect()
}

fn cell_name(verts: &[usize], dim: usize) -> String {
    let prefix = ["v", "e", "f", "g"][dim.min(3)];
    let idx: Vec<String> = verts.iter().map(|v| v.to_string()).collect();
    format!("{prefix}{}", idx.join("_"))
}

/// The boundary of a polytope as a base: cells are the proper faces,
/// `Q_t = N / (R K(t) cap N)`, `K_{t -> s}` is the image of the cone over `s`.
pub fn build_base_from_polytope(fl: &PolytopeFaceLattice) -> Result<BaseComplex> {
    build_polytope_like(fl, false)
}

/// The face fan of a polytope: the boundary cells plus the origin cone.
pub fn build_fan_base(fl: &PolytopeFaceLattice) -> Result<BaseComplex> {
    build_polytope_like(fl, true)
}

/// Sections `Q_t -> N` of the quotient maps, for polytope-derived bases
/// (the apex, if any, has `Q = N` with identity maps).
pub fn ambient_maps(fl: &PolytopeFaceLattice, base: &BaseComplex) -> Result<Vec<(IMat, IMat)>> {
    let n = fl.dim;
    let sets = base.vertex_sets.as_ref().ok_or_else(|| Error::Invalid("base has no ambient polytope".into()))?;
    sets.iter()
        .map(|vs| {
            let gens: Vec<IVec> = vs.iter().map(|&v| fl.vertices[v].clone()).collect();
            let q = quotient_lattice(Lattice { rank: n }, &saturate(&gens, n))?;
            Ok((q.proj.matrix, q.section.matrix))
        })
        .collect()
}

fn build_polytope_like(fl: &PolytopeFaceLattice, apex: bool) -> Result<BaseComplex> {
    let n = fl.dim;
    let mut sets: Vec<Vec<usize>> = Vec::new();
    let mut cells = Vec::new();
    if apex {
        sets.push(Vec::new());
        cells.push(Cell { name: "o".into(), dim: 0 });
    }
    for f in &fl.faces {
        sets.push(f.vertices.clone());
        cells.push(Cell { name: cell_name(&f.vertices, f.dim), dim: f.dim + usize::from(apex) });
    }
    let m = cells.len();
    let subset = |a: &[usize], b: &[usize]| a.iter().all(|x| b.contains(x));
    let leq: Vec<Vec<bool>> = (0..m).map(|a| (0..m).map(|b| subset(&sets[a], &sets[b])).collect()).collect();
    let mut projs = Vec::new();
    for vs in &sets {
        let gens: Vec<IVec> = vs.iter().map(|&v| fl.vertices[v].clone()).collect();
        projs.push(quotient_lattice(Lattice { rank: n }, &saturate(&gens, n))?);
    }
    let qrank: Vec<usize> = projs.iter().map(|q| q.q.rank).collect();
    let mut proj = BTreeMap::new();
    let mut fan = BTreeMap::new();
    for a in 0..m {
        for b in 0..m {
            if !leq[a][b] {
                continue;
            }
            let p = mat_mul_dims(&projs[b].proj.matrix, &projs[a].section.matrix, qrank[b], qrank[a]);
            proj.insert((a, b), p);
            let rays: Vec<IVec> = sets[b].iter().map(|&v| mat_vec_dims(&projs[a].proj.matrix, &fl.vertices[v])).collect();
            fan.insert((a, b), crate::lattice::Cone::new(qrank[a], rays).rays);
        }
    }
    let top = fl.dim - 1 + usize::from(apex);
    let max_cells = (0..m).filter(|&c| cells[c].dim == top).collect();
    Ok(BaseComplex { mode: if apex { BaseMode::Fan } else { BaseMode::Polytope }, cells, leq, qrank, proj, fan, max_cells, vertex_sets: Some(sets) })
}

/// Abstract-mode input: the caller supplies everything.
pub struct AbstractInput {
    pub cells: Vec<Cell>,
    /// Strict containments `(a, b)`; closed transitively.
    pub containments: Vec<(usize, usize)>,
    pub qrank: Vec<usize>,
    /// Matrices for strict containments; missing ones are composed.
    pub proj: BTreeMap<(usize, usize), IMat>,
    /// Fan rays `K_{a -> b}` for every `a <= b` with `b` maximal.
    pub fan: BTreeMap<(usize, usize), Vec<IVec>>,
}

pub fn build_base_abstract(inp: AbstractInput) -> Result<BaseComplex> {
    let m = inp.cells.len();
    let mut leq = vec![vec![false; m]; m];
    for (a, row) in leq.iter_mut().enumerate() {
        row[a] = true;
    }
    for &(a, b) in &inp.containments {
        leq[a][b] = true;
    }
    for k in 0..m {
        for a in 0..m {
            for b in 0..m {
                if leq[a][k] && leq[k][b] {
                    leq[a][b] = true;
                }
            }
        }
    }
    for a in 0..m {
        for b in 0..m {
            if a != b && leq[a][b] && leq[b][a] {
                return Err(Error::Invalid(format!("containment cycle between {} and {}", inp.cells[a].name, inp.cells[b].name)));
            }
        }
    }
    let mut proj = inp.proj;
    for a in 0..m {
        proj.insert((a, a), identity(inp.qrank[a]));
    }
    // Fill missing maps by composing through an intermediate cell, shortest gaps first.
    let mut pairs: Vec<(usize, usize)> = (0..m).flat_map(|a| (0..m).map(move |b| (a, b))).filter(|&(a, b)| a != b && leq[a][b]).collect();
    pairs.sort_by_key(|&(a, b)| inp.cells[b].dim as i64 - inp.cells[a].dim as i64);
    for (a, b) in pairs {
        if proj.contains_key(&(a, b)) {
            continue;
        }
        let mid = (0..m).find(|&c| c != a && c != b && leq[a][c] && leq[c][b] && proj.contains_key(&(a, c)) && proj.contains_key(&(c, b)));
        let Some(c) = mid else {
            return Err(Error::IndexMismatch(format!("no projection for {} -> {}", inp.cells[a].name, inp.cells[b].name)));
        };
        let p = mat_mul_dims(&proj[&(c, b)], &proj[&(a, c)], inp.qrank[b], inp.qrank[a]);
        proj.insert((a, b), p);
    }
    let has_strict_upper = |a: usize| (0..m).any(|b| b != a && leq[a][b]);
    let max_cells: Vec<usize> = (0..m).filter(|&a| !has_strict_upper(a)).collect();
    let mut fan = BTreeMap::new();
    for a in 0..m {
        for b in 0..m {
            if !leq[a][b] {
                continue;
            }
            let rays = if let Some(r) = inp.fan.get(&(a, b)) {
                r.clone()
            } else if a == b {
                Vec::new()
            } else if max_cells.contains(&b) {
                return Err(Error::IndexMismatch(format!("no fan cone for {} -> {}", inp.cells[a].name, inp.cells[b].name)));
            } else {
                // Non-maximal cone: the common face of the maximal cones above it.
                let tops: Vec<&usize> = max_cells.iter().filter(|&&s| leq[b][s]).collect();
                let first = inp.fan.get(&(a, *tops[0])).cloned().unwrap_or_default();
                first.into_iter().filter(|r| tops.iter().all(|&&s| inp.fan.get(&(a, s)).is_some_and(|c| c.contains(r)))).collect()
            };
            fan.insert((a, b), crate::lattice::Cone::new(inp.qrank[a], rays).rays);
        }
    }
    let base = BaseComplex { mode: BaseMode::Abstract, cells: inp.cells, leq, qrank: inp.qrank, proj, fan, max_cells, vertex_sets: None };
    let bad = base.check_invariants();
    if let Some(first) = bad.first() {
        return Err(Error::Invalid(first.clone()));
    }
    Ok(base)
}

/// Push a value of `Q_a (x) Q^x` forward along `p_{a -> b}`.
pub fn push_character(base: &BaseComplex, a: usize, b: usize, x: &[Q]) -> Vec<Q> {
    base.p(a, b).iter().map(|row| eval_character(x, row)).collect()
}

/// Closed gluing data: `s[(a, b)]` in `Q_b (x) Q^x` for strict `a -> b`;
/// absent entries are 1.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ClosedGluing {
    pub values: BTreeMap<(usize, usize), Vec<Q>>,
}

/// Open gluing data, stored with one multiplicative piece per morphism.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OpenGluing {
    pub values: BTreeMap<(usize, usize), Vec<Q>>,
}

impl ClosedGluing {
    pub fn get(&self, base: &BaseComplex, a: usize, b: usize) -> Vec<Q> {
        self.values.get(&(a, b)).cloned().unwrap_or_else(|| vec![Q::one(); base.qrank[b]])
    }

    /// `s_{a -> b}(m)` for `m` in `Q_b^*`.
    pub fn eval(&self, _base: &BaseComplex, a: usize, b: usize, m: &[i64]) -> Q {
        if a == b {
            return Q::one();
        }
        match self.values.get(&(a, b)) {
            Some(v) => eval_character(v, m),
            None => Q::one(),
        }
    }

    pub fn mul(&self, base: &BaseComplex, other: &ClosedGluing) -> ClosedGluing {
        let mut values = BTreeMap::new();
        for (a, b) in base.morphisms() {
            let x: Vec<Q> = self.get(base, a, b).iter().zip(other.get(base, a, b)).map(|(p, q)| p * q).collect();
            values.insert((a, b), x);
        }
        ClosedGluing { values }.normalized()
    }

    pub fn inv(&self) -> ClosedGluing {
        ClosedGluing { values: self.values.iter().map(|(k, v)| (*k, v.iter().map(|x| x.recip()).collect())).collect() }
    }

    /// Drops entries that are identically 1.
    pub fn normalized(mut self) -> ClosedGluing {
        self.values.retain(|_, v| v.iter().any(|x| !x.is_one()));
        self
    }

    /// The coboundary of a potential: `s_{a -> b} = p(t_a) . t_b^{-1}`.
    pub fn from_potential(base: &BaseComplex, t: &[Vec<Q>]) -> ClosedGluing {
        let mut values = BTreeMap::new();
        for (a, b) in base.morphisms() {
            let pushed = push_character(base, a, b, &t[a]);
            values.insert((a, b), pushed.iter().zip(&t[b]).map(|(x, y)| x / y).collect());
        }
        ClosedGluing { values }.normalized()
    }
}

/// One violated cocycle identity `s_{e3} = p(s_{e1}) . s_{e2}` on a basis
/// functional of the target.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GluingViolation {
    pub e1: (String, String),
    pub e2: (String, String),
    pub e3: (String, String),
    pub component: usize,
    pub composed: String,
    pub direct: String,
}

fn check_index(base: &BaseComplex, values: &BTreeMap<(usize, usize), Vec<Q>>) -> Result<()> {
    for (&(a, b), v) in values {
        if a >= base.cells.len() || b >= base.cells.len() || !base.lt(a, b) {
            return Err(Error::IndexMismatch(format!("gluing value on a non-morphism ({a}, {b})")));
        }
        if v.len() != base.qrank[b] {
            return Err(Error::IndexMismatch(format!("gluing value on {} -> {} has length {}, expected {}", base.name(a), base.name(b), v.len(), base.qrank[b])));
        }
        if v.iter().any(num_traits::Zero::is_zero) {
            return Err(Error::IndexMismatch(format!("zero gluing value on {} -> {}", base.name(a), base.name(b))));
        }
    }
    Ok(())
}

pub fn validate_closed_gluing(base: &BaseComplex, s: &ClosedGluing) -> Result<Vec<GluingViolation>> {
    check_index(base, &s.values)?;
    let mut out = Vec::new();
    for (a, b, c) in base.chains3() {
        let pushed = push_character(base, b, c, &s.get(base, a, b));
        let second = s.get(base, b, c);
        let direct = s.get(base, a, c);
        for j in 0..base.qrank[c] {
            let composed = &pushed[j] * &second[j];
            if composed != direct[j] {
                out.push(GluingViolation {
                    e1: (base.name(a).into(), base.name(b).into()),
                    e2: (base.name(b).into(), base.name(c).into()),
                    e3: (base.name(a).into(), base.name(c).into()),
                    component: j,
                    composed: fmt_q(&composed),
                    direct: fmt_q(&direct[j]),
                });
            }
        }
    }
    Ok(out)
}

pub fn validate_open_gluing(base: &BaseComplex, s: &OpenGluing) -> Result<Vec<GluingViolation>> {
    validate_closed_gluing(base, &open_to_closed(base, s))
}

/// With one piece per morphism the closed datum carries the same values.
pub fn open_to_closed(_base: &BaseComplex, s: &OpenGluing) -> ClosedGluing {
    ClosedGluing { values: s.values.clone() }.normalized()
}

/// A potential `t` with `s = from_potential(t)`, if one exists over `Q^x`.
pub fn is_trivial_gluing(base: &BaseComplex, s: &OpenGluing) -> Option<Vec<Vec<Q>>> {
    let closed = open_to_closed(base, s);
    let offsets: Vec<usize> = base.qrank.iter().scan(0, |acc, r| {
        let o = *acc;
        *acc += r;
        Some(o)
    }).collect();
    let cols: usize = base.qrank.iter().sum();
    let mut rows: IMat = Vec::new();
    let mut rhs = Vec::new();
    for (a, b) in base.morphisms() {
        let p = base.p(a, b);
        let v = closed.get(base, a, b);
        for j in 0..base.qrank[b] {
            let mut row = vec![0i64; cols];
            for i in 0..base.qrank[a] {
                row[offsets[a] + i] += p[j][i];
            }
            row[offsets[b] + j] -= 1;
            rows.push(row);
            rhs.push(v[j].clone());
        }
    }
    let sol = solve_multiplicative(&rows, rows.len(), cols, &rhs)?;
    Some((0..base.cells.len()).map(|a| sol[offsets[a]..offsets[a] + base.qrank[a]].to_vec()).collect())
}

/// Random closed gluing datum: a random point of the exponent lattice of
/// the cocycle equations, over the primes 2, 3, 5 and the sign.
pub fn random_closed_gluing<R: Rng>(base: &BaseComplex, rng: &mut R, spread: i64) -> ClosedGluing {
    let morph = base.morphisms();
    let mut offsets = BTreeMap::new();
    let mut cols = 0;
    for &(a, b) in &morph {
        offsets.insert((a, b), cols);
        cols += base.qrank[b];
    }
    let mut eqs: IMat = Vec::new();
    for (a, b, c) in base.chains3() {
        let p = base.p(b, c);
        for j in 0..base.qrank[c] {
            let mut row = vec![0i64; cols];
            row[offsets[&(a, c)] + j] += 1;
            row[offsets[&(b, c)] + j] -= 1;
            for i in 0..base.qrank[b] {
                row[offsets[&(a, b)] + i] -= p[j][i];
            }
            eqs.push(row);
        }
    }
    let ker = if eqs.is_empty() { identity(cols) } else { integer_kernel(&eqs, cols) };
    let mut exps: Vec<[i64; 4]> = vec![[0; 4]; cols];
    for basis in &ker {
        let c: [i64; 4] = std::array::from_fn(|_| rng.gen_range(-spread..=spread));
        for (e, x) in exps.iter_mut().zip(basis) {
            for k in 0..4 {
                e[k] += c[k] * x;
            }
        }
    }
    let mut values = BTreeMap::new();
    for &(a, b) in &morph {
        let o = offsets[&(a, b)];
        let v: Vec<Q> = (0..base.qrank[b])
            .map(|j| {
                let e = exps[o + j];
                let mag = crate::mult::qpow(&crate::mult::q(2), e[0]) * crate::mult::qpow(&crate::mult::q(3), e[1]) * crate::mult::qpow(&crate::mult::q(5), e[2]);
                if e[3].rem_euclid(2) == 1 {
                    -mag
                } else {
                    mag
                }
            })
            .collect();
        values.insert((a, b), v);
    }
    ClosedGluing { values }.normalized()
}

/// Random potential `t` with small prime-power values.
pub fn random_potential<R: Rng>(base: &BaseComplex, rng: &mut R) -> Vec<Vec<Q>> {
    base.qrank
        .iter()
        .map(|&r| {
            (0..r)
                .map(|_| {
                    let e2 = rng.gen_range(-2..=2);
                    let e3 = rng.gen_range(-1..=1);
                    let x = crate::mult::qpow(&crate::mult::q(2), e2) * crate::mult::qpow(&crate::mult::q(3), e3);
                    if rng.gen_bool(0.3) {
                        -x
                    } else {
                        x
                    }
                })
                .collect()
        })
        .collect()
}

pub fn square() -> PolytopeFaceLattice {
    face_lattice(&[vec![-1, -1], vec![1, -1], vec![1, 1], vec![-1, 1]]).expect("square")
}

pub fn cube() -> PolytopeFaceLattice {
    let mut v = Vec::new();
    for x in [-1, 1] {
        for y in [-1, 1] {
            for z in [-1, 1] {
                v.push(vec![x, y, z]);
            }
        }
    }
    face_lattice(&v).expect("cube")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mult::{q, qf};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn square_base_shape() {
        let b = build_base_from_polytope(&square()).unwrap();
        assert_eq!(b.cells.len(), 8);
        assert_eq!(b.max_cells.len(), 4);
        for &e in &b.max_cells {
            assert_eq!(b.qrank[e], 0);
        }
        for (i, c) in b.cells.iter().enumerate() {
            if c.dim == 0 {
                assert_eq!(b.qrank[i], 1);
            }
        }
        assert!(b.check_invariants().is_empty(), "{:?}", b.check_invariants());
    }

    #[test]
    fn cube_edge_fans_have_two_rays() {
        let b = build_base_from_polytope(&cube()).unwrap();
        assert_eq!(b.cells.len(), 26);
        assert!(b.check_invariants().is_empty());
        // Oracle: for an edge, the two facets containing it project to two
        // opposite-free rays of Q_edge = Z^2 (up to the section choice).
        for (t, c) in b.cells.iter().enumerate() {
            if c.dim != 1 {
                continue;
            }
            let maxes = b.max_over(t);
            assert_eq!(maxes.len(), 2);
            assert_eq!(b.qrank[t], 1);
            let mut rays: Vec<IVec> = maxes.iter().flat_map(|&s| b.cone(t, s).to_vec()).collect();
            rays.sort();
            rays.dedup();
            assert_eq!(rays.len(), 2);
        }
    }

    #[test]
    fn fan_base_has_apex() {
        let b = build_fan_base(&square()).unwrap();
        assert_eq!(b.cells.len(), 9);
        assert_eq!(b.qrank[0], 2);
        assert!(b.check_invariants().is_empty());
        assert_eq!(b.max_over(0).len(), 4);
    }

    #[test]
    fn abstract_passthrough() {
        let b = build_base_from_polytope(&square()).unwrap();
        let inp = AbstractInput {
            cells: b.cells.clone(),
            containments: b.morphisms(),
            qrank: b.qrank.clone(),
            proj: b.morphisms().into_iter().map(|e| (e, b.proj[&e].clone())).collect(),
            fan: b.fan.iter().filter(|((_, s), _)| b.is_max(*s)).map(|(k, v)| (*k, v.clone())).collect(),
        };
        let a = build_base_abstract(inp).unwrap();
        assert_eq!(a.proj, b.proj);
        assert_eq!(a.fan, b.fan);
        assert_eq!(a.leq, b.leq);
    }

    #[test]
    fn trivial_and_forced_gluing() {
        let b = build_base_from_polytope(&square()).unwrap();
        let one = OpenGluing::default();
        assert!(validate_open_gluing(&b, &one).unwrap().is_empty());
        let t = is_trivial_gluing(&b, &one).unwrap();
        assert!(ClosedGluing::from_potential(&b, &t).values.is_empty());
        // On polytope boundaries of dimension <= 3 every composable chain
        // ends in a facet with rank-0 quotient, so a forced inconsistency
        // needs the face fan of the cube: o < v < e with rank Q_e = 1.
        let c = build_fan_base(&cube()).unwrap();
        let v = c.cell_index("v0").unwrap();
        let e = (0..c.cells.len()).find(|&e| c.cells[e].dim == 2 && c.lt(v, e)).unwrap();
        assert_eq!(c.qrank[e], 1);
        let mut s = OpenGluing::default();
        s.values.insert((v, e), vec![q(2)]);
        let bad = validate_open_gluing(&c, &s).unwrap();
        assert_eq!(bad.len(), 1);
        assert_eq!(bad[0].e1, ("o".to_string(), c.name(v).to_string()));
        assert_eq!(bad[0].e2, (c.name(v).to_string(), c.name(e).to_string()));
        assert!(bad.iter().all(|x| x.direct != x.composed));
    }

    #[test]
    fn potential_gluing_is_valid_and_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for fl in [square(), cube()] {
            let b = build_base_from_polytope(&fl).unwrap();
            for _ in 0..5 {
                let t = random_potential(&b, &mut rng);
                let s = ClosedGluing::from_potential(&b, &t);
                // Oracle: direct evaluation of the defining formula on basis functionals.
                for (x, y) in b.morphisms() {
                    for j in 0..b.qrank[y] {
                        let mut e = vec![0; b.qrank[y]];
                        e[j] = 1;
                        let lhs = s.eval(&b, x, y, &e);
                        let rhs = eval_character(&t[x], &b.pull(x, y, &e)) / eval_character(&t[y], &e);
                        assert_eq!(lhs, rhs);
                    }
                }
                assert!(validate_closed_gluing(&b, &s).unwrap().is_empty());
                let open = OpenGluing { values: s.values.clone() };
                let t2 = is_trivial_gluing(&b, &open).unwrap();
                assert_eq!(ClosedGluing::from_potential(&b, &t2), s);
            }
        }
    }

    #[test]
    fn random_closed_gluing_is_closed() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = build_base_from_polytope(&cube()).unwrap();
        for _ in 0..5 {
            let s = random_closed_gluing(&b, &mut rng, 2);
            assert!(validate_closed_gluing(&b, &s).unwrap().is_empty());
        }
    }

    #[test]
    fn open_to_closed_is_multiplicative() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let b = build_base_from_polytope(&cube()).unwrap();
        let s1 = random_closed_gluing(&b, &mut rng, 2);
        let s2 = random_closed_gluing(&b, &mut rng, 2);
        let o1 = OpenGluing { values: s1.values.clone() };
        let o2 = OpenGluing { values: s2.values.clone() };
        let prod = OpenGluing { values: s1.mul(&b, &s2).values };
        assert_eq!(open_to_closed(&b, &prod), open_to_closed(&b, &o1).mul(&b, &open_to_closed(&b, &o2)));
        assert_eq!(s1.mul(&b, &s1.inv()), ClosedGluing::default());
        let _ = qf(1, 2);
    }
}
