//! Tropical Lagrangian multi-sections as combinatorial data: covering data,
//! slope tables, their continuity and affine-compatibility checks, fan
//! structures at lifts, localization, separability and covering morphisms.
//!
//! Maximal lifts carry multiplicity one, so the frame of a maximal cell is
//! the name-ordered list of its lifts.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::base::{row_times, BaseComplex};
use crate::error::{Error, Result};
use crate::lattice::{dot, is_zero, vsub, IMat, IVec};
use crate::report::{fmt_vec, Finding};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Lift {
    pub name: String,
    pub cell: usize,
    pub mult: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoveringData {
    /// Sorted by name.
    pub lifts: Vec<Lift>,
    /// Lifts over each cell, in name order.
    pub over: Vec<Vec<usize>>,
    /// `down[(x, c)]`: the lift of the face `c` under the lift `x`.
    pub down: BTreeMap<(usize, usize), usize>,
}

impl CoveringData {
    /// Builds covering data from lifts and `(upper, lower)` name pairs. Maps
    /// not listed are composed through intermediate cells.
    pub fn new(base: &BaseComplex, mut lifts: Vec<Lift>, maps: &[(String, String)]) -> Result<Self> {
        lifts.sort_by(|a, b| a.name.cmp(&b.name));
        for w in lifts.windows(2) {
            if w[0].name == w[1].name {
                return Err(Error::IndexMismatch(format!("duplicate lift name {}", w[0].name)));
            }
        }
        let n = base.cells.len();
        if let Some(l) = lifts.iter().find(|l| l.cell >= n) {
            return Err(Error::IndexMismatch(format!("lift {} over unknown cell", l.name)));
        }
        let mut over = vec![Vec::new(); n];
        for (i, l) in lifts.iter().enumerate() {
            over[l.cell].push(i);
        }
        let index = |s: &str| lifts.iter().position(|l| l.name == s);
        let mut down = BTreeMap::new();
        for (i, l) in lifts.iter().enumerate() {
            down.insert((i, l.cell), i);
        }
        for (hi, lo) in maps {
            let x = index(hi).ok_or_else(|| Error::IndexMismatch(format!("unknown lift {hi}")))?;
            let y = index(lo).ok_or_else(|| Error::IndexMismatch(format!("unknown lift {lo}")))?;
            if !base.lt(lifts[y].cell, lifts[x].cell) {
                return Err(Error::IndexMismatch(format!("map {hi} -> {lo} does not follow a strict face")));
            }
            if down.insert((x, lifts[y].cell), y).is_some_and(|old| old != y) {
                return Err(Error::IndexMismatch(format!("lift {hi} mapped twice over {}", base.name(lifts[y].cell))));
            }
        }
        let mut c = CoveringData { lifts, over, down };
        c.close(base);
        Ok(c)
    }

    fn close(&mut self, base: &BaseComplex) {
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for (x, l) in self.lifts.iter().enumerate() {
            for c in 0..base.cells.len() {
                if base.lt(c, l.cell) {
                    pairs.push((x, c));
                }
            }
        }
        pairs.sort_by_key(|&(x, c)| (base.cells[self.lifts[x].cell].dim as i64 - base.cells[c].dim as i64, x, c));
        for (x, c) in pairs {
            if self.down.contains_key(&(x, c)) {
                continue;
            }
            let via = (0..base.cells.len()).find_map(|m| {
                if !(base.lt(c, m) && base.lt(m, self.lifts[x].cell)) {
                    return None;
                }
                let y = *self.down.get(&(x, m))?;
                self.down.get(&(y, c)).copied()
            });
            if let Some(z) = via {
                self.down.insert((x, c), z);
            }
        }
    }

    /// Identity cover: one lift per cell, named after the cell.
    pub fn identity(base: &BaseComplex) -> Self {
        Self::sheets(base, &[""])
    }

    /// Disjoint union of copies of the base, lifts named `cell.sheet`.
    pub fn sheets(base: &BaseComplex, sheets: &[&str]) -> Self {
        let name = |c: usize, s: &str| if s.is_empty() { base.name(c).to_string() } else { format!("{}.{s}", base.name(c)) };
        let lifts = sheets
            .iter()
            .flat_map(|s| (0..base.cells.len()).map(move |c| (c, *s)))
            .map(|(c, s)| Lift { name: name(c, s), cell: c, mult: 1 })
            .collect();
        let mut maps = Vec::new();
        for s in sheets {
            for (a, b) in base.morphisms() {
                maps.push((name(b, s), name(a, s)));
            }
        }
        Self::new(base, lifts, &maps).expect("sheets are consistent")
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.lifts.binary_search_by(|l| l.name.as_str().cmp(name)).ok()
    }

    pub fn name(&self, x: usize) -> &str {
        &self.lifts[x].name
    }

    pub fn cell(&self, x: usize) -> usize {
        self.lifts[x].cell
    }

    /// Lift of the face `c` under `x`.
    pub fn lift_of(&self, x: usize, c: usize) -> usize {
        self.down[&(x, c)]
    }

    /// The order `x <=' y`.
    pub fn le(&self, base: &BaseComplex, x: usize, y: usize) -> bool {
        let (a, b) = (self.cell(x), self.cell(y));
        base.le(a, b) && self.down.get(&(y, a)) == Some(&x)
    }

    pub fn lt(&self, base: &BaseComplex, x: usize, y: usize) -> bool {
        x != y && self.le(base, x, y)
    }

    /// Maximal lifts above `x`, in name order.
    pub fn star(&self, base: &BaseComplex, x: usize) -> Vec<usize> {
        (0..self.lifts.len()).filter(|&y| base.is_max(self.cell(y)) && self.le(base, x, y)).collect()
    }

    /// Frame of a maximal cell: its lifts in name order.
    pub fn frame(&self, s: usize) -> &[usize] {
        &self.over[s]
    }

    pub fn degree(&self) -> usize {
        self.over.first().map_or(0, |l| l.iter().map(|&x| self.lifts[x].mult as usize).sum())
    }

    /// Strict lift pairs `x <' y`.
    pub fn pairs(&self, base: &BaseComplex) -> Vec<(usize, usize)> {
        let n = self.lifts.len();
        (0..n).flat_map(|x| (0..n).map(move |y| (x, y))).filter(|&(x, y)| self.lt(base, x, y)).collect()
    }

    /// Strict lift flags `x <' y <' z`.
    pub fn flags3(&self, base: &BaseComplex) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for (x, y) in self.pairs(base) {
            for z in 0..self.lifts.len() {
                if self.lt(base, y, z) {
                    out.push((x, y, z));
                }
            }
        }
        out
    }
}

pub fn validate_covering(base: &BaseComplex, c: &CoveringData) -> Vec<Finding> {
    let mut out = Vec::new();
    let n = base.cells.len();
    for (x, l) in c.lifts.iter().enumerate() {
        for f in 0..n {
            if base.lt(f, l.cell) && !c.down.contains_key(&(x, f)) {
                out.push(Finding::new("missing-map", [l.name.clone(), base.name(f).into()], "no lift of the face"));
            }
        }
    }
    if !out.is_empty() {
        return out;
    }
    for (x, l) in c.lifts.iter().enumerate() {
        for (f2, f3) in base.morphisms() {
            if f3 == l.cell || !base.lt(f3, l.cell) {
                continue;
            }
            let direct = c.lift_of(x, f2);
            let composed = c.lift_of(c.lift_of(x, f3), f2);
            if direct != composed {
                out.push(Finding::new(
                    "composition",
                    [l.name.clone(), base.name(f3).into(), base.name(f2).into()],
                    format!("{} vs {}", c.name(composed), c.name(direct)),
                ));
            }
        }
    }
    for (lo, hi) in base.morphisms() {
        for &z in &c.over[lo] {
            if !c.over[hi].iter().any(|&x| c.lift_of(x, lo) == z) {
                out.push(Finding::new("surjectivity", [base.name(hi).to_string(), c.name(z).into()], "lift not hit"));
            }
        }
    }
    let r = c.degree();
    for a in 0..n {
        let d: usize = c.over[a].iter().map(|&x| c.lifts[x].mult as usize).sum();
        if d != r {
            out.push(Finding::new("degree", [base.name(a)], format!("{d} vs {r}")));
        }
    }
    for &s in &base.max_cells {
        for &x in &c.over[s] {
            if c.lifts[x].mult != 1 {
                out.push(Finding::new("maximal-multiplicity", [c.name(x)], "maximal lifts must have multiplicity 1"));
            }
        }
    }
    for (x, l) in c.lifts.iter().enumerate() {
        for s in base.max_over(l.cell) {
            let count = c.over[s].iter().filter(|&&y| c.lift_of(y, l.cell) == x).count();
            if count != l.mult as usize {
                out.push(Finding::new("multiplicity", [l.name.clone(), base.name(s).into()], format!("{count} maximal lifts above, multiplicity {}", l.mult)));
            }
        }
    }
    out
}

/// The cell poset of `L` with open stars and connected components.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LPoset {
    pub names: Vec<String>,
    pub leq: Vec<Vec<bool>>,
    pub stars: Vec<Vec<usize>>,
    pub component: Vec<usize>,
}

pub fn build_l(base: &BaseComplex, c: &CoveringData) -> LPoset {
    let n = c.lifts.len();
    let leq: Vec<Vec<bool>> = (0..n).map(|x| (0..n).map(|y| c.le(base, x, y)).collect()).collect();
    let stars = (0..n).map(|x| (0..n).filter(|&y| leq[x][y]).collect()).collect();
    let mut comp: Vec<usize> = (0..n).collect();
    fn find(p: &mut Vec<usize>, x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            let next = p[x];
            return find(p, next);
        }
        x
    }
    for x in 0..n {
        for y in 0..n {
            if leq[x][y] {
                let (a, b) = (find(&mut comp, x), find(&mut comp, y));
                comp[a.max(b)] = a.min(b);
            }
        }
    }
    let roots: Vec<usize> = (0..n).map(|x| find(&mut comp, x)).collect();
    let ids: BTreeSet<usize> = roots.iter().copied().collect();
    let component = roots.iter().map(|r| ids.iter().position(|i| i == r).unwrap()).collect();
    LPoset { names: c.lifts.iter().map(|l| l.name.clone()).collect(), leq, stars, component }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiSection {
    pub base: BaseComplex,
    pub cover: CoveringData,
    /// `m_x(s)` in `Q_{cell x}^*` for every lift `x` and maximal lift `s` above it.
    pub slopes: BTreeMap<(usize, usize), IVec>,
}

impl MultiSection {
    /// Slopes `m_x(s) = global(s) . S_{cell x}` from global functionals on
    /// the maximal lifts and sections `S_t: Q_t -> N` of an ambient lattice.
    pub fn from_global(base: BaseComplex, cover: CoveringData, sections: &[IMat], global: &BTreeMap<usize, IVec>) -> Result<Self> {
        let mut slopes = BTreeMap::new();
        for x in 0..cover.lifts.len() {
            let t = cover.cell(x);
            for s in cover.star(&base, x) {
                let m = global.get(&s).ok_or_else(|| Error::MissingSlope { lift: cover.name(x).into(), max_lift: cover.name(s).into() })?;
                slopes.insert((x, s), row_times(m, &sections[t], base.qrank[t]));
            }
        }
        Ok(MultiSection { base, cover, slopes })
    }

    pub fn m(&self, x: usize, s: usize) -> &IVec {
        &self.slopes[&(x, s)]
    }

    /// Slope at the face `t` seen from the maximal lift `s`.
    pub fn m_at(&self, t: usize, s: usize) -> &IVec {
        self.m(self.cover.lift_of(s, t), s)
    }

    pub fn degree(&self) -> usize {
        self.cover.degree()
    }

    pub fn star(&self, x: usize) -> Vec<usize> {
        self.cover.star(&self.base, x)
    }

    /// Checks that every required slope is present and well-shaped.
    pub fn check_complete(&self) -> Result<()> {
        for x in 0..self.cover.lifts.len() {
            for s in self.star(x) {
                match self.slopes.get(&(x, s)) {
                    None => return Err(Error::MissingSlope { lift: self.cover.name(x).into(), max_lift: self.cover.name(s).into() }),
                    Some(m) if m.len() != self.base.qrank[self.cover.cell(x)] => {
                        return Err(Error::IndexMismatch(format!("slope of {} on {} has length {}", self.cover.name(x), self.cover.name(s), m.len())));
                    }
                    _ => {}
                }
            }
        }
        for &(x, s) in self.slopes.keys() {
            if x >= self.cover.lifts.len() || s >= self.cover.lifts.len() || !self.cover.le(&self.base, x, s) || !self.base.is_max(self.cover.cell(s)) {
                return Err(Error::IndexMismatch(format!("slope on a non-incident pair ({x}, {s})")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlopeReport {
    pub findings: Vec<Finding>,
    /// `m_{xy} = p^* m_y(s) - m_x(s)` for strict `x <' y`.
    pub corrections: BTreeMap<(usize, usize), IVec>,
}

pub fn validate_slopes(ms: &MultiSection) -> Result<SlopeReport> {
    ms.check_complete()?;
    let (b, c) = (&ms.base, &ms.cover);
    let mut findings = Vec::new();
    let wall_dim = b.max_dim().checked_sub(1);
    for x in 0..c.lifts.len() {
        let t = c.cell(x);
        let star = ms.star(x);
        for (i, &s1) in star.iter().enumerate() {
            for &s2 in &star[i + 1..] {
                let (c1, c2) = (c.cell(s1), c.cell(s2));
                if c1 == c2 {
                    continue;
                }
                let Some(rho) = b.meet(c1, c2) else { continue };
                if Some(b.cells[rho].dim) != wall_dim || !b.le(t, rho) || c.lift_of(s1, rho) != c.lift_of(s2, rho) {
                    continue;
                }
                let d = vsub(ms.m(x, s1), ms.m(x, s2));
                if b.cone(t, rho).iter().any(|r| dot(&d, r) != 0) {
                    findings.push(Finding::new(
                        "continuity",
                        [c.name(x).to_string(), c.name(s1).into(), c.name(s2).into(), b.name(rho).into()],
                        format!("difference {} does not vanish on the wall", fmt_vec(&d)),
                    ));
                }
            }
        }
    }
    let mut corrections = BTreeMap::new();
    for (x, y) in c.pairs(b) {
        let (t1, t2) = (c.cell(x), c.cell(y));
        let mut first: Option<(usize, IVec)> = None;
        for s in ms.star(y) {
            let d = vsub(&b.pull(t1, t2, ms.m(y, s)), ms.m(x, s));
            match &first {
                None => first = Some((s, d)),
                Some((s0, d0)) if *d0 != d => findings.push(Finding::new(
                    "affine",
                    [c.name(x).to_string(), c.name(y).into(), c.name(*s0).into(), c.name(s).into()],
                    format!("{} vs {}", fmt_vec(d0), fmt_vec(&d)),
                )),
                _ => {}
            }
        }
        if let Some((_, d)) = first {
            corrections.insert((x, y), d);
        }
    }
    Ok(SlopeReport { findings, corrections })
}

/// A multi-section over a fan: the base has an apex cell below everything,
/// and slopes come from global slopes in `Q_apex^*` through the sections
/// `Q_t -> Q_apex` chosen as right inverses of the projections.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConeComplexSection {
    pub ms: MultiSection,
    pub apex: usize,
    pub global: BTreeMap<usize, IVec>,
}

impl ConeComplexSection {
    pub fn new(base: BaseComplex, apex: usize, cover: CoveringData, global: BTreeMap<usize, IVec>) -> Result<Self> {
        if (0..base.cells.len()).any(|c| !base.le(apex, c)) {
            return Err(Error::Invalid(format!("{} is not an apex", base.name(apex))));
        }
        let mut slopes = BTreeMap::new();
        for x in 0..cover.lifts.len() {
            let t = cover.cell(x);
            let sec = base.p_section(apex, t);
            for s in cover.star(&base, x) {
                let m = global.get(&s).ok_or_else(|| Error::MissingSlope { lift: cover.name(x).into(), max_lift: cover.name(s).into() })?;
                slopes.insert((x, s), row_times(m, &sec, base.qrank[t]));
            }
        }
        Ok(ConeComplexSection { ms: MultiSection { base, cover, slopes }, apex, global })
    }

    /// Restriction of the linear function of `s` to the cone of `t`: its
    /// values on the rays of `K_{apex -> t}`.
    pub fn restricted(&self, t: usize, s: usize) -> IVec {
        self.ms.base.cone(self.apex, t).iter().map(|r| dot(&self.global[&s], r)).collect()
    }
}

/// The sub-cover of lifts above `x` over the star of its cell.
fn star_cover(ms: &MultiSection, x: usize) -> (BaseComplex, CoveringData, Vec<usize>, Vec<usize>) {
    let (sb, keep) = ms.base.star(ms.cover.cell(x));
    let c = &ms.cover;
    let lifts: Vec<usize> = (0..c.lifts.len()).filter(|&y| c.le(&ms.base, x, y)).collect();
    let pos = |cell: usize| keep.iter().position(|&k| k == cell).unwrap();
    let new_lifts = lifts.iter().map(|&y| Lift { name: c.name(y).into(), cell: pos(c.cell(y)), mult: c.lifts[y].mult }).collect();
    let mut maps = Vec::new();
    for &y in &lifts {
        for &z in &lifts {
            if c.lt(&ms.base, z, y) {
                maps.push((c.name(y).to_string(), c.name(z).to_string()));
            }
        }
    }
    let cover = CoveringData::new(&sb, new_lifts, &maps).expect("star of a valid cover");
    (sb, cover, keep, lifts)
}

/// The cone complex at a lift: one cone per maximal lift above it, global
/// slopes `m_x(s)` in `Q_{cell x}^*`.
pub fn fan_structure_at(ms: &MultiSection, x: usize) -> Result<ConeComplexSection> {
    ms.check_complete()?;
    let (sb, cover, keep, _) = star_cover(ms, x);
    let apex = keep.iter().position(|&k| k == ms.cover.cell(x)).unwrap();
    let global = ms.star(x).iter().map(|&s| (cover.index(ms.cover.name(s)).unwrap(), ms.m(x, s).clone())).collect();
    ConeComplexSection::new(sb, apex, cover, global)
}

/// Localization along a cone lift: the star of `x` over the fan `Sigma_t`,
/// global slopes pulled through the chosen section of `p_{apex -> t}`.
pub fn localize(cs: &ConeComplexSection, x: usize) -> Result<ConeComplexSection> {
    if x >= cs.ms.cover.lifts.len() {
        return Err(Error::NotACone(format!("lift index {x}")));
    }
    let t = cs.ms.cover.cell(x);
    let sec = cs.ms.base.p_section(cs.apex, t);
    let (sb, cover, keep, _) = star_cover(&cs.ms, x);
    let apex = keep.iter().position(|&k| k == t).unwrap();
    let global = cs
        .ms
        .star(x)
        .iter()
        .map(|&s| (cover.index(cs.ms.cover.name(s)).unwrap(), row_times(&cs.global[&s], &sec, cs.ms.base.qrank[t])))
        .collect();
    ConeComplexSection::new(sb, apex, cover, global)
}

/// Separability: distinct lifts of a positive-dimensional cone carry
/// distinct restricted linear functions. Returns the first offending pair.
pub fn is_separable(cs: &ConeComplexSection) -> (bool, Option<(String, String)>) {
    let (b, c) = (&cs.ms.base, &cs.ms.cover);
    for t in 0..b.cells.len() {
        if b.cone(cs.apex, t).is_empty() {
            continue;
        }
        let lifts = &c.over[t];
        for (i, &x) in lifts.iter().enumerate() {
            for &y in &lifts[i + 1..] {
                let fx = cs.restricted(t, cs.ms.star(x)[0]);
                let fy = cs.restricted(t, cs.ms.star(y)[0]);
                if fx == fy {
                    return (false, Some((c.name(x).into(), c.name(y).into())));
                }
            }
        }
    }
    (true, None)
}

/// A covering morphism as a lift-to-lift map `f[x]`.
pub fn check_covering_morphism(f: &[usize], src: &MultiSection, dst: &MultiSection) -> Result<Vec<Finding>> {
    let (sc, dc) = (&src.cover, &dst.cover);
    if f.len() != sc.lifts.len() || f.iter().any(|&y| y >= dc.lifts.len()) {
        return Err(Error::IndexMismatch("cell map does not cover the source lifts".into()));
    }
    let mut out = Vec::new();
    for (x, &y) in f.iter().enumerate() {
        if sc.cell(x) != dc.cell(y) {
            out.push(Finding::new("projection", [sc.name(x), dc.name(y)], "lifts lie over different cells"));
        }
    }
    if !out.is_empty() {
        return Ok(out);
    }
    for (x, y) in sc.pairs(&src.base) {
        if !dc.le(&dst.base, f[x], f[y]) {
            out.push(Finding::new("order", [sc.name(x), sc.name(y)], format!("images {} and {} are not incident", dc.name(f[x]), dc.name(f[y]))));
        }
    }
    for y in 0..dc.lifts.len() {
        let total: u32 = (0..sc.lifts.len()).filter(|&x| f[x] == y).map(|x| sc.lifts[x].mult).sum();
        if total != dc.lifts[y].mult {
            out.push(Finding::new("multiplicity", [dc.name(y)], format!("pushed multiplicity {total}, target {}", dc.lifts[y].mult)));
        }
    }
    for x in 0..sc.lifts.len() {
        for s in src.star(x) {
            let Some(m2) = dst.slopes.get(&(f[x], f[s])) else {
                out.push(Finding::new("slope", [sc.name(x), sc.name(s)], "image pair has no slope"));
                continue;
            };
            if src.m(x, s) != m2 {
                out.push(Finding::new("slope", [sc.name(x), sc.name(s)], format!("{} vs {}", fmt_vec(src.m(x, s)), fmt_vec(m2))));
            }
        }
    }
    Ok(out)
}

/// Slope differences within every star, keyed by lift names: the
/// shift-invariant content of a section.
pub fn slope_differences(ms: &MultiSection) -> BTreeMap<(String, String, String), IVec> {
    let c = &ms.cover;
    let mut out = BTreeMap::new();
    for x in 0..c.lifts.len() {
        let star = ms.star(x);
        for &s1 in &star {
            for &s2 in &star {
                out.insert((c.name(x).into(), c.name(s1).into(), c.name(s2).into()), vsub(ms.m(x, s1), ms.m(x, s2)));
            }
        }
    }
    out
}

/// True when every slope in the table is zero.
pub fn all_zero(ms: &MultiSection) -> bool {
    ms.slopes.values().all(|m| is_zero(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::{build_base_from_polytope, build_fan_base, square};
    use proptest::prelude::*;

    /// Two sheets joined at the first vertex.
    fn ramified(b: &BaseComplex) -> CoveringData {
        let name = |c: usize, s: &str| if c == 0 { format!("{}.r", b.name(c)) } else { format!("{}.{s}", b.name(c)) };
        let mut lifts = vec![Lift { name: name(0, ""), cell: 0, mult: 2 }];
        for c in 1..b.cells.len() {
            for s in ["a", "b"] {
                lifts.push(Lift { name: name(c, s), cell: c, mult: 1 });
            }
        }
        let mut maps = Vec::new();
        for (lo, hi) in b.morphisms() {
            for s in ["a", "b"] {
                maps.push((name(hi, s), name(lo, s)));
            }
        }
        maps.sort();
        maps.dedup();
        CoveringData::new(b, lifts, &maps).unwrap()
    }

    /// Integral slope of the linear function taking the values `v` on the
    /// two rays `r`, by Cramer's rule.
    fn solve2(r: [&[i64]; 2], v: [i64; 2]) -> IVec {
        let d = r[0][0] * r[1][1] - r[0][1] * r[1][0];
        let x = v[0] * r[1][1] - v[1] * r[0][1];
        let y = r[0][0] * v[1] - r[1][0] * v[0];
        assert!(x % d == 0 && y % d == 0);
        vec![x / d, y / d]
    }

    /// A piecewise-linear function on the square face fan, one per sheet,
    /// given by its values on the four rays.
    fn pl_section(values: &[[i64; 4]], sheets: &[&str]) -> ConeComplexSection {
        let fl = square();
        let b = build_fan_base(&fl).unwrap();
        let cover = CoveringData::sheets(&b, sheets);
        let mut global = BTreeMap::new();
        for (k, s) in sheets.iter().enumerate() {
            for &sig in &b.max_cells {
                let vs = &b.vertex_sets.as_ref().unwrap()[sig];
                let m = solve2([&fl.vertices[vs[0]], &fl.vertices[vs[1]]], [values[k][vs[0]], values[k][vs[1]]]);
                global.insert(cover.index(&format!("{}.{s}", b.name(sig))).unwrap(), m);
            }
        }
        ConeComplexSection::new(b, 0, cover, global).unwrap()
    }

    #[test]
    fn sheets_and_ramified_covers() {
        let b = build_base_from_polytope(&square()).unwrap();
        let c = CoveringData::sheets(&b, &["a", "b"]);
        assert!(validate_covering(&b, &c).is_empty());
        assert_eq!(c.degree(), 2);
        assert_eq!(build_l(&b, &c).component.iter().max(), Some(&1));
        let r = ramified(&b);
        assert!(validate_covering(&b, &r).is_empty());
        assert_eq!(r.degree(), 2);
        assert!(build_l(&b, &r).component.iter().all(|&k| k == 0));
        assert_eq!(r.star(&b, r.index("v0.r").unwrap()).len(), 4);
    }

    #[test]
    fn covering_defects_are_localized() {
        let b = build_base_from_polytope(&square()).unwrap();
        let mut r = ramified(&b);
        let i = r.index("v0.r").unwrap();
        r.lifts[i].mult = 1;
        let f = validate_covering(&b, &r);
        assert!(f.iter().any(|x| x.check == "multiplicity" && x.at[0] == "v0.r"));
        assert!(f.iter().any(|x| x.check == "degree"));
        // Drop one sheet over an edge: surjectivity and degree fail.
        let c = CoveringData::sheets(&b, &["a", "b"]);
        let e = b.max_cells[0];
        let keep: Vec<Lift> = c.lifts.iter().filter(|l| l.name != format!("{}.b", b.name(e))).cloned().collect();
        let maps: Vec<(String, String)> = c
            .down
            .iter()
            .filter(|((x, cell), y)| c.cell(*x) != *cell && keep.iter().any(|l| l.name == c.name(*x)) && **y != *x)
            .map(|((x, _), y)| (c.name(*x).to_string(), c.name(*y).to_string()))
            .collect();
        let c2 = CoveringData::new(&b, keep, &maps).unwrap();
        let f = validate_covering(&b, &c2);
        assert!(f.iter().any(|x| x.check == "surjectivity"));
        assert!(f.iter().any(|x| x.check == "degree"));
    }

    #[test]
    fn missing_slope_is_an_error() {
        let cs = pl_section(&[[0, 0, 0, 0]], &["a"]);
        let mut ms = cs.ms.clone();
        let key = *ms.slopes.keys().next().unwrap();
        ms.slopes.remove(&key);
        assert!(matches!(validate_slopes(&ms), Err(Error::MissingSlope { .. })));
    }

    #[test]
    fn discontinuous_slopes_are_reported() {
        let cs = pl_section(&[[2, 0, 2, 4]], &["a"]);
        let mut ms = cs.ms.clone();
        assert!(validate_slopes(&ms).unwrap().findings.is_empty());
        // Perturb the slope of one edge cone at the apex.
        let s = ms.cover.index(&format!("{}.a", ms.base.name(ms.base.max_cells[0]))).unwrap();
        let x = ms.cover.lift_of(s, 0);
        ms.slopes.get_mut(&(x, s)).unwrap()[0] += 1;
        let f = validate_slopes(&ms).unwrap().findings;
        assert!(f.iter().any(|x| x.check == "continuity"));
    }

    #[test]
    fn fan_structure_and_localization() {
        let cs = pl_section(&[[0, 2, 2, 0], [2, 0, 0, 2]], &["a", "b"]);
        let apex_lift = cs.ms.cover.index("o.a").unwrap();
        let fs = fan_structure_at(&cs.ms, apex_lift).unwrap();
        assert_eq!(fs.ms.cover.lifts.len(), 9);
        assert_eq!(fs.global.len(), 4);
        let v = cs.ms.cover.index("v0.a").unwrap();
        let loc = localize(&cs, v).unwrap();
        assert_eq!(loc.ms.base.cells.len(), 3);
        assert_eq!(loc.ms.base.qrank[loc.apex], 1);
        // Localization then restriction agrees with restriction.
        for (&s, g) in &loc.global {
            let orig = cs.ms.cover.index(loc.ms.cover.name(s)).unwrap();
            assert_eq!(g.len(), 1);
            assert_eq!(g, cs.ms.m(v, orig));
        }
        assert!(matches!(localize(&cs, 99), Err(Error::NotACone(_))));
    }

    #[test]
    fn separability() {
        let cs = pl_section(&[[0, 2, 2, 0], [2, 0, 0, 2]], &["a", "b"]);
        assert_eq!(is_separable(&cs), (true, None));
        let same = pl_section(&[[0, 2, 2, 0], [0, 2, 4, 0]], &["a", "b"]);
        let (ok, pair) = is_separable(&same);
        assert!(!ok);
        assert_eq!(pair, Some(("v0.a".to_string(), "v0.b".to_string())));
    }

    #[test]
    fn covering_morphisms() {
        let cs = pl_section(&[[0, 2, 2, 0], [2, 0, 0, 2]], &["a", "b"]);
        let c = &cs.ms.cover;
        let id: Vec<usize> = (0..c.lifts.len()).collect();
        assert!(check_covering_morphism(&id, &cs.ms, &cs.ms).unwrap().is_empty());
        let swap: Vec<usize> = (0..c.lifts.len())
            .map(|x| {
                let n = c.name(x);
                let t = if let Some(p) = n.strip_suffix(".a") { format!("{p}.b") } else { format!("{}.a", n.strip_suffix(".b").unwrap()) };
                c.index(&t).unwrap()
            })
            .collect();
        let f = check_covering_morphism(&swap, &cs.ms, &cs.ms).unwrap();
        assert!(!f.is_empty() && f.iter().all(|x| x.check == "slope"));
        let fold = vec![0; c.lifts.len()];
        assert!(check_covering_morphism(&fold, &cs.ms, &cs.ms).unwrap().iter().any(|x| x.check == "projection"));
    }

    proptest! {
        #[test]
        fn pl_functions_give_valid_sections(v in proptest::array::uniform4(-3i64..4), w in proptest::array::uniform4(-3i64..4), pa in 0i64..2, pb in 0i64..2) {
            let fix = |a: [i64; 4], p: i64| a.map(|x| 2 * x + p);
            let cs = pl_section(&[fix(v, pa), fix(w, pb)], &["a", "b"]);
            prop_assert!(validate_covering(&cs.ms.base, &cs.ms.cover).is_empty());
            let rep = validate_slopes(&cs.ms).unwrap();
            prop_assert!(rep.findings.is_empty());
            // Corrections are additive along chains.
            let c = &cs.ms.cover;
            for (x, y, z) in c.flags3(&cs.ms.base) {
                let b = &cs.ms.base;
                let lhs = &rep.corrections[&(x, z)];
                let rhs = crate::lattice::vadd(&b.pull(c.cell(x), c.cell(y), &rep.corrections[&(y, z)]), &rep.corrections[&(x, y)]);
                prop_assert_eq!(lhs, &rhs);
            }
        }
    }
}
