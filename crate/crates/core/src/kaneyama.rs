//! Kaneyama data: the coefficient matrices `g(tau')` between charts over a
//! lift and `h(g)` along morphisms of the base, their validation, the
//! monomial transition matrices they define, and the local-system twist.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::cover::MultiSection;
use crate::error::{Error, Result};
use crate::lattice::{dot, vsub, IVec};
use crate::monomial::{det_q, MonomialMatrix};
use crate::mult::{fmt_q, Q};
use crate::report::{fmt_vec, Finding, Report};

/// `blocks[(tau', s1, s2)][(a, b)]` for maximal lifts `a` over `s1` and `b`
/// over `s2` that both contain the lift `tau'`. A missing block is the
/// identity when `s1 == s2`, the unit when `tau'` has multiplicity one, and
/// zero otherwise. Missing entries of a present block are zero.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct KaneyamaG {
    pub blocks: BTreeMap<(usize, usize, usize), BTreeMap<(usize, usize), Q>>,
}

/// `blocks[(t1, t2, s)][(a, b)]` for a strict morphism `t1 -> t2` and
/// maximal lifts `a`, `b` over `s`. A missing block is the identity; missing
/// entries of a present block are zero.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct KaneyamaH {
    pub blocks: BTreeMap<(usize, usize, usize), BTreeMap<(usize, usize), Q>>,
}

impl KaneyamaG {
    pub fn set(&mut self, ms: &MultiSection, tau: usize, a: usize, b: usize, v: Q) {
        let c = &ms.cover;
        self.blocks.entry((tau, c.cell(a), c.cell(b))).or_default().insert((a, b), v);
    }

    /// `g_{a b}(tau')`.
    pub fn get(&self, ms: &MultiSection, tau: usize, a: usize, b: usize) -> Q {
        let c = &ms.cover;
        let (s1, s2) = (c.cell(a), c.cell(b));
        match self.blocks.get(&(tau, s1, s2)) {
            Some(block) => block.get(&(a, b)).cloned().unwrap_or_else(Q::zero),
            None if s1 == s2 => if a == b { Q::one() } else { Q::zero() },
            None if c.lifts[tau].mult == 1 => Q::one(),
            None => Q::zero(),
        }
    }

    /// Coefficient of the block sum `G(t)`: nonzero only when `a` and `b`
    /// share their lift of the cell `t`.
    pub fn cell_coef(&self, ms: &MultiSection, t: usize, a: usize, b: usize) -> Q {
        let c = &ms.cover;
        let (x, y) = (c.lift_of(a, t), c.lift_of(b, t));
        if x == y {
            self.get(ms, x, a, b)
        } else {
            Q::zero()
        }
    }

    pub fn check_index(&self, ms: &MultiSection) -> Result<()> {
        let c = &ms.cover;
        for (&(tau, s1, s2), block) in &self.blocks {
            for &(a, b) in block.keys() {
                let ok = tau < c.lifts.len()
                    && a < c.lifts.len()
                    && b < c.lifts.len()
                    && (c.cell(a), c.cell(b)) == (s1, s2)
                    && ms.base.is_max(s1)
                    && ms.base.is_max(s2)
                    && c.le(&ms.base, tau, a)
                    && c.le(&ms.base, tau, b);
                if !ok {
                    return Err(Error::IndexMismatch(format!("g entry ({tau}, {a}, {b}) is not indexed by maximal lifts containing the lift")));
                }
            }
        }
        Ok(())
    }
}

impl KaneyamaH {
    pub fn set(&mut self, ms: &MultiSection, t1: usize, t2: usize, a: usize, b: usize, v: Q) {
        self.blocks.entry((t1, t2, ms.cover.cell(a))).or_default().insert((a, b), v);
    }

    /// Declares the block `(t1, t2, s)` present (all entries zero).
    pub fn touch(&mut self, t1: usize, t2: usize, s: usize) {
        self.blocks.entry((t1, t2, s)).or_default();
    }

    /// `h_{a b}(t1 -> t2)`; identity morphisms give the identity.
    pub fn get(&self, ms: &MultiSection, t1: usize, t2: usize, a: usize, b: usize) -> Q {
        let s = ms.cover.cell(a);
        if ms.cover.cell(b) != s {
            return Q::zero();
        }
        match self.blocks.get(&(t1, t2, s)) {
            Some(block) if t1 != t2 => block.get(&(a, b)).cloned().unwrap_or_else(Q::zero),
            _ => if a == b { Q::one() } else { Q::zero() },
        }
    }

    pub fn check_index(&self, ms: &MultiSection) -> Result<()> {
        let (b, c) = (&ms.base, &ms.cover);
        for (&(t1, t2, s), block) in &self.blocks {
            if t1 >= b.cells.len() || t2 >= b.cells.len() || s >= b.cells.len() || !b.lt(t1, t2) || !b.le(t2, s) || !b.is_max(s) {
                return Err(Error::IndexMismatch(format!("h block ({t1}, {t2}, {s}) is not a morphism into a maximal cell")));
            }
            for &(x, y) in block.keys() {
                if x >= c.lifts.len() || y >= c.lifts.len() || c.cell(x) != s || c.cell(y) != s {
                    return Err(Error::IndexMismatch(format!("h entry ({x}, {y}) is not indexed by lifts of {}", b.name(s))));
                }
            }
        }
        Ok(())
    }
}

/// `m_t(a)`: the slope at the lift of `t` under the maximal lift `a`.
fn slope(ms: &MultiSection, t: usize, a: usize) -> &IVec {
    ms.m_at(t, a)
}

fn in_dual(d: &[i64], rays: &[IVec]) -> bool {
    rays.iter().all(|r| dot(d, r) >= 0)
}

/// The chart cone `K_{t -> s1 cap s2}`.
fn chart(ms: &MultiSection, t: usize, s1: usize, s2: usize) -> Result<Vec<IVec>> {
    let b = &ms.base;
    let m = b.meet(s1, s2).filter(|&m| b.le(t, m)).ok_or_else(|| Error::IndexMismatch(format!("{} and {} have no common face over {}", b.name(s1), b.name(s2), b.name(t))))?;
    Ok(b.cone(t, m).to_vec())
}

/// Maximal lifts containing `x`, grouped by maximal cell.
fn charts_over(ms: &MultiSection, x: usize) -> BTreeMap<usize, Vec<usize>> {
    let mut out: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for s in ms.star(x) {
        out.entry(ms.cover.cell(s)).or_default().push(s);
    }
    out
}

pub fn validate_g(ms: &MultiSection, g: &KaneyamaG) -> Result<Report> {
    ms.check_complete()?;
    g.check_index(ms)?;
    let c = &ms.cover;
    let mut rep = Report::default();
    for x in 0..c.lifts.len() {
        let t = c.cell(x);
        let groups = charts_over(ms, x);
        for (&s1, l1) in &groups {
            for (&s2, l2) in &groups {
                let rays = chart(ms, t, s1, s2)?;
                for &a in l1 {
                    for &b in l2 {
                        let v = g.get(ms, x, a, b);
                        if s1 == s2 {
                            let id = if a == b { Q::one() } else { Q::zero() };
                            if v != id {
                                rep.findings.push(Finding::new("G1", [c.name(x), c.name(a), c.name(b)], format!("{} on a diagonal chart", fmt_q(&v))));
                            }
                            continue;
                        }
                        let d = vsub(ms.m(x, a), ms.m(x, b));
                        if !v.is_zero() && !in_dual(&d, &rays) {
                            rep.findings.push(Finding::new("G2", [c.name(x), c.name(a), c.name(b)], format!("coefficient {} on exponent {} outside the dual cone", fmt_q(&v), fmt_vec(&d))));
                        }
                    }
                }
                let m: Vec<Vec<Q>> = l1.iter().map(|&a| l2.iter().map(|&b| g.get(ms, x, a, b)).collect()).collect();
                if det_q(m).is_zero() {
                    rep.findings.push(Finding::new("invertible", [c.name(x).to_string(), ms.base.name(s1).into(), ms.base.name(s2).into()], "singular coefficient matrix"));
                }
            }
        }
        for (&s1, l1) in &groups {
            for (&s2, l2) in &groups {
                for (&s3, l3) in &groups {
                    if s1 == s2 || s2 == s3 {
                        continue;
                    }
                    for &a in l1 {
                        for &cc in l3 {
                            let lhs: Q = l2.iter().map(|&b| g.get(ms, x, a, b) * g.get(ms, x, b, cc)).sum();
                            let rhs = g.get(ms, x, a, cc);
                            if lhs != rhs {
                                rep.findings.push(Finding::new(
                                    "G3",
                                    [c.name(x).to_string(), c.name(a).into(), ms.base.name(s2).into(), c.name(cc).into()],
                                    format!("{} vs {}", fmt_q(&lhs), fmt_q(&rhs)),
                                ));
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(rep)
}

/// `m_{t1}(a) - m_{t1}(b)` lies in `K^vee_{t1 -> k} cap p^* Q_{t2}^*`.
fn qualifies(ms: &MultiSection, t1: usize, t2: usize, rays: &[IVec], a: usize, b: usize) -> bool {
    let d = vsub(slope(ms, t1, a), slope(ms, t1, b));
    in_dual(&d, rays) && ms.base.descend(t1, t2, &d).is_some()
}

pub fn validate_h(ms: &MultiSection, g: &KaneyamaG, h: &KaneyamaH) -> Result<Report> {
    ms.check_complete()?;
    g.check_index(ms)?;
    h.check_index(ms)?;
    let (base, c) = (&ms.base, &ms.cover);
    let mut rep = Report::default();
    let morph = |t1: usize, t2: usize| format!("{}->{}", base.name(t1), base.name(t2));
    for (t1, t2) in base.morphisms() {
        for s in base.max_over(t2) {
            let frame = c.frame(s);
            let rays = base.cone(t1, s);
            for &a in frame {
                for &b in frame {
                    let v = h.get(ms, t1, t2, a, b);
                    if v.is_zero() {
                        continue;
                    }
                    let common = c.lift_of(a, t1) == c.lift_of(b, t1);
                    if !common || !qualifies(ms, t1, t2, rays, a, b) {
                        rep.findings.push(Finding::new("H1", [morph(t1, t2), c.name(a).into(), c.name(b).into()], format!("coefficient {} not admissible", fmt_q(&v))));
                    }
                }
            }
            let m: Vec<Vec<Q>> = frame.iter().map(|&a| frame.iter().map(|&b| h.get(ms, t1, t2, a, b)).collect()).collect();
            if det_q(m).is_zero() {
                rep.findings.push(Finding::new("invertible", [morph(t1, t2), base.name(s).into()], "singular coefficient matrix"));
            }
        }
        let maxes = base.max_over(t2);
        for &s1 in &maxes {
            for &s2 in &maxes {
                let rays = chart(ms, t1, s1, s2)?;
                for &a in c.frame(s1) {
                    for &cc in c.frame(s2) {
                        let lhs: Q = c.frame(s1).iter().map(|&b| h.get(ms, t1, t2, a, b) * g.cell_coef(ms, t1, b, cc)).sum();
                        let rhs: Q = c.frame(s2).iter().map(|&b| g.cell_coef(ms, t2, a, b) * h.get(ms, t1, t2, b, cc)).sum();
                        if lhs == rhs {
                            continue;
                        }
                        let f = Finding::new("H2", [morph(t1, t2), c.name(a).into(), c.name(cc).into()], format!("{} vs {}", fmt_q(&lhs), fmt_q(&rhs)));
                        if qualifies(ms, t1, t2, &rays, a, cc) {
                            rep.findings.push(f);
                        } else {
                            rep.warnings.push(f);
                        }
                    }
                }
            }
        }
    }
    for (t1, t2, t3) in base.chains3() {
        for s in base.max_over(t3) {
            let frame = c.frame(s);
            let rays = base.cone(t1, s);
            for &a in frame {
                for &cc in frame {
                    if !qualifies(ms, t1, t3, rays, a, cc) {
                        continue;
                    }
                    let lhs: Q = frame.iter().map(|&b| h.get(ms, t2, t3, a, b) * h.get(ms, t1, t2, b, cc)).sum();
                    let rhs = h.get(ms, t1, t3, a, cc);
                    if lhs != rhs {
                        rep.findings.push(Finding::new(
                            "H3",
                            [base.name(t1).to_string(), base.name(t2).into(), base.name(t3).into(), c.name(a).into(), c.name(cc).into()],
                            format!("{} vs {}", fmt_q(&lhs), fmt_q(&rhs)),
                        ));
                    }
                }
            }
        }
    }
    Ok(rep)
}

/// `G_{s1 s2}(t)` for every ordered pair of maximal cells over `t`: rows
/// and columns are the frames, exponents live in `Q_t^*`, and the chart is
/// `K_{t -> s1 cap s2}`.
pub fn build_g_matrices(ms: &MultiSection, g: &KaneyamaG, t: usize) -> Result<BTreeMap<(usize, usize), MonomialMatrix>> {
    let (base, c) = (&ms.base, &ms.cover);
    let mut out = BTreeMap::new();
    let maxes = base.max_over(t);
    for &s1 in &maxes {
        for &s2 in &maxes {
            let names = |s: usize| c.frame(s).iter().map(|&x| c.name(x).to_string()).collect::<Vec<_>>();
            let mut m = MonomialMatrix::zero(names(s1), names(s2), base.qrank[t]).with_chart(chart(ms, t, s1, s2)?);
            for (i, &a) in c.frame(s1).iter().enumerate() {
                for (j, &b) in c.frame(s2).iter().enumerate() {
                    let v = g.cell_coef(ms, t, a, b);
                    if !v.is_zero() {
                        m.set(i, j, v, vsub(slope(ms, t, a), slope(ms, t, b)));
                    }
                }
            }
            out.insert((s1, s2), m);
        }
    }
    Ok(out)
}

/// Checks `G_{12} G_{23} = G_{13}` on every triple of charts over every
/// cell.
pub fn check_g_cocycle(ms: &MultiSection, g: &KaneyamaG) -> Result<Vec<Finding>> {
    let base = &ms.base;
    let mut out = Vec::new();
    for t in 0..base.cells.len() {
        let gm = build_g_matrices(ms, g, t)?;
        let maxes = base.max_over(t);
        for &s1 in &maxes {
            for &s2 in &maxes {
                for &s3 in &maxes {
                    let at = [base.name(t), base.name(s1), base.name(s2), base.name(s3)];
                    match gm[&(s1, s2)].mul(&gm[&(s2, s3)]) {
                        Ok(p) if p.same_entries(&gm[&(s1, s3)]) => {}
                        Ok(_) => out.push(Finding::new("G-cocycle", at, "product differs")),
                        Err(e) => out.push(Finding::new("G-cocycle", at, e.to_string())),
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Weights of the torus action on the frame over a lift: `a -> m_t(a)`.
pub fn equivariant_weights(ms: &MultiSection, x: usize) -> BTreeMap<String, IVec> {
    ms.star(x).into_iter().map(|a| (ms.cover.name(a).to_string(), ms.m(x, a).clone())).collect()
}

/// Chains `x < y < z` where a local-system table fails
/// `f(x, y) f(y, z) = f(x, z)`.
pub fn local_system_violations(ms: &MultiSection, f: &BTreeMap<(usize, usize), Q>) -> Vec<Finding> {
    let c = &ms.cover;
    let get = |x: usize, y: usize| f.get(&(x, y)).cloned().unwrap_or_else(Q::one);
    c.flags3(&ms.base)
        .into_iter()
        .filter(|&(x, y, z)| get(x, y) * get(y, z) != get(x, z))
        .map(|(x, y, z)| Finding::new("local-system", [c.name(x), c.name(y), c.name(z)], format!("{} * {} vs {}", fmt_q(&get(x, y)), fmt_q(&get(y, z)), fmt_q(&get(x, z)))))
        .collect()
}

/// Twist of `h` by a table `f[(x, y)]` on strict lift pairs (missing pairs
/// are 1): `h_{ab}(t1 -> t2) f(a's lift of t1, a's lift of t2)`.
pub fn twist_by_local_system(ms: &MultiSection, h: &KaneyamaH, f: &BTreeMap<(usize, usize), Q>) -> Result<KaneyamaH> {
    let (base, c) = (&ms.base, &ms.cover);
    let get = |x: usize, y: usize| f.get(&(x, y)).cloned().unwrap_or_else(Q::one);
    for (&(x, y), v) in f {
        if x >= c.lifts.len() || y >= c.lifts.len() || !c.lt(base, x, y) || v.is_zero() {
            return Err(Error::IndexMismatch(format!("local-system entry on ({x}, {y})")));
        }
    }
    if let Some(f) = local_system_violations(ms, f).first() {
        return Err(Error::NotACocycle(f.at.join(" < ")));
    }
    let mut out = h.clone();
    for (t1, t2) in base.morphisms() {
        for s in base.max_over(t2) {
            let frame = c.frame(s);
            let factor = |a: usize| get(c.lift_of(a, t1), c.lift_of(a, t2));
            if h.blocks.get(&(t1, t2, s)).is_none() && frame.iter().all(|&a| factor(a).is_one()) {
                continue;
            }
            let mut block = BTreeMap::new();
            for &a in frame {
                for &b in frame {
                    let v = h.get(ms, t1, t2, a, b);
                    if !v.is_zero() {
                        block.insert((a, b), v * factor(a));
                    }
                }
            }
            out.blocks.insert((t1, t2, s), block);
        }
    }
    Ok(out)
}
