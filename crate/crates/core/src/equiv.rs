//! Push-forward of brane data along covering morphisms, the order between
//! branes, bounded search for combinatorial equivalence, and the harness
//! checking that gluing and extraction are mutually inverse.

use std::collections::BTreeMap;

use itertools::Itertools;
use num_traits::Zero;
use serde::Serialize;

use crate::cover::{check_covering_morphism, CoveringData, Lift, MultiSection};
use crate::error::{Error, Result};
use crate::extract::associated_multisection;
use crate::glue::{assemble_sheaf, find_gauge, BraneData, SheafDescriptor};
use crate::kaneyama::{KaneyamaG, KaneyamaH};
use crate::mult::{fmt_q, Q};
use crate::obstruction::{obstruction_cochain, solve_coboundary, CechCochain};

/// A multi-section with its brane data.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Brane {
    pub ms: MultiSection,
    pub d: BraneData,
}

impl Brane {
    pub fn glue(&self) -> Result<SheafDescriptor> {
        assemble_sheaf(&self.ms, &self.d)
    }

    /// The associated brane of the glued sheaf.
    pub fn extracted(&self) -> Result<Brane> {
        let (ms, d) = associated_multisection(&self.glue()?)?;
        Ok(Brane { ms, d })
    }
}

/// Limits for the morphism searches.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchBudget {
    /// Frame permutations tried per maximal cell.
    pub per_cell: usize,
    /// Candidate maps visited per search.
    pub nodes: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget { per_cell: 6, nodes: 200_000 }
    }
}

/// Solves for `k` on `ms`, falling back to `k = 1` when obstructed.
pub fn solve_k(ms: &MultiSection, sbar: &crate::base::ClosedGluing) -> Result<CechCochain> {
    let c = obstruction_cochain(ms, sbar)?;
    Ok(solve_coboundary(ms, &c)?.unwrap_or_else(|| CechCochain::one(1)))
}

/// `f_* D` for a covering morphism `f: src -> dst` given as a lift map.
pub fn pushforward_data(f: &[usize], src: &Brane, dst: &MultiSection) -> Result<BraneData> {
    let (sc, dc, base) = (&src.ms.cover, &dst.cover, &dst.base);
    let mut inv: BTreeMap<usize, usize> = BTreeMap::new();
    for s in base.max_cells.iter().copied() {
        for &a in dc.frame(s) {
            let pre: Vec<usize> = sc.frame(s).iter().copied().filter(|&x| f[x] == a).collect();
            if pre.len() != 1 {
                return Err(Error::NoAdmissiblePreimage(format!("maximal lift {} has {} preimages", dc.name(a), pre.len())));
            }
            inv.insert(a, pre[0]);
        }
    }
    let mut g = KaneyamaG::default();
    for y in 0..dc.lifts.len() {
        let t = dc.cell(y);
        let xs: Vec<usize> = (0..sc.lifts.len()).filter(|&x| f[x] == y).sorted_by(|&p, &q| sc.name(p).cmp(sc.name(q))).collect();
        for s1 in base.max_over(t) {
            for s2 in base.max_over(t) {
                let over = |s: usize| -> Vec<usize> { dc.frame(s).iter().copied().filter(|&a| dc.le(base, y, a)).collect() };
                let (r1, r2) = (over(s1), over(s2));
                if r1.is_empty() || r2.is_empty() {
                    continue;
                }
                g.blocks.entry((y, s1, s2)).or_default();
                for &aa in &r1 {
                    for &bb in &r2 {
                        let (a, b) = (inv[&aa], inv[&bb]);
                        let cands: Vec<usize> = xs.iter().copied().filter(|&x| sc.le(&src.ms.base, x, a) && sc.le(&src.ms.base, x, b)).collect();
                        if cands.is_empty() {
                            continue;
                        }
                        let Some(&x) = cands.iter().find(|&&x| src.ms.m(x, a) == dst.m(y, aa) && src.ms.m(x, b) == dst.m(y, bb)) else {
                            return Err(Error::NoAdmissiblePreimage(format!("no lift over {} below {} and {} with matching slopes", dc.name(y), sc.name(a), sc.name(b))));
                        };
                        let v = src.d.g.get(&src.ms, x, a, b);
                        if !v.is_zero() {
                            g.set(dst, y, aa, bb, v);
                        }
                    }
                }
            }
        }
    }
    let mut h = KaneyamaH::default();
    for (t1, t2) in base.morphisms() {
        for s in base.max_over(t2) {
            h.touch(t1, t2, s);
            for &aa in dc.frame(s) {
                for &bb in dc.frame(s) {
                    let v = src.d.h.get(&src.ms, t1, t2, inv[&aa], inv[&bb]);
                    if !v.is_zero() {
                        h.set(dst, t1, t2, aa, bb, v);
                    }
                }
            }
        }
    }
    let k = solve_k(dst, &src.d.sbar)?;
    Ok(BraneData { g, h, k, sbar: src.d.sbar.clone() })
}

/// Lift maps `src -> dst` over the identity of the base that respect
/// order and slopes, in lexicographic order of the maximal assignments.
/// `visit` returns true to stop.
pub fn search_morphisms(src: &MultiSection, dst: &MultiSection, budget: SearchBudget, mut visit: impl FnMut(&[usize]) -> Result<bool>) -> Result<Option<Vec<usize>>> {
    let (sc, dc, base) = (&src.cover, &dst.cover, &src.base);
    let mut perms: Vec<Vec<Vec<usize>>> = Vec::new();
    for &s in &base.max_cells {
        let (a, b) = (sc.frame(s), dc.frame(s));
        if a.len() != b.len() {
            return Ok(None);
        }
        let all: Vec<Vec<usize>> = b.iter().copied().permutations(b.len()).collect();
        if all.len() > budget.per_cell {
            return Err(Error::SearchBudgetExceeded { bound: budget.per_cell });
        }
        perms.push(all);
    }
    let mut f = vec![usize::MAX; sc.lifts.len()];
    let mut nodes = 0usize;
    fn rec(
        i: usize,
        src: &MultiSection,
        dst: &MultiSection,
        perms: &[Vec<Vec<usize>>],
        f: &mut Vec<usize>,
        nodes: &mut usize,
        budget: SearchBudget,
        visit: &mut dyn FnMut(&[usize]) -> Result<bool>,
    ) -> Result<bool> {
        let (sc, dc, base) = (&src.cover, &dst.cover, &src.base);
        if i == perms.len() {
            return visit(f);
        }
        let s = base.max_cells[i];
        for p in &perms[i] {
            *nodes += 1;
            if *nodes > budget.nodes {
                return Err(Error::SearchBudgetExceeded { bound: budget.nodes });
            }
            let saved = f.clone();
            let mut ok = true;
            'assign: for (&a, &b) in sc.frame(s).iter().zip(p) {
                for x in 0..sc.lifts.len() {
                    if !sc.le(base, x, a) {
                        continue;
                    }
                    let y = dc.lift_of(b, sc.cell(x));
                    if (f[x] != usize::MAX && f[x] != y) || src.m(x, a) != dst.m(y, b) {
                        ok = false;
                        break 'assign;
                    }
                    f[x] = y;
                }
            }
            if ok && rec(i + 1, src, dst, perms, f, nodes, budget, visit)? {
                return Ok(true);
            }
            *f = saved;
        }
        Ok(false)
    }
    let found = rec(0, src, dst, &perms, &mut f, &mut nodes, budget, &mut visit)?;
    Ok(found.then_some(f))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BraneOrderWitness {
    /// Lift map from the larger brane to the smaller one.
    pub f: Vec<usize>,
    pub pushed: BraneData,
    /// Frame rescaling taking the pushed descriptor to the smaller brane's.
    pub gauge: BTreeMap<String, Q>,
}

#[derive(Clone, Debug, Serialize)]
pub struct WitnessView {
    pub map: BTreeMap<String, String>,
    pub gauge: BTreeMap<String, String>,
}

impl BraneOrderWitness {
    pub fn view(&self, src: &MultiSection, dst: &MultiSection) -> WitnessView {
        WitnessView {
            map: self.f.iter().enumerate().map(|(x, &y)| (src.cover.name(x).to_string(), dst.cover.name(y).to_string())).collect(),
            gauge: self.gauge.iter().map(|(n, v)| (n.clone(), fmt_q(v))).collect(),
        }
    }
}

/// `b1 <= b2`: a covering morphism `f: b2 -> b1` with `f_* D2 ~ D1`, the
/// latter decided by gauge equivalence of the glued descriptors. Both
/// branes must glue, so `k` solves the obstruction equation on each side.
pub fn check_leq(b1: &Brane, b2: &Brane, budget: SearchBudget) -> Result<Option<BraneOrderWitness>> {
    if b1.ms.base != b2.ms.base || b1.ms.degree() != b2.ms.degree() {
        return Err(Error::Invalid("branes live over different bases or have different degrees".into()));
    }
    let Ok(sd1) = b1.glue() else { return Ok(None) };
    if b2.glue().is_err() {
        return Ok(None);
    }
    let mut witness = None;
    search_morphisms(&b2.ms, &b1.ms, budget, |f| {
        if !check_covering_morphism(f, &b2.ms, &b1.ms)?.is_empty() {
            return Ok(false);
        }
        let Ok(pushed) = pushforward_data(f, b2, &b1.ms) else { return Ok(false) };
        let Ok(sdp) = assemble_sheaf(&b1.ms, &pushed) else { return Ok(false) };
        match find_gauge(&sdp, &sd1) {
            Some(gauge) => {
                witness = Some(BraneOrderWitness { f: f.to_vec(), pushed, gauge });
                Ok(true)
            }
            None => Ok(false),
        }
    })?;
    Ok(witness)
}

/// Common refinements of two covers: for each slope-compatible matching of
/// maximal lifts, maximal lifts share a lift of a cell iff they share it on
/// both sides. Data is carried over from `b2`.
pub fn refinements(b1: &Brane, b2: &Brane, budget: SearchBudget) -> Result<Vec<Brane>> {
    let (c1, c2, base) = (&b1.ms.cover, &b2.ms.cover, &b1.ms.base);
    let mut out = Vec::new();
    let mut perms: Vec<Vec<Vec<usize>>> = Vec::new();
    for &s in &base.max_cells {
        if c1.frame(s).len() != c2.frame(s).len() {
            return Ok(out);
        }
        let all: Vec<Vec<usize>> = c1.frame(s).iter().copied().permutations(c1.frame(s).len()).collect();
        if all.len() > budget.per_cell {
            return Err(Error::SearchBudgetExceeded { bound: budget.per_cell });
        }
        perms.push(all);
    }
    let mut nodes = 0usize;
    for choice in perms.iter().map(|p| p.iter()).multi_cartesian_product() {
        nodes += 1;
        if nodes > budget.nodes {
            return Err(Error::SearchBudgetExceeded { bound: budget.nodes });
        }
        // phi: maximal lift of b2 -> maximal lift of b1.
        let mut phi = BTreeMap::new();
        for (i, &s) in base.max_cells.iter().enumerate() {
            for (&a, &b) in c2.frame(s).iter().zip(choice[i]) {
                phi.insert(a, b);
            }
        }
        let compatible = (0..c2.lifts.len()).all(|x| {
            let t = c2.cell(x);
            b2.ms.star(x).iter().all(|&a| b2.ms.m(x, a) == b1.ms.m_at(t, phi[&a]))
        });
        if !compatible {
            continue;
        }
        if let Some(r) = refine(b2, b1, &phi)? {
            if !out.contains(&r) {
                out.push(r);
            }
        }
    }
    Ok(out)
}

fn refine(b2: &Brane, b1: &Brane, phi: &BTreeMap<usize, usize>) -> Result<Option<Brane>> {
    let (c1, c2, base) = (&b1.ms.cover, &b2.ms.cover, &b2.ms.base);
    let mut lifts = Vec::new();
    let mut maps = Vec::new();
    let mut class_of: BTreeMap<(usize, usize), String> = BTreeMap::new();
    let mut refined = false;
    for x in 0..c2.lifts.len() {
        let t = c2.cell(x);
        let star = b2.ms.star(x);
        let groups: Vec<Vec<usize>> = star.iter().copied().into_group_map_by(|&a| c1.lift_of(phi[&a], t)).into_values().sorted().collect();
        refined |= groups.len() > 1;
        for (k, grp) in groups.iter().enumerate() {
            let name = if groups.len() == 1 { c2.name(x).to_string() } else { format!("{}.{k}", c2.name(x)) };
            let mult = grp.iter().filter(|&&a| c2.cell(a) == c2.cell(grp[0])).count() as u32;
            lifts.push(Lift { name: name.clone(), cell: t, mult });
            for &a in grp {
                class_of.insert((a, t), name.clone());
            }
        }
    }
    if !refined {
        return Ok(None);
    }
    for a in base.max_cells.iter().flat_map(|&s| c2.frame(s).iter().copied()) {
        for t in 0..base.cells.len() {
            if base.lt(t, c2.cell(a)) {
                maps.push((c2.name(a).to_string(), class_of[&(a, t)].clone()));
            }
        }
    }
    maps.sort();
    maps.dedup();
    let cover = CoveringData::new(base, lifts, &maps)?;
    let mut slopes = BTreeMap::new();
    for (&(x, a), m) in &b2.ms.slopes {
        let t = c2.cell(x);
        let y = cover.index(&class_of.get(&(a, t)).cloned().unwrap_or_else(|| c2.name(x).to_string())).unwrap();
        slopes.insert((y, cover.index(c2.name(a)).unwrap()), m.clone());
    }
    let ms = MultiSection { base: base.clone(), cover, slopes };
    ms.check_complete()?;
    let idx = |x: usize| ms.cover.index(c2.name(x)).unwrap();
    let mut g = KaneyamaG::default();
    for y in 0..ms.cover.lifts.len() {
        let t = ms.cover.cell(y);
        let star = ms.star(y);
        for &a in &star {
            for &b in &star {
                let (a2, b2i) = (c2.index(ms.cover.name(a)).unwrap(), c2.index(ms.cover.name(b)).unwrap());
                g.blocks.entry((y, ms.cover.cell(a), ms.cover.cell(b))).or_default();
                let v = b2.d.g.get(&b2.ms, c2.lift_of(a2, t), a2, b2i);
                if !v.is_zero() {
                    g.set(&ms, y, a, b, v);
                }
            }
        }
    }
    let mut h = KaneyamaH::default();
    for (&(t1, t2, s), block) in &b2.d.h.blocks {
        h.touch(t1, t2, s);
        for (&(a, b), v) in block {
            h.set(&ms, t1, t2, idx(a), idx(b), v.clone());
        }
    }
    let k = solve_k(&ms, &b2.d.sbar)?;
    Ok(Some(Brane { ms, d: BraneData { g, h, k, sbar: b2.d.sbar.clone() } }))
}

/// One `~_c` step: both branes sit below a common upper bound.
#[derive(Clone, Debug)]
pub struct EquivalenceStep {
    pub upper_kind: String,
    pub upper: Brane,
    pub left: BraneOrderWitness,
    pub right: BraneOrderWitness,
}

/// Upper-bound candidates in a fixed order: the two branes, their
/// extracted branes, then the common refinements.
fn upper_candidates(b1: &Brane, b2: &Brane, budget: SearchBudget) -> Result<Vec<(String, Brane)>> {
    let mut out = vec![("left".to_string(), b1.clone()), ("right".to_string(), b2.clone())];
    if let Ok(e) = b1.extracted() {
        out.push(("extracted-left".into(), e));
    }
    if let Ok(e) = b2.extracted() {
        out.push(("extracted-right".into(), e));
    }
    for (i, r) in refinements(b1, b2, budget)?.into_iter().enumerate() {
        out.push((format!("refinement-{i}"), r));
    }
    Ok(out)
}

pub fn check_sim_c(b1: &Brane, b2: &Brane, budget: SearchBudget) -> Result<Option<EquivalenceStep>> {
    for (kind, u) in upper_candidates(b1, b2, budget)? {
        if u.ms.degree() != b1.ms.degree() {
            continue;
        }
        let Some(left) = check_leq(b1, &u, budget)? else { continue };
        let Some(right) = check_leq(b2, &u, budget)? else { continue };
        return Ok(Some(EquivalenceStep { upper_kind: kind, upper: u, left, right }));
    }
    Ok(None)
}

/// Verdict of a depth-bounded search: a chain of `~_c` steps from the
/// first brane to the second, or none within `depth` steps.
#[derive(Clone, Debug)]
pub struct EquivalenceVerdict {
    pub depth: usize,
    pub chain: Option<Vec<(Brane, EquivalenceStep)>>,
}

/// Breadth-first over chains whose intermediate branes are extracted
/// branes of earlier ones, up to `depth` steps.
pub fn check_combinatorial_equivalence(b1: &Brane, b2: &Brane, depth: usize, budget: SearchBudget) -> Result<EquivalenceVerdict> {
    if depth == 0 {
        return Err(Error::Invalid("depth must be at least 1".into()));
    }
    let mut frontier: Vec<Vec<(Brane, EquivalenceStep)>> = vec![Vec::new()];
    let mut seen = vec![b1.clone()];
    for _ in 0..depth {
        let mut next = Vec::new();
        for chain in &frontier {
            let last = chain.last().map_or(b1, |(_, s)| &s.upper);
            if let Some(step) = check_sim_c(last, b2, budget)? {
                let mut done = chain.clone();
                done.push((b2.clone(), step));
                return Ok(EquivalenceVerdict { depth, chain: Some(done) });
            }
            if let Ok(e) = last.extracted() {
                if !seen.contains(&e) {
                    if let Some(step) = check_sim_c(last, &e, budget)? {
                        seen.push(e.clone());
                        let mut c = chain.clone();
                        c.push((e, step));
                        next.push(c);
                    }
                }
            }
        }
        frontier = next;
    }
    Ok(EquivalenceVerdict { depth, chain: None })
}

/// Renames maximal lifts in a descriptor and restores name order in every
/// frame.
pub fn relabel(sd: &SheafDescriptor, names: &BTreeMap<String, String>) -> Result<SheafDescriptor> {
    let rn = |n: &String| names.get(n).cloned().unwrap_or_else(|| n.clone());
    let mut out = sd.clone();
    for f in out.frames.values_mut() {
        *f = f.iter().map(rn).sorted().collect();
    }
    let fix = |m: &crate::monomial::MonomialMatrix| -> Result<crate::monomial::MonomialMatrix> {
        let mut r = m.clone();
        r.rows = r.rows.iter().map(rn).collect();
        r.cols = r.cols.iter().map(rn).collect();
        let (rows, cols): (Vec<String>, Vec<String>) = (r.rows.iter().cloned().sorted().collect(), r.cols.iter().cloned().sorted().collect());
        r.reindexed(&rows, &cols)
    };
    for m in out.transitions.values_mut().chain(out.g.values_mut()).chain(out.h.values_mut()).chain(out.tilde.values_mut()) {
        *m = fix(m)?;
    }
    out.weights = sd.weights.iter().map(|((t, a), w)| ((*t, rn(a)), w.clone())).collect();
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct HarnessRow {
    pub name: String,
    pub kind: String,
    pub stage: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct HarnessReport {
    pub rows: Vec<HarnessRow>,
}

impl HarnessReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// Descriptors: extract then glue, compare up to gauge. Branes: glue,
/// extract, and find a depth-one equivalence back to the source.
pub fn correspondence_harness(branes: &[(String, Brane)], descriptors: &[(String, SheafDescriptor)], budget: SearchBudget) -> HarnessReport {
    let mut rows = Vec::new();
    for (name, sd) in descriptors {
        let row = |stage: &str, pass: bool, detail: String| HarnessRow { name: name.clone(), kind: "descriptor".into(), stage: stage.into(), pass, detail };
        rows.push(match associated_multisection(sd).and_then(|(ms, d)| assemble_sheaf(&ms, &d)) {
            Ok(sd2) => match find_gauge(sd, &sd2) {
                Some(_) => row("gauge", true, "gauge-equivalent".into()),
                None => row("gauge", false, "not gauge-equivalent".into()),
            },
            Err(e) => row("extract", false, e.to_string()),
        });
    }
    for (name, b) in branes {
        let row = |stage: &str, pass: bool, detail: String| HarnessRow { name: name.clone(), kind: "brane".into(), stage: stage.into(), pass, detail };
        let ext = match b.extracted() {
            Ok(e) => e,
            Err(e) => {
                let stage = if matches!(e, Error::CocycleFailure(_) | Error::SingularFrame(_)) { "glue" } else { "extract" };
                rows.push(row(stage, false, e.to_string()));
                continue;
            }
        };
        rows.push(match check_combinatorial_equivalence(b, &ext, 1, budget) {
            Ok(EquivalenceVerdict { chain: Some(c), .. }) => row("equivalence", true, format!("via {}", c[0].1.upper_kind)),
            Ok(_) => row("equivalence", false, "none at depth 1".into()),
            Err(e) => row("equivalence", false, e.to_string()),
        });
    }
    HarnessReport { rows }
}
