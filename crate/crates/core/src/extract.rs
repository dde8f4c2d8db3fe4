//! The reverse construction: summand blocks of a glued sheaf, its
//! equivariance certificate, the associated multi-section with Kaneyama
//! data, and examples by restricting toric bundles to the toric boundary.

use std::collections::BTreeMap;

use num_traits::One;
use petgraph::unionfind::UnionFind;
use serde::Serialize;

use crate::base::{build_base_from_polytope, BaseComplex, ClosedGluing};
use crate::cover::{check_covering_morphism, fan_structure_at, is_separable, localize, ConeComplexSection, CoveringData, Lift, MultiSection};
use crate::error::{Error, Result};
use crate::glue::{assemble_sheaf, find_gauge, BraneData, SheafDescriptor};
use crate::kaneyama::{KaneyamaG, KaneyamaH};
use crate::lattice::{vadd, vsub, IVec, PolytopeFaceLattice};
use crate::mult::{fmt_q, Q};
use crate::obstruction::{obstruction_cochain, solve_coboundary, CechCochain};
use crate::report::{fmt_vec, Finding};

/// Maximal lift names over the charts of `t`, in chart then frame order.
fn nodes(sd: &SheafDescriptor, t: usize) -> Vec<String> {
    sd.base.max_over(t).iter().flat_map(|s| sd.frames[s].iter().cloned()).collect()
}

fn chart_of(sd: &SheafDescriptor, a: &str) -> usize {
    *sd.frames.iter().find(|(_, f)| f.iter().any(|n| n == a)).expect("frame name").0
}

/// Summand partition of every stratum: blocks of maximal lift names, each
/// sorted in node order, blocks ordered by their least node.
pub fn decompose_all(sd: &SheafDescriptor) -> BTreeMap<usize, Vec<Vec<String>>> {
    let base = &sd.base;
    let mut order: Vec<usize> = (0..base.cells.len()).collect();
    // Upper strata first: their blocks force merges below.
    order.sort_by_key(|&t| std::cmp::Reverse(base.cells[t].dim));
    let mut out: BTreeMap<usize, Vec<Vec<String>>> = BTreeMap::new();
    for t in order {
        let ns = nodes(sd, t);
        let pos = |n: &str| ns.iter().position(|x| x == n).unwrap();
        let mut uf = UnionFind::<usize>::new(ns.len());
        for ((c, _, _), m) in sd.g.range((t, 0, 0)..=(t, usize::MAX, usize::MAX)) {
            debug_assert_eq!(*c, t);
            for &(i, j) in m.entries.keys() {
                uf.union(pos(&m.rows[i]), pos(&m.cols[j]));
            }
        }
        for ((t1, _, _), m) in &sd.h {
            if *t1 == t {
                for &(i, j) in m.entries.keys() {
                    uf.union(pos(&m.rows[i]), pos(&m.cols[j]));
                }
            }
        }
        for (&t2, blocks) in &out {
            if base.lt(t, t2) {
                for b in blocks {
                    for w in b.windows(2) {
                        uf.union(pos(&w[0]), pos(&w[1]));
                    }
                }
            }
        }
        let mut groups: BTreeMap<usize, Vec<String>> = BTreeMap::new();
        let labels = uf.into_labeling();
        for (i, n) in ns.iter().enumerate() {
            groups.entry(labels[i]).or_default().push(n.clone());
        }
        let mut blocks: Vec<Vec<String>> = groups.into_values().collect();
        blocks.sort_by_key(|b| pos(&b[0]));
        out.insert(t, blocks);
    }
    out
}

/// Finest frame partition of the stratum of `t` that every transition
/// supported there preserves.
pub fn block_decompose(sd: &SheafDescriptor, t: usize) -> Vec<Vec<String>> {
    decompose_all(sd).remove(&t).unwrap_or_default()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CellCert {
    pub weights: BTreeMap<String, IVec>,
    /// Frame-stable summands; not certified indecomposable.
    pub summands: Vec<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MorphismCert {
    pub from: String,
    pub to: String,
    pub summand: usize,
    pub matched: usize,
    /// `chi_g` in `Q_from^*`.
    pub chi: IVec,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TropicalStructureCert {
    pub cells: BTreeMap<String, CellCert>,
    pub morphisms: Vec<MorphismCert>,
}

fn not_equivariant(at: String, detail: String) -> Error {
    Error::NotEquivariant(format!("{at}: {detail}"))
}

/// Checks that every summand of a stratum embeds equivariantly, up to a
/// computed character, into the matched summand of each smaller stratum.
pub fn validate_tropical_structure(sd: &SheafDescriptor) -> Result<TropicalStructureCert> {
    let base = &sd.base;
    let blocks = decompose_all(sd);
    let w = |t: usize, a: &str| -> &IVec { &sd.weights[&(t, a.to_string())] };
    let mut cells = BTreeMap::new();
    for (&t, bs) in &blocks {
        for ((_, s1, s2), m) in sd.g.range((t, 0, 0)..=(t, usize::MAX, usize::MAX)) {
            for (&(i, j), e) in &m.entries {
                if e.exp != vsub(w(t, &m.rows[i]), w(t, &m.cols[j])) {
                    let at = format!("{} on {}|{}", base.name(t), base.name(*s1), base.name(*s2));
                    return Err(not_equivariant(at, format!("entry ({}, {}) has exponent {} against weights {} and {}", m.rows[i], m.cols[j], fmt_vec(&e.exp), fmt_vec(w(t, &m.rows[i])), fmt_vec(w(t, &m.cols[j])))));
                }
            }
        }
        for b in bs {
            let ranks: Vec<usize> = base.max_over(t).iter().map(|s| b.iter().filter(|a| chart_of(sd, a) == *s).count()).collect();
            if ranks.iter().any(|r| *r != ranks[0]) {
                return Err(not_equivariant(base.name(t).into(), format!("summand {{{}}} has ranks {:?} on its charts", b.join(", "), ranks)));
            }
        }
        let weights = nodes(sd, t).into_iter().map(|a| (a.clone(), w(t, &a).clone())).collect();
        cells.insert(base.name(t).to_string(), CellCert { weights, summands: bs.clone() });
    }
    let mut morphisms = Vec::new();
    for (t1, t2) in base.morphisms() {
        let find = |t: usize, a: &str| blocks[&t].iter().position(|b| b.iter().any(|x| x == a)).unwrap();
        for (bi, b) in blocks[&t2].iter().enumerate() {
            let at = || format!("{} -> {} summand {bi}", base.name(t1), base.name(t2));
            let matched = find(t1, &b[0]);
            let chi = vsub(&base.pull(t1, t2, w(t2, &b[0])), w(t1, &b[0]));
            for a in b {
                if find(t1, a) != matched {
                    return Err(not_equivariant(at(), format!("{} and {a} land in different summands", b[0])));
                }
                let c = vsub(&base.pull(t1, t2, w(t2, a)), w(t1, a));
                if c != chi {
                    return Err(not_equivariant(at(), format!("characters {} at {} and {} at {a} differ", fmt_vec(&chi), b[0], fmt_vec(&c))));
                }
            }
            for s in base.max_over(t2) {
                let m = &sd.h[&(t1, t2, s)];
                for (&(i, j), e) in &m.entries {
                    if !b.contains(&m.rows[i]) {
                        continue;
                    }
                    let lhs = vadd(&vadd(&base.pull(t1, t2, &e.exp), w(t1, &m.cols[j])), &chi);
                    if lhs != base.pull(t1, t2, w(t2, &m.rows[i])) || find(t1, &m.cols[j]) != matched {
                        return Err(not_equivariant(at(), format!("entry ({}, {}) on {} is not equivariant", m.rows[i], m.cols[j], base.name(s))));
                    }
                }
            }
            morphisms.push(MorphismCert { from: base.name(t1).into(), to: base.name(t2).into(), summand: bi, matched, chi });
        }
    }
    Ok(TropicalStructureCert { cells, morphisms })
}

fn block_names(base: &BaseComplex, t: usize, blocks: &[Vec<String>]) -> Vec<String> {
    if base.is_max(t) {
        return blocks.iter().map(|b| b[0].clone()).collect();
    }
    let suffix = |b: &Vec<String>| -> Option<String> {
        let s: Vec<&str> = b.iter().map(|n| n.rsplit_once('.').map_or("", |x| x.1)).collect();
        (!s[0].is_empty() && s.iter().all(|x| *x == s[0])).then(|| s[0].to_string())
    };
    let sfx: Vec<Option<String>> = blocks.iter().map(suffix).collect();
    let distinct = sfx.iter().all(Option::is_some) && {
        let mut v: Vec<_> = sfx.iter().flatten().collect();
        v.sort();
        v.dedup();
        v.len() == blocks.len()
    };
    match (blocks.len(), distinct) {
        (1, _) => vec![base.name(t).to_string()],
        (_, true) => sfx.into_iter().map(|s| format!("{}.{}", base.name(t), s.unwrap())).collect(),
        _ => (0..blocks.len()).map(|k| format!("{}.{k}", base.name(t))).collect(),
    }
}

/// The associated multi-section (one lift per summand, multiplicity its
/// rank, slopes from the weights) with Kaneyama data read off the
/// descriptor's coefficients.
pub fn associated_multisection(sd: &SheafDescriptor) -> Result<(MultiSection, BraneData)> {
    validate_tropical_structure(sd)?;
    let base = &sd.base;
    let blocks = decompose_all(sd);
    let names: BTreeMap<usize, Vec<String>> = blocks.iter().map(|(&t, b)| (t, block_names(base, t, b))).collect();
    let lift_name = |t: usize, a: &str| -> &str {
        let k = blocks[&t].iter().position(|b| b.iter().any(|x| x == a)).unwrap();
        &names[&t][k]
    };
    let mut lifts = Vec::new();
    for (&t, bs) in &blocks {
        for (k, b) in bs.iter().enumerate() {
            let mult = b.iter().filter(|a| chart_of(sd, a) == chart_of(sd, &b[0])).count() as u32;
            lifts.push(Lift { name: names[&t][k].clone(), cell: t, mult });
        }
    }
    let mut maps = Vec::new();
    for (t1, t2) in base.morphisms() {
        for b in &blocks[&t2] {
            maps.push((lift_name(t2, &b[0]).to_string(), lift_name(t1, &b[0]).to_string()));
        }
    }
    maps.sort();
    maps.dedup();
    let cover = CoveringData::new(base, lifts, &maps)?;
    let mut slopes = BTreeMap::new();
    for ((t, a), m) in &sd.weights {
        let x = cover.index(lift_name(*t, a)).unwrap();
        slopes.insert((x, cover.index(a).unwrap()), m.clone());
    }
    let ms = MultiSection { base: base.clone(), cover, slopes };
    ms.check_complete()?;

    let mut g = KaneyamaG::default();
    for (&(t, s1, s2), m) in &sd.g {
        for b in &blocks[&t] {
            let on = |s: usize| b.iter().any(|a| chart_of(sd, a) == s);
            if on(s1) && on(s2) {
                let x = ms.cover.index(lift_name(t, &b[0])).unwrap();
                g.blocks.entry((x, s1, s2)).or_default();
            }
        }
        for (&(i, j), e) in &m.entries {
            let x = ms.cover.index(lift_name(t, &m.rows[i])).unwrap();
            let (a, b) = (ms.cover.index(&m.rows[i]).unwrap(), ms.cover.index(&m.cols[j]).unwrap());
            g.set(&ms, x, a, b, e.coef.clone());
        }
    }
    let c = obstruction_cochain(&ms, &sd.sbar)?;
    let k = solve_coboundary(&ms, &c)?.ok_or_else(|| Error::CocycleFailure("obstruction of the associated multi-section is not a coboundary".into()))?;
    let mut h = KaneyamaH::default();
    for (&(t1, t2, s), m) in &sd.h {
        h.touch(t1, t2, s);
        for (&(i, j), e) in &m.entries {
            let (a, b) = (ms.cover.index(&m.rows[i]).unwrap(), ms.cover.index(&m.cols[j]).unwrap());
            let (x, y) = (ms.cover.lift_of(a, t1), ms.cover.lift_of(a, t2));
            let kx = if x == y { Q::one() } else { k.get(&[x, y]) };
            let scale = kx * sd.sbar.eval(base, t1, t2, &e.exp) / sd.sbar.eval(base, t1, t2, ms.m_at(t2, a));
            h.set(&ms, t1, t2, a, b, &e.coef / scale);
        }
    }
    Ok((ms, BraneData { g, h, k, sbar: sd.sbar.clone() }))
}

#[derive(Clone, Debug, Serialize)]
pub struct RoundtripReport {
    pub gauge_equivalent: bool,
    pub equal: bool,
    /// Frame rescaling taking the first descriptor to the second.
    pub gauge: Option<BTreeMap<String, String>>,
}

/// Glue, extract, glue again, and compare the two descriptors up to gauge.
pub fn roundtrip_check(ms: &MultiSection, d: &BraneData) -> Result<RoundtripReport> {
    let sd = assemble_sheaf(ms, d)?;
    let (ms2, d2) = associated_multisection(&sd)?;
    let sd2 = assemble_sheaf(&ms2, &d2)?;
    let gauge = find_gauge(&sd, &sd2);
    Ok(RoundtripReport {
        gauge_equivalent: gauge.is_some(),
        equal: sd.transitions == sd2.transitions,
        gauge: gauge.map(|l| l.iter().map(|(n, v)| (n.clone(), fmt_q(v))).collect()),
    })
}

/// The fold from the extracted multi-section onto the source: every lift
/// of a summand goes to the source lift whose frame contains it.
pub fn fold_to_source(ms: &MultiSection, extracted: &MultiSection) -> Result<Vec<usize>> {
    let (ec, sc) = (&extracted.cover, &ms.cover);
    (0..ec.lifts.len())
        .map(|x| {
            let t = ec.cell(x);
            let targets: Vec<usize> = ec.star(&extracted.base, x).iter().map(|&a| sc.lift_of(sc.index(ec.name(a)).unwrap(), t)).collect();
            if targets.windows(2).any(|w| w[0] != w[1]) {
                return Err(Error::IndexMismatch(format!("summand {} spans several source lifts", ec.name(x))));
            }
            Ok(targets[0])
        })
        .collect()
}

pub fn check_covering_morphism_to_source(ms: &MultiSection, d: &BraneData) -> Result<Vec<Finding>> {
    let sd = assemble_sheaf(ms, d)?;
    let (ext, _) = associated_multisection(&sd)?;
    let f = fold_to_source(ms, &ext)?;
    check_covering_morphism(&f, &ext, ms)
}

/// Restricts a toric bundle on the fan of a polytope to the toric boundary:
/// the polytope base is the fan base without its apex, strata keep the
/// localized slopes and the Kaneyama coefficients of the bundle.
pub fn restrict_toric_bundle(fl: &PolytopeFaceLattice, cs: &ConeComplexSection, g: &KaneyamaG) -> Result<SheafDescriptor> {
    let fan = &cs.ms;
    let base = build_base_from_polytope(fl)?;
    let to_fan: Vec<usize> = (0..base.cells.len())
        .map(|t| fan.base.cell_index(base.name(t)).ok_or_else(|| Error::IndexMismatch(format!("fan has no cone over {}", base.name(t)))))
        .collect::<Result<_>>()?;
    let from_fan = |c: usize| to_fan.iter().position(|&x| x == c);
    let fc = &fan.cover;
    let keep: Vec<usize> = (0..fc.lifts.len()).filter(|&x| from_fan(fc.cell(x)).is_some()).collect();
    let lifts = keep.iter().map(|&x| Lift { name: fc.name(x).into(), cell: from_fan(fc.cell(x)).unwrap(), mult: fc.lifts[x].mult }).collect();
    let maps: Vec<(String, String)> = fc
        .down
        .iter()
        .filter(|((x, c), _)| keep.contains(x) && from_fan(*c).is_some() && fc.cell(*x) != *c)
        .map(|((x, _), y)| (fc.name(*x).to_string(), fc.name(*y).to_string()))
        .collect();
    let cover = CoveringData::new(&base, lifts, &maps)?;
    let new_index: Vec<Option<usize>> = (0..fc.lifts.len()).map(|x| cover.index(fc.name(x))).collect();
    let idx = |x: usize| new_index[x].unwrap();
    let slopes = fan.slopes.iter().filter(|((x, _), _)| keep.contains(x)).map(|(&(x, s), m)| ((idx(x), idx(s)), m.clone())).collect();
    let ms = MultiSection { base, cover, slopes };
    let mut rg = KaneyamaG::default();
    for (&(x, s1, s2), block) in &g.blocks {
        let (Some(a1), Some(a2)) = (from_fan(s1), from_fan(s2)) else { continue };
        if !keep.contains(&x) {
            continue;
        }
        let entry = rg.blocks.entry((idx(x), a1, a2)).or_default();
        for (&(a, b), v) in block {
            entry.insert((idx(a), idx(b)), v.clone());
        }
    }
    let d = BraneData { g: rg, h: KaneyamaH::default(), k: CechCochain::one(1), sbar: ClosedGluing::default() };
    let sd = assemble_sheaf(&ms, &d)?;
    validate_tropical_structure(&sd)?;
    if let Some(f) = check_localization(cs, &sd)?.first() {
        return Err(Error::NotEquivariant(format!("{} at {}: {}", f.check, f.at.join(","), f.detail)));
    }
    Ok(sd)
}

/// Each lift of the associated multi-section is, near its cell, the
/// localization of the source bundle's section along the matched cone:
/// same cones over the same maximal lifts, same slopes, same separability.
pub fn check_localization(cs: &ConeComplexSection, sd: &SheafDescriptor) -> Result<Vec<Finding>> {
    let (ext, _) = associated_multisection(sd)?;
    let fc = &cs.ms.cover;
    let mut out = Vec::new();
    for x in 0..ext.cover.lifts.len() {
        let a = ext.cover.star(&ext.base, x)[0];
        let fa = fc.index(ext.cover.name(a)).ok_or_else(|| Error::IndexMismatch(format!("no source lift {}", ext.cover.name(a))))?;
        let cell = cs.ms.base.cell_index(ext.base.name(ext.cover.cell(x))).unwrap();
        let mine = fan_structure_at(&ext, x)?;
        let theirs = localize(cs, fc.lift_of(fa, cell))?;
        let at = vec![ext.cover.name(x).to_string()];
        let cones = |c: &ConeComplexSection| -> BTreeMap<String, (Vec<IVec>, IVec)> {
            let cv = &c.ms.cover;
            c.global.iter().map(|(&s, m)| (cv.name(s).to_string(), (c.ms.base.cone(c.apex, cv.cell(s)).to_vec(), m.clone()))).collect()
        };
        let (m1, m2) = (cones(&mine), cones(&theirs));
        let (l1, l2): (Vec<_>, Vec<_>) = (m1.keys().collect(), m2.keys().collect());
        if !l2.iter().all(|n| l1.contains(n)) || m1.iter().any(|(n, v)| m2.get(n).is_some_and(|w| w != v)) {
            out.push(Finding::new("localization", at.clone(), format!("cones or slopes differ: {l1:?} vs {l2:?}")));
        }
        if is_separable(&mine).0 != is_separable(&theirs).0 {
            out.push(Finding::new("separability", at, "separability differs"));
        }
    }
    Ok(out)
}
