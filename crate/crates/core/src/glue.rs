//! Gluing the local toric pieces: the modified transition maps `H~(g)`
//! along morphisms, their cocycle, the global frames over each maximal
//! cell, and the chart-to-chart transition matrices of the glued sheaf.
//!
//! All matrices follow the row convention: a map sends the basis vector of
//! row `a` to the combination of column basis vectors in that row, and
//! "first A, then B" is the product `A B`.

use std::collections::{BTreeMap, VecDeque};

use num_traits::{One, Zero};
use serde::Serialize;

use crate::base::{BaseComplex, ClosedGluing};
use crate::cover::MultiSection;
use crate::error::{Error, Result};
use crate::kaneyama::{build_g_matrices, KaneyamaG, KaneyamaH};
use crate::lattice::{vsub, IVec};
use crate::monomial::{MatrixView, MonomialMatrix};
use crate::mult::{fmt_q, Q};
use crate::obstruction::CechCochain;
use crate::report::{fmt_vec, Finding};

/// Kaneyama data together with a closed gluing datum and the cochain `k`
/// trivializing its obstruction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BraneData {
    pub g: KaneyamaG,
    pub h: KaneyamaH,
    pub k: CechCochain,
    pub sbar: ClosedGluing,
}

fn kval(k: &CechCochain, x: usize, y: usize) -> Q {
    if x == y {
        Q::one()
    } else {
        k.get(&[x, y])
    }
}

/// `F(g)^*` for `g: a -> b`: a monomial `z^e` with `e = p^* e'` becomes
/// `sbar_g(e') z^{e'}`; monomials not coming from `Q_b^*` vanish on the
/// smaller stratum.
pub fn pull_matrix(base: &BaseComplex, s: &ClosedGluing, a: usize, b: usize, m: &MonomialMatrix) -> MonomialMatrix {
    if a == b {
        return m.clone();
    }
    m.map_entries(base.qrank[b], |_, _, e| base.descend(a, b, &e.exp).map(|d| (s.eval(base, a, b, &d), d)))
}

fn frame_names(ms: &MultiSection, s: usize) -> Vec<String> {
    ms.cover.frame(s).iter().map(|&x| ms.cover.name(x).to_string()).collect()
}

/// `H~(t1 -> t2)` on every maximal cell over `t2`: exponents in `Q_{t2}^*`.
pub fn build_h_matrices(ms: &MultiSection, d: &BraneData, t1: usize, t2: usize) -> Result<BTreeMap<usize, MonomialMatrix>> {
    let (base, c) = (&ms.base, &ms.cover);
    let mut out = BTreeMap::new();
    for s in base.max_over(t2) {
        let names = frame_names(ms, s);
        let mut m = MonomialMatrix::zero(names.clone(), names, base.qrank[t2]).with_chart(base.cone(t2, s).to_vec());
        for (i, &a) in c.frame(s).iter().enumerate() {
            for (j, &b) in c.frame(s).iter().enumerate() {
                let hv = d.h.get(ms, t1, t2, a, b);
                if hv.is_zero() {
                    continue;
                }
                if t1 == t2 {
                    m.set(i, j, hv, vec![0; base.qrank[t2]]);
                    continue;
                }
                let diff = vsub(ms.m_at(t1, a), ms.m_at(t1, b));
                let dd = base.descend(t1, t2, &diff).ok_or_else(|| {
                    Error::ExponentClash(format!("h({} -> {}) couples {} and {} through {} outside Q_{}^*", base.name(t1), base.name(t2), c.name(a), c.name(b), fmt_vec(&diff), base.name(t2)))
                })?;
                let kx = kval(&d.k, c.lift_of(a, t1), c.lift_of(a, t2));
                let coef = kx * d.sbar.eval(base, t1, t2, &dd) / d.sbar.eval(base, t1, t2, ms.m_at(t2, a)) * hv;
                m.set(i, j, coef, dd);
            }
        }
        out.insert(s, m);
    }
    Ok(out)
}

/// Every `H~(g)` keyed by `(t1, t2, s)`.
pub fn all_h_matrices(ms: &MultiSection, d: &BraneData) -> Result<BTreeMap<(usize, usize, usize), MonomialMatrix>> {
    let mut out = BTreeMap::new();
    for (t1, t2) in ms.base.morphisms() {
        for (s, m) in build_h_matrices(ms, d, t1, t2)? {
            out.insert((t1, t2, s), m);
        }
    }
    Ok(out)
}

fn all_g_matrices(ms: &MultiSection, g: &KaneyamaG) -> Result<BTreeMap<(usize, usize, usize), MonomialMatrix>> {
    let mut out = BTreeMap::new();
    for t in 0..ms.base.cells.len() {
        for ((s1, s2), m) in build_g_matrices(ms, g, t)? {
            out.insert((t, s1, s2), m);
        }
    }
    Ok(out)
}

fn compare(out: &mut Vec<Finding>, check: &str, at: Vec<String>, lhs: Result<MonomialMatrix>, rhs: &MonomialMatrix) {
    match lhs {
        Ok(l) if l.same_entries(rhs) => {}
        Ok(l) => {
            let bad: Vec<String> = (0..l.rows.len())
                .flat_map(|i| (0..l.cols.len()).map(move |j| (i, j)))
                .filter(|&(i, j)| l.get(i, j) != rhs.get(i, j))
                .map(|(i, j)| format!("({}, {})", l.rows[i], l.cols[j]))
                .collect();
            out.push(Finding::new(check, at, format!("entries differ at {}", bad.join(", "))));
        }
        Err(e) => out.push(Finding::new(check, at, e.to_string())),
    }
}

/// The cocycle `H~(g2) F(g2)^* H~(g1) = H~(g3)`, the intertwining
/// `H~_{s1}(g) F^*G_{s1 s2}(t1) = G_{s1 s2}(t2) H~_{s2}(g)` on the chart of
/// `s1 cap s2`, and constancy of every `det H~`.
pub fn check_h_cocycle(ms: &MultiSection, d: &BraneData) -> Result<Vec<Finding>> {
    let base = &ms.base;
    let hm = all_h_matrices(ms, d)?;
    let gm = all_g_matrices(ms, &d.g)?;
    let mut out = Vec::new();
    for (&(t1, t2, s), m) in &hm {
        match m.det() {
            Ok((c, e)) if !c.is_zero() && e.iter().all(|x| *x == 0) => {}
            Ok((c, e)) => out.push(Finding::new("H-det", [base.name(t1), base.name(t2), base.name(s)], format!("det {} z^{}", fmt_q(&c), fmt_vec(&e)))),
            Err(err) => out.push(Finding::new("H-det", [base.name(t1), base.name(t2), base.name(s)], err.to_string())),
        }
    }
    for (t1, t2, t3) in base.chains3() {
        for s in base.max_over(t3) {
            let lhs = hm[&(t2, t3, s)].mul(&pull_matrix(base, &d.sbar, t2, t3, &hm[&(t1, t2, s)]));
            let at = vec![base.name(t1).to_string(), base.name(t2).into(), base.name(t3).into(), base.name(s).into()];
            compare(&mut out, "H-cocycle", at, lhs, &hm[&(t1, t3, s)]);
        }
    }
    for (t1, t2) in base.morphisms() {
        let maxes = base.max_over(t2);
        for &s1 in &maxes {
            for &s2 in &maxes {
                let Some(rho) = base.meet(s1, s2) else { continue };
                let rays = base.cone(t2, rho);
                let lhs = hm[&(t1, t2, s1)].mul(&pull_matrix(base, &d.sbar, t1, t2, &gm[&(t1, s1, s2)])).map(|m| m.vanishing(rays));
                let rhs = gm[&(t2, s1, s2)].mul(&hm[&(t1, t2, s2)]).map(|m| m.vanishing(rays));
                let at = vec![base.name(t1).to_string(), base.name(t2).into(), base.name(s1).into(), base.name(s2).into()];
                match rhs {
                    Ok(r) => compare(&mut out, "H-intertwining", at, lhs, &r),
                    Err(e) => out.push(Finding::new("H-intertwining", at, e.to_string())),
                }
            }
        }
    }
    Ok(out)
}

/// Change of frame `1~_{s^a}(t) = sum_b k_{t^a s^a} h_{ab}(t -> s) z^{m_t(a) - m_t(b)} 1_{s^b}(t)`
/// for every cell `t` and maximal `s` over it.
pub fn build_global_frames(ms: &MultiSection, d: &BraneData) -> Result<BTreeMap<(usize, usize), MonomialMatrix>> {
    let (base, c) = (&ms.base, &ms.cover);
    let mut out = BTreeMap::new();
    for t in 0..base.cells.len() {
        for s in base.max_over(t) {
            let names = frame_names(ms, s);
            let mut m = MonomialMatrix::zero(names.clone(), names, base.qrank[t]).with_chart(base.cone(t, s).to_vec());
            for (i, &a) in c.frame(s).iter().enumerate() {
                for (j, &b) in c.frame(s).iter().enumerate() {
                    let hv = d.h.get(ms, t, s, a, b);
                    if !hv.is_zero() {
                        m.set(i, j, kval(&d.k, c.lift_of(a, t), a) * hv, vsub(ms.m_at(t, a), ms.m_at(t, b)));
                    }
                }
            }
            m.inverse().map_err(|e| Error::SingularFrame(format!("frame of {} over {}: {e}", base.name(s), base.name(t))))?;
            out.insert((t, s), m);
        }
    }
    Ok(out)
}

/// `Fr_{t2} H~(t1 -> t2) = F^* Fr_{t1}` on every morphism and maximal cell.
pub fn check_frames(ms: &MultiSection, d: &BraneData, frames: &BTreeMap<(usize, usize), MonomialMatrix>) -> Result<Vec<Finding>> {
    let base = &ms.base;
    let hm = all_h_matrices(ms, d)?;
    let mut out = Vec::new();
    for (&(t1, t2, s), h) in &hm {
        let lhs = frames[&(t2, s)].mul(h);
        let rhs = pull_matrix(base, &d.sbar, t1, t2, &frames[&(t1, s)]);
        compare(&mut out, "frame", vec![base.name(t1).to_string(), base.name(t2).into(), base.name(s).into()], lhs, &rhs);
    }
    Ok(out)
}

/// The glued sheaf, presented by frames, weights and monomial transition
/// matrices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SheafDescriptor {
    pub base: BaseComplex,
    pub rank: usize,
    /// Frame of each maximal cell: maximal lift names in order.
    pub frames: BTreeMap<usize, Vec<String>>,
    /// `m_t(a)` for every cell `t` and maximal lift `a` over it.
    pub weights: BTreeMap<(usize, String), IVec>,
    /// `G_{s1 s2}(t)` keyed by `(t, s1, s2)`.
    pub g: BTreeMap<(usize, usize, usize), MonomialMatrix>,
    /// `H~(t1 -> t2)` keyed by `(t1, t2, s)`.
    pub h: BTreeMap<(usize, usize, usize), MonomialMatrix>,
    /// Changes of frame keyed by `(t, s)`.
    pub tilde: BTreeMap<(usize, usize), MonomialMatrix>,
    /// `T_{s1 s2}(v)` keyed by `(s1, s2, v)` for every shared vertex `v`.
    pub transitions: BTreeMap<(usize, usize, usize), MonomialMatrix>,
    pub sbar: ClosedGluing,
}

impl SheafDescriptor {
    /// Transition at the least shared vertex.
    pub fn anchored(&self, s1: usize, s2: usize) -> Option<&MonomialMatrix> {
        self.transitions.range((s1, s2, 0)..=(s1, s2, usize::MAX)).next().map(|(_, m)| m)
    }

    pub fn vertices(&self) -> Vec<usize> {
        vertices(&self.base)
    }
}

pub fn vertices(base: &BaseComplex) -> Vec<usize> {
    (0..base.cells.len()).filter(|&c| base.cells[c].dim == 0).collect()
}

pub fn assemble_sheaf(ms: &MultiSection, d: &BraneData) -> Result<SheafDescriptor> {
    let base = &ms.base;
    let hfind = check_h_cocycle(ms, d)?;
    if let Some(f) = hfind.first() {
        return Err(Error::CocycleFailure(format!("{} at {}: {} ({} failures)", f.check, f.at.join(","), f.detail, hfind.len())));
    }
    let tilde = build_global_frames(ms, d)?;
    let ffind = check_frames(ms, d, &tilde)?;
    if let Some(f) = ffind.first() {
        return Err(Error::CocycleFailure(format!("{} at {}: {} ({} failures)", f.check, f.at.join(","), f.detail, ffind.len())));
    }
    let g = all_g_matrices(ms, &d.g)?;
    let mut transitions = BTreeMap::new();
    for v in vertices(base) {
        let maxes = base.max_over(v);
        for &s1 in &maxes {
            for &s2 in &maxes {
                let Some(rho) = base.meet(s1, s2) else { continue };
                let t = tilde[&(v, s1)].mul(&g[&(v, s1, s2)])?.mul(&tilde[&(v, s2)].inverse()?)?;
                transitions.insert((s1, s2, v), t.vanishing(base.cone(v, rho)));
            }
        }
    }
    let mut weights = BTreeMap::new();
    for t in 0..base.cells.len() {
        for s in base.max_over(t) {
            for &a in ms.cover.frame(s) {
                weights.insert((t, ms.cover.name(a).to_string()), ms.m_at(t, a).clone());
            }
        }
    }
    let sd = SheafDescriptor {
        base: base.clone(),
        rank: ms.degree(),
        frames: base.max_cells.iter().map(|&s| (s, frame_names(ms, s))).collect(),
        weights,
        g,
        h: all_h_matrices(ms, d)?,
        tilde,
        transitions,
        sbar: d.sbar.clone(),
    };
    let tf = check_transitions(&sd);
    if let Some(f) = tf.first() {
        return Err(Error::CocycleFailure(format!("{} at {}: {}", f.check, f.at.join(","), f.detail)));
    }
    Ok(sd)
}

/// `T_{ss} = Id`, invertibility of every `T`, and `T_{12} T_{23} = T_{13}`
/// on every triple of charts sharing a vertex, after restricting all three
/// to the chart of the triple intersection.
pub fn check_transitions(sd: &SheafDescriptor) -> Vec<Finding> {
    let base = &sd.base;
    let mut out = Vec::new();
    for (&(s1, s2, v), t) in &sd.transitions {
        let at = || vec![base.name(s1).to_string(), base.name(s2).into(), base.name(v).into()];
        if s1 == s2 && !t.is_identity() {
            out.push(Finding::new("T-identity", at(), "diagonal transition is not the identity"));
        }
        match t.det() {
            Ok((c, _)) if !c.is_zero() => {}
            _ => out.push(Finding::new("T-det", at(), "transition is not invertible")),
        }
    }
    for v in vertices(base) {
        let maxes = base.max_over(v);
        for &s1 in &maxes {
            for &s2 in &maxes {
                for &s3 in &maxes {
                    let Some(r) = base.meet(s1, s2).and_then(|r| base.meet(r, s3)) else { continue };
                    let rays = base.cone(v, r);
                    let (Some(a), Some(b), Some(c)) = (sd.transitions.get(&(s1, s2, v)), sd.transitions.get(&(s2, s3, v)), sd.transitions.get(&(s1, s3, v))) else { continue };
                    let lhs = a.vanishing(rays).mul(&b.vanishing(rays)).map(|m| m.vanishing(rays));
                    let at = vec![base.name(v).to_string(), base.name(s1).into(), base.name(s2).into(), base.name(s3).into()];
                    compare(&mut out, "T-cocycle", at, lhs, &c.vanishing(rays));
                }
            }
        }
    }
    out
}

/// Rescales the global frame: `T'_{s1 s2} = D_{s1} T D_{s2}^{-1}` with
/// `D = diag(lambda)` over maximal lift names.
pub fn apply_gauge(sd: &SheafDescriptor, lambda: &BTreeMap<String, Q>) -> SheafDescriptor {
    let mut out = sd.clone();
    let l = |n: &String| lambda.get(n).cloned().unwrap_or_else(Q::one);
    for t in out.transitions.values_mut() {
        let rows = t.rows.clone();
        let cols = t.cols.clone();
        *t = t.map_entries(t.rank, |i, j, e| Some((l(&rows[i]) / l(&cols[j]), e.exp.clone()))).with_chart(t.chart.clone());
    }
    out
}

/// A frame rescaling taking the transitions of `a` to those of `b`, if one
/// exists.
pub fn find_gauge(a: &SheafDescriptor, b: &SheafDescriptor) -> Option<BTreeMap<String, Q>> {
    if a.frames != b.frames || a.transitions.keys().ne(b.transitions.keys()) {
        return None;
    }
    // Edges of the constraint graph: lambda_row / lambda_col = ratio.
    let mut adj: BTreeMap<String, Vec<(String, Q)>> = BTreeMap::new();
    for (k, ta) in &a.transitions {
        let tb = &b.transitions[k];
        if ta.rows != tb.rows || ta.cols != tb.cols || ta.entries.keys().ne(tb.entries.keys()) {
            return None;
        }
        for (&(i, j), ea) in &ta.entries {
            let eb = &tb.entries[&(i, j)];
            if ea.exp != eb.exp {
                return None;
            }
            let r = &eb.coef / &ea.coef;
            adj.entry(ta.rows[i].clone()).or_default().push((ta.cols[j].clone(), r.recip()));
            adj.entry(ta.cols[j].clone()).or_default().push((ta.rows[i].clone(), r));
        }
    }
    let mut lambda: BTreeMap<String, Q> = BTreeMap::new();
    for names in a.frames.values() {
        for n in names {
            if lambda.contains_key(n) {
                continue;
            }
            lambda.insert(n.clone(), Q::one());
            let mut queue = VecDeque::from([n.clone()]);
            while let Some(x) = queue.pop_front() {
                let lx = lambda[&x].clone();
                for (y, r) in adj.get(&x).map(Vec::as_slice).unwrap_or(&[]) {
                    if !lambda.contains_key(y) {
                        lambda.insert(y.clone(), &lx * r);
                        queue.push_back(y.clone());
                    }
                }
            }
        }
    }
    let moved = apply_gauge(a, &lambda);
    moved.transitions.iter().all(|(k, t)| t.same_entries(&b.transitions[k])).then_some(lambda)
}

/// Serializable form of a descriptor.
#[derive(Clone, Debug, Serialize)]
pub struct DescriptorView {
    pub rank: usize,
    pub frames: BTreeMap<String, Vec<String>>,
    pub transitions: BTreeMap<String, MatrixView>,
    pub weights: BTreeMap<String, BTreeMap<String, IVec>>,
}

pub fn descriptor_view(sd: &SheafDescriptor) -> DescriptorView {
    let b = &sd.base;
    let mut weights: BTreeMap<String, BTreeMap<String, IVec>> = BTreeMap::new();
    for ((t, a), w) in &sd.weights {
        weights.entry(b.name(*t).to_string()).or_default().insert(a.clone(), w.clone());
    }
    DescriptorView {
        rank: sd.rank,
        frames: sd.frames.iter().map(|(s, f)| (b.name(*s).to_string(), f.clone())).collect(),
        transitions: sd.transitions.iter().map(|((s1, s2, v), m)| (format!("{}|{}@{}", b.name(*s1), b.name(*s2), b.name(*v)), m.view())).collect(),
        weights,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::{cube, random_closed_gluing, random_potential, square};
    use crate::fixtures::{boundary_section, fan_section, square_line_bundle};
    use crate::mult::q;
    use crate::obstruction::{obstruction_cochain, solve_coboundary};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn brane(ms: &MultiSection, sbar: ClosedGluing) -> BraneData {
        let c = obstruction_cochain(ms, &sbar).unwrap();
        let k = solve_coboundary(ms, &c).unwrap().unwrap_or_else(|| CechCochain::one(1));
        BraneData { g: KaneyamaG::default(), h: KaneyamaH::default(), k, sbar }
    }

    fn cube_fan() -> MultiSection {
        fan_section(&cube(), &[""], &[vec![1; 8]]).unwrap().ms
    }

    #[test]
    fn trivial_square_glues_to_identity() {
        let ms = fan_section(&square(), &[""], &[vec![0; 4]]).unwrap().ms;
        let sd = assemble_sheaf(&ms, &brane(&ms, ClosedGluing::default())).unwrap();
        assert!(sd.transitions.values().all(MonomialMatrix::is_identity));
        assert!(check_transitions(&sd).is_empty());
    }

    #[test]
    fn line_bundle_transitions_are_slope_differences() {
        let ms = fan_section(&square(), &[""], &[square_line_bundle(1, 1)]).unwrap().ms;
        let sd = assemble_sheaf(&ms, &brane(&ms, ClosedGluing::default())).unwrap();
        let o = ms.base.cell_index("o").unwrap();
        for (&(s1, s2, v), t) in &sd.transitions {
            assert_eq!(v, o);
            let (a, b) = (ms.cover.frame(s1)[0], ms.cover.frame(s2)[0]);
            let e = t.get(0, 0).unwrap();
            assert_eq!(e.coef, q(1));
            assert_eq!(e.exp, vsub(ms.m_at(o, a), ms.m_at(o, b)));
        }
    }

    #[test]
    fn solvable_obstruction_glues_and_wrong_k_is_localized() {
        let ms = cube_fan();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (mut solved, mut blocked) = (0, 0);
        for _ in 0..20 {
            let sbar = random_closed_gluing(&ms.base, &mut rng, 2);
            let c = obstruction_cochain(&ms, &sbar).unwrap();
            let d = brane(&ms, sbar);
            let ok = assemble_sheaf(&ms, &d);
            match solve_coboundary(&ms, &c).unwrap() {
                Some(_) => {
                    solved += 1;
                    assert!(check_h_cocycle(&ms, &d).unwrap().is_empty());
                    let sd = ok.unwrap();
                    assert!(check_transitions(&sd).is_empty());
                    let mut bad = d.clone();
                    let (flag, v) = bad.k.values.iter().next().map(|(k, v)| (k.clone(), v.clone())).unwrap();
                    bad.k.set(flag.clone(), v * q(3));
                    let f = check_h_cocycle(&ms, &bad).unwrap();
                    assert!(!f.is_empty());
                    let names: Vec<&str> = flag.iter().map(|&x| ms.cover.name(x)).collect();
                    assert!(f.iter().filter(|x| x.check == "H-cocycle").all(|x| names.iter().all(|n| x.at.iter().any(|a| a == n))));
                    assert!(matches!(assemble_sheaf(&ms, &bad), Err(Error::CocycleFailure(_))));
                }
                None => {
                    blocked += 1;
                    assert!(matches!(ok, Err(Error::CocycleFailure(_))));
                }
            }
        }
        assert_eq!((solved, blocked), (20, 0));
    }

    #[test]
    fn sphere_obstructions_block_assembly() {
        // The boundary nerve is a 2-sphere: random gluings are obstructed,
        // gluings coming from a potential are not.
        let ms = boundary_section(&cube(), &[""], &[vec![1; 8]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let sbar = random_closed_gluing(&ms.base, &mut rng, 2);
            let c = obstruction_cochain(&ms, &sbar).unwrap();
            assert!(solve_coboundary(&ms, &c).unwrap().is_none());
            assert!(matches!(assemble_sheaf(&ms, &brane(&ms, sbar)), Err(Error::CocycleFailure(_))));
        }
        let sbar = ClosedGluing::from_potential(&ms.base, &random_potential(&ms.base, &mut rng));
        assert!(!obstruction_cochain(&ms, &sbar).unwrap().is_one());
        assert!(assemble_sheaf(&ms, &brane(&ms, sbar)).is_ok());
    }

    #[test]
    fn two_sheets_glue_with_constant_determinants() {
        let ms = fan_section(&square(), &["a", "b"], &[square_line_bundle(1, 1), square_line_bundle(1, -1)]).unwrap().ms;
        let d = brane(&ms, ClosedGluing::default());
        let sd = assemble_sheaf(&ms, &d).unwrap();
        assert_eq!(sd.rank, 2);
        for m in sd.h.values() {
            let (c, e) = m.det().unwrap();
            assert!(!c.is_zero() && e.iter().all(|x| *x == 0));
        }
    }

    #[test]
    fn gauge_is_recovered() {
        let ms = fan_section(&square(), &["a", "b"], &[square_line_bundle(1, 1), square_line_bundle(1, -1)]).unwrap().ms;
        let sd = assemble_sheaf(&ms, &brane(&ms, ClosedGluing::default())).unwrap();
        let lambda: BTreeMap<String, Q> = sd.frames.values().flatten().enumerate().map(|(i, n)| (n.clone(), q(i as i64 + 2))).collect();
        let moved = apply_gauge(&sd, &lambda);
        assert!(check_transitions(&moved).is_empty());
        let found = find_gauge(&sd, &moved).unwrap();
        assert!(apply_gauge(&sd, &found).transitions == moved.transitions);
        let mut broken = moved.clone();
        let t = broken.transitions.values_mut().find(|t| !t.rows.iter().eq(t.cols.iter())).unwrap();
        let e = t.entries.values_mut().next().unwrap();
        e.coef = -e.coef.clone();
        assert!(find_gauge(&sd, &broken).is_none());
    }

    #[test]
    fn representative_shift_leaves_h_unchanged() {
        let ms = cube_fan();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sbar = random_closed_gluing(&ms.base, &mut rng, 2);
        let d = brane(&ms, sbar.clone());
        let f: BTreeMap<usize, IVec> = (0..ms.cover.lifts.len())
            .map(|x| (x, (0..ms.base.qrank[ms.cover.cell(x)]).map(|i| (x + i) as i64 % 3 - 1).collect()))
            .collect();
        let shifted = crate::obstruction::shift_slopes(&ms, &f);
        let w = crate::obstruction::shift_witness(&ms, &sbar, &f);
        let d2 = BraneData { k: d.k.mul(&w), ..d.clone() };
        assert_eq!(all_h_matrices(&ms, &d).unwrap(), all_h_matrices(&shifted, &d2).unwrap());
    }
}
