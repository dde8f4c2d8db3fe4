//! The obstruction 2-cochain of a closed gluing datum on the nerve of the
//! lift poset, its Čech differential, and the coboundary solve.
//!
//! The nerve is the order complex of strict lift flags. Cochains take values
//! in nonzero rationals; missing flags carry 1.

use std::collections::BTreeMap;

use num_traits::One;

use crate::base::ClosedGluing;
use crate::cover::MultiSection;
use crate::error::{Error, Result};
use crate::lattice::{vadd, IVec};
use crate::mult::{fmt_q, solve_multiplicative, Q};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CechCochain {
    pub degree: usize,
    /// Strict flags `x_0 <' ... <' x_d`; absent flags carry 1.
    pub values: BTreeMap<Vec<usize>, Q>,
}

impl CechCochain {
    pub fn one(degree: usize) -> Self {
        CechCochain { degree, values: BTreeMap::new() }
    }

    pub fn get(&self, flag: &[usize]) -> Q {
        self.values.get(flag).cloned().unwrap_or_else(Q::one)
    }

    pub fn set(&mut self, flag: Vec<usize>, v: Q) {
        if v.is_one() {
            self.values.remove(&flag);
        } else {
            self.values.insert(flag, v);
        }
    }

    pub fn is_one(&self) -> bool {
        self.values.values().all(One::is_one)
    }

    pub fn mul(&self, other: &CechCochain) -> CechCochain {
        assert_eq!(self.degree, other.degree, "cochain degrees differ");
        let mut out = self.clone();
        for (f, v) in &other.values {
            let x = out.get(f) * v;
            out.set(f.clone(), x);
        }
        out
    }

    pub fn inv(&self) -> CechCochain {
        CechCochain { degree: self.degree, values: self.values.iter().map(|(f, v)| (f.clone(), v.recip())).collect() }
    }

    /// Values keyed by `x<y<z` lift names, for reports.
    pub fn named(&self, ms: &MultiSection) -> BTreeMap<String, String> {
        self.values.iter().map(|(f, v)| (flag_name(ms, f), fmt_q(v))).collect()
    }
}

pub fn flag_name(ms: &MultiSection, f: &[usize]) -> String {
    f.iter().map(|&x| ms.cover.name(x)).collect::<Vec<_>>().join("<")
}

/// Strict flags of length `len` in the lift poset.
pub fn flags(ms: &MultiSection, len: usize) -> Vec<Vec<usize>> {
    let (b, c) = (&ms.base, &ms.cover);
    let n = c.lifts.len();
    let mut out: Vec<Vec<usize>> = (0..n).map(|x| vec![x]).collect();
    for _ in 1..len {
        out = out
            .into_iter()
            .flat_map(|f| {
                let last = *f.last().unwrap();
                (0..n).filter(move |&y| c.lt(b, last, y)).map(move |y| {
                    let mut g = f.clone();
                    g.push(y);
                    g
                })
            })
            .collect();
    }
    out
}

/// `s_{t1 t2 t3}(a) = s_{g1}(m_{t2}(a)) s_{g2}(m_{t3}(a)) / s_{g3}(m_{t3}(a))`
/// for a maximal lift `a` above the flag.
pub fn flag_value(ms: &MultiSection, s: &ClosedGluing, f: &[usize], a: usize) -> Q {
    let (b, c) = (&ms.base, &ms.cover);
    let (t1, t2, t3) = (c.cell(f[0]), c.cell(f[1]), c.cell(f[2]));
    let m2 = ms.m(f[1], a);
    let m3 = ms.m(f[2], a);
    s.eval(b, t1, t2, m2) * s.eval(b, t2, t3, m3) / s.eval(b, t1, t3, m3)
}

pub fn obstruction_cochain(ms: &MultiSection, s: &ClosedGluing) -> Result<CechCochain> {
    ms.check_complete()?;
    let mut out = CechCochain::one(2);
    for f in flags(ms, 3) {
        let star = ms.star(f[2]);
        let first = star[0];
        let v = flag_value(ms, s, &f, first);
        for &a in &star[1..] {
            let w = flag_value(ms, s, &f, a);
            if w != v {
                return Err(Error::WellDefinednessFailure {
                    flag: flag_name(ms, &f),
                    first: ms.cover.name(first).into(),
                    first_value: fmt_q(&v),
                    second: ms.cover.name(a).into(),
                    second_value: fmt_q(&w),
                });
            }
        }
        out.set(f, v);
    }
    Ok(out)
}

/// The alternating multiplicative differential.
pub fn cech_differential(ms: &MultiSection, c: &CechCochain) -> CechCochain {
    let mut out = CechCochain::one(c.degree + 1);
    for f in flags(ms, c.degree + 2) {
        let mut v = Q::one();
        for i in 0..f.len() {
            let mut face = f.clone();
            face.remove(i);
            let x = c.get(&face);
            v = if i % 2 == 0 { v * x } else { v / x };
        }
        out.set(f, v);
    }
    out
}

/// A degree-1 cochain `k` with `dk = c`, if one exists over the rationals.
pub fn solve_coboundary(ms: &MultiSection, c: &CechCochain) -> Result<Option<CechCochain>> {
    if c.degree == 0 {
        return Err(Error::Invalid("coboundary solve needs positive degree".into()));
    }
    let d = cech_differential(ms, c);
    if let Some(f) = d.values.keys().next() {
        return Err(Error::NotClosed(flag_name(ms, f)));
    }
    let rows = flags(ms, c.degree + 1);
    let cols = flags(ms, c.degree);
    let pos: BTreeMap<&Vec<usize>, usize> = cols.iter().enumerate().map(|(i, f)| (f, i)).collect();
    let mut a = vec![vec![0i64; cols.len()]; rows.len()];
    for (r, f) in rows.iter().enumerate() {
        for i in 0..f.len() {
            let mut face = f.clone();
            face.remove(i);
            a[r][pos[&face]] += if i % 2 == 0 { 1 } else { -1 };
        }
    }
    let b: Vec<Q> = rows.iter().map(|f| c.get(f)).collect();
    Ok(solve_multiplicative(&a, rows.len(), cols.len(), &b).map(|k| {
        let mut out = CechCochain::one(c.degree - 1);
        for (f, v) in cols.into_iter().zip(k) {
            out.set(f, v);
        }
        out
    }))
}

pub fn obstruction_hom_check(ms: &MultiSection, s1: &ClosedGluing, s2: &ClosedGluing) -> Result<bool> {
    let prod = obstruction_cochain(ms, &s1.mul(&ms.base, s2))?;
    Ok(prod == obstruction_cochain(ms, s1)?.mul(&obstruction_cochain(ms, s2)?))
}

/// Slopes shifted by `f[x]` in `Q_{cell x}^*` on every lift.
pub fn shift_slopes(ms: &MultiSection, f: &BTreeMap<usize, IVec>) -> MultiSection {
    let mut out = ms.clone();
    for ((x, _), m) in out.slopes.iter_mut() {
        if let Some(d) = f.get(x) {
            *m = vadd(m, d);
        }
    }
    out
}

/// `k_{xy} = s_{x -> y}(f_y)`: the shifted cochain is the original times `dk`.
pub fn shift_witness(ms: &MultiSection, s: &ClosedGluing, f: &BTreeMap<usize, IVec>) -> CechCochain {
    let (b, c) = (&ms.base, &ms.cover);
    let mut k = CechCochain::one(1);
    for (x, y) in c.pairs(b) {
        if let Some(fy) = f.get(&y) {
            k.set(vec![x, y], s.eval(b, c.cell(x), c.cell(y), fy));
        }
    }
    k
}

pub fn representative_shift_check(ms: &MultiSection, s: &ClosedGluing, f: &BTreeMap<usize, IVec>) -> Result<bool> {
    let old = obstruction_cochain(ms, s)?;
    let new = obstruction_cochain(&shift_slopes(ms, f), s)?;
    let k = shift_witness(ms, s, f);
    Ok(new == old.mul(&cech_differential(ms, &k)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::{cube, random_closed_gluing, random_potential};
    use crate::cover::validate_slopes;
    use crate::fixtures::{boundary_section, fan_section};
    use crate::lattice::{det, vneg};
    use crate::mult::{eval_character, q, CoprimeBase};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cube_fan() -> MultiSection {
        // Support function of the cube: it bends along every edge.
        fan_section(&cube(), &[""], &[vec![1; 8]]).unwrap().ms
    }

    #[test]
    fn trivial_inputs_give_trivial_cochains() {
        let ms = cube_fan();
        assert!(obstruction_cochain(&ms, &ClosedGluing::default()).unwrap().is_one());
        let zero = fan_section(&cube(), &[""], &[vec![0; 8]]).unwrap().ms;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = random_closed_gluing(&zero.base, &mut rng, 2);
        assert!(obstruction_cochain(&zero, &s).unwrap().is_one());
    }

    #[test]
    fn flag_values_match_the_correction_formula() {
        let ms = cube_fan();
        let corr = validate_slopes(&ms).unwrap().corrections;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut nontrivial = 0;
        for _ in 0..5 {
            let s = random_closed_gluing(&ms.base, &mut rng, 2);
            let c = obstruction_cochain(&ms, &s).unwrap();
            for f in flags(&ms, 3) {
                // Oracle: the factors telescope to s_{g1}(-m_{yz}).
                let (t1, t2) = (ms.cover.cell(f[0]), ms.cover.cell(f[1]));
                let expect = s.eval(&ms.base, t1, t2, &vneg(&corr[&(f[1], f[2])]));
                assert_eq!(c.get(&f), expect);
                for a in ms.star(f[2]) {
                    assert_eq!(flag_value(&ms, &s, &f, a), expect);
                }
            }
            nontrivial += usize::from(!c.is_one());
            assert!(cech_differential(&ms, &c).is_one());
        }
        assert!(nontrivial > 0);
    }

    #[test]
    fn non_closed_gluing_breaks_well_definedness() {
        // A value on v -> e alone violates the cocycle identity along
        // o -> v -> e, and the two facets over e see different slopes there.
        let ms = cube_fan();
        let b = &ms.base;
        let v = b.cell_index("v0").unwrap();
        let e = (0..b.cells.len()).find(|&e| b.cells[e].dim == 2 && b.lt(v, e)).unwrap();
        let mut s = ClosedGluing::default();
        s.values.insert((v, e), vec![q(2)]);
        match obstruction_cochain(&ms, &s) {
            Err(Error::WellDefinednessFailure { flag, first_value, second_value, .. }) => {
                assert_eq!(flag, format!("o<v0<{}", b.name(e)));
                assert_ne!(first_value, second_value);
            }
            other => panic!("expected a well-definedness failure, got {other:?}"),
        }
    }

    #[test]
    fn differential_squares_to_one() {
        let ms = cube_fan();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut k = CechCochain::one(1);
        for f in flags(&ms, 2) {
            k.set(f, crate::mult::qf(rng.gen_range(1..5), rng.gen_range(1..5)));
        }
        let dk = cech_differential(&ms, &k);
        // Oracle: expand the formula of a degree-1 differential directly.
        for f in flags(&ms, 3) {
            assert_eq!(dk.get(&f), k.get(&[f[0], f[1]]) * k.get(&[f[1], f[2]]) / k.get(&[f[0], f[2]]));
        }
        assert!(cech_differential(&ms, &dk).is_one());
        let sol = solve_coboundary(&ms, &dk).unwrap().unwrap();
        assert_eq!(cech_differential(&ms, &sol), dk);
        assert!(solve_coboundary(&ms, &CechCochain::one(2)).unwrap().unwrap().is_one());
    }

    /// Orientation of the barycentric triangle of a flag `v < e < f` on the
    /// boundary of a 3-polytope containing the origin.
    fn orientation(ms: &MultiSection, fl: &crate::lattice::PolytopeFaceLattice, f: &[usize]) -> i64 {
        let sets = ms.base.vertex_sets.as_ref().unwrap();
        let bary = |x: usize| -> IVec {
            let vs = &sets[ms.cover.cell(x)];
            let mut s = vec![0; 3];
            for &v in vs {
                s = vadd(&s, &fl.vertices[v]);
            }
            s.iter().map(|c| c * 12 / vs.len() as i64).collect()
        };
        det(&vec![bary(f[0]), bary(f[1]), bary(f[2])]).signum()
    }

    #[test]
    fn sphere_nerve_detects_non_coboundaries() {
        let fl = cube();
        let ms = boundary_section(&fl, &[""], &[vec![1; 8]]).unwrap();
        let fs = flags(&ms, 3);
        assert_eq!(fs.len(), 48);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for trial in 0..12 {
            let mut c = CechCochain::one(2);
            for f in &fs {
                let e: i64 = rng.gen_range(-1..2);
                let neg = rng.gen_bool(0.2);
                let v = crate::mult::qpow(&q(2), e);
                c.set(f.clone(), if neg { -v } else { v });
            }
            if trial == 0 {
                c = CechCochain::one(2);
                c.set(fs[0].clone(), q(2));
            }
            // Oracle: on a 2-sphere a 2-cochain is a coboundary iff its
            // oriented exponent sum vanishes and it has an even number of
            // negative values.
            let mut base = CoprimeBase::default();
            base.add_rational(&q(2));
            let mut sum = 0;
            let mut negs = 0;
            for f in &fs {
                let (neg, e) = base.exponents(&c.get(f));
                sum += orientation(&ms, &fl, f) * e[0];
                negs += usize::from(neg);
            }
            let expect = sum == 0 && negs % 2 == 0;
            let got = solve_coboundary(&ms, &c).unwrap();
            assert_eq!(got.is_some(), expect, "trial {trial}");
            if let Some(k) = got {
                assert_eq!(cech_differential(&ms, &k), c);
            }
        }
    }

    #[test]
    fn not_closed_is_rejected() {
        let ms = cube_fan();
        let mut c = CechCochain::one(2);
        c.set(flags(&ms, 3)[0].clone(), q(3));
        assert!(matches!(solve_coboundary(&ms, &c), Err(Error::NotClosed(_))));
    }

    #[test]
    fn potential_gluing_has_the_explicit_witness() {
        let ms = cube_fan();
        let corr = validate_slopes(&ms).unwrap().corrections;
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let t = random_potential(&ms.base, &mut rng);
        let s = ClosedGluing::from_potential(&ms.base, &t);
        let c = obstruction_cochain(&ms, &s).unwrap();
        let mut k = CechCochain::one(1);
        for (x, y) in ms.cover.pairs(&ms.base) {
            k.set(vec![x, y], eval_character(&t[ms.cover.cell(x)], &corr[&(x, y)]));
        }
        assert_eq!(cech_differential(&ms, &k), c);
        assert!(solve_coboundary(&ms, &c).unwrap().is_some());
    }

    #[test]
    fn homomorphism_and_inverse() {
        let ms = cube_fan();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s1 = random_closed_gluing(&ms.base, &mut rng, 2);
        let s2 = random_closed_gluing(&ms.base, &mut rng, 2);
        assert!(obstruction_hom_check(&ms, &s1, &s2).unwrap());
        assert!(obstruction_hom_check(&ms, &s1, &ClosedGluing::default()).unwrap());
        assert!(obstruction_cochain(&ms, &s1.mul(&ms.base, &s1.inv())).unwrap().is_one());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn shifts_change_the_cochain_by_a_coboundary(seed in 0u64..1000) {
            let ms = cube_fan();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_closed_gluing(&ms.base, &mut rng, 2);
            let f: BTreeMap<usize, IVec> = (0..ms.cover.lifts.len())
                .map(|x| (x, (0..ms.base.qrank[ms.cover.cell(x)]).map(|_| rng.gen_range(-2..3)).collect()))
                .collect();
            prop_assert!(representative_shift_check(&ms, &s, &f).unwrap());
            let old = solve_coboundary(&ms, &obstruction_cochain(&ms, &s).unwrap()).unwrap();
            let new = solve_coboundary(&ms, &obstruction_cochain(&shift_slopes(&ms, &f), &s).unwrap()).unwrap();
            prop_assert_eq!(old.is_some(), new.is_some());
        }
    }
}
