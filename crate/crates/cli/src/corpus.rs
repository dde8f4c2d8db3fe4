//! Example scenarios: the desk corpus, its negative controls, and the
//! `gen-example` generator.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tropsheaf::base::{cube, random_closed_gluing, random_potential, square, ClosedGluing};
use tropsheaf::cover::MultiSection;
use tropsheaf::equiv::Brane;
use tropsheaf::fixtures::{boundary_section, fan_section, plain_brane, ramified_brane, square_line_bundle};
use tropsheaf::lattice::PolytopeFaceLattice;
use tropsheaf::mult::{fmt_q, q, Q};
use tropsheaf::{Error, Result};

use crate::scenario::{BaseSection, KEntry, LocalEntry, PolytopeBase, PolytopeMode, Scenario};

/// What the pipeline should conclude on a scenario.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expect {
    /// Validates, has a trivial obstruction class, glues and roundtrips.
    Glues,
    /// Validates, but the obstruction class is nontrivial.
    Obstructed,
    /// Fails with findings whose check is one of `checks`, each naming
    /// every lift in `at`.
    Fails { checks: Vec<String>, at: Vec<String> },
}

#[derive(Clone, Debug)]
pub struct CorpusEntry {
    pub scenario: Scenario,
    pub expect: Expect,
}

fn polytope(fl: &PolytopeFaceLattice, mode: PolytopeMode) -> BaseSection {
    BaseSection::Polytope(PolytopeBase { vertices: fl.vertices.clone(), mode })
}

fn polytope_named(name: &str) -> Result<PolytopeFaceLattice> {
    match name {
        "square" => Ok(square()),
        "cube" => Ok(cube()),
        _ => Err(Error::Invalid(format!("unknown base {name:?}; expected square or cube"))),
    }
}

fn encode(name: &str, notes: &str, fl: &PolytopeFaceLattice, mode: PolytopeMode, ms: MultiSection, sbar: ClosedGluing) -> Result<Scenario> {
    let d = plain_brane(&ms, sbar)?;
    Ok(Scenario::from_brane(name, notes, &polytope(fl, mode), &Brane { ms, d }, false))
}

fn sheets_section(fl: &PolytopeFaceLattice, mode: PolytopeMode, sheets: &[&str], values: &[Vec<i64>]) -> Result<MultiSection> {
    match mode {
        PolytopeMode::Boundary => boundary_section(fl, sheets, values),
        PolytopeMode::Fan => Ok(fan_section(fl, sheets, values)?.ms),
    }
}

fn mat(a: [[i64; 2]; 2]) -> Vec<Vec<Q>> {
    a.iter().map(|r| r.iter().map(|&x| q(x)).collect()).collect()
}

/// `O(a,b)`, `Oab` with single digits, or `O(a,b)+O(c,d)`.
fn parse_bundles(kind: &str) -> Option<Vec<(i64, i64)>> {
    kind.split('+')
        .map(|part| {
            let body = part.strip_prefix('O')?;
            if let Some(inner) = body.strip_prefix('(').and_then(|s| s.strip_suffix(')')) {
                let (a, b) = inner.split_once(',')?;
                Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
            } else {
                let cs: Vec<char> = body.chars().collect();
                (cs.len() == 2).then_some(())?;
                Some((cs[0].to_digit(10)? as i64, cs[1].to_digit(10)? as i64))
            }
        })
        .collect()
}

pub const KINDS: &str = "trivial, O(a,b), O(a,b)+O(c,d), three-sheet, twisted, potential, obstructed, open-trivial, local-system, ramified-split, ramified-mixed";

/// One generated scenario. `seed` drives the random gluing kinds.
pub fn gen_example(base: &str, kind: &str, fan: bool, seed: u64) -> Result<Scenario> {
    let fl = polytope_named(base)?;
    let mode = if fan { PolytopeMode::Fan } else { PolytopeMode::Boundary };
    let n = fl.vertices.len();
    let tag = if fan { "-fan" } else { "" };
    let name = format!("{base}{tag}-{kind}");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        "trivial" => encode(&name, "one sheet, zero slopes, trivial gluing", &fl, mode, sheets_section(&fl, mode, &[""], &[vec![0; n]])?, ClosedGluing::default()),
        "three-sheet" if base == "square" => {
            let vals = [square_line_bundle(1, 1), square_line_bundle(1, -1), square_line_bundle(3, 1)];
            encode(&name, "three sheets with distinct slopes", &fl, mode, sheets_section(&fl, mode, &["a", "b", "c"], &vals)?, ClosedGluing::default())
        }
        "twisted" => {
            let ms = sheets_section(&fl, mode, &[""], &[vec![1; n]])?;
            let s = random_closed_gluing(&ms.base, &mut rng, 2);
            encode(&name, &format!("random closed gluing, seed {seed}"), &fl, mode, ms, s)
        }
        "potential" => {
            let ms = sheets_section(&fl, mode, &[""], &[vec![1; n]])?;
            let t = random_potential(&ms.base, &mut rng);
            let s = ClosedGluing::from_potential(&ms.base, &t);
            encode(&name, &format!("gluing of a random potential, seed {seed}"), &fl, mode, ms, s)
        }
        "obstructed" => {
            let ms = sheets_section(&fl, mode, &[""], &[vec![1; n]])?;
            for _ in 0..64 {
                let s = random_closed_gluing(&ms.base, &mut rng, 2);
                let d = plain_brane(&ms, s.clone())?;
                if tropsheaf::glue::assemble_sheaf(&ms, &d).is_err() {
                    return encode(&name, &format!("random closed gluing with a nontrivial class, seed {seed}"), &fl, mode, ms, s);
                }
            }
            Err(Error::Invalid(format!("no obstructed gluing found on {base}{tag}")))
        }
        "open-trivial" => {
            let ms = sheets_section(&fl, mode, &[""], &[vec![1; n]])?;
            let t = random_potential(&ms.base, &mut rng);
            let s = ClosedGluing::from_potential(&ms.base, &t);
            let mut sc = encode(&name, &format!("open gluing of a random potential, seed {seed}"), &fl, mode, ms, s)?;
            sc.gluing.kind = crate::scenario::GluingKind::Open;
            Ok(sc)
        }
        "local-system" if base == "square" => {
            let ms = sheets_section(&fl, mode, &[""], &[square_line_bundle(1, 1)])?;
            let mut sc = encode(&name, "O(1,1) twisted by the coboundary of 2^dim", &fl, mode, ms.clone(), ClosedGluing::default())?;
            let c = &ms.cover;
            sc.local_system = c
                .pairs(&ms.base)
                .into_iter()
                .map(|(x, y)| {
                    let e = ms.base.cells[c.cell(y)].dim as i64 - ms.base.cells[c.cell(x)].dim as i64;
                    LocalEntry { lower: c.name(x).into(), upper: c.name(y).into(), value: fmt_q(&tropsheaf::mult::qpow(&q(2), e)) }
                })
                .collect();
            Ok(sc.normalized())
        }
        "ramified-split" | "ramified-mixed" if !fan => {
            let mats = if kind == "ramified-split" { vec![mat([[1, 0], [0, 1]])] } else { vec![mat([[1, 0], [0, 1]]), mat([[1, 1], [0, 1]]), mat([[1, 0], [1, 1]])] };
            let (ms, d) = ramified_brane(&fl, &[vec![1; n], vec![1; n]], &mats)?;
            let notes = if kind == "ramified-split" { "two sheets joined at a vertex with a decomposable block" } else { "two sheets joined at a vertex with an irreducible block" };
            Ok(Scenario::from_brane(&name, notes, &polytope(&fl, mode), &Brane { ms, d }, false))
        }
        _ => {
            let bundles = parse_bundles(kind).filter(|_| base == "square").ok_or_else(|| Error::Invalid(format!("unknown kind {kind:?} for {base}{tag}; kinds: {KINDS}")))?;
            let sheets: Vec<String> = if bundles.len() == 1 { vec![String::new()] } else { (0..bundles.len()).map(|i| ((b'a' + i as u8) as char).to_string()).collect() };
            let names: Vec<&str> = sheets.iter().map(String::as_str).collect();
            let vals: Vec<Vec<i64>> = bundles.iter().map(|&(a, b)| square_line_bundle(a, b)).collect();
            let label: Vec<String> = bundles.iter().map(|(a, b)| format!("O({a},{b})")).collect();
            encode(&name, &format!("toric bundle {}", label.join(" + ")), &fl, mode, sheets_section(&fl, mode, &names, &vals)?, ClosedGluing::default())
        }
    }
}

fn entry(scenario: Scenario, expect: Expect) -> CorpusEntry {
    CorpusEntry { scenario, expect }
}

fn fails(checks: &[&str], at: &[String]) -> Expect {
    Expect::Fails { checks: checks.iter().map(|c| c.to_string()).collect(), at: at.to_vec() }
}

/// The positive desk corpus.
pub fn positive_corpus() -> Result<Vec<CorpusEntry>> {
    let g = |b: &str, k: &str, fan: bool, seed: u64| gen_example(b, k, fan, seed);
    Ok(vec![
        entry(g("square", "trivial", false, 0)?, Expect::Glues),
        entry(g("square", "O11", false, 0)?, Expect::Glues),
        entry(g("square", "O(1,1)+O(1,-1)", false, 0)?, Expect::Glues),
        entry(g("square", "three-sheet", false, 0)?, Expect::Glues),
        entry(g("square", "local-system", false, 0)?, Expect::Glues),
        entry(g("square", "open-trivial", false, 7)?, Expect::Glues),
        entry(g("square", "O(3,1)", true, 0)?, Expect::Glues),
        entry(g("square", "O(1,1)+O(3,1)", true, 0)?, Expect::Glues),
        entry(g("cube", "twisted", true, 3)?, Expect::Glues),
        entry(g("cube", "potential", false, 5)?, Expect::Glues),
        entry(g("cube", "ramified-split", false, 0)?, Expect::Glues),
        entry(g("cube", "ramified-mixed", false, 0)?, Expect::Glues),
        entry(g("cube", "obstructed", false, 1)?, Expect::Obstructed),
    ])
}

/// The negative controls, each a single localized corruption of a
/// positive scenario.
pub fn negative_controls() -> Result<Vec<CorpusEntry>> {
    // (a) Break the G cocycle: change one off-diagonal coefficient of the
    // vertex block between two distinct charts.
    let mut a = gen_example("cube", "ramified-mixed", false, 0)?;
    a.name = "negative-g-cocycle".into();
    a.notes = "one vertex coefficient of G changed".into();
    let blk = a.kaneyama.g.iter_mut().find(|b| b.lift == "v0.r" && b.charts.0 != b.charts.1).ok_or_else(|| Error::Invalid("no vertex block".into()))?;
    let e = blk.entries.iter_mut().next().ok_or_else(|| Error::Invalid("empty vertex block".into()))?;
    e.2 = fmt_q(&(tropsheaf::mult::parse_q(&e.2).unwrap() + q(5)));
    let a_at = vec!["v0.r".to_string()];

    // (b) Perturb k on one flag of a twisted fan scenario.
    let mut b = gen_example("cube", "twisted", true, 3)?;
    let built = b.build()?;
    let ms = built.ms();
    let mut k: BTreeMap<Vec<String>, Q> = BTreeMap::new();
    for (f, v) in &built.brane.d.k.values {
        k.insert(f.iter().map(|&x| ms.cover.name(x).to_string()).collect(), v.clone());
    }
    let c = &ms.cover;
    let (x, y) = c.pairs(&ms.base).into_iter().find(|&(x, y)| ms.base.cells[c.cell(x)].dim == 1 && ms.base.cells[c.cell(y)].dim == 2).unwrap();
    let flag = vec![c.name(x).to_string(), c.name(y).to_string()];
    let old = k.get(&flag).cloned().unwrap_or_else(|| q(1));
    k.insert(flag.clone(), old * q(3));
    b.k = Some(k.into_iter().map(|(flag, v)| KEntry { flag, value: fmt_q(&v) }).collect());
    b.name = "negative-k-flag".into();
    b.notes = format!("k on {} < {} multiplied by 3", flag[0], flag[1]);
    let b = b.normalized();

    // (c) A local-system table that is not a cocycle: one value on a
    // vertex-edge pair of the cube boundary, which has three-step chains.
    let mut cc = gen_example("cube", "trivial", false, 0)?;
    cc.name = "negative-local-system".into();
    cc.notes = "local-system value 2 on a single vertex-edge pair".into();
    let built = cc.build()?;
    let ms = built.ms();
    let c = &ms.cover;
    let (lx, ly) = c.pairs(&ms.base).into_iter().find(|&(x, y)| ms.base.cells[c.cell(x)].dim == 0 && ms.base.cells[c.cell(y)].dim == 1).unwrap();
    cc.local_system = vec![LocalEntry { lower: c.name(lx).into(), upper: c.name(ly).into(), value: "2".into() }];
    let c_at = vec![c.name(lx).to_string(), c.name(ly).to_string()];

    // (d) Break slope continuity: shift the apex slope on one maximal cone
    // of the square fan. The walls through that cone and the apex pairs
    // below it see the break.
    let mut d = gen_example("square", "O11", true, 0)?;
    d.name = "negative-slope".into();
    let s = d.slopes.iter_mut().find(|s| s.lift == "o" && !s.m.is_empty()).unwrap();
    s.m[0] += 1;
    d.notes = format!("slope of {} on {} shifted", s.lift, s.max_lift);
    let d_at = vec![s.lift.clone(), s.max_lift.clone()];

    Ok(vec![
        entry(a, fails(&["G3"], &a_at)),
        entry(b, fails(&["k-coboundary"], &flag)),
        entry(cc.normalized(), fails(&["local-system"], &c_at)),
        entry(d.normalized(), fails(&["continuity", "affine"], &d_at)),
    ])
}

pub fn full_corpus() -> Result<Vec<CorpusEntry>> {
    let mut all = positive_corpus()?;
    all.extend(negative_controls()?);
    Ok(all)
}
