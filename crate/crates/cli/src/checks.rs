//! Staged validation of a built scenario and the randomized property
//! suites for the obstruction theory.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use tropsheaf::base::{random_closed_gluing, random_potential, validate_closed_gluing, ClosedGluing, OpenGluing, is_trivial_gluing, open_to_closed};
use tropsheaf::cover::{validate_covering, MultiSection};
use tropsheaf::glue::{assemble_sheaf, BraneData};
use tropsheaf::kaneyama::{check_g_cocycle, local_system_violations, validate_g, validate_h};
use tropsheaf::lattice::IVec;
use tropsheaf::mult::fmt_q;
use tropsheaf::obstruction::{cech_differential, flag_name, flag_value, flags, obstruction_cochain, obstruction_hom_check, representative_shift_check, solve_coboundary, CechCochain};
use tropsheaf::report::Finding;
use tropsheaf::{Error, Result};

use crate::scenario::Built;

/// Findings of the first failing validation stage, with warnings from
/// every stage that ran.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Validation {
    pub stage: Option<String>,
    pub findings: Vec<Finding>,
    pub warnings: Vec<Finding>,
}

impl Validation {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }
}

/// Mathematical errors become a finding of the stage; input errors pass through.
fn lift<T>(stage: &str, r: Result<T>) -> Result<std::result::Result<T, Finding>> {
    match r {
        Ok(v) => Ok(Ok(v)),
        Err(e) if e.is_input_error() => Err(e),
        Err(e) => Ok(Err(Finding::new(stage, Vec::<String>::new(), e.to_string()))),
    }
}

/// `dk = c` on every pair of consecutive flags.
pub fn k_mismatches(ms: &MultiSection, k: &CechCochain, c: &CechCochain) -> Vec<Finding> {
    let dk = cech_differential(ms, k);
    flags(ms, 3)
        .into_iter()
        .filter(|f| dk.get(f) != c.get(f))
        .map(|f| Finding::new("k-coboundary", f.iter().map(|&x| ms.cover.name(x).to_string()), format!("dk {} vs c {}", fmt_q(&dk.get(&f)), fmt_q(&c.get(&f)))))
        .collect()
}

/// Stages in dependency order: covering, slopes, gluing, G, local system,
/// H, and the explicit `k` when one is given. Later stages presuppose the
/// earlier ones, so validation stops at the first failing stage.
pub fn validate_built(b: &Built) -> Result<Validation> {
    let ms = b.ms();
    let d = &b.brane.d;
    let mut v = Validation::default();
    let stage = |name: &str, findings: Vec<Finding>, v: &mut Validation| -> bool {
        if findings.is_empty() {
            return true;
        }
        v.stage = Some(name.to_string());
        v.findings = findings;
        false
    };
    if !stage("covering", validate_covering(&ms.base, &ms.cover), &mut v) {
        return Ok(v);
    }
    let slopes = match lift("slopes", tropsheaf::cover::validate_slopes(ms))? {
        Ok(r) => r.findings,
        Err(f) => vec![f],
    };
    if !stage("slopes", slopes, &mut v) {
        return Ok(v);
    }
    let gluing: Vec<Finding> = validate_closed_gluing(&ms.base, &d.sbar)?
        .into_iter()
        .map(|g| Finding::new("gluing-cocycle", [g.e1.0, g.e1.1, g.e2.1], format!("component {}: {} vs {}", g.component, g.composed, g.direct)))
        .collect();
    if !stage("gluing", gluing, &mut v) {
        return Ok(v);
    }
    let rg = validate_g(ms, &d.g)?;
    v.warnings.extend(rg.warnings);
    let mut gf = rg.findings;
    if gf.is_empty() {
        gf = check_g_cocycle(ms, &d.g)?;
    }
    if !stage("kaneyama-g", gf, &mut v) {
        return Ok(v);
    }
    if !stage("local-system", local_system_violations(ms, &b.local_system), &mut v) {
        return Ok(v);
    }
    let rh = validate_h(ms, &d.g, &d.h)?;
    v.warnings.extend(rh.warnings);
    if !stage("kaneyama-h", rh.findings, &mut v) {
        return Ok(v);
    }
    if b.explicit_k {
        let kf = match lift("k", obstruction_cochain(ms, &d.sbar))? {
            Ok(c) => k_mismatches(ms, &d.k, &c),
            Err(f) => vec![f],
        };
        stage("k", kf, &mut v);
    }
    Ok(v)
}

/// Per-flag values, closedness, triviality and the solving `k`.
#[derive(Clone, Debug, Serialize)]
pub struct ObstructionSummary {
    pub values: BTreeMap<String, String>,
    pub closed: bool,
    pub trivial: bool,
    pub witness: Option<BTreeMap<String, String>>,
}

pub fn obstruction_summary(ms: &MultiSection, s: &ClosedGluing) -> Result<ObstructionSummary> {
    let c = obstruction_cochain(ms, s)?;
    let closed = cech_differential(ms, &c).is_one();
    let k = solve_coboundary(ms, &c)?;
    let values = flags(ms, 3).into_iter().map(|f| (flag_name(ms, &f), fmt_q(&c.get(&f)))).collect();
    let witness = k.as_ref().map(|k| flags(ms, 2).into_iter().map(|f| (flag_name(ms, &f), fmt_q(&k.get(&f)))).collect());
    Ok(ObstructionSummary { values, closed, trivial: k.is_some(), witness })
}

/// Randomized checks on one multi-section.
#[derive(Clone, Debug, Default, Serialize)]
pub struct PropertyReport {
    pub seed: u64,
    pub samples: usize,
    /// Gluings where the solver verdict and the assembly verdict agree.
    pub solvability_agree: usize,
    pub solvable: usize,
    /// Solved witnesses satisfying `dk = c` exactly.
    pub witnesses_verified: usize,
    pub open_trivial_solved: usize,
    pub flags_checked: usize,
    pub flags_well_defined: usize,
    pub closed: usize,
    pub shifts_ok: usize,
    pub hom_ok: usize,
}

impl PropertyReport {
    pub fn all_pass(&self) -> bool {
        let n = self.samples;
        self.solvability_agree == n && self.witnesses_verified == self.solvable && self.open_trivial_solved == n && self.flags_well_defined == self.flags_checked && self.closed == n && self.shifts_ok == n && self.hom_ok == n
    }
}

/// `samples` random closed gluings (solver verdict against assembly
/// verdict), trivial open gluings, chart independence of every flag value,
/// closedness, random slope shifts and random pairs for multiplicativity.
pub fn property_suite(ms: &MultiSection, d: &BraneData, seed: u64, samples: usize) -> Result<PropertyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = PropertyReport { seed, samples, ..Default::default() };
    let base = &ms.base;
    let f3 = flags(ms, 3);
    for _ in 0..samples {
        let s = random_closed_gluing(base, &mut rng, 2);
        let c = obstruction_cochain(ms, &s)?;
        let k = solve_coboundary(ms, &c)?;
        if let Some(k) = &k {
            r.solvable += 1;
            r.witnesses_verified += usize::from(k_mismatches(ms, k, &c).is_empty());
        }
        let data = BraneData { k: k.clone().unwrap_or_else(|| CechCochain::one(1)), sbar: s.clone(), ..d.clone() };
        r.solvability_agree += usize::from(k.is_some() == assemble_sheaf(ms, &data).is_ok());
        r.closed += usize::from(cech_differential(ms, &c).is_one());
        for f in &f3 {
            r.flags_checked += 1;
            let last = *f.last().unwrap();
            let vals: Vec<_> = ms.star(last).into_iter().map(|a| flag_value(ms, &s, f, a)).collect();
            r.flags_well_defined += usize::from(vals.iter().all(|x| *x == c.get(f)));
        }

        let t = random_potential(base, &mut rng);
        let open = OpenGluing { values: ClosedGluing::from_potential(base, &t).values };
        let closed = open_to_closed(base, &open);
        let co = obstruction_cochain(ms, &closed)?;
        let solved = is_trivial_gluing(base, &open).is_some() && solve_coboundary(ms, &co)?.is_some_and(|k| k_mismatches(ms, &k, &co).is_empty());
        r.open_trivial_solved += usize::from(solved);

        let shift: BTreeMap<usize, IVec> = (0..ms.cover.lifts.len()).map(|x| (x, (0..base.qrank[ms.cover.cell(x)]).map(|_| rng.gen_range(-2..3)).collect())).collect();
        r.shifts_ok += usize::from(representative_shift_check(ms, &s, &shift)?);

        let s2 = random_closed_gluing(base, &mut rng, 2);
        r.hom_ok += usize::from(obstruction_hom_check(ms, &s, &s2)?);
    }
    Ok(r)
}

/// Exit code for an error: 2 for malformed input, 1 otherwise.
pub fn error_code(e: &Error) -> i32 {
    if e.is_input_error() {
        2
    } else {
        1
    }
}
