//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if
//! any criterion fails. Every check is an exact identity.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use serde_json::Value;
use tropsheaf::cover::{fan_structure_at, is_separable, MultiSection};
use tropsheaf::equiv::{check_leq, SearchBudget};
use tropsheaf::extract::{associated_multisection, check_localization, validate_tropical_structure};
use tropsheaf::glue::check_h_cocycle;
use tropsheaf::kaneyama::{check_g_cocycle, validate_g, validate_h};
use tropsheaf::obstruction::obstruction_cochain;
use tropsheaf_cli::checks::{obstruction_summary, property_suite};
use tropsheaf_cli::corpus::{gen_example, negative_controls, positive_corpus, CorpusEntry, Expect};
use tropsheaf_cli::descriptor::{decode_descriptor, DescriptorFile};
use tropsheaf_cli::run;
use tropsheaf_cli::scenario::Scenario;

type Verdict = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn positives() -> Vec<Scenario> {
    positive_corpus().expect("corpus builds").into_iter().map(|e| e.scenario).collect()
}

fn trivial_identity() -> Verdict {
    let start = Instant::now();
    let sc = gen_example("square", "trivial", false, 0).map_err(err)?;
    let b = sc.build().map_err(err)?;
    let o = run::glue(&sc).map_err(err)?;
    ensure(o.code == 0, || format!("glue exit {}", o.code))?;
    let df: DescriptorFile = serde_json::from_str(o.output.as_deref().unwrap_or("")).map_err(err)?;
    let sd = decode_descriptor(&df).map_err(err)?;
    ensure(sd.rank == 1, || format!("rank {}", sd.rank))?;
    ensure(!sd.transitions.is_empty(), || "no transitions".into())?;
    let bad: Vec<_> = sd.transitions.iter().filter(|(_, t)| !t.is_identity()).map(|(k, _)| *k).collect();
    ensure(bad.is_empty(), || format!("non-identity transitions {bad:?}"))?;
    let c = obstruction_cochain(b.ms(), &b.brane.d.sbar).map_err(err)?;
    ensure(c.is_one(), || "obstruction cochain is not identically 1".into())?;
    let t = start.elapsed();
    ensure(t < Duration::from_secs(1), || format!("took {t:?}"))?;
    Ok(format!("{} identity transitions, cochain = 1, {t:?}", sd.transitions.len()))
}

fn kaneyama_cocycles(scs: &[Scenario]) -> Verdict {
    ensure(scs.len() >= 8, || format!("only {} scenarios", scs.len()))?;
    let (mut ranks, mut obstructed) = (BTreeSet::new(), 0);
    for sc in scs {
        let b = sc.build().map_err(err)?;
        let (ms, d) = (b.ms(), &b.brane.d);
        let vg = validate_g(ms, &d.g).map_err(err)?;
        ensure(vg.findings.is_empty(), || format!("{}: validate_G {:?}", sc.name, vg.findings))?;
        let vh = validate_h(ms, &d.g, &d.h).map_err(err)?;
        ensure(vh.findings.is_empty(), || format!("{}: validate_H {:?}", sc.name, vh.findings))?;
        let g3 = check_g_cocycle(ms, &d.g).map_err(err)?;
        ensure(g3.is_empty(), || format!("{}: G cocycle {:?}", sc.name, g3))?;
        // Includes constancy of every H~ determinant. H~ carries the
        // trivializing cochain, so on an obstructed class only the cocycle
        // identity itself may fail, and it must.
        let h = check_h_cocycle(ms, d).map_err(err)?;
        if obstruction_summary(ms, &d.sbar).map_err(err)?.trivial {
            ensure(h.is_empty(), || format!("{}: H~ {:?}", sc.name, h))?;
        } else {
            ensure(!h.is_empty() && h.iter().all(|f| f.check == "H-cocycle"), || format!("{}: obstructed H~ {:?}", sc.name, h))?;
            obstructed += 1;
        }
        ranks.extend((0..ms.base.cells.len()).map(|t| ms.cover.over[t].iter().map(|&x| ms.cover.lifts[x].mult).sum::<u32>()));
    }
    ensure(ranks.contains(&1) && ranks.contains(&2), || format!("degrees seen {ranks:?}"))?;
    Ok(format!("{} scenarios, degrees {ranks:?}, H~ cocycle fails exactly on the {obstructed} obstructed", scs.len()))
}

fn solvability(scs: &[Scenario]) -> Verdict {
    let (mut solvable, mut total) = (0, 0);
    for (i, sc) in scs.iter().enumerate() {
        let b = sc.build().map_err(err)?;
        let r = property_suite(b.ms(), &b.brane.d, 1000 + i as u64, 50).map_err(err)?;
        ensure(r.solvability_agree == 50, || format!("{}: solver and assembly agree on {}/50", sc.name, r.solvability_agree))?;
        ensure(r.witnesses_verified == r.solvable, || format!("{}: {} of {} witnesses verify", sc.name, r.witnesses_verified, r.solvable))?;
        ensure(r.open_trivial_solved == 50, || format!("{}: open trivial solved {}/50", sc.name, r.open_trivial_solved))?;
        solvable += r.solvable;
        total += 50;
    }
    Ok(format!("{total} gluings, {solvable} solvable, all verdicts agree"))
}

fn obstruction_properties(scs: &[Scenario]) -> Verdict {
    let mut flags = 0;
    for (i, sc) in scs.iter().enumerate() {
        let b = sc.build().map_err(err)?;
        let s = obstruction_summary(b.ms(), &b.brane.d.sbar).map_err(err)?;
        ensure(s.closed, || format!("{}: own cochain not closed", sc.name))?;
        let r = property_suite(b.ms(), &b.brane.d, 2000 + i as u64, 20).map_err(err)?;
        ensure(r.flags_well_defined == r.flags_checked, || format!("{}: {}/{} flags chart independent", sc.name, r.flags_well_defined, r.flags_checked))?;
        ensure(r.closed == 20, || format!("{}: {}/20 closed", sc.name, r.closed))?;
        ensure(r.shifts_ok == 20, || format!("{}: {}/20 shifts", sc.name, r.shifts_ok))?;
        ensure(r.hom_ok == 20, || format!("{}: {}/20 pairs", sc.name, r.hom_ok))?;
        flags += r.flags_checked;
    }
    Ok(format!("{flags} flag evaluations, 20 shifts and 20 pairs on each of {} scenarios", scs.len()))
}

fn roundtrip(scs: &[Scenario]) -> Verdict {
    let mut n = 0;
    for sc in scs {
        let b = sc.build().map_err(err)?;
        if b.brane.glue().is_err() {
            continue;
        }
        let o = run::roundtrip(sc).map_err(err)?;
        ensure(o.code == 0, || format!("{}: {}", sc.name, o.report["body"]))?;
        ensure(o.report["body"]["roundtrip"]["gauge_equivalent"] == true, || format!("{}: not gauge equivalent", sc.name))?;
        ensure(o.report["body"]["fold_findings"] == Value::Array(vec![]), || format!("{}: fold {}", sc.name, o.report["body"]["fold_findings"]))?;
        let ext = b.brane.extracted().map_err(err)?;
        let w = check_leq(&b.brane, &ext, SearchBudget::default()).map_err(err)?;
        ensure(w.is_some(), || format!("{}: source is not below its extracted brane", sc.name))?;
        n += 1;
    }
    ensure(n > 0, || "no gluable scenarios".into())?;
    Ok(format!("{n} gluable scenarios round-trip with a verified fold"))
}

fn restriction() -> Verdict {
    let kinds = ["O(1,1)", "O(3,1)", "O(2,0)", "O(1,-1)", "O(1,1)+O(3,1)", "O(1,1)+O(1,-1)", "O(2,0)+O(0,2)"];
    for kind in kinds {
        let sc = gen_example("square", kind, true, 0).map_err(err)?;
        let o = run::restrict(&sc).map_err(err)?;
        ensure(o.code == 0, || format!("{kind}: {}", o.report["body"]))?;
        let df: DescriptorFile = serde_json::from_str(o.output.as_deref().unwrap_or("")).map_err(err)?;
        let sd = decode_descriptor(&df).map_err(err)?;
        validate_tropical_structure(&sd).map_err(|e| format!("{kind}: {e}"))?;
        let cs = sc.build().map_err(err)?.cone_section().map_err(err)?;
        let loc = check_localization(&cs, &sd).map_err(err)?;
        ensure(loc.is_empty(), || format!("{kind}: {loc:?}"))?;
        if is_separable(&cs).0 {
            let (ext, _) = associated_multisection(&sd).map_err(err)?;
            for x in 0..ext.cover.lifts.len() {
                let fs = fan_structure_at(&ext, x).map_err(err)?;
                ensure(is_separable(&fs).0, || format!("{kind}: separability lost at {}", ext.cover.name(x)))?;
            }
        }
    }
    Ok(format!("{} bundles restrict with matching localizations", kinds.len()))
}

/// Chains `x < y < z` of lifts that contain both `p` and `q`.
fn chains_through(ms: &MultiSection, p: &str, q: &str) -> BTreeSet<Vec<String>> {
    let c = &ms.cover;
    let n = c.lifts.len();
    let mut out = BTreeSet::new();
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                if c.lt(&ms.base, x, y) && c.lt(&ms.base, y, z) {
                    let names = vec![c.name(x).to_string(), c.name(y).to_string(), c.name(z).to_string()];
                    if names.iter().any(|s| s == p) && names.iter().any(|s| s == q) {
                        out.insert(names);
                    }
                }
            }
        }
    }
    out
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_tropsheaf"));
    c.env_remove("TROPSHEAF_REPORT_DIR");
    c
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("tropsheaf-acceptance-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn finding_sites(report: &Value) -> Vec<(String, Vec<String>)> {
    report["body"]["findings"]
        .as_array()
        .into_iter()
        .flatten()
        .map(|f| (f["check"].as_str().unwrap_or("").to_string(), f["at"].as_array().into_iter().flatten().filter_map(|s| s.as_str().map(String::from)).collect()))
        .collect()
}

fn negative_control(dir: &Path, e: &CorpusEntry) -> Result<(), String> {
    let sc = &e.scenario;
    let path = dir.join(format!("{}.json", sc.name));
    std::fs::write(&path, sc.to_canonical_string()).map_err(err)?;
    let out = bin().arg("validate").arg(&path).output().map_err(err)?;
    let code = out.status.code().unwrap_or(-1);
    ensure(code == 1, || format!("{}: exit {code}", sc.name))?;
    let report: Value = serde_json::from_slice(&out.stdout).map_err(err)?;
    let sites = finding_sites(&report);
    ensure(!sites.is_empty(), || format!("{}: no findings", sc.name))?;
    let Expect::Fails { checks, at } = &e.expect else {
        return Err(format!("{} is not a negative control", sc.name));
    };
    for (check, where_) in &sites {
        ensure(checks.contains(check), || format!("{}: unexpected check {check} at {where_:?}", sc.name))?;
        ensure(at.iter().all(|n| where_.contains(n)), || format!("{}: {check} at {where_:?} does not name {at:?}", sc.name))?;
    }
    // A perturbed pair shows up on exactly the chains through both of its ends.
    if checks.iter().any(|c| c == "k-coboundary" || c == "local-system") {
        let b = sc.build().map_err(err)?;
        let want = chains_through(b.ms(), &at[0], &at[1]);
        let got: BTreeSet<Vec<String>> = sites.iter().map(|(_, w)| w.clone()).collect();
        ensure(got == want, || format!("{}: localized to {got:?}, expected {want:?}", sc.name))?;
    }
    Ok(())
}

fn negatives(pos: &[Scenario]) -> Verdict {
    let negs = negative_controls().map_err(err)?;
    let dir = scratch("negatives");
    for e in &negs {
        negative_control(&dir, e)?;
    }
    // Adding the controls changes no other row.
    let alone = run::pipeline(pos, 0, 0);
    let mut all: Vec<Scenario> = pos.to_vec();
    all.extend(negs.iter().map(|e| e.scenario.clone()));
    let mixed = run::pipeline(&all, 0, 0);
    let rows = |o: &run::Outcome| o.report["body"]["rows"].as_array().cloned().unwrap_or_default();
    let (r1, r2) = (rows(&alone), rows(&mixed));
    ensure(r2.len() == r1.len() + negs.len(), || "row count".into())?;
    ensure(r2[..r1.len()] == r1[..], || "a positive row changed".into())?;
    for r in &r2[r1.len()..] {
        ensure(r["verdict"].as_str().is_some_and(|v| v.starts_with("fails:")), || format!("{} row verdict {}", r["scenario"], r["verdict"]))?;
    }
    Ok(format!("{} controls exit 1 at the expected sites; other rows unchanged", negs.len()))
}

fn determinism() -> Verdict {
    let dir = scratch("pipeline");
    let corpus = dir.join("corpus");
    let st = bin().arg("gen-corpus").arg(&corpus).output().map_err(err)?.status;
    ensure(st.success(), || "gen-corpus failed".into())?;
    let mut files: Vec<PathBuf> = std::fs::read_dir(&corpus).map_err(err)?.map(|e| e.unwrap().path()).collect();
    files.sort();
    let mut reports = Vec::new();
    let mut times = Vec::new();
    for i in 0..2 {
        let report = dir.join(format!("report-{i}.json"));
        let start = Instant::now();
        let out = bin().arg("pipeline").args(&files).arg("--report").arg(&report).output().map_err(err)?;
        times.push(start.elapsed());
        ensure(matches!(out.status.code(), Some(0 | 1)), || format!("pipeline exit {:?}", out.status.code()))?;
        reports.push(std::fs::read(&report).map_err(err)?);
    }
    ensure(times.iter().all(|t| *t < Duration::from_secs(60)), || format!("runs took {times:?}"))?;
    ensure(reports[0] == reports[1], || "reports differ between runs".into())?;
    let r: Value = serde_json::from_slice(&reports[0]).map_err(err)?;
    let rows = r["body"]["rows"].as_array().map(Vec::len).unwrap_or(0);
    ensure(rows == files.len(), || format!("{rows} rows for {} files", files.len()))?;
    Ok(format!("{rows} scenarios, runs {:?} and {:?}, {} identical bytes", times[0], times[1], reports[0].len()))
}

fn main() {
    let pos = positives();
    let criteria: Vec<(&str, Box<dyn Fn() -> Verdict>)> = vec![
        ("trivial scenario glues to identity transitions", Box::new(trivial_identity)),
        ("Kaneyama cocycles hold on the corpus", Box::new(|| kaneyama_cocycles(&pos))),
        ("solvability matches assembly on random gluings", Box::new(|| solvability(&pos))),
        ("obstruction class is well defined and multiplicative", Box::new(|| obstruction_properties(&pos))),
        ("glue, extract, glue is gauge equivalent", Box::new(|| roundtrip(&pos))),
        ("toric bundles restrict with matching localizations", Box::new(restriction)),
        ("negative controls fail at exactly their sites", Box::new(|| negatives(&pos))),
        ("pipeline is fast and deterministic", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (label, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {} PASS: {label} ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} FAIL: {label} ({detail})", i + 1);
            }
        }
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
