//! Subcommand implementations. Each returns an exit code, a report and an
//! optional output file; exit code 0 is a clean verdict, 1 a mathematical
//! failure, 2 malformed input.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{json, Value};
use tropsheaf::equiv::{check_combinatorial_equivalence, correspondence_harness, Brane, EquivalenceStep, SearchBudget};
use tropsheaf::extract::{associated_multisection, check_covering_morphism_to_source, check_localization, fold_to_source, restrict_toric_bundle, roundtrip_check, validate_tropical_structure};
use tropsheaf::glue::{assemble_sheaf, build_global_frames, check_frames, check_h_cocycle, check_transitions, SheafDescriptor};
use tropsheaf::report::Finding;
use tropsheaf::{Error, Result};

use crate::checks::{error_code, obstruction_summary, property_suite, validate_built, Validation};
use crate::descriptor::{decode_descriptor, descriptor_to_string, encode_descriptor, DescriptorFile};
use crate::scenario::{BaseSection, Built, PolytopeMode, Scenario};

pub const REPORT_FORMAT: &str = "tropsheaf-report";

#[derive(Clone, Debug)]
pub struct Outcome {
    pub code: i32,
    pub report: Value,
    /// Descriptor or scenario text for `--out`.
    pub output: Option<String>,
}

fn verdict(code: i32) -> &'static str {
    match code {
        0 => "ok",
        1 => "fail",
        _ => "error",
    }
}

fn outcome(command: &str, subject: &str, code: i32, body: impl Serialize) -> Outcome {
    let report = json!({
        "format": REPORT_FORMAT,
        "format_version": crate::scenario::FORMAT_VERSION,
        "command": command,
        "subject": subject,
        "verdict": verdict(code),
        "body": serde_json::to_value(body).expect("report body serializes"),
    });
    Outcome { code, report, output: None }
}

/// The report for an error raised while running `command`.
pub fn error_outcome(command: &str, subject: &str, e: &Error) -> Outcome {
    let kind = if e.is_input_error() { "input" } else { "math" };
    outcome(command, subject, error_code(e), json!({ "error": e.to_string(), "kind": kind }))
}

/// Runs `f`, turning its error into a report.
pub fn guarded(command: &str, subject: &str, f: impl FnOnce() -> Result<Outcome>) -> Outcome {
    f().unwrap_or_else(|e| error_outcome(command, subject, &e))
}

fn validation_failure(command: &str, name: &str, v: &Validation) -> Outcome {
    outcome(command, name, 1, json!({ "stage": "validate", "validation": v }))
}

pub fn validate(sc: &Scenario) -> Result<Outcome> {
    let v = validate_built(&sc.build()?)?;
    Ok(outcome("validate", &sc.name, if v.is_clean() { 0 } else { 1 }, v))
}

pub fn obstruction(sc: &Scenario) -> Result<Outcome> {
    let b = sc.build()?;
    let v = validate_built(&b)?;
    if !v.is_clean() {
        return Ok(validation_failure("obstruction", &sc.name, &v));
    }
    let s = obstruction_summary(b.ms(), &b.brane.d.sbar)?;
    Ok(outcome("obstruction", &sc.name, if s.closed && s.trivial { 0 } else { 1 }, s))
}

/// The assembly checks in order, stopping at the first that fails.
fn glue_findings(b: &Built) -> Result<std::result::Result<SheafDescriptor, (String, Vec<Finding>)>> {
    let (ms, d) = (b.ms(), &b.brane.d);
    let h = check_h_cocycle(ms, d)?;
    if !h.is_empty() {
        return Ok(Err(("H-cocycle".into(), h)));
    }
    let frames = match build_global_frames(ms, d) {
        Ok(f) => f,
        Err(e) if e.is_input_error() => return Err(e),
        Err(e) => return Ok(Err(("frames".into(), vec![Finding::new("frame", Vec::<String>::new(), e.to_string())]))),
    };
    let f = check_frames(ms, d, &frames)?;
    if !f.is_empty() {
        return Ok(Err(("frames".into(), f)));
    }
    let sd = assemble_sheaf(ms, d)?;
    let t = check_transitions(&sd);
    if !t.is_empty() {
        return Ok(Err(("transitions".into(), t)));
    }
    Ok(Ok(sd))
}

#[derive(Serialize)]
struct GlueBody {
    rank: usize,
    charts: usize,
    transitions: usize,
    identity_transitions: usize,
    frames: BTreeMap<String, Vec<String>>,
}

pub fn glue(sc: &Scenario) -> Result<Outcome> {
    let b = sc.build()?;
    let v = validate_built(&b)?;
    if !v.is_clean() {
        return Ok(validation_failure("glue", &sc.name, &v));
    }
    match glue_findings(&b)? {
        Err((stage, findings)) => Ok(outcome("glue", &sc.name, 1, json!({ "stage": stage, "findings": findings }))),
        Ok(sd) => {
            let file = encode_descriptor(&sc.name, &sc.base, &sd);
            let body = GlueBody {
                rank: sd.rank,
                charts: sd.frames.len(),
                transitions: sd.transitions.len(),
                identity_transitions: sd.transitions.values().filter(|t| t.is_identity()).count(),
                frames: file.frames.clone(),
            };
            let mut out = outcome("glue", &sc.name, 0, body);
            out.output = Some(descriptor_to_string(&file));
            Ok(out)
        }
    }
}

/// Certificate, then the associated brane written as a scenario.
pub fn extract(df: &DescriptorFile) -> Result<Outcome> {
    let sd = decode_descriptor(df)?;
    let cert = match validate_tropical_structure(&sd) {
        Ok(c) => c,
        Err(e @ Error::NotEquivariant(_)) => return Ok(outcome("extract", &df.name, 1, json!({ "stage": "certificate", "error": e.to_string() }))),
        Err(e) => return Err(e),
    };
    let (ms, d) = associated_multisection(&sd)?;
    let name = format!("{}-extracted", df.name);
    let sc = Scenario::from_brane(&name, &format!("associated brane of {}", df.name), &df.base, &Brane { ms, d }, false);
    let mut out = outcome("extract", &df.name, 0, json!({ "certificate": cert, "lifts": sc.cover.lifts.iter().map(|l| &l.name).collect::<Vec<_>>() }));
    out.output = Some(sc.to_canonical_string());
    Ok(out)
}

/// Restriction of a toric bundle given on a fan-mode polytope base.
pub fn restrict(sc: &Scenario) -> Result<Outcome> {
    let b = sc.build()?;
    let BaseSection::Polytope(p) = &sc.base else {
        return Err(Error::Invalid("restrict needs a polytope base in fan mode".into()));
    };
    if p.mode != PolytopeMode::Fan {
        return Err(Error::Invalid("restrict needs a polytope base in fan mode".into()));
    }
    let v = validate_built(&b)?;
    if !v.is_clean() {
        return Ok(validation_failure("restrict", &sc.name, &v));
    }
    let cs = b.cone_section()?;
    let fl = b.fl.as_ref().expect("polytope bases carry a face lattice");
    let sd = match restrict_toric_bundle(fl, &cs, &b.brane.d.g) {
        Ok(sd) => sd,
        Err(e) if e.is_input_error() => return Err(e),
        Err(e) => return Ok(outcome("restrict", &sc.name, 1, json!({ "stage": "restrict", "error": e.to_string() }))),
    };
    let cert = validate_tropical_structure(&sd)?;
    let loc = check_localization(&cs, &sd)?;
    let boundary = BaseSection::Polytope(crate::scenario::PolytopeBase { vertices: p.vertices.clone(), mode: PolytopeMode::Boundary });
    let file = encode_descriptor(&format!("{}-restricted", sc.name), &boundary, &sd);
    let code = if loc.is_empty() { 0 } else { 1 };
    let mut out = outcome("restrict", &sc.name, code, json!({ "certificate": cert, "localization": loc, "rank": sd.rank }));
    out.output = Some(descriptor_to_string(&file));
    Ok(out)
}

pub fn roundtrip(sc: &Scenario) -> Result<Outcome> {
    let b = sc.build()?;
    let v = validate_built(&b)?;
    if !v.is_clean() {
        return Ok(validation_failure("roundtrip", &sc.name, &v));
    }
    if let Err((stage, findings)) = glue_findings(&b)? {
        return Ok(outcome("roundtrip", &sc.name, 1, json!({ "stage": stage, "findings": findings })));
    }
    let (ms, d) = (b.ms(), &b.brane.d);
    let r = roundtrip_check(ms, d)?;
    let fold_findings = check_covering_morphism_to_source(ms, d)?;
    let (ext, _) = associated_multisection(&assemble_sheaf(ms, d)?)?;
    let fold: BTreeMap<String, String> = fold_to_source(ms, &ext)?.into_iter().enumerate().map(|(x, y)| (ext.cover.name(x).to_string(), ms.cover.name(y).to_string())).collect();
    let code = if r.gauge_equivalent && fold_findings.is_empty() { 0 } else { 1 };
    Ok(outcome("roundtrip", &sc.name, code, json!({ "roundtrip": r, "fold": fold, "fold_findings": fold_findings })))
}

fn step_view(prev: &Brane, next: &Brane, step: &EquivalenceStep) -> Value {
    json!({
        "upper": step.upper_kind,
        "upper_lifts": step.upper.ms.cover.lifts.iter().map(|l| &l.name).collect::<Vec<_>>(),
        "to_left": step.left.view(&step.upper.ms, &prev.ms),
        "to_right": step.right.view(&step.upper.ms, &next.ms),
    })
}

pub fn equiv(a: &Scenario, b: &Scenario, depth: usize) -> Result<Outcome> {
    let (ba, bb) = (a.build()?.brane, b.build()?.brane);
    let subject = format!("{} ~ {}", a.name, b.name);
    let v = check_combinatorial_equivalence(&ba, &bb, depth, SearchBudget::default())?;
    match v.chain {
        Some(chain) => {
            let mut prev = &ba;
            let mut steps = Vec::new();
            for (next, step) in &chain {
                steps.push(step_view(prev, next, step));
                prev = next;
            }
            Ok(outcome("equiv", &subject, 0, json!({ "depth": depth, "equivalent": true, "chain": steps })))
        }
        None => Ok(outcome("equiv", &subject, 1, json!({ "depth": depth, "equivalent": false, "detail": format!("none at depth {depth}") }))),
    }
}

pub fn correspond(scs: &[Scenario]) -> Result<Outcome> {
    let mut branes = Vec::new();
    let mut descriptors = Vec::new();
    for sc in scs {
        let b = sc.build()?;
        if let Ok(sd) = b.brane.glue() {
            descriptors.push((sc.name.clone(), sd));
        }
        branes.push((sc.name.clone(), b.brane));
    }
    let r = correspondence_harness(&branes, &descriptors, SearchBudget::default());
    let subject = scs.iter().map(|s| s.name.as_str()).collect::<Vec<_>>().join(",");
    Ok(outcome("correspond", &subject, if r.all_pass() { 0 } else { 1 }, r))
}

/// Per-scenario verdicts of every stage of the pipeline.
#[derive(Clone, Debug, Serialize)]
pub struct PipelineRow {
    pub scenario: String,
    pub stages: BTreeMap<String, String>,
    pub verdict: String,
    pub findings: Vec<Finding>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub properties: Option<crate::checks::PropertyReport>,
}

fn code_of(o: &Outcome) -> String {
    verdict(o.code).to_string()
}

fn findings_of(o: &Outcome) -> Vec<Finding> {
    let body = &o.report["body"];
    let list = if body["validation"].is_object() { &body["validation"]["findings"] } else { &body["findings"] };
    serde_json::from_value::<Vec<Value>>(list.clone())
        .unwrap_or_default()
        .into_iter()
        .filter_map(|f| Some(Finding::new(f["check"].as_str()?, f["at"].as_array()?.iter().filter_map(|s| s.as_str().map(String::from)), f["detail"].as_str()?)))
        .collect()
}

/// validate, obstruction, glue, extract, roundtrip and correspond on one
/// scenario, plus the property suite when `samples > 0`.
pub fn pipeline_row(sc: &Scenario, seed: u64, samples: usize) -> PipelineRow {
    let mut stages = BTreeMap::new();
    let row = |stages: &BTreeMap<String, String>, verdict: &str, findings: Vec<Finding>, properties| PipelineRow { scenario: sc.name.clone(), stages: stages.clone(), verdict: verdict.into(), findings, properties };
    let v = guarded("validate", &sc.name, || validate(sc));
    stages.insert("validate".into(), code_of(&v));
    if v.code != 0 {
        let verdict = if v.code == 2 { "input-error".to_string() } else { format!("fails:{}", v.report["body"]["stage"].as_str().unwrap_or("validate")) };
        return row(&stages, &verdict, findings_of(&v), None);
    }
    let o = guarded("obstruction", &sc.name, || obstruction(sc));
    stages.insert("obstruction".into(), code_of(&o));
    let properties = if samples > 0 {
        sc.build().ok().and_then(|b| property_suite(b.ms(), &b.brane.d, seed, samples).ok())
    } else {
        None
    };
    let g = guarded("glue", &sc.name, || glue(sc));
    stages.insert("glue".into(), code_of(&g));
    if g.code != 0 {
        let verdict = if o.code == 1 && g.code == 1 { "obstructed".to_string() } else { "fails:glue".to_string() };
        return row(&stages, &verdict, findings_of(&g), properties);
    }
    let df: DescriptorFile = serde_json::from_str(g.output.as_deref().unwrap_or("{}")).expect("glue writes a descriptor");
    let e = guarded("extract", &sc.name, || extract(&df));
    stages.insert("extract".into(), code_of(&e));
    let r = guarded("roundtrip", &sc.name, || roundtrip(sc));
    stages.insert("roundtrip".into(), code_of(&r));
    let c = guarded("correspond", &sc.name, || correspond(std::slice::from_ref(sc)));
    stages.insert("correspond".into(), code_of(&c));
    let ok = o.code == 0 && e.code == 0 && r.code == 0 && c.code == 0 && properties.as_ref().is_none_or(|p| p.all_pass());
    row(&stages, if ok { "glues" } else { "fails:pipeline" }, Vec::new(), properties)
}

pub fn pipeline(scs: &[Scenario], seed: u64, samples: usize) -> Outcome {
    let rows: Vec<PipelineRow> = scs.iter().map(|sc| pipeline_row(sc, seed, samples)).collect();
    let all = rows.iter().all(|r| r.verdict == "glues");
    outcome("pipeline", &format!("{} scenarios", rows.len()), if all { 0 } else { 1 }, json!({ "seed": seed, "samples": samples, "rows": rows }))
}

/// Serialized report text: pretty JSON with sorted keys and a final newline.
pub fn report_text(o: &Outcome) -> String {
    let mut s = serde_json::to_string_pretty(&o.report).expect("report serializes");
    s.push('\n');
    s
}
