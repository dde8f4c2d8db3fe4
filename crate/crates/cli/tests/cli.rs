use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use tropsheaf_cli::corpus::gen_example;
use tropsheaf_cli::scenario::parse_scenario;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_tropsheaf"));
    c.env_remove("TROPSHEAF_REPORT_DIR");
    c
}

fn run(args: &[&str]) -> (i32, Value) {
    let out = bin().args(args).output().unwrap();
    let report = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (out.status.code().unwrap(), report)
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("tropsheaf-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn write_example(dir: &Path, base: &str, kind: &str, fan: bool) -> String {
    let p = dir.join(format!("{base}-{kind}.json"));
    std::fs::write(&p, gen_example(base, kind, fan, 0).unwrap().to_canonical_string()).unwrap();
    p.display().to_string()
}

#[test]
fn validate_trivial_exits_zero() {
    let d = scratch("validate");
    let (code, r) = run(&["validate", &write_example(&d, "square", "trivial", false)]);
    assert_eq!(code, 0);
    assert_eq!(r["verdict"], "ok");
    assert_eq!(r["format"], "tropsheaf-report");
}

#[test]
fn obstructed_cube_reports_flag_values() {
    let d = scratch("obstruction");
    let p = d.join("cube-obstructed.json");
    std::fs::write(&p, gen_example("cube", "obstructed", false, 1).unwrap().to_canonical_string()).unwrap();
    let (code, r) = run(&["obstruction", p.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert_eq!(r["body"]["trivial"], false);
    assert_eq!(r["body"]["closed"], true);
    let values = r["body"]["values"].as_object().unwrap();
    assert!(!values.is_empty());
    assert!(values.values().any(|v| v != "1"));
}

#[test]
fn generated_example_glues_and_extracts() {
    let d = scratch("glue");
    let sc = d.join("o11.json");
    let (code, _) = run(&["gen-example", "square", "O11", "-o", sc.to_str().unwrap()]);
    assert_eq!(code, 0);
    let desc = d.join("o11.descriptor.json");
    let (code, r) = run(&["glue", sc.to_str().unwrap(), "-o", desc.to_str().unwrap()]);
    assert_eq!(code, 0, "{r}");
    assert_eq!(r["body"]["rank"], 1);
    let ext = d.join("o11.extracted.json");
    let (code, r) = run(&["extract", desc.to_str().unwrap(), "-o", ext.to_str().unwrap()]);
    assert_eq!(code, 0, "{r}");
    let (code, r) = run(&["equiv", sc.to_str().unwrap(), ext.to_str().unwrap()]);
    assert_eq!(code, 0, "{r}");
    assert_eq!(r["body"]["equivalent"], true);
}

#[test]
fn gen_example_prints_canonical_scenario() {
    let out = bin().args(["gen-example", "cube", "twisted", "--fan", "--seed", "3"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(parse_scenario(&text).unwrap().to_canonical_string(), text);
}

#[test]
fn dangling_map_is_an_input_error() {
    let d = scratch("dangling");
    let mut v: Value = serde_json::from_str(&gen_example("square", "trivial", false, 0).unwrap().to_canonical_string()).unwrap();
    v["cover"]["maps"][0][0] = "nowhere".into();
    let p = d.join("bad.json");
    std::fs::write(&p, v.to_string()).unwrap();
    let (code, r) = run(&["validate", p.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert_eq!(r["body"]["kind"], "input");
    let msg = r["body"]["error"].as_str().unwrap();
    assert!(msg.contains("cover.maps[0][0]") && msg.contains("nowhere"), "{msg}");
}

#[test]
fn malformed_json_is_an_input_error() {
    let d = scratch("malformed");
    let p = d.join("trunc.json");
    std::fs::write(&p, "{\"format_version\": 1,").unwrap();
    let (code, r) = run(&["glue", p.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert_eq!(r["verdict"], "error");
}

#[test]
fn report_goes_to_the_report_directory() {
    let d = scratch("reportdir");
    let sc = write_example(&d, "square", "trivial", false);
    let out = bin().env("TROPSHEAF_REPORT_DIR", d.join("reports")).args(["validate", &sc]).output().unwrap();
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let report = std::fs::read_to_string(d.join("reports").join("validate-square-trivial.json")).unwrap();
    assert!(report.contains("\"verdict\": \"ok\""));
}

#[test]
fn restrict_requires_a_fan_base() {
    let d = scratch("restrict");
    let (code, r) = run(&["restrict", &write_example(&d, "square", "O11", false)]);
    assert_eq!(code, 2);
    assert_eq!(r["body"]["kind"], "input");
    let (code, r) = run(&["restrict", &write_example(&d, "square", "O11", true)]);
    assert_eq!(code, 0, "{r}");
    assert_eq!(r["body"]["localization"], Value::Array(vec![]));
}
