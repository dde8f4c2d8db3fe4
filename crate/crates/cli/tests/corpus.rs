use tropsheaf_cli::checks::validate_built;
use tropsheaf_cli::corpus::{full_corpus, Expect};
use tropsheaf_cli::scenario::parse_scenario;

#[test]
fn corpus_scenarios_parse_and_normalize() {
    for e in full_corpus().unwrap() {
        let text = e.scenario.to_canonical_string();
        let back = parse_scenario(&text).unwrap();
        assert_eq!(back.to_canonical_string(), text, "{}", e.scenario.name);
    }
}

#[test]
fn corpus_validation_matches_expectations() {
    for e in full_corpus().unwrap() {
        let v = validate_built(&e.scenario.build().unwrap()).unwrap();
        match &e.expect {
            Expect::Glues | Expect::Obstructed => assert!(v.is_clean(), "{}: {:?}", e.scenario.name, v.findings),
            Expect::Fails { checks, at } => {
                assert!(!v.findings.is_empty(), "{}", e.scenario.name);
                for f in &v.findings {
                    assert!(checks.contains(&f.check), "{}: {f:?}", e.scenario.name);
                    assert!(at.iter().all(|n| f.at.contains(n)), "{}: {f:?} does not name {at:?}", e.scenario.name);
                }
            }
        }
    }
}
