mod common;

use cloudfed::domain::{load_scenario, validate_scenario, Issue, ScenarioFile};
use cloudfed::workbench::fixtures;
use cloudfed::Error;

#[test]
fn every_fixture_is_valid() {
    for s in [
        fixtures::scenario1(),
        fixtures::scenario2(),
        fixtures::appendix(),
        fixtures::case_study(),
    ] {
        let r = validate_scenario(&s);
        assert!(r.is_ok(), "{r}");
    }
}

#[test]
fn oversize_vm_class_is_reported() {
    let mut s = fixtures::scenario1();
    s.shares = None;
    s.vm_classes[2].ram_gb = 128.0;
    let r = validate_scenario(&s);
    assert!(
        r.issues.contains(&Issue::InfeasibleVmClass { vm_class: 3 }),
        "{r}"
    );
}

#[test]
fn provider_ids_must_be_contiguous() {
    let mut s = fixtures::from_counts(&[[1, 0, 0], [1, 0, 0]], &[[1, 0, 0], [1, 0, 0]]);
    s.providers[1].id = 3;
    for h in &mut s.providers[1].hosts {
        h.owner = 3;
    }
    for v in &mut s.providers[1].workload {
        v.owner = 3;
    }
    let r = validate_scenario(&s);
    assert!(
        r.issues.iter().any(|i| matches!(
            i,
            Issue::ProviderIdGap {
                expected: 2,
                found: 3
            }
        )),
        "{r}"
    );
}

#[test]
fn dangling_and_duplicate_ids_are_reported() {
    let mut s = fixtures::appendix();
    s.providers[0].workload[0].current_host = Some(99);
    let dup = s.providers[1].hosts[0].id;
    s.providers[2].hosts[0].id = dup;
    let r = validate_scenario(&s);
    assert!(
        r.issues
            .iter()
            .any(|i| matches!(i, Issue::DanglingCurrentHost { host: 99, .. })),
        "{r}"
    );
    assert!(r.issues.contains(&Issue::DuplicateHost { host: dup }), "{r}");
}

#[test]
fn scenario_files_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = common::rng(3);
    for k in 0..20 {
        let s = common::small_scenario(&mut rng, 3, 6, 8);
        let path = dir.path().join(format!("s{k}.toml"));
        std::fs::write(&path, ScenarioFile::from_scenario(&s).to_toml().unwrap()).unwrap();
        assert_eq!(load_scenario(&path).unwrap(), s);
    }
    let json = dir.path().join("case.json");
    let case = fixtures::case_study();
    std::fs::write(
        &json,
        serde_json::to_string(&ScenarioFile::from_scenario(&case)).unwrap(),
    )
    .unwrap();
    assert_eq!(load_scenario(&json).unwrap(), case);
}

#[test]
fn malformed_files_are_parse_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(
        &path,
        "host_classes = []\nvm_classes = []\nproviders = [{ energy_price = \"cheap\" }]",
    )
    .unwrap();
    assert!(matches!(load_scenario(&path), Err(Error::Parse(_))));
    assert!(matches!(
        load_scenario(&dir.path().join("missing.toml")),
        Err(Error::Io(_))
    ));
}
