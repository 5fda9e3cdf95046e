use std::fs;
use std::process::{Command, Output};

fn cloudfed(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cloudfed"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL: &str = r#"
host_classes = [
  { id = 1, cpu_capacity = 5000.0, ram_gb = 16.0, c_min = 86.7, c_max = 274.9, switch_energy_on = 0.0, switch_energy_off = 0.0 },
]
vm_classes = [{ id = 1, cpu_capacity = 1000.0, ram_gb = 1.0, revenue_rate = 0.08 }]

[[providers]]
energy_price = 0.0004
hosts = [{ class = 1, count = 2 }]
vms = [{ class = 1, count = 3 }]

[[providers]]
energy_price = 0.0004
hosts = [{ class = 1, count = 2 }]
vms = [{ class = 1, count = 2 }]
"#;

#[test]
fn solve_reports_every_host() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("small.toml");
    fs::write(&path, SMALL).unwrap();
    let o = cloudfed(&[
        "solve",
        "--scenario",
        path.to_str().unwrap(),
        "--coalition",
        "1,2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("Optimal"), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("host ")).count(), 4);
    // five small VMs fit on one host
    assert!(text.contains("on 1 hosts"), "{text}");
}

#[test]
fn solve_json_is_machine_readable() {
    let o = cloudfed(&["--json", "solve", "--fixture", "scenario1"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["status"], "Optimal");
    assert!((v["objective"].as_f64().unwrap() - 2.84712).abs() < 1e-6);
    assert_eq!(v["hosts"].as_array().unwrap().len(), 90);
}

#[test]
fn value_all_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("values.csv");
    let o = cloudfed(&[
        "value",
        "--fixture",
        "appendix",
        "--all",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 8);
    assert!(text.starts_with("coalition,value,payoff_1,payoff_2,payoff_3"));
    assert!(stdout(&o).contains("{1,2,3}"));
}

#[test]
fn form_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.json");
    let o = cloudfed(&[
        "form",
        "--fixture",
        "scenario2",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("final {1,2,3}"), "{}", stdout(&o));
    let t: serde_json::Value = serde_json::from_str(&fs::read_to_string(&trace).unwrap()).unwrap();
    assert!(!t["steps"].as_array().unwrap().is_empty());
}

#[test]
fn stable_checks_a_given_partition() {
    let o = cloudfed(&["stable", "--fixture", "scenario2", "--partition", "{1,2}{3}"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("nash no"), "{text}");
}

#[test]
fn core_from_values_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.txt");
    fs::write(
        &path,
        "{1} 0.345\n{2} 0.095\n{3} 0.095\n{1,2} 0.513\n{1,3} 0.513\n{2,3} 0.225\n{1,2,3} 0.623\n",
    )
    .unwrap();
    let o = cloudfed(&["core", "--values", path.to_str().unwrap(), "--half-on-pairs"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("core: empty"), "{text}");
    assert!(text.contains("0.625500 > v(N) = 0.623000: violated"), "{text}");
}

#[test]
fn batch_is_byte_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("gen.toml");
    fs::write(
        &cfg,
        "providers = [[6, 0, 0], [0, 6, 0], [4, 2, 0]]\nvm_count_range = [0, 3]\n",
    )
    .unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for (out, workers) in [(&a, "1"), (&b, "3")] {
        let o = cloudfed(&[
            "batch",
            "--config",
            cfg.to_str().unwrap(),
            "--runs",
            "6",
            "--seed",
            "9",
            "--out",
            out.to_str().unwrap(),
            "--workers",
            workers,
        ]);
        assert!(
            o.status.success(),
            "{}{}",
            stdout(&o),
            String::from_utf8_lossy(&o.stderr)
        );
    }
    let a = fs::read(&a).unwrap();
    assert_eq!(a, fs::read(&b).unwrap());
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 7);
}

#[test]
fn reproduce_exit_codes() {
    assert_eq!(cloudfed(&["reproduce", "scenario1"]).status.code(), Some(0));
    assert_eq!(cloudfed(&["reproduce", "appendix"]).status.code(), Some(0));
    // the case study does not match every printed cell
    assert_eq!(cloudfed(&["reproduce", "casestudy"]).status.code(), Some(1));
}

#[test]
fn input_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "host_classes = 3").unwrap();
    for args in [
        vec!["solve", "--scenario", bad.to_str().unwrap()],
        vec!["solve", "--scenario", "/does/not/exist.toml"],
        vec!["solve", "--fixture", "scenario1", "--coalition", "1,7"],
        vec!["reproduce", "table9"],
        vec!["form", "--fixture", "appendix", "--order", "1,1,2"],
    ] {
        let o = cloudfed(&args);
        assert_eq!(
            o.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    }
}

#[test]
fn invalid_scenario_is_rejected_before_solving() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gap.toml");
    // provider ids must be 1..=n without gaps
    let text = SMALL
        .replacen("[[providers]]\n", "[[providers]]\nid = 1\n", 1)
        .replacen(
            "[[providers]]\nenergy_price",
            "[[providers]]\nid = 3\nenergy_price",
            1,
        );
    fs::write(&path, text).unwrap();
    let o = cloudfed(&["solve", "--scenario", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
