//! End-to-end runs of the `tarpit-escape` binary.

use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_tarpit-escape");

fn cli(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn scenario() -> String {
    format!(
        "{}/../../scenarios/motivating.json",
        env!("CARGO_MANIFEST_DIR")
    )
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn smoke_run_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = cli(&[
        "run",
        "--scenario",
        &scenario(),
        "--budget",
        "500",
        "--seed",
        "3",
        "--out-dir",
        s(&out),
        "--export-memory",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in [
        "report.json",
        "trace.csv",
        "summary.csv",
        "curves.svg",
        "memory.json",
    ] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("ESR"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["mode"], "hybrid");
    assert!(report["trace"].as_array().unwrap().len() >= 500);
    let memory: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("memory.json")).unwrap()).unwrap();
    assert!(memory.is_array());
    assert!(std::fs::read_to_string(out.join("curves.svg"))
        .unwrap()
        .starts_with("<svg"));
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut texts = Vec::new();
    for name in ["one", "two"] {
        let out = dir.path().join(name);
        let o = cli(&[
            "run",
            "--generate",
            "screens=12,tarpit-factor=0.85,seed=2",
            "--budget",
            "800",
            "--seed",
            "5",
            "--out-dir",
            s(&out),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        texts.push((
            std::fs::read(out.join("report.json")).unwrap(),
            std::fs::read(out.join("trace.csv")).unwrap(),
        ));
    }
    assert!(texts[0] == texts[1]);
}

#[test]
fn missing_scenario_exits_2_naming_the_path() {
    let o = cli(&["run", "--scenario", "/no/such/app.json", "--budget", "10"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/no/such/app.json"));
}

#[test]
fn invalid_scenario_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"initial":"x","screens":[]}"#).unwrap();
    let o = cli(&[
        "run",
        "--scenario",
        s(&path),
        "--out-dir",
        s(&dir.path().join("o")),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn advisor_configuration_errors_exit_3() {
    let o = cli(&[
        "run",
        "--scenario",
        &scenario(),
        "--advisor",
        "http",
        "--budget",
        "10",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("--llm-endpoint"));
    let o = cli(&[
        "run",
        "--scenario",
        &scenario(),
        "--advisor",
        "replay",
        "--budget",
        "10",
    ]);
    assert_eq!(o.status.code(), Some(3));
    let o = cli(&[
        "run",
        "--scenario",
        &scenario(),
        "--advisor",
        "replay",
        "--cassette",
        "/no/cassette.json",
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn bad_flags_exit_1() {
    assert_eq!(cli(&["run", "--bogus"]).status.code(), Some(1));
    assert_eq!(
        cli(&["run", "--scenario", &scenario(), "--mode", "sideways"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        cli(&["run", "--scenario", &scenario(), "--theta", "1.5"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        cli(&["run", "--scenario", &scenario(), "--max-retry", "0"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(cli(&["run"]).status.code(), Some(1));
    assert_eq!(
        cli(&["run", "--generate", "screens=ten"]).status.code(),
        Some(1)
    );
    assert_eq!(cli(&[]).status.code(), Some(1));
    assert_eq!(cli(&["--help"]).status.code(), Some(0));
}

#[test]
fn generate_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let o = cli(&[
            "generate",
            "--screens",
            "15",
            "--tarpit-factor",
            "0.9",
            "--seed",
            "8",
            "--out",
            s(p),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let stdout = cli(&[
        "generate",
        "--screens",
        "15",
        "--tarpit-factor",
        "0.9",
        "--seed",
        "8",
    ])
    .stdout;
    assert_eq!(stdout, std::fs::read(&a).unwrap());
    // The generated file loads as a scenario.
    let o = cli(&[
        "run",
        "--scenario",
        s(&a),
        "--budget",
        "50",
        "--out-dir",
        s(&dir.path().join("o")),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn example_matches_checked_in_scenario() {
    let o = cli(&["example"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(o.stdout, std::fs::read(scenario()).unwrap());
}

#[test]
fn compare_writes_one_report_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cmp");
    let o = cli(&[
        "compare",
        "--generate",
        "screens=10,tarpit-factor=0.85,seed=1",
        "--apps",
        "2",
        "--modes",
        "hybrid,no_llm",
        "--seeds",
        "3",
        "--budget",
        "300",
        "--workers",
        "2",
        "--out-dir",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let reports = std::fs::read_dir(out.join("reports")).unwrap().count();
    assert_eq!(reports, 2 * 2 * 3);
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 12);
    let aggregate = std::fs::read_to_string(out.join("aggregate.csv")).unwrap();
    assert_eq!(aggregate.lines().count(), 1 + 2);
    assert!(out.join("curves.svg").is_file());
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("hybrid") && stdout.contains("no_llm"));
}

#[test]
fn reproduce_reports_pass_lines() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("r.json");
    let o = cli(&[
        "reproduce",
        "--trials",
        "4000",
        "--bug-trials",
        "200000",
        "--seed",
        "2",
        "--json",
        s(&json),
    ]);
    let stdout = String::from_utf8(o.stdout.clone()).unwrap();
    assert!(stdout.contains("page b widget events      70"), "{stdout}");
    assert!(stdout.contains("page c widget events      80"));
    assert!(stdout.contains("0.7930"));
    assert_eq!(o.status.code(), Some(0), "{stdout}");
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(v["analytic"]["events_b"], 70);
    assert_eq!(cli(&["reproduce", "--trials", "0"]).status.code(), Some(1));
}

#[test]
fn scripted_advisor_via_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let o = cli(&[
        "run",
        "--scenario",
        &scenario(),
        "--mode",
        "no_reuse",
        "--advisor",
        "scripted",
        "--script",
        "Action ID: 6",
        "--budget",
        "400",
        "--out-dir",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(
        cli(&["run", "--scenario", &scenario(), "--advisor", "scripted"])
            .status
            .code(),
        Some(3)
    );
}
