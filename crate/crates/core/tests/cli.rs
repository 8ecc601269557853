use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gerbe-index")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn lists_bundled_fixtures() {
    let o = run(&["fixtures"]);
    assert!(o.status.success());
    let names: Vec<String> = stdout(&o).lines().map(str::to_owned).collect();
    assert_eq!(names.len(), 5);
    assert!(names.iter().any(|n| n == "suspended-rp2-gerbe"));
}

#[test]
fn ddclass_reports_order_two() {
    let o = run(&["ddclass", "suspended-rp2-gerbe"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("order 2 in H^3 = Z/2"), "{}", stdout(&o));
}

#[test]
fn validate_passes_and_tight_tolerance_fails() {
    let ok = run(&["validate", "monopole", "--resolution", "16"]);
    assert_eq!(ok.status.code(), Some(0), "{}", stdout(&ok));
    assert!(stdout(&ok).trim_end().ends_with("PASS"));
    let tight = run(&["chern", "monopole", "--resolution", "16", "--tolerance", "1e-9"]);
    assert_eq!(tight.status.code(), Some(1));
    assert!(stdout(&tight).trim_end().ends_with("FAIL"));
}

#[test]
fn input_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "version = \"gerbe-index/9\"\nname = \"x\"\n").unwrap();
    let o = run(&["validate", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unsupported scenario version"));

    let unknown = dir.path().join("unknown.toml");
    std::fs::write(&unknown, "version = \"gerbe-index/1\"\nname = \"x\"\ncolour = 3\n").unwrap();
    let o = run(&["validate", unknown.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));

    assert_eq!(run(&["validate", "/no/such/scenario.toml"]).status.code(), Some(2));
}

#[test]
fn saved_report_renders_identically() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let first =
        run(&["chern", "monopole", "--resolution", "16", "--tolerance", "1e-3", "--report", path.to_str().unwrap()]);
    assert_eq!(first.status.code(), Some(0));
    let again = run(&["report", path.to_str().unwrap()]);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(first.stdout, again.stdout);
}
