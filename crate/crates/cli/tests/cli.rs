use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dynkin-lab"))
}

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn scenario_files() -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = fs::read_dir(repo().join("scenarios"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    files.sort();
    files
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(format!("{name}.toml"));
    fs::write(&path, text).unwrap();
    path
}

const GAME: &str = r#"
name = "case"
pipeline = "game"
[lattice]
horizon = 1.0
steps = 3
mode = "full_tree"
[barriers]
lower = { kind = "constant", c = 1.0 }
upper = { kind = "constant", c = 2.0 }
"#;

#[test]
fn shipped_scenarios_reproduce_golden_reports() {
    let files = scenario_files();
    assert!(files.len() >= 9);
    for file in files {
        let stem = file.file_stem().unwrap().to_str().unwrap().to_string();
        let golden = repo().join("scenarios/golden");
        let summary = fs::read_to_string(golden.join(format!("{stem}.summary.json"))).unwrap();
        let expect_pass = summary.contains("\"status\": \"pass\"");
        for _ in 0..2 {
            let out = tempfile::tempdir().unwrap();
            let o = run(&["run", file.to_str().unwrap(), "--out", out.path().to_str().unwrap()]);
            assert_eq!(o.status.code(), Some(if expect_pass { 0 } else { 1 }), "{stem}");
            for ext in ["values.csv", "summary.json"] {
                let name = format!("{stem}.{ext}");
                let got = fs::read(out.path().join(&name)).unwrap();
                let want = fs::read(golden.join(&name)).unwrap();
                assert!(got == want, "{name} differs from golden");
            }
        }
    }
}

#[test]
fn every_scenario_file_is_listed() {
    let o = run(&["list-examples"]);
    assert!(o.status.success());
    let listing = String::from_utf8(o.stdout).unwrap();
    for file in scenario_files() {
        let stem = file.file_stem().unwrap().to_str().unwrap();
        assert!(
            listing.lines().any(|l| l.split_whitespace().next() == Some(stem)),
            "{stem} missing from list-examples"
        );
    }
}

#[test]
fn examples_run_by_name() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&["run", "zero_verify", "--out", out.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let golden = fs::read(repo().join("scenarios/golden/zero_verify.values.csv")).unwrap();
    assert_eq!(fs::read(out.path().join("zero_verify.values.csv")).unwrap(), golden);
}

#[test]
fn failing_check_exits_one_and_still_writes() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&["run", "continuity", "--out", out.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL terminal_gap"));
    assert!(out.path().join("continuity.values.csv").exists());
    assert!(out.path().join("continuity.summary.json").exists());
}

#[test]
fn config_errors_exit_two_with_key() {
    let dir = tempfile::tempdir().unwrap();
    let crossing = GAME.replace("c = 2.0", "c = 0.5");
    let o = run(&["validate", write_config(dir.path(), "crossing", &crossing).to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("`barriers`") && err.contains("L <= U"), "{err}");

    let path = write_config(dir.path(), "game", GAME);
    let o = run(&["validate", path.to_str().unwrap(), "--override", "pipeline=game_verify", "--override", "lattice.steps=6"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("enumeration cap"));

    let bad = GAME.replace("steps = 3", "steps = three");
    let o = run(&["validate", write_config(dir.path(), "bad", &bad).to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 6"));

    let o = run(&["run", "/nonexistent/scenario.toml"]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["validate", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn numerical_failure_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
name = "overflow"
pipeline = "bsde"
terminal = { kind = "affine", a0 = 0.0, a1 = 4e307 }
[lattice]
horizon = 4.0
steps = 4
mode = "full_tree"
"#;
    let out = dir.path().join("out");
    let o = run(&["run", write_config(dir.path(), "overflow", text).to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!out.exists());
}

#[test]
fn seed_flag_is_echoed_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for seed in ["5", "5", "6"] {
        let out = dir.path().join(format!("out{}", reports.len()));
        let o = run(&["run", "bsde_axioms", "--seed", seed, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
        reports.push(fs::read_to_string(out.join("bsde_axioms.summary.json")).unwrap());
    }
    assert!(reports[0].contains("\"seed\": 5"));
    assert_eq!(reports[0], reports[1]);
    assert!(reports[2].contains("\"seed\": 6"));
}
