//! Runs every command in tests/golden and compares stdout and exit code.
//! Set NANOFLOW_BLESS=1 to rewrite the expected outputs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .unwrap()
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

struct Case {
    name: String,
    args: Vec<String>,
    exit: i32,
}

fn cases() -> Vec<Case> {
    let mut out = Vec::new();
    for entry in fs::read_dir(golden_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|x| x == "cmd") {
            let text = fs::read_to_string(&path).unwrap();
            let mut lines = text.lines();
            let args = lines.next().unwrap().split_whitespace().map(String::from).collect();
            let exit = lines.next().unwrap().strip_prefix("exit ").unwrap().parse().unwrap();
            out.push(Case {
                name: path.file_stem().unwrap().to_string_lossy().into_owned(),
                args,
                exit,
            });
        }
    }
    out.sort_by(|a, b| a.name.cmp(&b.name));
    out
}

fn nanoflow(args: &[String]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_nanoflow"))
        .args(args)
        .current_dir(root())
        .output()
        .unwrap()
}

#[test]
fn golden_commands() {
    let bless = std::env::var_os("NANOFLOW_BLESS").is_some();
    let cases = cases();
    assert!(cases.len() >= 10);
    let mut failures = Vec::new();
    for case in &cases {
        let out = nanoflow(&case.args);
        let stdout = String::from_utf8(out.stdout).unwrap();
        let expected_path = golden_dir().join(format!("{}.out", case.name));
        if bless {
            fs::write(&expected_path, &stdout).unwrap();
        }
        let expected = fs::read_to_string(&expected_path).unwrap_or_default();
        let code = out.status.code().unwrap();
        if code != case.exit {
            failures.push(format!(
                "{}: exit {code}, expected {}\n{}",
                case.name,
                case.exit,
                String::from_utf8_lossy(&out.stderr)
            ));
        }
        if stdout != expected {
            failures.push(format!(
                "{}: stdout differs\n--- got\n{stdout}--- expected\n{expected}",
                case.name
            ));
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn output_is_stable_across_runs() {
    for case in cases() {
        assert_eq!(
            nanoflow(&case.args).stdout,
            nanoflow(&case.args).stdout,
            "{}",
            case.name
        );
    }
}

#[test]
fn readme_examples_are_golden_commands() {
    let readme = fs::read_to_string(root().join("README.md")).unwrap();
    let known: Vec<String> = cases().iter().map(|c| c.args.join(" ")).collect();
    let examples: Vec<&str> = readme.lines().filter_map(|l| l.strip_prefix("$ nanoflow ")).collect();
    assert!(!examples.is_empty());
    for ex in examples {
        let args = ex.split_whitespace().collect::<Vec<_>>().join(" ");
        assert!(known.contains(&args), "README example without a golden test: {ex}");
    }
}

#[test]
fn trace_out_writes_the_shipped_trace() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.jsonl");
    let args: Vec<String> = [
        "run",
        "--policy",
        "corpus/policies/password.json",
        "--trace-out",
        path.to_str().unwrap(),
        "corpus/password.njs",
    ]
    .map(String::from)
    .into();
    assert_eq!(nanoflow(&args).status.code(), Some(0));
    let shipped = fs::read_to_string(root().join("corpus/traces/password_topsecret.jsonl")).unwrap();
    assert_eq!(fs::read_to_string(&path).unwrap(), shipped);
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn infer_out_matches_stdout_and_the_shipped_plan() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plan.json");
    let args: Vec<String> = [
        "infer-upgrades",
        "--policy",
        "corpus/policies/password.json",
        "--tests",
        "corpus/tests/password",
        "--out",
        path.to_str().unwrap(),
        "corpus/password.njs",
    ]
    .map(String::from)
    .into();
    let out = nanoflow(&args);
    assert_eq!(out.status.code(), Some(0));
    let written = fs::read_to_string(&path).unwrap();
    assert_eq!(written.as_bytes(), out.stdout.as_slice());
    assert_eq!(
        written,
        fs::read_to_string(root().join("corpus/plans/password.json")).unwrap()
    );
}
