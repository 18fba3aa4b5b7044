//! End-to-end checks of the command-line interface.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dtinv"))
}

fn benchmark(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("benchmarks").join(name)
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn infer_verifies_the_shipped_anti_diagonal_benchmark() {
    let out = bin().arg("infer").arg(benchmark("antidiag.inv")).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("formula: x + y != 0"), "stdout: {text}");
    assert!(text.contains("verdict: verified on [-50, 50]^2"), "stdout: {text}");
}

#[test]
fn infer_report_json_is_machine_readable() {
    let out = bin()
        .arg("infer")
        .arg(benchmark("antidiag.inv"))
        .arg("--report-json")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["goodStates"], 10);
    assert_eq!(report["badStates"], 3);
    assert_eq!(report["verdict"], "verified");
    assert_eq!(report["formula"], "x + y != 0");
    assert_eq!(report["seed"], 0);
    let t = &report["timesMs"];
    let ms = |k: &str| t[k].as_u64().unwrap();
    assert!(ms("sample") + ms("learn") + ms("verify") <= ms("total"));
}

#[test]
fn infer_reports_unsafe_programs_with_exit_two() {
    let out = bin().arg("infer").arg(benchmark("unsafe.inv")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("unsafe"), "stdout: {}", stdout(&out));
}

#[test]
fn verify_accepts_a_correct_candidate() {
    let out = bin()
        .arg("verify")
        .arg(benchmark("antidiag.inv"))
        .args(["--formula", "x + y != 0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(stdout(&out).starts_with("verified"), "stdout: {}", stdout(&out));
}

#[test]
fn verify_refutes_a_wrong_candidate() {
    let out = bin()
        .arg("verify")
        .arg(benchmark("antidiag.inv"))
        .args(["--formula", "x <= 0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("refuted: induction fails"), "stdout: {}", stdout(&out));
}

#[test]
fn usage_and_input_errors_exit_with_three() {
    let cases: Vec<Vec<String>> = vec![
        vec!["verify".into(), benchmark("antidiag.inv").display().to_string(), "--formula".into(), "x <<= 0".into()],
        vec!["infer".into(), "no-such-file.inv".into()],
        vec!["infer".into(), benchmark("antidiag.inv").display().to_string(), "--no-such-flag".into()],
        vec!["slopes".into(), benchmark("antidiag.inv").display().to_string(), "--domain".into(), "pca".into()],
        vec!["verify".into(), benchmark("antidiag.inv").display().to_string()],
    ];
    for args in cases {
        let out = bin().args(&args).output().unwrap();
        assert_eq!(out.status.code(), Some(3), "args {args:?}, stderr: {}", stderr(&out));
    }
}

#[test]
fn artifacts_chain_from_sample_to_verified_formula() {
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name);
    let program = benchmark("antidiag.inv");

    let out = bin()
        .arg("sample")
        .arg(&program)
        .arg("-o")
        .arg(path("sample.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));

    let out = bin()
        .arg("slopes")
        .arg(&program)
        .arg("-o")
        .arg(path("slopes.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));

    let out = bin()
        .arg("learn")
        .arg("--sample")
        .arg(path("sample.json"))
        .arg("--slopes")
        .arg(path("slopes.json"))
        .arg("-o")
        .arg(path("tree.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let tree: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(path("tree.json")).unwrap()).unwrap();
    assert_eq!(tree["feature"], 3, "root split of {tree}");
    assert_eq!(tree["threshold"], "-1/2");

    let out = bin()
        .arg("learn")
        .arg("--sample")
        .arg(path("sample.json"))
        .arg("--slopes")
        .arg(path("slopes.json"))
        .arg("--to-formula")
        .arg("-o")
        .arg(path("formula.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));

    let out = bin()
        .arg("verify")
        .arg(&program)
        .arg("--formula-json")
        .arg(path("formula.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(stdout(&out).starts_with("verified"));
}

#[test]
fn pac_bound_prints_the_tabulated_values() {
    let out = bin()
        .args(["pac-bound", "--epsilon", "0.1", "--delta", "0.05", "--dim", "2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "vc dimension bound: 754\nrequired sample size: 293610\n");
}

#[test]
fn emit_smt_writes_the_three_condition_blocks() {
    let dir = tempfile::tempdir().unwrap();
    let smt = dir.path().join("conditions.smt2");
    let out = bin()
        .arg("infer")
        .arg(benchmark("antidiag.inv"))
        .arg("--emit-smt")
        .arg(&smt)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = std::fs::read_to_string(&smt).unwrap();
    assert!(text.starts_with("; invariant conditions"), "smt: {}", &text[..60.min(text.len())]);
    assert_eq!(text.matches("(push 1)").count(), 3);
    assert_eq!(text.matches("(check-sat)").count(), 3);
}

#[test]
fn help_exits_cleanly() {
    let out = bin().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("Usage"));
}

fn copy_benchmark(name: &str, dir: &Path) {
    std::fs::copy(benchmark(name), dir.join(name)).unwrap();
}

#[test]
fn bench_tabulates_a_directory_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    copy_benchmark("antidiag.inv", dir.path());
    copy_benchmark("mod2.inv", dir.path());
    copy_benchmark("unsafe.inv", dir.path());
    let csv = dir.path().join("results.csv");
    let out = bin()
        .arg("bench")
        .arg(dir.path())
        .arg("--csv")
        .arg(&csv)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let table = stdout(&out);
    assert!(table.contains("antidiag"), "table: {table}");
    let written = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = written.lines().collect();
    assert_eq!(lines[0], "name,vars,predicates,sampleMs,learnMs,verdict");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("antidiag,2,") && lines[1].ends_with(",verified"));
    assert!(lines[2].starts_with("mod2,1,") && lines[2].ends_with(",verified"));
    assert!(lines[3].starts_with("unsafe,1,") && lines[3].ends_with(",unsafe"));
}

#[test]
fn bench_handles_an_empty_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().arg("bench").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).lines().count(), 1, "stdout: {}", stdout(&out));
}
