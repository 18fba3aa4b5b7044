//! Benchmark suite runner.
//!
//! Each program runs in its own child process so a hang or blowup in one
//! benchmark cannot take down the suite. Timeouts are marked TO, crashes
//! and unparseable output ERR, and every other row carries the child's
//! own report.

use std::fs;
use std::io::Read;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::pipeline::RunReport;

#[derive(Debug, Clone)]
pub struct SuiteConfig {
    /// Directory scanned for `.inv` programs.
    pub dir: PathBuf,
    /// Executable invoked as `<runner> infer <file> --report-json ...`.
    pub runner_exe: PathBuf,
    pub timeout_secs: u64,
    pub memory_mb: u64,
}

impl SuiteConfig {
    pub fn new(dir: impl Into<PathBuf>, runner_exe: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            runner_exe: runner_exe.into(),
            timeout_secs: 300,
            memory_mb: 8192,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteRow {
    pub name: String,
    pub vars: usize,
    pub predicates: usize,
    pub sample_ms: u64,
    pub learn_ms: u64,
    pub verdict: String,
}

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("suite directory {0}: {1}")]
    Dir(PathBuf, std::io::Error),
    #[error("running {0}: {1}")]
    Spawn(PathBuf, std::io::Error),
}

/// Extra per-benchmark arguments, taken from `// args:` lines in the
/// program file.
pub fn pragma_args(source: &str) -> Vec<String> {
    let mut out = Vec::new();
    for line in source.lines() {
        if let Some(rest) = line.trim_start().strip_prefix("// args:") {
            out.extend(rest.split_whitespace().map(str::to_string));
        }
    }
    out
}

fn run_one(config: &SuiteConfig, path: &PathBuf, extra: &[String]) -> Result<SuiteRow, SuiteError> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut cmd = Command::new(&config.runner_exe);
    cmd.arg("infer")
        .arg(path)
        .arg("--report-json")
        .args(extra)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::null());
    let limit_bytes = config.memory_mb.saturating_mul(1024 * 1024);
    if limit_bytes > 0 {
        // SAFETY: setrlimit is async-signal-safe and the closure touches
        // nothing else.
        unsafe {
            use std::os::unix::process::CommandExt;
            cmd.pre_exec(move || {
                let lim = libc::rlimit { rlim_cur: limit_bytes, rlim_max: limit_bytes };
                libc::setrlimit(libc::RLIMIT_AS, &lim);
                Ok(())
            });
        }
    }
    let mut child = cmd.spawn().map_err(|e| SuiteError::Spawn(config.runner_exe.clone(), e))?;
    let deadline = Instant::now() + Duration::from_secs(config.timeout_secs);
    let timed_out = loop {
        match child.try_wait() {
            Ok(Some(_)) => break false,
            Ok(None) if Instant::now() >= deadline => {
                let _ = child.kill();
                let _ = child.wait();
                break true;
            }
            Ok(None) => std::thread::sleep(Duration::from_millis(10)),
            Err(e) => return Err(SuiteError::Spawn(config.runner_exe.clone(), e)),
        }
    };
    let mut row =
        SuiteRow { name, vars: 0, predicates: 0, sample_ms: 0, learn_ms: 0, verdict: "ERR".into() };
    if timed_out {
        row.verdict = "TO".into();
        return Ok(row);
    }
    let mut stdout = Vec::new();
    if let Some(mut pipe) = child.stdout.take() {
        let _ = pipe.read_to_end(&mut stdout);
    }
    if let Ok(report) = serde_json::from_slice::<RunReport>(&stdout) {
        row.vars = report.vars.len();
        row.predicates = report.predicates;
        row.sample_ms = report.times_ms.sample;
        row.learn_ms = report.times_ms.learn;
        row.verdict = report.verdict;
    }
    Ok(row)
}

/// Runs every `.inv` file in the suite directory in filename order.
pub fn run_suite(config: &SuiteConfig) -> Result<Vec<SuiteRow>, SuiteError> {
    let entries = fs::read_dir(&config.dir).map_err(|e| SuiteError::Dir(config.dir.clone(), e))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|ext| ext == "inv"))
        .collect();
    files.sort();
    let mut rows = Vec::with_capacity(files.len());
    for path in &files {
        let extra = fs::read_to_string(path).map(|s| pragma_args(&s)).unwrap_or_default();
        rows.push(run_one(config, path, &extra)?);
    }
    Ok(rows)
}

pub fn render_csv(rows: &[SuiteRow]) -> String {
    let mut out = String::from("name,vars,predicates,sampleMs,learnMs,verdict\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.name, r.vars, r.predicates, r.sample_ms, r.learn_ms, r.verdict
        ));
    }
    out
}

pub fn render_table(rows: &[SuiteRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<16} {:>4} {:>10} {:>8} {:>8} {:>20}\n",
        "name", "vars", "predicates", "sampleMs", "learnMs", "verdict"
    ));
    for r in rows {
        out.push_str(&format!(
            "{:<16} {:>4} {:>10} {:>8} {:>8} {:>20}\n",
            r.name, r.vars, r.predicates, r.sample_ms, r.learn_ms, r.verdict
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;
    use std::os::unix::fs::PermissionsExt;

    fn fake_runner(dir: &std::path::Path, body: &str) -> PathBuf {
        let path = dir.join("fake-runner.sh");
        let mut f = fs::File::create(&path).unwrap();
        writeln!(f, "#!/bin/sh\n{body}").unwrap();
        drop(f);
        fs::set_permissions(&path, fs::Permissions::from_mode(0o755)).unwrap();
        path
    }

    const REPORT: &str = r#"{"program":"p","vars":["x","y"],"goodStates":10,"badStates":3,
        "features":4,"treeNodes":5,"predicates":1,"formula":"x + y != 0",
        "verdict":"verified","bound":50,"timesMs":{"sample":7,"transform":0,"learn":2,
        "formula":0,"verify":30,"total":40},"seed":0}"#;

    #[test]
    fn pragma_lines_contribute_arguments() {
        let src = "// args: --domain constants\nvar x: Int;\n// args: --max-nodes 7\n";
        assert_eq!(pragma_args(src), vec!["--domain", "constants", "--max-nodes", "7"]);
        assert!(pragma_args("var x: Int; // args inside comment? no\n").is_empty());
    }

    #[test]
    fn suite_rows_come_from_child_reports_in_filename_order() {
        let tmp = tempfile::tempdir().unwrap();
        fs::write(tmp.path().join("b.inv"), "placeholder").unwrap();
        fs::write(tmp.path().join("a.inv"), "placeholder").unwrap();
        fs::write(tmp.path().join("ignored.txt"), "not a benchmark").unwrap();
        let runner = fake_runner(tmp.path(), &format!("echo '{}'", REPORT.replace('\n', " ")));
        let config = SuiteConfig::new(tmp.path(), &runner);
        let rows = run_suite(&config).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].name, "a");
        assert_eq!(rows[1].name, "b");
        assert_eq!(
            rows[0],
            SuiteRow {
                name: "a".into(),
                vars: 2,
                predicates: 1,
                sample_ms: 7,
                learn_ms: 2,
                verdict: "verified".into(),
            }
        );
    }

    #[test]
    fn timeouts_mark_the_row_to_without_stopping_the_suite() {
        let tmp = tempfile::tempdir().unwrap();
        fs::write(tmp.path().join("slow.inv"), "placeholder").unwrap();
        let runner = fake_runner(tmp.path(), "sleep 30");
        let mut config = SuiteConfig::new(tmp.path(), &runner);
        config.timeout_secs = 1;
        let rows = run_suite(&config).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].verdict, "TO");
    }

    #[test]
    fn garbage_output_marks_the_row_err() {
        let tmp = tempfile::tempdir().unwrap();
        fs::write(tmp.path().join("broken.inv"), "placeholder").unwrap();
        let runner = fake_runner(tmp.path(), "echo not json; exit 3");
        let config = SuiteConfig::new(tmp.path(), &runner);
        let rows = run_suite(&config).unwrap();
        assert_eq!(rows[0].verdict, "ERR");
    }

    #[test]
    fn empty_directories_yield_empty_tables() {
        let tmp = tempfile::tempdir().unwrap();
        let config = SuiteConfig::new(tmp.path(), "/bin/true");
        assert!(run_suite(&config).unwrap().is_empty());
        assert_eq!(render_csv(&[]), "name,vars,predicates,sampleMs,learnMs,verdict\n");
    }

    #[test]
    fn csv_rendering_is_one_line_per_row() {
        let rows = vec![SuiteRow {
            name: "antidiag".into(),
            vars: 2,
            predicates: 1,
            sample_ms: 3,
            learn_ms: 1,
            verdict: "verified".into(),
        }];
        assert_eq!(
            render_csv(&rows),
            "name,vars,predicates,sampleMs,learnMs,verdict\nantidiag,2,1,3,1,verified\n"
        );
        let table = render_table(&rows);
        assert!(table.contains("antidiag"));
        assert!(table.contains("verified"));
    }
}
