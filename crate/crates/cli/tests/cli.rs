use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn ald(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ald")).args(args).output().expect("run ald")
}

#[test]
fn no_arguments_prints_usage_and_exits_2() {
    let out = ald(&[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn eval_prints_transcript() {
    let file = root().join("fixtures/programs/peano_factorial.pl");
    let out = ald(&["eval", file.to_str().unwrap(), "--query", "factorial(s(s(s(0))),F)"]);
    assert!(out.status.success());
    assert_eq!(
        String::from_utf8_lossy(&out.stdout),
        "F = s(s(s(s(s(s(0)))))) ;\nyes\n"
    );
}

#[test]
fn eval_reports_failure_as_no() {
    let file = root().join("fixtures/programs/peano_factorial.pl");
    let out = ald(&["eval", file.to_str().unwrap(), "--query", "plus(s(0),0,0)"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout), "no\n");
}

#[test]
fn eval_missing_file_is_a_one_line_error() {
    let out = ald(&["eval", "/nonexistent.pl", "--query", "true"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error: "));
    assert_eq!(err.trim_end().lines().count(), 1);
}

#[test]
fn filter_reads_stdin() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_ald"))
        .args(["filter", "head", "1"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"one\ntwo\n").unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout), "one\n");
}

#[test]
fn unknown_filter_fails() {
    let out = Command::new(env!("CARGO_BIN_EXE_ald"))
        .args(["filter", "nope"])
        .stdin(Stdio::null())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn build_without_sources_fails() {
    let src = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let res = ald(&["build", src.path().to_str().unwrap(), "-o", out.path().join("site").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("no sources"));
}
