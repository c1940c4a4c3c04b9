use std::path::PathBuf;

use ald_core::exercise::{check, feedback_for, CheckDeps, ExerciseSpec, Outcome};
use ald_core::filters::FilterRegistry;
use ald_core::tools::{ToolManifest, ToolRunner};
use ald_core::{parse, CellKind};
use ald_engine::Budget;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn read(rel: &str) -> String {
    std::fs::read_to_string(fixtures().join(rel)).unwrap()
}

fn assertions_spec() -> ExerciseSpec {
    let doc = parse(&read("site/assertions.md"), "assertions.md").unwrap();
    let cell = doc.cells().find(|c| c.kind == CellKind::Exercise).unwrap();
    ExerciseSpec {
        page: "assertions".into(),
        cell_id: cell.cell_id.clone(),
        engine_id: cell.engine_id.clone(),
        skeleton: cell.visible_text.clone(),
        solution: cell.solution_text.clone().unwrap(),
        checker: cell.checker.clone().unwrap(),
        tool_id: None,
        tool_options: Vec::new(),
        filter: None,
        query: None,
    }
}

fn with_mock<T>(f: impl FnOnce(&CheckDeps<'_>) -> T) -> T {
    let runner = ToolRunner::new(ToolManifest::load(&fixtures().join("tools.json")).unwrap(), None);
    let filters = FilterRegistry::with_builtins();
    f(&CheckDeps { runner: &runner, filters: &filters, budget: Budget::default(), default_tool: Some("mock_analyzer") })
}

#[test]
fn assertions_solution_passes() {
    let spec = assertions_spec();
    let v = with_mock(|d| check(&spec, &spec.solution, d));
    assert_eq!(v.outcome, Outcome::Pass);
    assert_eq!(feedback_for(&v), "Correct!");
}

#[test]
fn assertions_skeleton_fails_with_the_warning() {
    let spec = assertions_spec();
    let v = with_mock(|d| check(&spec, &spec.skeleton, d));
    assert_eq!(v.outcome, Outcome::Fail);
    let warning = read("tools/expected/app_assrt_false.warn_error").replace("\n", "");
    let feedback = feedback_for(&v);
    // Same message, reported against the submitted file.
    assert!(feedback.contains("WARNING (ctchecks): False assertion:"));
    assert!(feedback.contains(":- check success app(A,B,C) : (list(A),list(B)) => var(C)."));
    assert!(feedback.replace("\n", "").contains(&warning));
    assert!(feedback.contains("compare your assertion's success properties"));
    assert!(!feedback.contains(&spec.solution));
}

#[test]
fn layout_and_comment_changes_still_pass() {
    let spec = assertions_spec();
    let variants = [
        spec.solution.replace("list(A), list(B)", "list(A),list(B)"),
        format!("% my answer\n{}\n\n\n", spec.solution),
        spec.solution.replace("=> list(C).", "=>   list(C).   % done"),
    ];
    with_mock(|d| {
        for v in &variants {
            assert_eq!(check(&spec, v, d).outcome, Outcome::Pass, "{v}");
        }
    });
}

#[test]
fn unparsable_submission_is_an_error_with_line() {
    let spec = assertions_spec();
    let v = with_mock(|d| check(&spec, ":- module(_, [app/3], [assertions]).\n\napp([],Y,Y\n", d));
    assert_eq!(v.outcome, Outcome::Error);
    assert!(feedback_for(&v).contains("line 3"), "{}", feedback_for(&v));
}

#[test]
fn arithmetic_factorial_passes_run_tests() {
    let skeleton = ":- module(_, _, [assertions]).\n\
                    :- test factorial(5, B) => (B = 120) + (not_fails).\n\
                    :- test factorial(0, 0) + fails.\n\
                    :- test factorial(-1,B) + fails.\n";
    let spec = ExerciseSpec {
        page: "a".into(),
        cell_id: "a-cell-5".into(),
        engine_id: "ciao".into(),
        skeleton: skeleton.into(),
        solution: read("programs/arith_factorial.pl"),
        checker: "run_tests".into(),
        tool_id: None,
        tool_options: Vec::new(),
        filter: None,
        query: None,
    };
    with_mock(|d| {
        assert_eq!(check(&spec, &read("programs/arith_factorial.pl"), d).outcome, Outcome::Pass);
        let broken = check(&spec, &read("programs/arith_factorial_broken.pl"), d);
        assert_eq!(broken.outcome, Outcome::Fail);
        assert!(broken.diagnostic.contains("factorial(0,0)"), "{}", broken.diagnostic);
        // Dropping the tests does not dodge them.
        let no_tests = "factorial(_, 120).";
        assert_eq!(check(&spec, no_tests, d).outcome, Outcome::Fail);
    });
}

#[test]
fn engine_can_serve_as_the_analysis_tool() {
    let mut spec = assertions_spec();
    spec.solution = "c(r).\nc(g).".into();
    spec.tool_id = Some("engine".into());
    spec.tool_options = vec!["--query=c(X)".into(), "--answers=5".into()];
    spec.filter = Some(ald_core::filters::FilterSpec::new("answers"));
    with_mock(|d| {
        assert_eq!(check(&spec, "c(r). c(g).", d).outcome, Outcome::Pass);
        let v = check(&spec, "c(r).", d);
        assert_eq!(v.outcome, Outcome::Fail);
        assert!(v.diagnostic.contains("X = r"));
    });
}
