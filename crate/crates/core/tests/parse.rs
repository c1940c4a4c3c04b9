use ald_core::{parse, serialize, BlockKind, CellKind, Document, ParseErrorKind};
use proptest::prelude::*;

fn fixture(name: &str) -> String {
    let path = format!("{}/../../fixtures/site/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

fn block_kinds(doc: &Document) -> Vec<&'static str> {
    doc.blocks
        .iter()
        .filter_map(|b| match &b.kind {
            BlockKind::Cell(c) => Some(c.kind.as_str()),
            BlockKind::Filter(_) => Some("directive"),
            _ => None,
        })
        .collect()
}

fn strip_trailing_ws(s: &str) -> String {
    s.lines().map(str::trim_end).collect::<Vec<_>>().join("\n")
}

#[test]
fn tutorial_cells() {
    let doc = parse(&fixture("tutorial.md"), "tutorial.md").unwrap();
    assert_eq!(block_kinds(&doc), ["program", "query", "query", "static", "program"]);
    assert_eq!(doc.title.as_deref(), Some("Exercise: factorial using ISO-Prolog arithmetic"));
    let cells: Vec<_> = doc.cells().collect();
    assert!(cells.iter().all(|c| c.engine_id == "ciao"));
    assert!(cells[1].visible_text.starts_with("?- factorial(X,"));
    let ids: Vec<&str> = cells.iter().map(|c| c.cell_id.as_str()).collect();
    assert_eq!(ids, ["tutorial-cell-1", "tutorial-cell-2", "tutorial-cell-3", "tutorial-cell-4", "tutorial-cell-5"]);
}

#[test]
fn assertions_cells() {
    let doc = parse(&fixture("assertions.md"), "assertions.md").unwrap();
    assert_eq!(block_kinds(&doc), ["static", "directive", "exercise"]);
    let (_, directive) = doc.directives().next().unwrap();
    assert_eq!(directive.code_file, "app_assrt_false.pl");
    assert_eq!(directive.tool_options, ["V"]);
    assert_eq!(directive.filter_name, "warn_error");
    assert_eq!(directive.tool_id, None);
    let exercise = doc.cells().find(|c| c.kind == CellKind::Exercise).unwrap();
    assert_eq!(exercise.checker.as_deref(), Some("verify_assert"));
    assert!(exercise.visible_text.contains("=> var(C)"));
    assert!(!exercise.visible_text.contains("=> list(C)"));
    let solution = exercise.solution_text.as_deref().unwrap();
    assert!(solution.contains("=> list(C)"));
    assert!(!solution.contains("solution="));
}

#[test]
fn fixtures_round_trip() {
    for name in ["tutorial.md", "assertions.md"] {
        let src = fixture(name);
        let doc = parse(&src, name).unwrap();
        let text = serialize(&doc);
        assert_eq!(strip_trailing_ws(&text), strip_trailing_ws(&src), "{name}");
        assert_eq!(parse(&text, name).unwrap(), doc);
    }
}

#[test]
fn escaped_fence_tags_are_normalized() {
    let doc = parse("```ciao\\_runnable\np.\n```\n", "x.md").unwrap();
    let cell = doc.cells().next().unwrap();
    assert_eq!((cell.kind, cell.engine_id.as_str()), (CellKind::Program, "ciao"));
    assert_eq!(serialize(&doc), "```ciao\\_runnable\np.\n```\n");
}

fn check_invariants(src: &str, doc: &Document) -> Result<(), TestCaseError> {
    let line_count = src.lines().count();
    let mut last_end = 0;
    for b in &doc.blocks {
        prop_assert!(b.span.start > last_end && b.span.start <= b.span.end && b.span.end <= line_count);
        last_end = b.span.end;
    }
    let mut ids: Vec<&str> = doc.cells().map(|c| c.cell_id.as_str()).collect();
    let n = ids.len();
    ids.sort();
    ids.dedup();
    prop_assert_eq!(ids.len(), n);
    for c in doc.cells() {
        prop_assert_eq!(c.kind == CellKind::Exercise, c.solution_text.is_some() && c.checker.is_some());
        if c.kind.is_runnable() && c.kind != CellKind::Exercise {
            let first = c.visible_text.lines().find(|l| !l.trim().is_empty());
            prop_assert_eq!(c.kind == CellKind::Query, first.is_some_and(|l| l.trim_start().starts_with("?-")));
        }
    }
    for (_, f) in doc.directives() {
        prop_assert!(!f.filter_name.is_empty() && !f.code_file.is_empty());
        prop_assert!(f.tool_options.iter().all(|t| !t.contains(char::is_whitespace)));
    }
    Ok(())
}

fn fragment() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("```ciao_runnable".to_string()),
        Just("```ciao".to_string()),
        Just("```".to_string()),
        Just("```e\\_runnable".to_string()),
        Just("solution=verify_assert".to_string()),
        Just("solution=".to_string()),
        Just("?- p(X).".to_string()),
        Just("p(X) :- q(X).".to_string()),
        Just("# Heading".to_string()),
        Just("###### deep".to_string()),
        Just("\\title A title".to_string()),
        Just("@exfilter{a.pl}{V,filter=warn_error}".to_string()),
        Just("@exfilter{a.pl}{filter=regex,regex:^(W|E),tool=t}".to_string()),
        Just("@exfilter{a.pl}{".to_string()),
        Just("@exfilter{}{filter=x}".to_string()),
        Just(String::new()),
        "[ -~]{0,20}",
    ]
}

fn valid_source() -> impl Strategy<Value = String> {
    let prose = prop_oneof![Just("Some text.".to_string()), Just("  - item".to_string()), "[a-z ]{1,12}"];
    let body_line = prop_oneof![
        Just("p(X) :- q(X).".to_string()),
        Just("?- p(X).".to_string()),
        Just(String::new()),
        Just("  x  ".to_string())
    ];
    let cell = (
        prop::sample::select(&["ciao_runnable", "ciao", "", "e_runnable"][..]),
        prop::collection::vec(body_line.clone(), 0..4),
        prop::option::of(prop::collection::vec(body_line, 0..4)),
    )
        .prop_map(|(tag, body, solution)| {
            let mut lines = vec![format!("```{tag}")];
            lines.extend(body);
            if let (Some(sol), true) = (solution, tag.ends_with("_runnable")) {
                lines.push("solution=run_tests".into());
                lines.extend(sol);
            }
            lines.push("```".into());
            lines.join("\n")
        });
    let block = prop_oneof![
        prose,
        Just("# Title".to_string()),
        Just("## Sub".to_string()),
        Just("\\title T".to_string()),
        Just("@exfilter{f.pl}{V,filter=warn_error}".to_string()),
        cell,
    ];
    prop::collection::vec(block, 0..10).prop_map(|b| b.join("\n"))
}

fn fenced_regions(src: &str) -> usize {
    let mut open = false;
    let mut count = 0;
    for line in src.lines() {
        if open {
            open = line.trim_end() != "```";
        } else if line.starts_with("```") {
            open = true;
            count += 1;
        }
    }
    count
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn parse_is_total_and_well_formed(lines in prop::collection::vec(fragment(), 0..25)) {
        let src = lines.join("\n");
        match parse(&src, "fuzz.md") {
            Ok(doc) => check_invariants(&src, &doc)?,
            Err(e) => {
                prop_assert!(e.line >= 1 && e.line <= src.lines().count().max(1), "{:?}", e);
                let _ = e.kind;
            }
        }
    }

    #[test]
    fn serialize_then_parse_is_structurally_equal(src in valid_source()) {
        let doc = parse(&src, "gen.md").unwrap();
        check_invariants(&src, &doc)?;
        let again = parse(&serialize(&doc), "gen.md").unwrap();
        prop_assert!(doc.same_structure(&again), "{}\n---\n{}", src, serialize(&doc));
        prop_assert_eq!(doc.cells().count(), fenced_regions(&src));
    }
}

#[test]
fn error_kinds_are_reported() {
    assert_eq!(parse("```ciao\n", "x.md").unwrap_err().kind, ParseErrorKind::UnclosedFence);
    assert_eq!(parse("@exfilter{a}", "x.md").unwrap_err().kind, ParseErrorKind::BadDirective);
    assert_eq!(parse("```c_runnable\nsolution=a\nsolution=b\n```", "x.md").unwrap_err().kind, ParseErrorKind::BadSolutionMarker);
}
