//! Source format reader: markdown-ish prose, fenced cells and `@exfilter` lines.

use thiserror::Error;

use crate::doc::{Block, BlockKind, CellKind, CodeCell, Document, FilterDirective, Heading, HeadingStyle, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    UnclosedFence,
    BadDirective,
    BadSolutionMarker,
}

impl ParseErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ParseErrorKind::UnclosedFence => "unclosed_fence",
            ParseErrorKind::BadDirective => "bad_directive",
            ParseErrorKind::BadSolutionMarker => "bad_solution_marker",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {}: {message}", kind.as_str())]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, kind: ParseErrorKind, message: impl Into<String>) -> Self {
        ParseError { line, kind, message: message.into() }
    }
}

const FENCE: &str = "```";
const RUNNABLE_SUFFIX: &str = "_runnable";

pub fn parse(source: &str, source_path: &str) -> Result<Document, ParseError> {
    let lines: Vec<&str> = source.lines().collect();
    let stem = crate::doc::page_stem(source_path);
    let mut blocks = Vec::new();
    let mut prose_start: Option<usize> = None;
    let mut title = None;
    let mut first_h1 = None;
    let mut ordinal = 0;
    let mut i = 0;

    let flush = |blocks: &mut Vec<Block>, prose_start: &mut Option<usize>, end: usize| {
        if let Some(start) = prose_start.take() {
            blocks.push(Block {
                span: Span { start: start + 1, end },
                kind: BlockKind::Prose(lines[start..end].join("\n")),
            });
        }
    };

    while i < lines.len() {
        let line = lines[i];
        let lineno = i + 1;
        if let Some(tag) = line.strip_prefix(FENCE) {
            flush(&mut blocks, &mut prose_start, i);
            let close = (i + 1..lines.len())
                .find(|&j| lines[j].trim_end() == FENCE)
                .ok_or_else(|| ParseError::new(lineno, ParseErrorKind::UnclosedFence, "fence is never closed"))?;
            let body = lines[i + 1..close].join("\n");
            let tag = tag.trim();
            let mut cell = if tag.is_empty() {
                reject_marker(&body, lineno)?;
                CodeCell {
                    kind: CellKind::Static,
                    engine_id: String::new(),
                    fence_tag: String::new(),
                    visible_text: body,
                    solution_text: None,
                    checker: None,
                    cell_id: String::new(),
                }
            } else {
                classify_cell(tag, &body).map_err(|e| ParseError { line: e.line + lineno, ..e })?
            };
            ordinal += 1;
            cell.cell_id = format!("{stem}-cell-{ordinal}");
            blocks.push(Block { span: Span { start: lineno, end: close + 1 }, kind: BlockKind::Cell(cell) });
            i = close + 1;
            continue;
        }
        if let Some(heading) = heading(line) {
            flush(&mut blocks, &mut prose_start, i);
            match heading.style {
                HeadingStyle::Title if title.is_none() => title = Some(heading.text.clone()),
                HeadingStyle::Markdown if heading.level == 1 && first_h1.is_none() => {
                    first_h1 = Some(heading.text.clone())
                }
                _ => {}
            }
            blocks.push(Block { span: Span { start: lineno, end: lineno }, kind: BlockKind::Heading(heading) });
        } else if line.trim_start().starts_with("@exfilter") {
            flush(&mut blocks, &mut prose_start, i);
            let directive = directive(line.trim()).map_err(|m| ParseError::new(lineno, ParseErrorKind::BadDirective, m))?;
            blocks.push(Block { span: Span { start: lineno, end: lineno }, kind: BlockKind::Filter(directive) });
        } else {
            if solution_marker(line).is_some() {
                return Err(ParseError::new(
                    lineno,
                    ParseErrorKind::BadSolutionMarker,
                    "solution marker outside a runnable fence",
                ));
            }
            prose_start.get_or_insert(i);
        }
        i += 1;
    }
    flush(&mut blocks, &mut prose_start, lines.len());

    Ok(Document { source_path: source_path.to_string(), title: title.or(first_h1), blocks })
}

/// Builds a cell from a fence tag and body. `cell_id` is left empty; errors
/// carry body-relative line numbers.
pub fn classify_cell(fence_tag: &str, body: &str) -> Result<CodeCell, ParseError> {
    let normalized = fence_tag.trim().replace("\\_", "_");
    let Some(engine_id) = normalized.strip_suffix(RUNNABLE_SUFFIX) else {
        reject_marker(body, 0)?;
        return Ok(CodeCell {
            kind: CellKind::Static,
            engine_id: normalized,
            fence_tag: fence_tag.trim().to_string(),
            visible_text: body.to_string(),
            solution_text: None,
            checker: None,
            cell_id: String::new(),
        });
    };

    let lines: Vec<&str> = body.lines().collect();
    let mut marker = None;
    for (idx, line) in lines.iter().enumerate() {
        if let Some(checker) = solution_marker(line) {
            if marker.is_some() {
                return Err(ParseError::new(idx + 1, ParseErrorKind::BadSolutionMarker, "second solution marker in one cell"));
            }
            if checker.is_empty() {
                return Err(ParseError::new(idx + 1, ParseErrorKind::BadSolutionMarker, "solution marker names no checker"));
            }
            marker = Some((idx, checker.to_string()));
        }
    }

    let mut cell = CodeCell {
        kind: CellKind::Program,
        engine_id: engine_id.to_string(),
        fence_tag: fence_tag.trim().to_string(),
        visible_text: body.to_string(),
        solution_text: None,
        checker: None,
        cell_id: String::new(),
    };
    if let Some((idx, checker)) = marker {
        cell.kind = CellKind::Exercise;
        cell.visible_text = trim_blank_lines(&lines[..idx]);
        cell.solution_text = Some(trim_blank_lines(&lines[idx + 1..]));
        cell.checker = Some(checker);
    } else if lines.iter().find(|l| !l.trim().is_empty()).is_some_and(|l| l.trim_start().starts_with("?-")) {
        cell.kind = CellKind::Query;
    }
    Ok(cell)
}

fn reject_marker(body: &str, offset: usize) -> Result<(), ParseError> {
    match body.lines().position(|l| solution_marker(l).is_some()) {
        Some(idx) => Err(ParseError::new(
            offset + idx + 1,
            ParseErrorKind::BadSolutionMarker,
            "solution marker inside a non-runnable fence",
        )),
        None => Ok(()),
    }
}

fn solution_marker(line: &str) -> Option<&str> {
    let rest = line.trim_end().strip_prefix("solution=")?;
    rest.chars().all(|c| c.is_ascii_alphanumeric() || c == '_').then_some(rest)
}

fn trim_blank_lines(lines: &[&str]) -> String {
    let start = lines.iter().position(|l| !l.trim().is_empty()).unwrap_or(lines.len());
    let end = lines.iter().rposition(|l| !l.trim().is_empty()).map_or(start, |e| e + 1);
    lines[start..end].join("\n")
}

fn heading(line: &str) -> Option<Heading> {
    if line == "\\title" || line.starts_with("\\title ") {
        let text = line["\\title".len()..].trim().to_string();
        return Some(Heading { level: 1, text, style: HeadingStyle::Title });
    }
    let hashes = line.bytes().take_while(|&b| b == b'#').count();
    if !(1..=6).contains(&hashes) {
        return None;
    }
    let rest = &line[hashes..];
    if !rest.is_empty() && !rest.starts_with(' ') {
        return None;
    }
    Some(Heading { level: hashes as u8, text: rest.trim().to_string(), style: HeadingStyle::Markdown })
}

fn directive(line: &str) -> Result<FilterDirective, String> {
    let rest = line.strip_prefix("@exfilter").unwrap_or(line);
    let (file, rest) = braced(rest).ok_or("expected `{<file>}` after @exfilter")?;
    let (opts, rest) = braced(rest).ok_or("expected `{<options>}` after the file name")?;
    if !rest.trim().is_empty() {
        return Err(format!("unexpected text after directive: `{}`", rest.trim()));
    }
    let code_file = file.trim();
    if code_file.is_empty() || code_file.contains(char::is_whitespace) {
        return Err("file name must be nonempty and contain no whitespace".into());
    }

    let tokens = split_options(opts)?;
    let mut filter_name = None;
    let mut tool_id = None;
    let mut rest_tokens = Vec::new();
    for token in tokens {
        if let Some(name) = token.strip_prefix("filter=") {
            if filter_name.replace(name.to_string()).is_some() {
                return Err("more than one filter= option".into());
            }
        } else if let Some(tool) = token.strip_prefix("tool=") {
            if tool_id.replace(tool.to_string()).is_some() {
                return Err("more than one tool= option".into());
            }
        } else {
            rest_tokens.push(token);
        }
    }
    let filter_name = filter_name.filter(|n| !n.is_empty()).ok_or("missing filter=<name> option")?;
    if tool_id.as_deref() == Some("") {
        return Err("empty tool= option".into());
    }
    let prefix = format!("{filter_name}:");
    let (filter_params, tool_options) =
        rest_tokens.into_iter().partition(|t: &String| t.starts_with(&prefix) || t.starts_with("stream="));
    Ok(FilterDirective { code_file: code_file.to_string(), tool_options, filter_name, filter_params, tool_id })
}

fn braced(s: &str) -> Option<(&str, &str)> {
    let s = s.strip_prefix('{')?;
    let end = s.find('}')?;
    let inner = &s[..end];
    if inner.contains('{') {
        return None;
    }
    Some((inner, &s[end + 1..]))
}

/// Splits on commas that are not nested inside brackets.
fn split_options(s: &str) -> Result<Vec<String>, String> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut current = String::new();
    for c in s.chars() {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            ',' if depth == 0 => {
                out.push(std::mem::take(&mut current));
                continue;
            }
            _ => {}
        }
        current.push(c);
    }
    out.push(current);
    if depth != 0 {
        return Err("unbalanced brackets in options".into());
    }
    out.into_iter()
        .map(|t| {
            let t = t.trim().to_string();
            if t.is_empty() {
                Err("empty option token".to_string())
            } else if t.contains(char::is_whitespace) {
                Err(format!("option token `{t}` contains whitespace"))
            } else {
                Ok(t)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(doc: &Document) -> Vec<&'static str> {
        doc.blocks
            .iter()
            .map(|b| match &b.kind {
                BlockKind::Heading(_) => "heading",
                BlockKind::Prose(_) => "prose",
                BlockKind::Cell(c) => c.kind.as_str(),
                BlockKind::Filter(_) => "filter",
            })
            .collect()
    }

    #[test]
    fn empty_source() {
        assert!(parse("", "a.md").unwrap().blocks.is_empty());
    }

    #[test]
    fn blocks_and_spans() {
        let src = "# Top\ntext\n\n```ciao_runnable\np.\n```\nmore\n";
        let doc = parse(src, "dir/page.md").unwrap();
        assert_eq!(kinds(&doc), ["heading", "prose", "program", "prose"]);
        let spans: Vec<(usize, usize)> = doc.blocks.iter().map(|b| (b.span.start, b.span.end)).collect();
        assert_eq!(spans, [(1, 1), (2, 3), (4, 6), (7, 7)]);
        assert_eq!(doc.title.as_deref(), Some("Top"));
        assert_eq!(doc.cells().next().unwrap().cell_id, "page-cell-1");
    }

    #[test]
    fn title_line_wins_over_heading() {
        let doc = parse("# A\n\\title B\n", "x.md").unwrap();
        assert_eq!(doc.title.as_deref(), Some("B"));
    }

    #[test]
    fn hash_without_space_is_prose() {
        assert_eq!(kinds(&parse("#tag\n####### seven\n", "x.md").unwrap()), ["prose"]);
    }

    #[test]
    fn classify_query_and_static() {
        assert_eq!(classify_cell("ciao_runnable", "\n?- factorial(X,Y).").unwrap().kind, CellKind::Query);
        let s = classify_cell("ciao", " ... Z is X * Y ...").unwrap();
        assert_eq!((s.kind, s.engine_id.as_str()), (CellKind::Static, "ciao"));
        assert_eq!(classify_cell("ciao\\_runnable", "p.").unwrap().engine_id, "ciao");
    }

    #[test]
    fn classify_exercise_splits_and_trims() {
        let c = classify_cell("ciao_runnable", "\nskel.\n\nsolution=verify_assert\n\nsol.\n").unwrap();
        assert_eq!(c.kind, CellKind::Exercise);
        assert_eq!(c.checker.as_deref(), Some("verify_assert"));
        assert_eq!(c.visible_text, "skel.");
        assert_eq!(c.solution_text.as_deref(), Some("sol."));
    }

    #[test]
    fn marker_errors() {
        let e = parse("x\n```ciao_runnable\na.\nsolution=run_tests\nb.\nsolution=run_tests\n```\n", "x.md").unwrap_err();
        assert_eq!((e.kind, e.line), (ParseErrorKind::BadSolutionMarker, 6));
        let e = parse("```ciao\na.\nsolution=run_tests\n```\n", "x.md").unwrap_err();
        assert_eq!((e.kind, e.line), (ParseErrorKind::BadSolutionMarker, 3));
        let e = parse("solution=run_tests\n", "x.md").unwrap_err();
        assert_eq!((e.kind, e.line), (ParseErrorKind::BadSolutionMarker, 1));
        let e = parse("```ciao_runnable\nsolution=\n```\n", "x.md").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::BadSolutionMarker);
    }

    #[test]
    fn unclosed_fence_reports_opening_line() {
        let e = parse("a\n\n```ciao\np.\n", "x.md").unwrap_err();
        assert_eq!((e.kind, e.line), (ParseErrorKind::UnclosedFence, 3));
    }

    #[test]
    fn directive_tokens() {
        let doc = parse("@exfilter{f.pl}{V,filter=regex,regex:^(a,b),tool=t,stream=both}\n", "x.md").unwrap();
        let BlockKind::Filter(f) = &doc.blocks[0].kind else { panic!() };
        assert_eq!(f.code_file, "f.pl");
        assert_eq!(f.tool_options, ["V"]);
        assert_eq!(f.filter_name, "regex");
        assert_eq!(f.filter_params, ["regex:^(a,b)", "stream=both"]);
        assert_eq!(f.tool_id.as_deref(), Some("t"));
    }

    #[test]
    fn malformed_directives() {
        for bad in [
            "@exfilter{f.pl}",
            "@exfilter{f.pl}{V}",
            "@exfilter{}{filter=x}",
            "@exfilter{f.pl}{filter=x,filter=y}",
            "@exfilter{f.pl}{filter=x,,V}",
            "@exfilter{f.pl}{filter=x} trailing",
            "@exfilter{f.pl}{filter=x,(a}",
            "@exfilter{f{g}.pl}{filter=x}",
        ] {
            let e = parse(bad, "x.md").unwrap_err();
            assert_eq!(e.kind, ParseErrorKind::BadDirective, "{bad}");
            assert_eq!(e.line, 1);
        }
    }
}
