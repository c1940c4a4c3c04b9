//! Document tree for one source page.

use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub source_path: String,
    pub title: Option<String>,
    pub blocks: Vec<Block>,
}

/// 1-based inclusive line range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub span: Span,
    pub kind: BlockKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BlockKind {
    Heading(Heading),
    Prose(String),
    Cell(CodeCell),
    Filter(FilterDirective),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadingStyle {
    Markdown,
    /// `\title <text>`, always level 1.
    Title,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Heading {
    pub level: u8,
    pub text: String,
    pub style: HeadingStyle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Program,
    Query,
    Static,
    Exercise,
}

impl CellKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CellKind::Program => "program",
            CellKind::Query => "query",
            CellKind::Static => "static",
            CellKind::Exercise => "exercise",
        }
    }

    pub fn is_runnable(self) -> bool {
        self != CellKind::Static
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeCell {
    pub kind: CellKind,
    pub engine_id: String,
    /// Fence tag as written, kept so the source round-trips.
    pub fence_tag: String,
    pub visible_text: String,
    pub solution_text: Option<String>,
    pub checker: Option<String>,
    pub cell_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterDirective {
    pub code_file: String,
    pub tool_options: Vec<String>,
    pub filter_name: String,
    /// Raw `<filter>:<param>` and `stream=` tokens, in source order.
    pub filter_params: Vec<String>,
    /// `None` means the site's default tool.
    pub tool_id: Option<String>,
}

impl FilterDirective {
    /// Filter parameters with the `<filter>:` prefix removed.
    pub fn params(&self) -> Vec<String> {
        let prefix = format!("{}:", self.filter_name);
        self.filter_params
            .iter()
            .map(|p| p.strip_prefix(&prefix).unwrap_or(p).to_string())
            .collect()
    }
}

impl Document {
    pub fn empty(source_path: impl Into<String>) -> Self {
        Document { source_path: source_path.into(), title: None, blocks: Vec::new() }
    }

    pub fn stem(&self) -> String {
        page_stem(&self.source_path)
    }

    pub fn cells(&self) -> impl Iterator<Item = &CodeCell> {
        self.blocks.iter().filter_map(|b| match &b.kind {
            BlockKind::Cell(c) => Some(c),
            _ => None,
        })
    }

    pub fn directives(&self) -> impl Iterator<Item = (&Block, &FilterDirective)> {
        self.blocks.iter().filter_map(|b| match &b.kind {
            BlockKind::Filter(f) => Some((b, f)),
            _ => None,
        })
    }

    /// Equality of title and block contents, ignoring line spans.
    pub fn same_structure(&self, other: &Document) -> bool {
        self.title == other.title
            && self.blocks.len() == other.blocks.len()
            && self.blocks.iter().zip(&other.blocks).all(|(a, b)| a.kind == b.kind)
    }
}

pub fn page_stem(source_path: &str) -> String {
    Path::new(source_path)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "page".to_string())
}

pub fn serialize(doc: &Document) -> String {
    let mut out = String::new();
    for block in &doc.blocks {
        match &block.kind {
            BlockKind::Heading(h) => match h.style {
                HeadingStyle::Markdown => {
                    out.push_str(&"#".repeat(h.level as usize));
                    out.push(' ');
                    out.push_str(&h.text);
                    out.push('\n');
                }
                HeadingStyle::Title => {
                    out.push_str("\\title ");
                    out.push_str(&h.text);
                    out.push('\n');
                }
            },
            BlockKind::Prose(text) => {
                out.push_str(text);
                out.push('\n');
            }
            BlockKind::Cell(cell) => {
                out.push_str("```");
                out.push_str(&cell.fence_tag);
                out.push('\n');
                push_body(&mut out, &cell.visible_text);
                if let (Some(checker), Some(solution)) = (&cell.checker, &cell.solution_text) {
                    out.push_str("solution=");
                    out.push_str(checker);
                    out.push('\n');
                    push_body(&mut out, solution);
                }
                out.push_str("```\n");
            }
            BlockKind::Filter(f) => {
                let mut tokens = f.tool_options.clone();
                tokens.push(format!("filter={}", f.filter_name));
                tokens.extend(f.filter_params.iter().cloned());
                if let Some(tool) = &f.tool_id {
                    tokens.push(format!("tool={tool}"));
                }
                out.push_str(&format!("@exfilter{{{}}}{{{}}}\n", f.code_file, tokens.join(",")));
            }
        }
    }
    out
}

fn push_body(out: &mut String, body: &str) {
    if !body.is_empty() {
        out.push_str(body);
        out.push('\n');
    }
}
