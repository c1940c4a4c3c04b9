//! Static build: sources in, HTML pages plus a private exercise sidecar out.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ald_engine::Budget;
use pulldown_cmark::{html, Event, Options, Parser};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::doc::{BlockKind, CellKind, Document, FilterDirective};
use crate::exercise::{self, CheckDeps, ExerciseSpec, Outcome};
use crate::filters::{FilterError, FilterRegistry, FilterSpec};
use crate::parser::{self, ParseError};
use crate::tools::{Cache, ToolError, ToolManifest, ToolRequest, ToolRunner};

pub const PROTOCOL_VERSION: u32 = 1;
pub const CACHE_DIR: &str = ".ald-cache";
pub const PRIVATE_DIR: &str = ".ald-private";
pub const SIDECAR_FILE: &str = "exercises.json";
pub const RUNTIME_JS: &str = include_str!("../assets/ald-runtime.js");
pub const STYLE_CSS: &str = include_str!("../assets/ald.css");

#[derive(Debug, Clone)]
pub struct SiteConfig {
    pub source_dir: PathBuf,
    pub output_dir: PathBuf,
    pub manifest_path: Option<PathBuf>,
    pub default_tool_id: Option<String>,
    pub cache_enabled: bool,
    pub engine_budget: Budget,
}

impl SiteConfig {
    pub fn new(source_dir: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        SiteConfig {
            source_dir: source_dir.into(),
            output_dir: output_dir.into(),
            manifest_path: None,
            default_tool_id: None,
            cache_enabled: true,
            engine_budget: Budget::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelfCheckFailure {
    pub page: String,
    pub cell_id: String,
    pub line: usize,
    pub outcome: Outcome,
    pub feedback: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildReport {
    pub pages_built: usize,
    pub tool_requests: usize,
    pub tool_invocations: usize,
    pub cache_hits: usize,
    pub self_check_failures: Vec<SelfCheckFailure>,
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("no sources: {} contains no .md files", .0.display())]
    NoSources(PathBuf),
    #[error("source and output directories must differ")]
    SameDirectories,
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{file}:{}: {}: {}", .error.line, .error.kind.as_str(), .error.message)]
    Parse { file: String, error: ParseError },
    #[error("{0}")]
    Tools(ToolError),
    #[error("{file}:{line}: {message}")]
    Directive { file: String, line: usize, message: String },
    #[error("default tool `{0}` is not in the tool manifest")]
    UnknownDefaultTool(String),
    #[error("{} exercise self-check(s) failed; first: {}:{}: {} ({})",
        .0.len(), .0[0].page, .0[0].line, .0[0].cell_id, .0[0].feedback.lines().next().unwrap_or(""))]
    SelfCheck(Vec<SelfCheckFailure>),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BuildError + '_ {
    move |source| BuildError::Io { path: path.to_path_buf(), source }
}

/// Server-side description of a built site's exercises. Lives under the
/// private directory and is never served.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sidecar {
    pub protocol_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_tool: Option<String>,
    pub budget: Budget,
    pub tools: ToolManifest,
    pub exercises: Vec<ExerciseSpec>,
}

impl Sidecar {
    pub fn path_in(output_dir: &Path) -> PathBuf {
        output_dir.join(PRIVATE_DIR).join(SIDECAR_FILE)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_slice(&bytes).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn find(&self, page: Option<&str>, cell_id: &str) -> Option<&ExerciseSpec> {
        self.exercises.iter().find(|e| e.cell_id == cell_id && page.is_none_or(|p| p == e.page))
    }
}

#[derive(Debug, Serialize)]
struct CellManifest<'a> {
    protocol_version: u32,
    page: &'a str,
    cells: Vec<ManifestCell<'a>>,
}

#[derive(Debug, Serialize)]
struct ManifestCell<'a> {
    cell_id: &'a str,
    kind: CellKind,
    engine_id: &'a str,
    initial_text: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    checker: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    query: Option<&'a str>,
}

struct Page {
    file: String,
    doc: Document,
    /// Filtered tool output per block index.
    outputs: BTreeMap<usize, String>,
    exercises: Vec<(usize, ExerciseSpec)>,
}

pub fn build(config: &SiteConfig) -> Result<BuildReport, BuildError> {
    let sources = list_sources(&config.source_dir)?;
    if same_dir(&config.source_dir, &config.output_dir) {
        return Err(BuildError::SameDirectories);
    }
    let manifest = match &config.manifest_path {
        Some(p) => ToolManifest::load(p).map_err(BuildError::Tools)?,
        None => ToolManifest::default(),
    };
    let default_tool = match &config.default_tool_id {
        Some(id) if manifest.has_tool(id) => Some(id.clone()),
        Some(id) => return Err(BuildError::UnknownDefaultTool(id.clone())),
        None if manifest.tools.len() == 1 => manifest.tools.keys().next().cloned(),
        None => None,
    };
    let cache = config.cache_enabled.then(|| Cache::new(config.output_dir.join(CACHE_DIR)));
    let runner = ToolRunner::new(manifest, cache).with_budget(config.engine_budget);
    let filters = FilterRegistry::with_builtins();

    let mut pages = Vec::new();
    for path in &sources {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let file = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
        let doc = parser::parse(&text, &file).map_err(|error| BuildError::Parse { file: file.clone(), error })?;
        pages.push(Page { file, doc, outputs: BTreeMap::new(), exercises: Vec::new() });
    }

    pages.par_iter_mut().try_for_each(|page| {
        resolve_directives(page, config, &runner, &filters, default_tool.as_deref())
    })?;

    for page in &mut pages {
        page.exercises = exercise_specs(&page.doc);
    }
    let deps = CheckDeps {
        runner: &runner,
        filters: &filters,
        budget: config.engine_budget,
        default_tool: default_tool.as_deref(),
    };
    let failures: Vec<SelfCheckFailure> = pages
        .par_iter()
        .flat_map_iter(|page| {
            page.exercises.iter().filter_map(|(line, spec)| {
                let verdict = exercise::check(spec, &spec.solution, &deps);
                (verdict.outcome != Outcome::Pass).then(|| SelfCheckFailure {
                    page: page.file.clone(),
                    cell_id: spec.cell_id.clone(),
                    line: *line,
                    outcome: verdict.outcome,
                    feedback: verdict.feedback(),
                })
            })
        })
        .collect();
    if !failures.is_empty() {
        return Err(BuildError::SelfCheck(failures));
    }

    write_site(config, &pages, &runner, default_tool)?;
    Ok(BuildReport {
        pages_built: pages.len(),
        tool_requests: runner.requests(),
        tool_invocations: runner.invocations(),
        cache_hits: runner.cache_hits(),
        self_check_failures: Vec::new(),
    })
}

fn list_sources(dir: &Path) -> Result<Vec<PathBuf>, BuildError> {
    let entries = std::fs::read_dir(dir).map_err(io_err(dir))?;
    let mut sources = Vec::new();
    for entry in entries {
        let path = entry.map_err(io_err(dir))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "md") {
            sources.push(path);
        }
    }
    if sources.is_empty() {
        return Err(BuildError::NoSources(dir.to_path_buf()));
    }
    sources.sort();
    Ok(sources)
}

fn same_dir(a: &Path, b: &Path) -> bool {
    match (std::fs::canonicalize(a), std::fs::canonicalize(b)) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

fn resolve_directives(
    page: &mut Page,
    config: &SiteConfig,
    runner: &ToolRunner,
    filters: &FilterRegistry,
    default_tool: Option<&str>,
) -> Result<(), BuildError> {
    for (index, block) in page.doc.blocks.iter().enumerate() {
        let BlockKind::Filter(directive) = &block.kind else { continue };
        let fail = |message: String| BuildError::Directive { file: page.file.clone(), line: block.span.start, message };
        let output = run_directive(directive, config, runner, filters, default_tool).map_err(fail)?;
        page.outputs.insert(index, output);
    }
    Ok(())
}

fn run_directive(
    directive: &FilterDirective,
    config: &SiteConfig,
    runner: &ToolRunner,
    filters: &FilterRegistry,
    default_tool: Option<&str>,
) -> Result<String, String> {
    let tool = directive
        .tool_id
        .as_deref()
        .or(default_tool)
        .ok_or("no tool= option and no default tool configured")?;
    if !runner.manifest().has_tool(tool) {
        return Err(ToolError::UnknownTool(tool.to_string()).to_string());
    }
    if !filters.contains(&directive.filter_name) {
        return Err(FilterError::UnknownFilter(directive.filter_name.clone()).to_string());
    }
    let path = config.source_dir.join(&directive.code_file);
    let input = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let file_name = Path::new(&directive.code_file)
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let request = ToolRequest {
        tool_id: tool.to_string(),
        input,
        file_name,
        options: directive.tool_options.clone(),
    };
    let transcript = runner.run(&request).map_err(|e| e.to_string())?;
    if transcript.timed_out() {
        return Err(format!("tool `{tool}` timed out"));
    }
    let spec = FilterSpec::with_params(directive.filter_name.clone(), directive.params());
    filters.apply_transcript(&spec, &transcript).map_err(|e| e.to_string())
}

/// Exercise specs for a page with the source line of each cell. The
/// `output_match` query is the nearest query cell after the exercise,
/// else the nearest one before it.
fn exercise_specs(doc: &Document) -> Vec<(usize, ExerciseSpec)> {
    let page = doc.stem();
    let cells: Vec<(usize, &crate::doc::CodeCell)> = doc
        .blocks
        .iter()
        .filter_map(|b| match &b.kind {
            BlockKind::Cell(c) => Some((b.span.start, c)),
            _ => None,
        })
        .collect();
    let mut out = Vec::new();
    for (i, (line, cell)) in cells.iter().enumerate() {
        if cell.kind != CellKind::Exercise {
            continue;
        }
        let is_query = |(_, c): &&(usize, &crate::doc::CodeCell)| c.kind == CellKind::Query;
        let query = cells[i + 1..]
            .iter()
            .find(is_query)
            .or_else(|| cells[..i].iter().rev().find(is_query))
            .map(|(_, c)| c.visible_text.trim().to_string());
        out.push((
            *line,
            ExerciseSpec {
                page: page.clone(),
                cell_id: cell.cell_id.clone(),
                engine_id: cell.engine_id.clone(),
                skeleton: cell.visible_text.clone(),
                solution: cell.solution_text.clone().unwrap_or_default(),
                checker: cell.checker.clone().unwrap_or_default(),
                tool_id: None,
                tool_options: Vec::new(),
                filter: None,
                query: if cell.checker.as_deref() == Some("output_match") { query } else { None },
            },
        ));
    }
    out
}

fn write_site(
    config: &SiteConfig,
    pages: &[Page],
    runner: &ToolRunner,
    default_tool: Option<String>,
) -> Result<(), BuildError> {
    let out = &config.output_dir;
    let assets = out.join("assets");
    let private = out.join(PRIVATE_DIR);
    for dir in [out, &assets, &private] {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    write(&assets.join("ald-runtime.js"), RUNTIME_JS)?;
    write(&assets.join("ald.css"), STYLE_CSS)?;
    for page in pages {
        write(&out.join(format!("{}.html", page.doc.stem())), &render_page(page))?;
    }
    write(&out.join("index.html"), &render_index(pages))?;

    let sidecar = Sidecar {
        protocol_version: PROTOCOL_VERSION,
        default_tool,
        budget: config.engine_budget,
        tools: runner.manifest().clone(),
        exercises: pages.iter().flat_map(|p| p.exercises.iter().map(|(_, e)| e.clone())).collect(),
    };
    let mut json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    json.push('\n');
    write(&Sidecar::path_in(out), &json)
}

fn write(path: &Path, contents: &str) -> Result<(), BuildError> {
    std::fs::write(path, contents).map_err(io_err(path))
}

pub fn escape_html(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

fn render_prose(text: &str) -> String {
    let events = Parser::new_ext(text, Options::empty()).map(|e| match e {
        Event::Html(s) | Event::InlineHtml(s) => Event::Text(s),
        e => e,
    });
    let mut out = String::new();
    html::push_html(&mut out, events);
    out
}

fn manifest_json(doc: &Document, exercises: &[(usize, ExerciseSpec)]) -> String {
    let page = doc.stem();
    let cells = doc
        .cells()
        .map(|c| ManifestCell {
            cell_id: &c.cell_id,
            kind: c.kind,
            engine_id: &c.engine_id,
            initial_text: &c.visible_text,
            checker: c.checker.as_deref(),
            query: exercises.iter().find(|(_, e)| e.cell_id == c.cell_id).and_then(|(_, e)| e.query.as_deref()),
        })
        .collect();
    let manifest = CellManifest { protocol_version: PROTOCOL_VERSION, page: &page, cells };
    serde_json::to_string(&manifest)
        .expect("manifest serializes")
        .replace('<', "\\u003c")
        .replace('>', "\\u003e")
        .replace('&', "\\u0026")
}

fn render_page(page: &Page) -> String {
    let doc = &page.doc;
    let stem = doc.stem();
    let title = doc.title.clone().unwrap_or_else(|| stem.clone());
    let mut body = String::new();
    for (index, block) in doc.blocks.iter().enumerate() {
        match &block.kind {
            BlockKind::Heading(h) => {
                body.push_str(&format!("<h{0}>{1}</h{0}>\n", h.level, escape_html(&h.text)));
            }
            BlockKind::Prose(text) => body.push_str(&render_prose(text)),
            BlockKind::Cell(cell) => {
                body.push_str(&format!(
                    "<div class=\"ald-cell\" id=\"{id}\" data-cell-id=\"{id}\" data-kind=\"{kind}\" data-engine=\"{engine}\">\
                     <pre class=\"ald-code\"><code>{text}</code></pre></div>\n",
                    id = escape_html(&cell.cell_id),
                    kind = cell.kind.as_str(),
                    engine = escape_html(&cell.engine_id),
                    text = escape_html(&cell.visible_text),
                ));
            }
            BlockKind::Filter(f) => {
                let output = page.outputs.get(&index).map(String::as_str).unwrap_or("");
                body.push_str(&format!(
                    "<pre class=\"ald-tool-output\" data-file=\"{}\" data-filter=\"{}\">{}</pre>\n",
                    escape_html(&f.code_file),
                    escape_html(&f.filter_name),
                    escape_html(output),
                ));
            }
        }
    }
    format!(
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>{title}</title>\n\
         <link rel=\"stylesheet\" href=\"assets/ald.css\">\n\
         <script type=\"application/json\" id=\"ald-manifest\">{manifest}</script>\n\
         <script src=\"assets/ald-runtime.js\" defer></script>\n</head>\n<body>\n\
         <main class=\"ald-page\" data-page=\"{page}\">\n{body}</main>\n</body>\n</html>\n",
        title = escape_html(&title),
        manifest = manifest_json(doc, &page.exercises),
        page = escape_html(&stem),
    )
}

fn render_index(pages: &[Page]) -> String {
    let mut items = String::new();
    for page in pages {
        let stem = page.doc.stem();
        let title = page.doc.title.clone().unwrap_or_else(|| stem.clone());
        items.push_str(&format!("<li><a href=\"{}.html\">{}</a></li>\n", escape_html(&stem), escape_html(&title)));
    }
    format!(
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>Contents</title>\n\
         <link rel=\"stylesheet\" href=\"assets/ald.css\">\n</head>\n<body>\n<main>\n<h1>Contents</h1>\n\
         <ul>\n{items}</ul>\n</main>\n</body>\n</html>\n"
    )
}
