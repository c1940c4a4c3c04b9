//! Named projections from tool transcripts to the lines a page shows.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tools::Transcript;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FilterError {
    #[error("unknown filter `{0}`")]
    UnknownFilter(String),
    #[error("bad parameters for filter `{filter}`: {message}")]
    BadParams { filter: String, message: String },
    #[error("filter name must not be empty")]
    EmptyName,
}

pub type FilterFn = Arc<dyn Fn(&str, &[String]) -> Result<String, FilterError> + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub name: String,
    #[serde(default)]
    pub params: Vec<String>,
}

impl FilterSpec {
    pub fn new(name: impl Into<String>) -> Self {
        FilterSpec { name: name.into(), params: Vec::new() }
    }

    pub fn with_params(name: impl Into<String>, params: Vec<String>) -> Self {
        FilterSpec { name: name.into(), params }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Stdout,
    Stderr,
    Both,
}

#[derive(Clone)]
pub struct FilterRegistry {
    filters: HashMap<String, FilterFn>,
}

impl fmt::Debug for FilterRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut names: Vec<_> = self.filters.keys().collect();
        names.sort();
        f.debug_struct("FilterRegistry").field("filters", &names).finish()
    }
}

impl Default for FilterRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl FilterRegistry {
    pub fn with_builtins() -> Self {
        let mut r = FilterRegistry { filters: HashMap::new() };
        r.insert("identity", |input, params| {
            no_params("identity", params)?;
            Ok(input.to_string())
        });
        r.insert("warn_error", |input, params| {
            no_params("warn_error", params)?;
            Ok(warn_error(input))
        });
        r.insert("regex", regex_filter);
        r.insert("head", head);
        r.insert("answers", |input, params| {
            no_params("answers", params)?;
            Ok(answers(input))
        });
        r.insert("pred_props", pred_props);
        r
    }

    fn insert(&mut self, name: &str, f: impl Fn(&str, &[String]) -> Result<String, FilterError> + Send + Sync + 'static) {
        self.filters.insert(name.to_string(), Arc::new(f));
    }

    /// Adds or shadows a filter.
    pub fn register(
        &mut self,
        name: &str,
        f: impl Fn(&str, &[String]) -> Result<String, FilterError> + Send + Sync + 'static,
    ) -> Result<(), FilterError> {
        if name.is_empty() {
            return Err(FilterError::EmptyName);
        }
        self.insert(name, f);
        Ok(())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.filters.contains_key(name)
    }

    pub fn apply(&self, spec: &FilterSpec, input: &str) -> Result<String, FilterError> {
        let f = self.filters.get(&spec.name).ok_or_else(|| FilterError::UnknownFilter(spec.name.clone()))?;
        f(input, &spec.params)
    }

    /// Applies a filter to a transcript. A `stream=stdout|stderr|both`
    /// parameter picks the text; stdout is the default.
    pub fn apply_transcript(&self, spec: &FilterSpec, transcript: &Transcript) -> Result<String, FilterError> {
        let (stream, params) = split_stream(spec)?;
        let text = match stream {
            Stream::Stdout => transcript.stdout.clone(),
            Stream::Stderr => transcript.stderr.clone(),
            Stream::Both => {
                let mut t = transcript.stdout.clone();
                if !t.is_empty() && !t.ends_with('\n') {
                    t.push('\n');
                }
                t.push_str(&transcript.stderr);
                t
            }
        };
        self.apply(&FilterSpec { name: spec.name.clone(), params }, &text)
    }
}

fn split_stream(spec: &FilterSpec) -> Result<(Stream, Vec<String>), FilterError> {
    let mut stream = Stream::Stdout;
    let mut rest = Vec::new();
    for p in &spec.params {
        match p.strip_prefix("stream=") {
            Some("stdout") => stream = Stream::Stdout,
            Some("stderr") => stream = Stream::Stderr,
            Some("both") => stream = Stream::Both,
            Some(other) => {
                return Err(FilterError::BadParams {
                    filter: spec.name.clone(),
                    message: format!("unknown stream `{other}`"),
                })
            }
            None => rest.push(p.clone()),
        }
    }
    Ok((stream, rest))
}

fn bad(filter: &str, message: impl Into<String>) -> FilterError {
    FilterError::BadParams { filter: filter.to_string(), message: message.into() }
}

fn no_params(filter: &str, params: &[String]) -> Result<(), FilterError> {
    if params.is_empty() {
        Ok(())
    } else {
        Err(bad(filter, "takes no parameters"))
    }
}

fn one_param<'a>(filter: &str, params: &'a [String]) -> Result<&'a str, FilterError> {
    match params {
        [p] => Ok(p),
        _ => Err(bad(filter, format!("expects exactly one parameter, got {}", params.len()))),
    }
}

/// Keeps WARNING/ERROR messages: a message starts at a line beginning with
/// `WARNING` or `ERROR` and continues through the indented lines after it.
pub fn warn_error(input: &str) -> String {
    let mut kept = Vec::new();
    let mut inside = false;
    for line in input.lines() {
        if line.starts_with("WARNING") || line.starts_with("ERROR") {
            inside = true;
        } else if !(inside && line.starts_with([' ', '\t'])) {
            inside = false;
        }
        if inside {
            kept.push(line);
        }
    }
    join_lines(kept.into_iter())
}

/// Joins selected lines with `\n`. A final empty line gets an extra newline
/// so that splitting the result again yields the same lines.
fn join_lines<'a>(lines: impl Iterator<Item = &'a str>) -> String {
    let lines: Vec<&str> = lines.collect();
    let mut out = lines.join("\n");
    if lines.last().is_some_and(|l| l.is_empty()) {
        out.push('\n');
    }
    out
}

fn regex_filter(input: &str, params: &[String]) -> Result<String, FilterError> {
    let pattern = one_param("regex", params)?;
    let re = Regex::new(pattern).map_err(|e| bad("regex", e.to_string()))?;
    Ok(join_lines(input.lines().filter(|l| re.is_match(l))))
}

fn head(input: &str, params: &[String]) -> Result<String, FilterError> {
    let n: usize = one_param("head", params)?.parse().map_err(|_| bad("head", "expects a line count"))?;
    Ok(join_lines(input.lines().take(n)))
}

/// `Var = Term` lines of an engine transcript, without ` ;` terminators.
pub fn answers(input: &str) -> String {
    let re = Regex::new(r"^[A-Z_][A-Za-z0-9_]* = ").expect("static regex");
    join_lines(input.lines().filter(|l| re.is_match(l)).map(|l| l.strip_suffix(" ;").unwrap_or(l)))
}

fn pred_props(input: &str, params: &[String]) -> Result<String, FilterError> {
    let indicator = one_param("pred_props", params)?;
    let (name, arity) = indicator
        .rsplit_once('/')
        .and_then(|(n, a)| Some((n, a.parse::<usize>().ok()?)))
        .filter(|(n, _)| !n.is_empty())
        .ok_or_else(|| bad("pred_props", "expects name/arity"))?;
    let prefix = format!(":- true pred {name}");
    Ok(join_lines(
        input.lines().filter(|l| l.strip_prefix(&prefix).is_some_and(|rest| head_arity(rest) == Some(arity))),
    ))
}

/// Arity of the head whose name has just been consumed: `(a,b) ...` is 2,
/// a following space, `.` or end is 0, anything else is a different name.
fn head_arity(rest: &str) -> Option<usize> {
    let Some(args) = rest.strip_prefix('(') else {
        return (rest.is_empty() || rest.starts_with([' ', '.', ':'])).then_some(0);
    };
    let mut depth = 0;
    let mut commas = 0;
    for c in args.chars() {
        match c {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' if depth == 0 => return Some(commas + 1),
            ')' | ']' | '}' => depth -= 1,
            ',' if depth == 0 => commas += 1,
            _ => {}
        }
    }
    None
}
