//! Grading of exercise submissions against a hidden solution.

use std::collections::BTreeSet;

use ald_engine::{parse_program, parse_query, solve, Budget, Program};
use serde::{Deserialize, Serialize};

use crate::filters::{FilterRegistry, FilterSpec};
use crate::tools::{ToolRequest, ToolRunner};

pub const CHECKERS: &[&str] = &["run_tests", "verify_assert", "output_match"];

const PASS_TEXT: &str = "Correct!";
const ASSERT_HINT: &str = "Hint: compare your assertion's success properties.";
const TESTS_HINT: &str = "Hint: look at the failing tests above.";
const ANSWERS_HINT: &str = "Hint: compare your answers with what the query should produce.";
/// Answers compared per query by `output_match`.
const OUTPUT_MATCH_ANSWERS: usize = 50;
const REDACTED: &str = "[solution hidden]";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExerciseSpec {
    pub page: String,
    pub cell_id: String,
    pub engine_id: String,
    pub skeleton: String,
    /// Stored base64-encoded so the plain text never appears on disk.
    #[serde(with = "b64")]
    pub solution: String,
    pub checker: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_id: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_options: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterSpec>,
    /// Query compared by `output_match`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<String>,
}

mod b64 {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(text: &str, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&STANDARD.encode(text))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<String, D::Error> {
        let encoded = String::deserialize(d)?;
        let bytes = STANDARD.decode(encoded).map_err(serde::de::Error::custom)?;
        String::from_utf8(bytes).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Pass,
    Fail,
    Error,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Pass => "pass",
            Outcome::Fail => "fail",
            Outcome::Error => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub outcome: Outcome,
    /// Filtered diagnostic, already stripped of the solution text.
    pub diagnostic: String,
    pub hint: Option<&'static str>,
}

impl Verdict {
    fn pass() -> Self {
        Verdict { outcome: Outcome::Pass, diagnostic: String::new(), hint: None }
    }

    fn fail(diagnostic: impl Into<String>, hint: &'static str) -> Self {
        Verdict { outcome: Outcome::Fail, diagnostic: diagnostic.into(), hint: Some(hint) }
    }

    fn error(diagnostic: impl Into<String>) -> Self {
        Verdict { outcome: Outcome::Error, diagnostic: diagnostic.into(), hint: None }
    }

    pub fn feedback(&self) -> String {
        feedback_for(self)
    }
}

pub fn feedback_for(verdict: &Verdict) -> String {
    match verdict.outcome {
        Outcome::Pass => PASS_TEXT.to_string(),
        Outcome::Fail => {
            let hint = verdict.hint.unwrap_or(ASSERT_HINT);
            if verdict.diagnostic.is_empty() {
                hint.to_string()
            } else {
                format!("{}\n{hint}", verdict.diagnostic)
            }
        }
        Outcome::Error => verdict.diagnostic.clone(),
    }
}

/// Services a check may use.
#[derive(Debug, Clone, Copy)]
pub struct CheckDeps<'a> {
    pub runner: &'a ToolRunner,
    pub filters: &'a FilterRegistry,
    pub budget: Budget,
    pub default_tool: Option<&'a str>,
}

pub fn check(spec: &ExerciseSpec, submission: &str, deps: &CheckDeps<'_>) -> Verdict {
    let mut verdict = match parse_program(submission) {
        Err(e) => Verdict::error(format!("your program has a {e}")),
        Ok(program) => match spec.checker.as_str() {
            "run_tests" => run_tests(spec, program, deps),
            "verify_assert" => verify_assert(spec, submission, deps),
            "output_match" => output_match(spec, &program, deps),
            other => Verdict::error(format!("unknown checker `{other}`")),
        },
    };
    let secret = spec.solution.trim();
    if !secret.is_empty() && verdict.diagnostic.contains(secret) {
        verdict.diagnostic = verdict.diagnostic.replace(secret, REDACTED);
    }
    verdict
}

fn run_tests(spec: &ExerciseSpec, mut program: Program, deps: &CheckDeps<'_>) -> Verdict {
    // The solution's tests also apply, so deleting tests cannot help.
    if let Ok(solution) = parse_program(&spec.solution) {
        let present: BTreeSet<String> = program.tests().map(|t| t.describe()).collect();
        for d in solution.directives {
            if let ald_engine::Directive::Test(t) = &d {
                if !present.contains(&t.describe()) {
                    program.directives.push(d);
                }
            }
        }
    }
    let outcomes = ald_engine::run_tests(&program, &deps.budget);
    if outcomes.is_empty() {
        return Verdict::error("no tests to run");
    }
    let failed: Vec<String> = outcomes
        .iter()
        .filter(|o| !o.passed())
        .map(|o| format!("{} failed: {}", o.test.describe(), o.detail))
        .collect();
    if failed.is_empty() {
        Verdict::pass()
    } else {
        Verdict::fail(failed.join("\n"), TESTS_HINT)
    }
}

fn verify_assert(spec: &ExerciseSpec, submission: &str, deps: &CheckDeps<'_>) -> Verdict {
    let Some(tool) = spec.tool_id.as_deref().or(deps.default_tool) else {
        return Verdict::error("no analysis tool is configured for this exercise");
    };
    let filter = spec.filter.clone().unwrap_or_else(|| FilterSpec::new("warn_error"));
    let analyze = |text: &str| -> Result<String, String> {
        let request = ToolRequest {
            tool_id: tool.to_string(),
            input: text.to_string(),
            file_name: format!("{}.pl", spec.cell_id),
            options: spec.tool_options.clone(),
        };
        let transcript = deps.runner.run(&request).map_err(|e| e.to_string())?;
        if transcript.timed_out() {
            return Err(format!("the analysis tool timed out\n{}", transcript.stderr.trim_end()));
        }
        deps.filters.apply_transcript(&filter, &transcript).map_err(|e| e.to_string())
    };
    let expected = match analyze(&spec.solution) {
        Ok(t) => t,
        Err(e) => return Verdict::error(format!("could not analyze the reference: {e}")),
    };
    let got = match analyze(submission) {
        Ok(t) => t,
        Err(e) => return Verdict::error(e),
    };
    if normalize(&got) == normalize(&expected) {
        Verdict::pass()
    } else if got.trim().is_empty() {
        Verdict::fail("The analysis output differs from the expected result.", ASSERT_HINT)
    } else {
        Verdict::fail(got, ASSERT_HINT)
    }
}

fn output_match(spec: &ExerciseSpec, program: &Program, deps: &CheckDeps<'_>) -> Verdict {
    let Some(query_text) = spec.query.as_deref() else {
        return Verdict::error("this exercise has no query to compare");
    };
    let query = match parse_query(query_text) {
        Ok(q) => q,
        Err(e) => return Verdict::error(format!("the exercise query has a {e}")),
    };
    let reference = match parse_program(&spec.solution) {
        Ok(p) => p,
        Err(e) => return Verdict::error(format!("the reference program has a {e}")),
    };
    let budget = deps.budget.with_answers(deps.budget.max_answers.max(OUTPUT_MATCH_ANSWERS));
    let answers = |p: &Program| -> Result<BTreeSet<String>, String> {
        solve(p, &query, &budget).map(|s| s.answers.iter().map(|a| a.key()).collect()).map_err(|e| e.to_string())
    };
    let expected = match answers(&reference) {
        Ok(a) => a,
        Err(e) => return Verdict::error(format!("the reference program fails on the query: {e}")),
    };
    match answers(program) {
        Ok(got) if got == expected => Verdict::pass(),
        Ok(got) if got.is_empty() => Verdict::fail(format!("?- {}\nno", query_text.trim()), ANSWERS_HINT),
        Ok(got) => {
            let shown: Vec<&str> = got.iter().map(String::as_str).collect();
            Verdict::fail(format!("?- {}\n{}", query_text.trim(), shown.join("\n;\n")), ANSWERS_HINT)
        }
        Err(e) => Verdict::fail(format!("?- {}\n{e}", query_text.trim()), ANSWERS_HINT),
    }
}

/// Trailing spaces trimmed, runs of blank lines collapsed, outer blank lines dropped.
pub fn normalize(text: &str) -> String {
    let mut out: Vec<&str> = Vec::new();
    for line in text.lines().map(str::trim_end) {
        if line.is_empty() && out.last().is_none_or(|l| l.is_empty()) {
            continue;
        }
        out.push(line);
    }
    while out.last().is_some_and(|l| l.is_empty()) {
        out.pop();
    }
    out.join("\n")
}
