//! The engine's command-line transcript format.
//!
//! Each answer is printed as `Var = Term` lines with ` ;` appended to the
//! answer's last line (`true ;` for an answer without bindings). The final
//! line is `yes` when at least one answer was printed and `no` otherwise.
//! Errors go to stderr prefixed with `error: `.

use crate::{parse_program, parse_query, solve, Budget, Solutions};

pub fn render(solutions: &Solutions) -> String {
    let mut out = String::new();
    for answer in &solutions.answers {
        let lines = answer.binding_lines();
        if lines.is_empty() {
            out.push_str("true ;\n");
            continue;
        }
        let last = lines.len() - 1;
        for (i, line) in lines.iter().enumerate() {
            out.push_str(line);
            if i == last {
                out.push_str(" ;");
            }
            out.push('\n');
        }
    }
    out.push_str(if solutions.answers.is_empty() { "no\n" } else { "yes\n" });
    out
}

/// Output of one tool-mode run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ToolOutput {
    pub stdout: String,
    pub stderr: String,
    pub exit_code: i32,
}

/// Loads `program_text`, runs `query_text`, and renders the transcript.
pub fn run(program_text: &str, query_text: &str, budget: &Budget) -> ToolOutput {
    let failure = |message: String| ToolOutput { stdout: String::new(), stderr: format!("error: {message}\n"), exit_code: 1 };
    let program = match parse_program(program_text) {
        Ok(p) => p,
        Err(e) => return failure(format!("program: {e}")),
    };
    let query = match parse_query(query_text) {
        Ok(q) => q,
        Err(e) => return failure(format!("query: {e}")),
    };
    match solve(&program, &query, budget) {
        Ok(s) => ToolOutput { stdout: render(&s), stderr: String::new(), exit_code: 0 },
        Err(e) => failure(e.to_string()),
    }
}
