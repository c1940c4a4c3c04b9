//! A small logic-language engine: Horn clauses, a handful of builtins,
//! depth-first or fair (iterative deepening) answer enumeration, and
//! `:- test` directive execution.

mod machine;
pub mod ops;
pub mod program;
pub mod reader;
pub mod term;
pub mod testing;
pub mod transcript;
pub mod writer;

use std::sync::atomic::AtomicBool;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

pub use program::{parse_program, Clause, Directive, Program, TestDirective, TestProp};
pub use reader::{parse_query, parse_term};
pub use term::Term;
pub use testing::{run_tests, TestOutcome, TestVerdict};
pub use writer::format_term;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("syntax error at line {line}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SolveError {
    #[error("budget_exhausted: no answer within {max_steps} steps and depth {max_depth}")]
    BudgetExhausted { max_steps: u64, max_depth: u32 },
    #[error("instantiation_error: {0}")]
    Instantiation(String),
    #[error("type_error: {0}")]
    Type(String),
    #[error("evaluation_error: {0}")]
    Evaluation(String),
    #[error("cancelled")]
    Cancelled,
    #[error("invalid budget: {0}")]
    InvalidBudget(String),
}

impl SolveError {
    pub fn kind(&self) -> &'static str {
        match self {
            SolveError::BudgetExhausted { .. } => "budget_exhausted",
            SolveError::Instantiation(_) => "instantiation_error",
            SolveError::Type(_) => "type_error",
            SolveError::Evaluation(_) => "evaluation_error",
            SolveError::Cancelled => "cancelled",
            SolveError::InvalidBudget(_) => "invalid_budget",
        }
    }
}

/// Resource limits for one evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Budget {
    /// Deepest proof-tree level explored by fair search.
    pub max_depth: u32,
    /// Resolution steps (user and builtin goals) across the whole evaluation.
    pub max_steps: u64,
    pub max_answers: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { max_depth: 64, max_steps: 1_000_000, max_answers: 1 }
    }
}

impl Budget {
    pub fn validate(&self) -> Result<(), SolveError> {
        if self.max_depth == 0 {
            return Err(SolveError::InvalidBudget("max_depth must be positive".into()));
        }
        if self.max_steps == 0 {
            return Err(SolveError::InvalidBudget("max_steps must be positive".into()));
        }
        if self.max_answers == 0 {
            return Err(SolveError::InvalidBudget("max_answers must be positive".into()));
        }
        Ok(())
    }

    pub fn with_answers(self, max_answers: usize) -> Self {
        Budget { max_answers, ..self }
    }

    pub fn with_depth(self, max_depth: u32) -> Self {
        Budget { max_depth, ..self }
    }
}

/// One answer to a query: bindings of the visible query variables, in order
/// of first appearance, and the height of the proof tree that produced it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Answer {
    pub bindings: IndexMap<String, Term>,
    pub proof_depth: u32,
}

impl Answer {
    /// `Var = Term` lines, one per binding.
    pub fn binding_lines(&self) -> Vec<String> {
        self.bindings.iter().map(|(k, v)| format!("{k} = {v}")).collect()
    }

    /// Formatted bindings; equal keys mean indistinguishable answers.
    pub fn key(&self) -> String {
        self.binding_lines().join("\n")
    }

    /// The query with this answer's bindings applied.
    pub fn instantiate(&self, query: &Term) -> Term {
        query.substitute(&|v| self.bindings.get(v).cloned())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Solutions {
    pub answers: Vec<Answer>,
    /// Enumeration stopped at `max_answers` and more answers may exist.
    pub more: bool,
}

/// Enumerates answers to `query`.
///
/// Programs with `fair_search` set are explored by iterative deepening on proof
/// depth, so every answer with a proof of height at most `max_depth` is
/// eventually reached; others run depth-first with only the step limit.
pub fn solve(program: &Program, query: &Term, budget: &Budget) -> Result<Solutions, SolveError> {
    machine::solve(program, query, budget, None)
}

/// Like [`solve`], checking `cancel` between resolution steps.
pub fn solve_with_cancel(
    program: &Program,
    query: &Term,
    budget: &Budget,
    cancel: &AtomicBool,
) -> Result<Solutions, SolveError> {
    machine::solve(program, query, budget, Some(cancel))
}
