//! Execution of `:- test` directives.

use crate::program::{Program, TestDirective, TestProp};
use crate::{solve, Budget, Solutions};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TestVerdict {
    Pass,
    Fail,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TestOutcome {
    pub test: TestDirective,
    pub verdict: TestVerdict,
    pub detail: String,
}

impl TestOutcome {
    pub fn passed(&self) -> bool {
        self.verdict == TestVerdict::Pass
    }
}

/// Runs every test directive of `program` against its own clauses.
pub fn run_tests(program: &Program, budget: &Budget) -> Vec<TestOutcome> {
    program.tests().map(|t| run_test(program, t, budget)).collect()
}

pub fn run_test(program: &Program, test: &TestDirective, budget: &Budget) -> TestOutcome {
    let budget = budget.with_answers(1);
    let (verdict, detail) = match solve(program, &test.goal, &budget) {
        Err(e) => (TestVerdict::Fail, format!("error: {e}")),
        Ok(solutions) => judge(program, test, &budget, &solutions),
    };
    TestOutcome { test: test.clone(), verdict, detail }
}

fn judge(program: &Program, test: &TestDirective, budget: &Budget, solutions: &Solutions) -> (TestVerdict, String) {
    let first = solutions.answers.first();
    let shown = |a: &crate::Answer| {
        let lines = a.binding_lines();
        if lines.is_empty() {
            "true".to_string()
        } else {
            lines.join(", ")
        }
    };
    for prop in &test.props {
        match (prop, first) {
            (TestProp::NotFails, None) => return (TestVerdict::Fail, "expected an answer, but the goal failed".into()),
            (TestProp::Fails, Some(a)) => {
                return (TestVerdict::Fail, format!("expected failure, but found answer {}", shown(a)))
            }
            _ => {}
        }
    }
    if let Some(post) = &test.post {
        let Some(answer) = first else {
            return (TestVerdict::Fail, format!("goal failed, so postcondition {post} could not hold"));
        };
        let instance = answer.instantiate(post);
        match solve(program, &instance, budget) {
            Ok(s) if !s.answers.is_empty() => {}
            Ok(_) => {
                return (
                    TestVerdict::Fail,
                    format!("postcondition {post} does not hold for {}", shown(answer)),
                )
            }
            Err(e) => return (TestVerdict::Fail, format!("error checking postcondition {post}: {e}")),
        }
    }
    let detail = match first {
        Some(a) => format!("answer {}", shown(a)),
        None => "no answers".to_string(),
    };
    (TestVerdict::Pass, detail)
}

/// Convenience for callers that only need a yes/no over a program's tests.
pub fn all_pass(outcomes: &[TestOutcome]) -> bool {
    outcomes.iter().all(TestOutcome::passed)
}
