//! Seeded generators for small random Horn programs and queries.

use ald_engine::{Clause, Program, Term};
use rand::seq::SliceRandom;
use rand::Rng;

const PREDS: &[(&str, usize)] = &[("p", 1), ("q", 2), ("r", 2), ("e", 2)];
const CONSTS: &[&str] = &["a", "b", "c"];

fn random_term<R: Rng>(rng: &mut R, vars: &[&str], depth: u32) -> Term {
    let roll = rng.gen_range(0..10);
    match roll {
        0..=3 => Term::var(*vars.choose(rng).unwrap()),
        4..=6 => Term::atom(*CONSTS.choose(rng).unwrap()),
        7 => Term::Integer(rng.gen_range(0..3)),
        8 if depth > 0 => Term::compound("s", vec![random_term(rng, vars, depth - 1)]),
        9 if depth > 0 => {
            Term::compound("f", vec![random_term(rng, vars, depth - 1), random_term(rng, vars, depth - 1)])
        }
        _ => Term::atom(*CONSTS.choose(rng).unwrap()),
    }
}

fn random_goal<R: Rng>(rng: &mut R, vars: &[&str], depth: u32) -> Term {
    let (name, arity) = *PREDS.choose(rng).unwrap();
    Term::compound(name, (0..arity).map(|_| random_term(rng, vars, depth)).collect())
}

/// A program of `3..=max_clauses` clauses over p/1, q/2, r/2 and e/2, with
/// bodies of up to two goals (occasionally an explicit `=`).
pub fn random_program<R: Rng>(rng: &mut R, max_clauses: usize) -> Program {
    let n = rng.gen_range(3..=max_clauses);
    let vars = ["X", "Y", "Z"];
    let mut clauses = Vec::new();
    for _ in 0..n {
        let head = random_goal(rng, &vars, 1);
        let body_len = rng.gen_range(0..=2);
        let body = (0..body_len)
            .map(|_| {
                if rng.gen_ratio(1, 8) {
                    Term::compound("=", vec![random_term(rng, &vars, 1), random_term(rng, &vars, 1)])
                } else {
                    random_goal(rng, &vars, 1)
                }
            })
            .collect();
        clauses.push(Clause { head, body, line: 0 });
    }
    Program { clauses, directives: Vec::new(), fair_search: true }
}

pub fn random_query<R: Rng>(rng: &mut R) -> Term {
    random_goal(rng, &["A", "B"], 1)
}
