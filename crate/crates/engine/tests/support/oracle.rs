//! Brute-force breadth-first SLD oracle over plain substitution maps.
//!
//! Shares nothing with the engine's machine beyond the public `Term` type.
//! Every derivation whose proof tree has height at most `max_depth` is
//! enumerated; answers are keyed by their formatted bindings and mapped to
//! the smallest proof height that produces them.

use std::collections::{BTreeMap, HashMap, VecDeque};

use ald_engine::{Program, Term};

#[derive(Debug, PartialEq, Eq)]
pub enum OracleResult {
    Answers(BTreeMap<String, u32>),
    /// Some unification would have built a cyclic term.
    Cyclic,
    /// More states than the cap allowed.
    TooLarge,
}

type Subst = HashMap<String, Term>;

#[derive(Clone)]
struct State {
    goals: Vec<(Term, u32)>,
    subst: Subst,
    deepest: u32,
}

fn walk(t: &Term, s: &Subst) -> Term {
    let mut cur = t.clone();
    while let Term::Var(v) = &cur {
        match s.get(v) {
            Some(next) => cur = next.clone(),
            None => break,
        }
    }
    cur
}

fn occurs(v: &str, t: &Term, s: &Subst) -> bool {
    match walk(t, s) {
        Term::Var(w) => w == v,
        Term::Compound(_, args) => args.iter().any(|a| occurs(v, a, s)),
        _ => false,
    }
}

enum Unify {
    Yes,
    No,
    Cyclic,
}

fn unify(a: &Term, b: &Term, s: &mut Subst) -> Unify {
    let a = walk(a, s);
    let b = walk(b, s);
    match (&a, &b) {
        (Term::Var(x), Term::Var(y)) if x == y => Unify::Yes,
        (Term::Var(x), other) | (other, Term::Var(x)) => {
            if occurs(x, other, s) {
                return Unify::Cyclic;
            }
            s.insert(x.clone(), other.clone());
            Unify::Yes
        }
        (Term::Atom(x), Term::Atom(y)) => if x == y { Unify::Yes } else { Unify::No },
        (Term::Integer(x), Term::Integer(y)) => if x == y { Unify::Yes } else { Unify::No },
        (Term::Compound(f, xs), Term::Compound(g, ys)) => {
            if f != g || xs.len() != ys.len() {
                return Unify::No;
            }
            for (x, y) in xs.iter().zip(ys) {
                match unify(x, y, s) {
                    Unify::Yes => {}
                    other => return other,
                }
            }
            Unify::Yes
        }
        _ => Unify::No,
    }
}

fn rename(t: &Term, tag: usize) -> Term {
    match t {
        Term::Var(v) if v == "_" => Term::Var(format!("_anon#{tag}#{}", fresh_id())),
        Term::Var(v) => Term::Var(format!("{v}#{tag}")),
        Term::Compound(f, args) => Term::Compound(f.clone(), args.iter().map(|a| rename(a, tag)).collect()),
        other => other.clone(),
    }
}

fn fresh_id() -> usize {
    use std::sync::atomic::{AtomicUsize, Ordering};
    static N: AtomicUsize = AtomicUsize::new(0);
    N.fetch_add(1, Ordering::Relaxed)
}

fn resolve(t: &Term, s: &Subst) -> Term {
    match walk(t, s) {
        Term::Compound(f, args) => Term::Compound(f, args.iter().map(|a| resolve(a, s)).collect()),
        other => other,
    }
}

/// Renames free variables `_G1`, `_G2`, ... in order of first appearance.
fn normalize(t: &Term, names: &mut Vec<String>) -> Term {
    match t {
        Term::Var(v) => {
            let i = match names.iter().position(|n| n == v) {
                Some(i) => i,
                None => {
                    names.push(v.clone());
                    names.len() - 1
                }
            };
            Term::Var(format!("_G{}", i + 1))
        }
        Term::Compound(f, args) => Term::Compound(f.clone(), args.iter().map(|a| normalize(a, names)).collect()),
        other => other.clone(),
    }
}

pub fn bfs_answers(program: &Program, query: &Term, max_depth: u32, state_cap: usize) -> OracleResult {
    let visible: Vec<String> = query.variables().into_iter().filter(|v| !v.starts_with('_')).collect();
    let mut queue = VecDeque::new();
    queue.push_back(State {
        goals: query.conjuncts().into_iter().map(|g| (g.clone(), 1)).collect(),
        subst: Subst::new(),
        deepest: 0,
    });
    let mut answers: BTreeMap<String, u32> = BTreeMap::new();
    let mut expanded = 0usize;
    let mut tag = 0usize;
    while let Some(state) = queue.pop_front() {
        expanded += 1;
        if expanded > state_cap {
            return OracleResult::TooLarge;
        }
        let Some(((goal, depth), rest)) = state.goals.split_first() else {
            let mut names = Vec::new();
            let key = visible
                .iter()
                .map(|v| format!("{v} = {}", normalize(&resolve(&Term::Var(v.clone()), &state.subst), &mut names)))
                .collect::<Vec<_>>()
                .join("\n");
            let entry = answers.entry(key).or_insert(state.deepest);
            *entry = (*entry).min(state.deepest);
            continue;
        };
        if *depth > max_depth {
            continue;
        }
        let deepest = state.deepest.max(*depth);
        let goal = walk(goal, &state.subst);
        if let Term::Compound(f, args) = &goal {
            if f == "=" && args.len() == 2 {
                let mut subst = state.subst.clone();
                match unify(&args[0], &args[1], &mut subst) {
                    Unify::Yes => queue.push_back(State { goals: rest.to_vec(), subst, deepest }),
                    Unify::No => {}
                    Unify::Cyclic => return OracleResult::Cyclic,
                }
                continue;
            }
        }
        if goal == Term::atom("true") {
            queue.push_back(State { goals: rest.to_vec(), subst: state.subst.clone(), deepest });
            continue;
        }
        let Some((name, arity)) = goal.indicator() else { continue };
        for clause in &program.clauses {
            if clause.head.indicator() != Some((name, arity)) {
                continue;
            }
            tag += 1;
            let head = rename(&clause.head, tag);
            let mut subst = state.subst.clone();
            match unify(&head, &goal, &mut subst) {
                Unify::Yes => {
                    let mut goals: Vec<(Term, u32)> = clause.body.iter().map(|b| (rename(b, tag), depth + 1)).collect();
                    goals.extend_from_slice(rest);
                    queue.push_back(State { goals, subst, deepest });
                }
                Unify::No => {}
                Unify::Cyclic => return OracleResult::Cyclic,
            }
        }
    }
    OracleResult::Answers(answers)
}
