//! First-order terms as seen by callers of the engine.

use std::fmt;

/// Functor of a list cell.
pub const LIST_CONS: &str = ".";
/// The empty list atom.
pub const LIST_NIL: &str = "[]";

/// A first-order term.
///
/// List syntax is sugar: `[H|T]` is `Compound(".", [H, T])` and `[]` is
/// `Atom("[]")`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Var(String),
    Atom(String),
    Integer(i64),
    Compound(String, Vec<Term>),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn atom(name: impl Into<String>) -> Self {
        Term::Atom(name.into())
    }

    /// Builds a compound term. An empty argument list yields an atom, so the
    /// "arity >= 1" invariant holds for every `Compound` built this way.
    pub fn compound(functor: impl Into<String>, args: Vec<Term>) -> Self {
        let functor = functor.into();
        if args.is_empty() {
            Term::Atom(functor)
        } else {
            Term::Compound(functor, args)
        }
    }

    pub fn nil() -> Self {
        Term::Atom(LIST_NIL.to_string())
    }

    pub fn cons(head: Term, tail: Term) -> Self {
        Term::Compound(LIST_CONS.to_string(), vec![head, tail])
    }

    /// Proper list from items, ending in `[]`.
    pub fn list(items: impl IntoIterator<Item = Term, IntoIter: DoubleEndedIterator>) -> Self {
        Self::list_with_tail(items, Term::nil())
    }

    pub fn list_with_tail(
        items: impl IntoIterator<Item = Term, IntoIter: DoubleEndedIterator>,
        tail: Term,
    ) -> Self {
        items
            .into_iter()
            .rev()
            .fold(tail, |acc, item| Term::cons(item, acc))
    }

    /// `s(s(...s(0)...))` with `n` applications of `s`, as the reader
    /// produces it (the innermost `0` is an integer).
    pub fn peano(n: usize) -> Self {
        (0..n).fold(Term::Integer(0), |acc, _| Term::Compound("s".into(), vec![acc]))
    }

    /// Inverse of [`Term::peano`].
    pub fn as_peano(&self) -> Option<usize> {
        let mut n = 0;
        let mut cur = self;
        loop {
            match cur {
                Term::Integer(0) => return Some(n),
                Term::Atom(a) if a == "0" => return Some(n),
                Term::Compound(f, args) if f == "s" && args.len() == 1 => {
                    n += 1;
                    cur = &args[0];
                }
                _ => return None,
            }
        }
    }

    /// Name and arity for atoms and compounds.
    pub fn indicator(&self) -> Option<(&str, usize)> {
        match self {
            Term::Atom(a) => Some((a, 0)),
            Term::Compound(f, args) => Some((f, args.len())),
            _ => None,
        }
    }

    pub fn is_callable(&self) -> bool {
        matches!(self, Term::Atom(_) | Term::Compound(..))
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Atom(_) | Term::Integer(_) => true,
            Term::Compound(_, args) => args.iter().all(Term::is_ground),
        }
    }

    /// Variable names in order of first appearance.
    pub fn variables(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Term::Var(v) => {
                if !out.iter().any(|seen| seen == v) {
                    out.push(v.clone());
                }
            }
            Term::Compound(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
            _ => {}
        }
    }

    /// Replaces variables by the terms `lookup` returns for them.
    pub fn substitute(&self, lookup: &impl Fn(&str) -> Option<Term>) -> Term {
        match self {
            Term::Var(v) => lookup(v).unwrap_or_else(|| self.clone()),
            Term::Compound(f, args) => {
                Term::Compound(f.clone(), args.iter().map(|a| a.substitute(lookup)).collect())
            }
            _ => self.clone(),
        }
    }

    /// Splits a `','/2` chain into its conjuncts.
    pub fn conjuncts(&self) -> Vec<&Term> {
        let mut out = Vec::new();
        let mut cur = self;
        while let Term::Compound(f, args) = cur {
            if f == "," && args.len() == 2 {
                out.push(&args[0]);
                cur = &args[1];
            } else {
                break;
            }
        }
        out.push(cur);
        out
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::writer::format_term(self))
    }
}
