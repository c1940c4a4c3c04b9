//! Programs: clauses plus the directives the engine understands.

use crate::reader::read_terms;
use crate::term::Term;
use crate::SyntaxError;

#[derive(Clone, Debug, PartialEq)]
pub struct Clause {
    pub head: Term,
    pub body: Vec<Term>,
    /// Source line where the clause starts.
    pub line: usize,
}

impl Clause {
    pub fn fact(head: Term) -> Self {
        Clause { head, body: Vec::new(), line: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TestProp {
    NotFails,
    Fails,
}

impl TestProp {
    pub fn name(self) -> &'static str {
        match self {
            TestProp::NotFails => "not_fails",
            TestProp::Fails => "fails",
        }
    }
}

/// A `:- test Goal => Post + Props.` directive.
#[derive(Clone, Debug, PartialEq)]
pub struct TestDirective {
    pub goal: Term,
    pub post: Option<Term>,
    pub props: Vec<TestProp>,
    pub line: usize,
}

impl TestDirective {
    /// Source-like rendering used in reports.
    pub fn describe(&self) -> String {
        let mut s = format!("test {}", self.goal);
        if let Some(post) = &self.post {
            s.push_str(&format!(" => ({post})"));
        }
        for p in &self.props {
            s.push_str(" + ");
            s.push_str(p.name());
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Directive {
    Module { packages: Vec<String> },
    Test(TestDirective),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Program {
    pub clauses: Vec<Clause>,
    pub directives: Vec<Directive>,
    /// Fair (iterative deepening) enumeration, requested through the
    /// `bf`/`bfall` package in the module declaration.
    pub fair_search: bool,
}

impl Program {
    pub fn tests(&self) -> impl Iterator<Item = &TestDirective> {
        self.directives.iter().filter_map(|d| match d {
            Directive::Test(t) => Some(t),
            _ => None,
        })
    }

    /// Text of the program: clauses in order, one per line.
    pub fn clause_listing(&self) -> String {
        let mut out = String::new();
        for c in &self.clauses {
            if c.body.is_empty() {
                out.push_str(&format!("{}.\n", c.head));
            } else {
                let body = c.body.iter().map(|g| g.to_string()).collect::<Vec<_>>().join(", ");
                out.push_str(&format!("{} :- {}.\n", c.head, body));
            }
        }
        out
    }
}

fn is_fair_package(pkg: &str) -> bool {
    matches!(pkg, "bf" | "bfall" | "bf/bfall" | "library(bf)" | "library(bfall)" | "library(bf/bfall)")
}

pub fn parse_program(text: &str) -> Result<Program, SyntaxError> {
    let mut program = Program::default();
    for read in read_terms(text)? {
        let line = read.line;
        match read.term {
            Term::Compound(f, mut args) if f == ":-" && args.len() == 1 => {
                if let Some(d) = directive(args.pop().unwrap(), line)? {
                    if let Directive::Module { packages } = &d {
                        program.fair_search |= packages.iter().any(|p| is_fair_package(p));
                    }
                    program.directives.push(d);
                }
            }
            Term::Compound(f, args) if f == "?-" && args.len() == 1 => {}
            Term::Compound(f, mut args) if f == ":-" && args.len() == 2 => {
                let body = args.pop().unwrap();
                let head = args.pop().unwrap();
                check_head(&head, line)?;
                let body = body.conjuncts().into_iter().cloned().collect();
                program.clauses.push(Clause { head, body, line });
            }
            head => {
                check_head(&head, line)?;
                program.clauses.push(Clause { head, body: Vec::new(), line });
            }
        }
    }
    Ok(program)
}

fn check_head(head: &Term, line: usize) -> Result<(), SyntaxError> {
    if head.is_callable() {
        Ok(())
    } else {
        Err(SyntaxError { line, message: format!("clause head must be an atom or compound term, found {head}") })
    }
}

fn directive(term: Term, line: usize) -> Result<Option<Directive>, SyntaxError> {
    match term {
        Term::Compound(f, args) if f == "module" && (args.len() == 2 || args.len() == 3) => {
            let packages = match args.get(2) {
                None => Vec::new(),
                Some(list) => list_items(list)
                    .ok_or_else(|| SyntaxError { line, message: "module packages must be a list".into() })?
                    .iter()
                    .map(|p| p.to_string())
                    .collect(),
            };
            Ok(Some(Directive::Module { packages }))
        }
        Term::Compound(f, mut args) if f == "test" && args.len() == 1 => {
            Ok(Some(Directive::Test(test_directive(args.pop().unwrap(), line)?)))
        }
        // Assertions and other declarations are not interpreted by the engine.
        _ => Ok(None),
    }
}

fn list_items(t: &Term) -> Option<Vec<Term>> {
    let mut items = Vec::new();
    let mut cur = t;
    loop {
        match cur {
            Term::Atom(a) if a == crate::term::LIST_NIL => return Some(items),
            Term::Compound(f, args) if f == crate::term::LIST_CONS && args.len() == 2 => {
                items.push(args[0].clone());
                cur = &args[1];
            }
            _ => return None,
        }
    }
}

fn test_directive(term: Term, line: usize) -> Result<TestDirective, SyntaxError> {
    let err = |message: String| SyntaxError { line, message };
    let (goal, post, props) = match term {
        Term::Compound(f, mut args) if f == "=>" && args.len() == 2 => {
            let rhs = args.pop().unwrap();
            let goal = args.pop().unwrap();
            match rhs {
                Term::Compound(p, mut r) if p == "+" && r.len() == 2 => {
                    let props = r.pop().unwrap();
                    let post = r.pop().unwrap();
                    (goal, Some(post), test_props(&props).map_err(err)?)
                }
                post => (goal, Some(post), Vec::new()),
            }
        }
        Term::Compound(f, mut args) if f == "+" && args.len() == 2 => {
            let props = args.pop().unwrap();
            let goal = args.pop().unwrap();
            (goal, None, test_props(&props).map_err(err)?)
        }
        other => return Err(err(format!("test directive needs `=> Post` or `+ Props`: {other}"))),
    };
    if !goal.is_callable() {
        return Err(err(format!("test goal must be callable, found {goal}")));
    }
    Ok(TestDirective { goal, post, props, line })
}

fn test_props(t: &Term) -> Result<Vec<TestProp>, String> {
    match t {
        Term::Atom(a) if a == "not_fails" => Ok(vec![TestProp::NotFails]),
        Term::Atom(a) if a == "fails" => Ok(vec![TestProp::Fails]),
        Term::Compound(f, args) if (f == "," || f == "+") && args.len() == 2 => {
            let mut out = test_props(&args[0])?;
            out.extend(test_props(&args[1])?);
            Ok(out)
        }
        other => Err(format!("unsupported test property {other}")),
    }
}
