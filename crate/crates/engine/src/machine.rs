//! SLD resolution over a structure-sharing binding store.
//!
//! Clause terms are never copied: a goal is a term paired with the base
//! offset of its variable frame, and bindings map store slots to such pairs.
//! Backtracking resets slots recorded on the trail and truncates the store.

use std::collections::{HashMap, HashSet};
use std::rc::Rc;
use std::sync::atomic::{AtomicBool, Ordering};

use indexmap::IndexMap;

use crate::program::Program;
use crate::term::Term;
use crate::{Answer, Budget, SolveError, Solutions};

type Sym = u32;

#[derive(Clone, Debug)]
enum Node {
    Var(u32),
    Atom(Sym),
    Int(i64),
    Cmp(Sym, Rc<[Node]>),
}

#[derive(Default)]
struct Interner {
    ids: HashMap<String, Sym>,
    names: Vec<String>,
}

impl Interner {
    fn intern(&mut self, name: &str) -> Sym {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len() as Sym;
        self.names.push(name.to_string());
        self.ids.insert(name.to_string(), id);
        id
    }

    fn name(&self, sym: Sym) -> &str {
        &self.names[sym as usize]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Builtin {
    True,
    Fail,
    Conj,
    Unify,
    NotUnify,
    Is,
    Lt,
    Gt,
    Le,
    Ge,
    ArithEq,
    ArithNe,
    Var,
    NonVar,
    List,
    Integer,
    Atom,
}

const BUILTINS: &[(&str, usize, Builtin)] = &[
    ("true", 0, Builtin::True),
    ("fail", 0, Builtin::Fail),
    ("false", 0, Builtin::Fail),
    (",", 2, Builtin::Conj),
    ("=", 2, Builtin::Unify),
    ("\\=", 2, Builtin::NotUnify),
    ("is", 2, Builtin::Is),
    ("<", 2, Builtin::Lt),
    (">", 2, Builtin::Gt),
    ("=<", 2, Builtin::Le),
    (">=", 2, Builtin::Ge),
    ("=:=", 2, Builtin::ArithEq),
    ("=\\=", 2, Builtin::ArithNe),
    ("var", 1, Builtin::Var),
    ("nonvar", 1, Builtin::NonVar),
    ("list", 1, Builtin::List),
    ("integer", 1, Builtin::Integer),
    ("atom", 1, Builtin::Atom),
];

struct CompiledClause {
    head: Node,
    body: Rc<[Node]>,
    nvars: u32,
}

struct Compiled {
    interner: Interner,
    clauses: Vec<CompiledClause>,
    index: HashMap<(Sym, usize), Rc<[usize]>>,
    builtins: HashMap<(Sym, usize), Builtin>,
    sym_nil: Sym,
    sym_cons: Sym,
    sym_plus: Sym,
    sym_minus: Sym,
    sym_times: Sym,
    sym_intdiv: Sym,
}

/// Maps clause-local variable names to frame indices.
#[derive(Default)]
struct VarScope {
    names: Vec<String>,
    count: u32,
}

impl VarScope {
    fn slot(&mut self, name: &str) -> u32 {
        if name == "_" {
            self.count += 1;
            self.names.push(String::new());
            return self.count - 1;
        }
        if let Some(i) = self.names.iter().position(|n| n == name) {
            return i as u32;
        }
        self.names.push(name.to_string());
        self.count += 1;
        self.count - 1
    }
}

impl Compiled {
    fn new(program: &Program) -> Self {
        let mut interner = Interner::default();
        let builtins = BUILTINS
            .iter()
            .map(|&(name, arity, b)| ((interner.intern(name), arity), b))
            .collect();
        let mut code = Compiled {
            sym_nil: interner.intern(crate::term::LIST_NIL),
            sym_cons: interner.intern(crate::term::LIST_CONS),
            sym_plus: interner.intern("+"),
            sym_minus: interner.intern("-"),
            sym_times: interner.intern("*"),
            sym_intdiv: interner.intern("//"),
            interner,
            clauses: Vec::new(),
            index: HashMap::new(),
            builtins,
        };
        let mut index: HashMap<(Sym, usize), Vec<usize>> = HashMap::new();
        for clause in &program.clauses {
            let mut scope = VarScope::default();
            let head = code.compile(&clause.head, &mut scope);
            let body: Rc<[Node]> = clause.body.iter().map(|g| code.compile(g, &mut scope)).collect();
            let key = match &head {
                Node::Atom(s) => (*s, 0),
                Node::Cmp(s, args) => (*s, args.len()),
                _ => continue,
            };
            index.entry(key).or_default().push(code.clauses.len());
            code.clauses.push(CompiledClause { head, body, nvars: scope.count });
        }
        code.index = index.into_iter().map(|(k, v)| (k, v.into())).collect();
        code
    }

    fn compile(&mut self, term: &Term, scope: &mut VarScope) -> Node {
        match term {
            Term::Var(v) => Node::Var(scope.slot(v)),
            Term::Atom(a) => Node::Atom(self.interner.intern(a)),
            Term::Integer(n) => Node::Int(*n),
            Term::Compound(f, args) => {
                let f = self.interner.intern(f);
                Node::Cmp(f, args.iter().map(|a| self.compile(a, scope)).collect())
            }
        }
    }
}

/// Store slot contents: a term and the frame base its variables live in.
type Binding = (Node, usize);

#[derive(Default)]
struct Store {
    slots: Vec<Option<Binding>>,
    trail: Vec<usize>,
}

/// A dereferenced value. Unbound variables come back as `Unbound(slot)`.
enum Val {
    Unbound(usize),
    Bound(Node, usize),
}

impl Store {
    fn deref(&self, node: &Node, base: usize) -> Val {
        let mut node = node.clone();
        let mut base = base;
        loop {
            match node {
                Node::Var(i) => {
                    let slot = base + i as usize;
                    match &self.slots[slot] {
                        Some((n, b)) => {
                            node = n.clone();
                            base = *b;
                        }
                        None => return Val::Unbound(slot),
                    }
                }
                other => return Val::Bound(other, base),
            }
        }
    }

    fn bind(&mut self, slot: usize, value: Binding) {
        self.slots[slot] = Some(value);
        self.trail.push(slot);
    }

    fn mark(&self) -> (usize, usize) {
        (self.trail.len(), self.slots.len())
    }

    fn undo(&mut self, (trail_len, slots_len): (usize, usize)) {
        for slot in self.trail.drain(trail_len..) {
            if slot < self.slots.len() {
                self.slots[slot] = None;
            }
        }
        self.slots.truncate(slots_len);
    }

    fn alloc(&mut self, n: u32) -> usize {
        let base = self.slots.len();
        self.slots.resize(base + n as usize, None);
        base
    }

    fn unify(&mut self, a: Binding, b: Binding) -> bool {
        let mut stack = vec![(a, b)];
        while let Some(((an, ab), (bn, bb))) = stack.pop() {
            match (self.deref(&an, ab), self.deref(&bn, bb)) {
                (Val::Unbound(x), Val::Unbound(y)) => {
                    if x != y {
                        // Younger slot points at the older one.
                        let (young, old) = if x > y { (x, y) } else { (y, x) };
                        self.bind(young, (Node::Var(0), old));
                    }
                }
                (Val::Unbound(x), Val::Bound(n, base)) | (Val::Bound(n, base), Val::Unbound(x)) => {
                    self.bind(x, (n, base));
                }
                (Val::Bound(x, xb), Val::Bound(y, yb)) => match (x, y) {
                    (Node::Atom(p), Node::Atom(q)) => {
                        if p != q {
                            return false;
                        }
                    }
                    (Node::Int(p), Node::Int(q)) => {
                        if p != q {
                            return false;
                        }
                    }
                    (Node::Cmp(f, xs), Node::Cmp(g, ys)) => {
                        if f != g || xs.len() != ys.len() {
                            return false;
                        }
                        for (x, y) in xs.iter().zip(ys.iter()).rev() {
                            stack.push(((x.clone(), xb), (y.clone(), yb)));
                        }
                    }
                    _ => return false,
                },
            }
        }
        true
    }
}

#[derive(Clone)]
struct Goal {
    node: Node,
    base: usize,
    depth: u32,
}

struct GoalCell {
    goal: Goal,
    next: Goals,
}

type Goals = Option<Rc<GoalCell>>;

fn push_goal(goal: Goal, next: Goals) -> Goals {
    Some(Rc::new(GoalCell { goal, next }))
}

struct Choice {
    goal: Goal,
    rest: Goals,
    candidates: Rc<[usize]>,
    next: usize,
    mark: (usize, usize),
    deepest: u32,
}

enum Event {
    Answer,
    Exhausted,
    StepLimit,
}

struct Search<'a> {
    code: &'a Compiled,
    store: Store,
    goals: Goals,
    choices: Vec<Choice>,
    deepest: u32,
    limit: Option<u32>,
    cutoff: bool,
    steps: u64,
    max_steps: u64,
    answered: bool,
    cancel: Option<&'a AtomicBool>,
}

impl<'a> Search<'a> {
    fn new(code: &'a Compiled, query: &Node, nvars: u32, limit: Option<u32>, max_steps: u64, cancel: Option<&'a AtomicBool>) -> Self {
        let mut store = Store::default();
        let base = store.alloc(nvars);
        Search {
            code,
            store,
            goals: push_goal(Goal { node: query.clone(), base, depth: 1 }, None),
            choices: Vec::new(),
            deepest: 0,
            limit,
            cutoff: false,
            steps: 0,
            max_steps,
            answered: false,
            cancel,
        }
    }

    fn run(&mut self) -> Result<Event, SolveError> {
        if self.answered {
            self.answered = false;
            if !self.backtrack() {
                return Ok(Event::Exhausted);
            }
        }
        loop {
            let Some(cell) = self.goals.clone() else {
                self.answered = true;
                return Ok(Event::Answer);
            };
            let goal = &cell.goal;
            if self.limit.is_some_and(|l| goal.depth > l) {
                self.cutoff = true;
                if !self.backtrack() {
                    return Ok(Event::Exhausted);
                }
                continue;
            }
            if self.cancel.is_some_and(|c| c.load(Ordering::Relaxed)) {
                return Err(SolveError::Cancelled);
            }
            if self.steps >= self.max_steps {
                return Ok(Event::StepLimit);
            }
            self.steps += 1;
            self.deepest = self.deepest.max(goal.depth);
            let rest = cell.next.clone();
            let ok = match self.store.deref(&goal.node, goal.base) {
                Val::Unbound(_) => return Err(SolveError::Instantiation("goal is an unbound variable".into())),
                Val::Bound(Node::Int(n), _) => return Err(SolveError::Type(format!("callable expected, found {n}"))),
                Val::Bound(Node::Var(_), _) => unreachable!("deref never yields a variable node"),
                Val::Bound(node, base) => {
                    let key = match &node {
                        Node::Atom(s) => (*s, 0),
                        Node::Cmp(s, args) => (*s, args.len()),
                        _ => unreachable!(),
                    };
                    let resolved = Goal { node, base, depth: goal.depth };
                    if let Some(&b) = self.code.builtins.get(&key) {
                        self.builtin(b, &resolved, rest)?
                    } else {
                        match self.code.index.get(&key) {
                            Some(cands) => self.try_clauses(resolved, rest, cands.clone(), 0),
                            None => false,
                        }
                    }
                }
            };
            if !ok && !self.backtrack() {
                return Ok(Event::Exhausted);
            }
        }
    }

    fn try_clauses(&mut self, goal: Goal, rest: Goals, candidates: Rc<[usize]>, start: usize) -> bool {
        for i in start..candidates.len() {
            let clause = &self.code.clauses[candidates[i]];
            let mark = self.store.mark();
            let base = self.store.alloc(clause.nvars);
            if self.store.unify((clause.head.clone(), base), (goal.node.clone(), goal.base)) {
                if i + 1 < candidates.len() {
                    self.choices.push(Choice {
                        goal: goal.clone(),
                        rest: rest.clone(),
                        candidates: candidates.clone(),
                        next: i + 1,
                        mark,
                        deepest: self.deepest,
                    });
                }
                let mut goals = rest;
                for node in clause.body.iter().rev() {
                    goals = push_goal(Goal { node: node.clone(), base, depth: goal.depth + 1 }, goals);
                }
                self.goals = goals;
                return true;
            }
            self.store.undo(mark);
        }
        false
    }

    fn backtrack(&mut self) -> bool {
        while let Some(choice) = self.choices.pop() {
            self.store.undo(choice.mark);
            self.deepest = choice.deepest;
            if self.try_clauses(choice.goal, choice.rest, choice.candidates, choice.next) {
                return true;
            }
        }
        false
    }

    fn builtin(&mut self, b: Builtin, goal: &Goal, rest: Goals) -> Result<bool, SolveError> {
        let args: &[Node] = match &goal.node {
            Node::Cmp(_, args) => args,
            _ => &[],
        };
        let base = goal.base;
        let arg = |i: usize| (args[i].clone(), base);
        let ok = match b {
            Builtin::True => true,
            Builtin::Fail => false,
            Builtin::Conj => {
                let second = push_goal(Goal { node: args[1].clone(), base, depth: goal.depth }, rest);
                self.goals = push_goal(Goal { node: args[0].clone(), base, depth: goal.depth }, second);
                return Ok(true);
            }
            Builtin::Unify => self.store.unify(arg(0), arg(1)),
            Builtin::NotUnify => {
                let mark = self.store.mark();
                let unified = self.store.unify(arg(0), arg(1));
                self.store.undo(mark);
                !unified
            }
            Builtin::Is => {
                let value = self.eval(&args[1], base)?;
                self.store.unify(arg(0), (Node::Int(value), 0))
            }
            Builtin::Lt | Builtin::Gt | Builtin::Le | Builtin::Ge | Builtin::ArithEq | Builtin::ArithNe => {
                let x = self.eval(&args[0], base)?;
                let y = self.eval(&args[1], base)?;
                match b {
                    Builtin::Lt => x < y,
                    Builtin::Gt => x > y,
                    Builtin::Le => x <= y,
                    Builtin::Ge => x >= y,
                    Builtin::ArithEq => x == y,
                    _ => x != y,
                }
            }
            Builtin::Var => matches!(self.store.deref(&args[0], base), Val::Unbound(_)),
            Builtin::NonVar => matches!(self.store.deref(&args[0], base), Val::Bound(..)),
            Builtin::Integer => matches!(self.store.deref(&args[0], base), Val::Bound(Node::Int(_), _)),
            Builtin::Atom => matches!(self.store.deref(&args[0], base), Val::Bound(Node::Atom(_), _)),
            Builtin::List => self.is_list(&args[0], base),
        };
        if ok {
            self.goals = rest;
        }
        Ok(ok)
    }

    fn is_list(&self, node: &Node, base: usize) -> bool {
        let mut cur = self.store.deref(node, base);
        loop {
            match cur {
                Val::Bound(Node::Atom(s), _) if s == self.code.sym_nil => return true,
                Val::Bound(Node::Cmp(f, args), b) if f == self.code.sym_cons && args.len() == 2 => {
                    cur = self.store.deref(&args[1], b);
                }
                _ => return false,
            }
        }
    }

    fn eval(&self, node: &Node, base: usize) -> Result<i64, SolveError> {
        let code = self.code;
        match self.store.deref(node, base) {
            Val::Unbound(_) => Err(SolveError::Instantiation("arithmetic expression is not sufficiently instantiated".into())),
            Val::Bound(Node::Int(n), _) => Ok(n),
            Val::Bound(Node::Cmp(f, args), b) if args.len() == 2 => {
                let x = self.eval(&args[0], b)?;
                let y = self.eval(&args[1], b)?;
                let overflow = || SolveError::Evaluation("integer overflow".into());
                if f == code.sym_plus {
                    x.checked_add(y).ok_or_else(overflow)
                } else if f == code.sym_minus {
                    x.checked_sub(y).ok_or_else(overflow)
                } else if f == code.sym_times {
                    x.checked_mul(y).ok_or_else(overflow)
                } else if f == code.sym_intdiv {
                    if y == 0 {
                        Err(SolveError::Evaluation("zero_divisor".into()))
                    } else {
                        x.checked_div(y).ok_or_else(overflow)
                    }
                } else {
                    Err(self.not_evaluable(f, 2))
                }
            }
            Val::Bound(Node::Cmp(f, args), b) if args.len() == 1 && f == code.sym_minus => {
                let x = self.eval(&args[0], b)?;
                x.checked_neg().ok_or_else(|| SolveError::Evaluation("integer overflow".into()))
            }
            Val::Bound(Node::Cmp(f, args), _) => Err(self.not_evaluable(f, args.len())),
            Val::Bound(Node::Atom(a), _) => Err(self.not_evaluable(a, 0)),
            Val::Bound(Node::Var(_), _) => unreachable!(),
        }
    }

    fn not_evaluable(&self, f: Sym, arity: usize) -> SolveError {
        SolveError::Type(format!("evaluable expected, found {}/{}", self.code.interner.name(f), arity))
    }

    /// Converts a stored value back to a public term. `None` when the value is
    /// cyclic.
    fn resolve(
        &self,
        node: &Node,
        base: usize,
        fresh: &mut HashMap<usize, String>,
        path: &mut Vec<(usize, usize)>,
    ) -> Option<Term> {
        match self.store.deref(node, base) {
            Val::Unbound(slot) => {
                let n = fresh.len() + 1;
                Some(Term::Var(fresh.entry(slot).or_insert_with(|| format!("_G{n}")).clone()))
            }
            Val::Bound(Node::Atom(a), _) => Some(Term::Atom(self.code.interner.name(a).to_string())),
            Val::Bound(Node::Int(n), _) => Some(Term::Integer(n)),
            Val::Bound(Node::Cmp(f, args), b) => {
                // A compound reached twice through the same (node, frame) on the
                // current path means the binding graph has a cycle.
                let id = (Rc::as_ptr(&args) as *const Node as usize, b);
                if path.contains(&id) {
                    return None;
                }
                path.push(id);
                let mut out = Vec::with_capacity(args.len());
                for a in args.iter() {
                    out.push(self.resolve(a, b, fresh, path)?);
                }
                path.pop();
                Some(Term::Compound(self.code.interner.name(f).to_string(), out))
            }
            Val::Bound(Node::Var(_), _) => unreachable!(),
        }
    }
}

struct CompiledQuery {
    node: Node,
    nvars: u32,
    /// Visible variable names and their frame slots.
    visible: Vec<(String, u32)>,
}

fn compile_query(code: &mut Compiled, query: &Term) -> CompiledQuery {
    let mut scope = VarScope::default();
    let node = code.compile(query, &mut scope);
    let visible = scope
        .names
        .iter()
        .enumerate()
        .filter(|(_, n)| !n.is_empty() && !n.starts_with('_'))
        .map(|(i, n)| (n.clone(), i as u32))
        .collect();
    CompiledQuery { node, nvars: scope.count, visible }
}

fn extract(search: &Search<'_>, query: &CompiledQuery) -> Option<Answer> {
    let mut fresh = HashMap::new();
    let mut bindings = IndexMap::new();
    for (name, slot) in &query.visible {
        let mut path = Vec::new();
        let term = search.resolve(&Node::Var(*slot), 0, &mut fresh, &mut path)?;
        bindings.insert(name.clone(), term);
    }
    Some(Answer { bindings, proof_depth: search.deepest })
}

pub(crate) fn solve(program: &Program, query: &Term, budget: &Budget, cancel: Option<&AtomicBool>) -> Result<Solutions, SolveError> {
    budget.validate()?;
    if !query.is_callable() {
        return match query {
            Term::Var(_) => Err(SolveError::Instantiation("query is an unbound variable".into())),
            other => Err(SolveError::Type(format!("callable expected, found {other}"))),
        };
    }
    let mut code = Compiled::new(program);
    let q = compile_query(&mut code, query);
    let mut answers = Vec::new();

    if !program.fair_search {
        let mut search = Search::new(&code, &q.node, q.nvars, None, budget.max_steps, cancel);
        loop {
            match search.run()? {
                Event::Answer => {
                    if let Some(a) = extract(&search, &q) {
                        answers.push(a);
                        if answers.len() >= budget.max_answers {
                            let more = !search.choices.is_empty();
                            return Ok(Solutions { answers, more });
                        }
                    }
                }
                Event::Exhausted => return Ok(Solutions { answers, more: false }),
                Event::StepLimit => return exhausted(answers, budget),
            }
        }
    }

    let mut seen = HashSet::new();
    let mut steps_left = budget.max_steps;
    for limit in 1..=budget.max_depth {
        let mut search = Search::new(&code, &q.node, q.nvars, Some(limit), steps_left, cancel);
        loop {
            match search.run()? {
                Event::Answer if search.deepest == limit => {
                    if let Some(a) = extract(&search, &q) {
                        if seen.insert(a.key()) {
                            answers.push(a);
                            if answers.len() >= budget.max_answers {
                                return Ok(Solutions { answers, more: true });
                            }
                        }
                    }
                }
                Event::Answer => {}
                Event::Exhausted => break,
                Event::StepLimit => return exhausted(answers, budget),
            }
        }
        steps_left -= search.steps;
        if !search.cutoff {
            return Ok(Solutions { answers, more: false });
        }
    }
    exhausted(answers, budget)
}

fn exhausted(answers: Vec<Answer>, budget: &Budget) -> Result<Solutions, SolveError> {
    if answers.is_empty() {
        Err(SolveError::BudgetExhausted { max_steps: budget.max_steps, max_depth: budget.max_depth })
    } else {
        Ok(Solutions { answers, more: false })
    }
}
