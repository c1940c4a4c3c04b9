mod support;

use ald_engine::{format_term, parse_program, parse_query, parse_term, solve, Budget, Program, SolveError, Term};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const ATOMS: &[&str] = &["a", "foo", "[]", "{}", "hello world", "It's", "+", "-", "=", ";", "!", "x_1", "\\n"];
const VARS: &[&str] = &["X", "Y", "_Z", "Abc"];
const FUNCTORS: &[(&str, usize)] = &[
    ("f", 1),
    ("g", 2),
    ("+", 2),
    ("-", 2),
    ("*", 2),
    ("//", 2),
    ("-", 1),
    ("\\", 1),
    ("=", 2),
    ("is", 2),
    (",", 2),
    (";", 2),
    ("->", 2),
    (":-", 2),
    (":-", 1),
    ("^", 2),
    ("**", 2),
    ("=<", 2),
    ("'weird'", 2),
    ("[|]", 2),
    ("{}", 1),
];

fn term_strategy() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        prop::sample::select(ATOMS).prop_map(Term::atom),
        prop::sample::select(VARS).prop_map(Term::var),
        (-1000i64..1000).prop_map(Term::Integer),
    ];
    leaf.prop_recursive(4, 40, 3, |inner| {
        prop_oneof![
            (prop::sample::select(FUNCTORS), prop::collection::vec(inner.clone(), 3)).prop_map(|((name, arity), mut args)| {
                args.truncate(arity);
                Term::compound(name, args)
            }),
            (prop::collection::vec(inner.clone(), 0..4), prop::option::of(inner)).prop_map(|(items, tail)| match tail {
                Some(t) => Term::list_with_tail(items, t),
                None => Term::list(items),
            }),
        ]
    })
}

#[derive(Debug, Clone)]
enum Expr {
    Lit(i64),
    Neg(Box<Expr>),
    Bin(&'static str, Box<Expr>, Box<Expr>),
}

impl Expr {
    fn to_term(&self) -> Term {
        match self {
            Expr::Lit(n) => Term::Integer(*n),
            Expr::Neg(e) => Term::compound("-", vec![e.to_term()]),
            Expr::Bin(op, l, r) => Term::compound(*op, vec![l.to_term(), r.to_term()]),
        }
    }

    fn eval(&self) -> Option<i64> {
        match self {
            Expr::Lit(n) => Some(*n),
            Expr::Neg(e) => e.eval()?.checked_neg(),
            Expr::Bin(op, l, r) => {
                let (a, b) = (l.eval()?, r.eval()?);
                match *op {
                    "+" => a.checked_add(b),
                    "-" => a.checked_sub(b),
                    "*" => a.checked_mul(b),
                    _ => {
                        if b == 0 {
                            None
                        } else {
                            a.checked_div(b)
                        }
                    }
                }
            }
        }
    }
}

fn expr_strategy() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![(-50i64..50).prop_map(Expr::Lit), any::<i64>().prop_map(Expr::Lit)];
    leaf.prop_recursive(5, 32, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (prop::sample::select(&["+", "-", "*", "//"][..]), inner.clone(), inner)
                .prop_map(|(op, l, r)| Expr::Bin(op, Box::new(l), Box::new(r))),
        ]
    })
}

fn empty() -> Program {
    parse_program("").unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn format_then_parse_is_identity(t in term_strategy()) {
        let text = format_term(&t);
        let back = parse_term(&text).map_err(|e| TestCaseError::fail(format!("{text}: {e}")))?;
        prop_assert_eq!(back, t, "{}", text);
    }

    #[test]
    fn arithmetic_matches_direct_evaluation(e in expr_strategy()) {
        let query = Term::compound("is", vec![Term::var("R"), e.to_term()]);
        let got = solve(&empty(), &query, &Budget::default());
        match e.eval() {
            Some(v) => prop_assert_eq!(got.unwrap().answers[0].bindings["R"].clone(), Term::Integer(v)),
            None => prop_assert!(matches!(got, Err(SolveError::Evaluation(_)))),
        }
    }

    #[test]
    fn arithmetic_survives_the_reader(e in expr_strategy()) {
        let text = format!("R is {}", format_term(&e.to_term()));
        let query = parse_query(&text).unwrap();
        let got = solve(&empty(), &query, &Budget::default());
        match e.eval() {
            Some(v) => prop_assert_eq!(got.unwrap().answers[0].bindings["R"].clone(), Term::Integer(v)),
            None => prop_assert!(got.is_err()),
        }
    }

    #[test]
    fn solving_is_deterministic_and_sound(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let program = support::gen::random_program(&mut rng, 10);
        let query = support::gen::random_query(&mut rng);
        let budget = Budget { max_depth: 5, max_steps: 200_000, max_answers: 20 };
        let first = solve(&program, &query, &budget);
        let second = solve(&program, &query, &budget);
        prop_assert_eq!(&first, &second);
        if let Ok(s) = first {
            for a in &s.answers {
                let instance = a.instantiate(&query);
                let again = solve(&program, &instance, &budget).unwrap();
                prop_assert!(!again.answers.is_empty(), "{} not provable", instance);
            }
        }
    }

    #[test]
    fn deeper_budgets_find_at_least_as_much(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let program = support::gen::random_program(&mut rng, 10);
        let query = support::gen::random_query(&mut rng);
        let keys = |d: u32| -> Vec<String> {
            let budget = Budget { max_depth: d, max_steps: 1_000_000, max_answers: usize::MAX };
            match solve(&program, &query, &budget) {
                Ok(s) => s.answers.into_iter().map(|a| a.key()).collect(),
                Err(_) => Vec::new(),
            }
        };
        let shallow = keys(3);
        let deep = keys(5);
        for k in &shallow {
            prop_assert!(deep.contains(k), "{} lost at greater depth", k);
        }
    }
}
