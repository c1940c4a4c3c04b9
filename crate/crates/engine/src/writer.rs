//! Canonical text for terms. Output re-reads to an equal term.

use crate::ops::{self, OpKind};
use crate::reader::is_symbol_char;
use crate::term::{Term, LIST_CONS, LIST_NIL};

pub fn format_term(term: &Term) -> String {
    let mut out = String::new();
    write(term, 1200, &mut out);
    out
}

fn write(term: &Term, max: u16, out: &mut String) {
    match term {
        Term::Var(v) => out.push_str(v),
        Term::Integer(n) => out.push_str(&n.to_string()),
        Term::Atom(a) => {
            if ops::is_operator(a) && max < 1200 && max != 999 {
                out.push('(');
                write_atom(a, out);
                out.push(')');
            } else {
                write_atom(a, out);
            }
        }
        Term::Compound(f, args) if f == LIST_CONS && args.len() == 2 => write_list(term, out),
        Term::Compound(f, args) if f == "{}" && args.len() == 1 => {
            out.push('{');
            write(&args[0], 1200, out);
            out.push('}');
        }
        Term::Compound(f, args) => {
            if args.len() == 2 {
                if let Some(op) = ops::infix(f) {
                    let (lmax, rmax) = op.arg_limits();
                    let wrap = op.priority > max;
                    if wrap {
                        out.push('(');
                    }
                    write(&args[0], lmax, out);
                    let spaced = op.priority >= 700 || f.starts_with(|c: char| c.is_ascii_alphabetic());
                    if f == "," {
                        out.push(',');
                    } else if spaced {
                        out.push(' ');
                        out.push_str(f);
                        out.push(' ');
                    } else {
                        if out.ends_with(is_symbol_char) {
                            out.push(' ');
                        }
                        out.push_str(f);
                    }
                    let mut right = String::new();
                    write(&args[1], rmax, &mut right);
                    if !spaced && f != "," && right.starts_with(is_symbol_char) {
                        out.push(' ');
                    }
                    out.push_str(&right);
                    if wrap {
                        out.push(')');
                    }
                    return;
                }
            }
            if args.len() == 1 {
                if let Some(op) = ops::prefix(f) {
                    let (_, rmax) = op.arg_limits();
                    let wrap = op.priority > max;
                    if wrap {
                        out.push('(');
                    }
                    out.push_str(f);
                    out.push(' ');
                    write(&args[0], rmax, out);
                    if wrap {
                        out.push(')');
                    }
                    debug_assert!(matches!(op.kind, OpKind::Fx | OpKind::Fy));
                    return;
                }
            }
            write_atom(f, out);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write(a, 999, out);
            }
            out.push(')');
        }
    }
}

fn write_list(term: &Term, out: &mut String) {
    out.push('[');
    let mut cur = term;
    let mut first = true;
    loop {
        match cur {
            Term::Compound(f, args) if f == LIST_CONS && args.len() == 2 => {
                if !first {
                    out.push(',');
                }
                first = false;
                write(&args[0], 999, out);
                cur = &args[1];
            }
            Term::Atom(a) if a == LIST_NIL => break,
            tail => {
                out.push('|');
                write(tail, 999, out);
                break;
            }
        }
    }
    out.push(']');
}

fn write_atom(a: &str, out: &mut String) {
    if atom_needs_quotes(a) {
        out.push('\'');
        for c in a.chars() {
            match c {
                '\'' => out.push_str("\\'"),
                '\\' => out.push_str("\\\\"),
                '\n' => out.push_str("\\n"),
                '\t' => out.push_str("\\t"),
                c => out.push(c),
            }
        }
        out.push('\'');
    } else {
        out.push_str(a);
    }
}

fn atom_needs_quotes(a: &str) -> bool {
    if matches!(a, "[]" | "!" | ";" | "{}") {
        return false;
    }
    let mut chars = a.chars();
    match chars.next() {
        None => true,
        // Digit atoms print bare; the reader maps such text to an integer.
        Some(c) if c.is_ascii_digit() => !a.chars().all(|c| c.is_ascii_digit()),
        Some(c) if c.is_ascii_lowercase() => !a.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'),
        Some(_) if a.chars().all(is_symbol_char) => a == "." || a.starts_with("/*"),
        Some(_) => true,
    }
}
