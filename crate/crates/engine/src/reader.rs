//! Tokenizer and operator-precedence reader for the term syntax.

use crate::ops;
use crate::term::Term;
use crate::SyntaxError;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Atom(String),
    QuotedAtom(String),
    Var(String),
    Int(i64),
    Open,
    Close,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Bar,
    End,
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    layout_before: bool,
}

const SYMBOL_CHARS: &str = "+-*/\\^<>=~:.?@#&$";

pub(crate) fn is_symbol_char(c: char) -> bool {
    SYMBOL_CHARS.contains(c)
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    src: &'a str,
    line: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { chars: src.char_indices().peekable(), src, line: 1 }
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().map(|&(_, c)| c)
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.chars.clone();
        it.next();
        it.next().map(|(_, c)| c)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next().map(|(_, c)| c);
        if c == Some('\n') {
            self.line += 1;
        }
        c
    }

    fn err(&self, message: impl Into<String>) -> SyntaxError {
        SyntaxError { line: self.line, message: message.into() }
    }

    /// Skips whitespace and comments; reports whether anything was skipped.
    fn skip_layout(&mut self) -> Result<bool, SyntaxError> {
        let mut skipped = false;
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                    skipped = true;
                }
                Some('%') => {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                    skipped = true;
                }
                Some('/') if self.peek2() == Some('*') => {
                    let start = self.line;
                    self.bump();
                    self.bump();
                    let mut closed = false;
                    while let Some(c) = self.bump() {
                        if c == '*' && self.peek() == Some('/') {
                            self.bump();
                            closed = true;
                            break;
                        }
                    }
                    if !closed {
                        return Err(SyntaxError { line: start, message: "unterminated block comment".into() });
                    }
                    skipped = true;
                }
                _ => return Ok(skipped),
            }
        }
    }

    fn take_while(&mut self, start: usize, pred: impl Fn(char) -> bool) -> &'a str {
        let mut end = start;
        while let Some(&(i, c)) = self.chars.peek() {
            if !pred(c) {
                break;
            }
            end = i + c.len_utf8();
            self.bump();
        }
        &self.src[start..end]
    }

    fn next_token(&mut self) -> Result<Token, SyntaxError> {
        let layout_before = self.skip_layout()?;
        let line = self.line;
        let Some(&(start, c)) = self.chars.peek() else {
            return Ok(Token { tok: Tok::Eof, line, layout_before });
        };
        let tok = match c {
            'a'..='z' => Tok::Atom(self.take_while(start, is_ident_char).to_string()),
            'A'..='Z' | '_' => Tok::Var(self.take_while(start, is_ident_char).to_string()),
            '0'..='9' => {
                let digits = self.take_while(start, |c| c.is_ascii_digit());
                let value = digits.parse::<i64>().map_err(|_| self.err("integer literal out of range"))?;
                Tok::Int(value)
            }
            '(' => self.single(Tok::Open),
            ')' => self.single(Tok::Close),
            '[' => self.single(Tok::LBracket),
            ']' => self.single(Tok::RBracket),
            '{' => self.single(Tok::LBrace),
            '}' => self.single(Tok::RBrace),
            ',' => self.single(Tok::Comma),
            '|' => self.single(Tok::Bar),
            '!' => self.single(Tok::Atom("!".into())),
            ';' => self.single(Tok::Atom(";".into())),
            '\'' => {
                self.bump();
                Tok::QuotedAtom(self.quoted()?)
            }
            '"' => return Err(self.err("double-quoted strings are not supported")),
            '.' if self.peek2().is_none_or(|n| n.is_whitespace() || n == '%') => {
                self.bump();
                Tok::End
            }
            c if is_symbol_char(c) => Tok::Atom(self.take_while(start, is_symbol_char).to_string()),
            other => return Err(self.err(format!("unexpected character {other:?}"))),
        };
        Ok(Token { tok, line, layout_before })
    }

    fn single(&mut self, tok: Tok) -> Tok {
        self.bump();
        tok
    }

    fn quoted(&mut self) -> Result<String, SyntaxError> {
        let mut out = String::new();
        loop {
            match self.bump() {
                None => return Err(self.err("unterminated quoted atom")),
                Some('\'') => {
                    if self.peek() == Some('\'') {
                        self.bump();
                        out.push('\'');
                    } else {
                        return Ok(out);
                    }
                }
                Some('\\') => match self.bump() {
                    Some('n') => out.push('\n'),
                    Some('t') => out.push('\t'),
                    Some('\\') => out.push('\\'),
                    Some('\'') => out.push('\''),
                    Some('\n') => {}
                    _ => return Err(self.err("unknown escape in quoted atom")),
                },
                Some(c) => out.push(c),
            }
        }
    }
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// A term read from source, with the line where it starts.
#[derive(Clone, Debug)]
pub struct ReadTerm {
    pub term: Term,
    pub line: usize,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Self, SyntaxError> {
        let mut lexer = Lexer::new(src);
        let mut toks: Vec<Token> = Vec::new();
        loop {
            let mut t = lexer.next_token()?;
            let eof = t.tok == Tok::Eof;
            if eof {
                // Errors at end of input point at the last real token.
                if let Some(last) = toks.last() {
                    t.line = last.line;
                }
            }
            toks.push(t);
            if eof {
                break;
            }
        }
        Ok(Parser { toks, pos: 0 })
    }

    fn peek(&self) -> &Token {
        &self.toks[self.pos.min(self.toks.len() - 1)]
    }

    fn next(&mut self) -> Token {
        let t = self.peek().clone();
        if self.pos < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err_here(&self, message: impl Into<String>) -> SyntaxError {
        SyntaxError { line: self.peek().line, message: message.into() }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), SyntaxError> {
        if self.peek().tok == tok {
            self.next();
            Ok(())
        } else {
            Err(self.err_here(format!("expected {what}, found {}", describe(&self.peek().tok))))
        }
    }

    fn parse(&mut self, max: u16) -> Result<(Term, u16), SyntaxError> {
        let (left, prec) = self.primary(max)?;
        self.infix(left, prec, max)
    }

    fn infix(&mut self, mut left: Term, mut left_prec: u16, max: u16) -> Result<(Term, u16), SyntaxError> {
        loop {
            let name = match &self.peek().tok {
                Tok::Atom(a) => a.clone(),
                Tok::Comma => ",".to_string(),
                _ => break,
            };
            let Some(op) = ops::infix(&name) else { break };
            let (lmax, rmax) = op.arg_limits();
            if op.priority > max || left_prec > lmax {
                break;
            }
            self.next();
            let (right, _) = self.parse(rmax)?;
            left = Term::Compound(name, vec![left, right]);
            left_prec = op.priority;
        }
        Ok((left, left_prec))
    }

    fn starts_term(&self, tok: &Token) -> bool {
        match &tok.tok {
            Tok::Atom(a) => !(ops::infix(a).is_some() && ops::prefix(a).is_none()),
            Tok::QuotedAtom(_) | Tok::Var(_) | Tok::Int(_) | Tok::Open | Tok::LBracket | Tok::LBrace => true,
            _ => false,
        }
    }

    fn primary(&mut self, max: u16) -> Result<(Term, u16), SyntaxError> {
        let tok = self.next();
        match tok.tok {
            Tok::Int(n) => Ok((Term::Integer(n), 0)),
            Tok::Var(v) => Ok((Term::Var(v), 0)),
            Tok::Open => {
                let (t, _) = self.parse(1200)?;
                self.expect(Tok::Close, "`)`")?;
                Ok((t, 0))
            }
            Tok::LBracket => {
                if self.peek().tok == Tok::RBracket {
                    self.next();
                    return Ok((Term::nil(), 0));
                }
                let items = self.arg_sequence()?;
                let tail = if self.peek().tok == Tok::Bar {
                    self.next();
                    self.parse(999)?.0
                } else {
                    Term::nil()
                };
                self.expect(Tok::RBracket, "`]`")?;
                Ok((Term::list_with_tail(items, tail), 0))
            }
            Tok::LBrace => {
                if self.peek().tok == Tok::RBrace {
                    self.next();
                    return Ok((Term::atom("{}"), 0));
                }
                let (t, _) = self.parse(1200)?;
                self.expect(Tok::RBrace, "`}`")?;
                Ok((Term::Compound("{}".into(), vec![t]), 0))
            }
            Tok::QuotedAtom(name) => {
                if self.functional_open() {
                    return Ok((self.compound(name)?, 0));
                }
                Ok((Term::Atom(name), 0))
            }
            Tok::Atom(name) => {
                if self.functional_open() {
                    return Ok((self.compound(name)?, 0));
                }
                if name == "-" {
                    let next = self.peek();
                    if let (Tok::Int(n), false) = (&next.tok, next.layout_before) {
                        let n = *n;
                        self.next();
                        return Ok((Term::Integer(-n), 0));
                    }
                }
                if let Some(op) = ops::prefix(&name) {
                    if op.priority <= max && self.starts_term(self.peek()) {
                        let (_, rmax) = op.arg_limits();
                        let (arg, _) = self.parse(rmax)?;
                        return Ok((Term::Compound(name, vec![arg]), op.priority));
                    }
                }
                Ok((Term::Atom(name), 0))
            }
            other => Err(SyntaxError { line: tok.line, message: format!("unexpected {}", describe(&other)) }),
        }
    }

    fn functional_open(&self) -> bool {
        let next = self.peek();
        next.tok == Tok::Open && !next.layout_before
    }

    fn compound(&mut self, name: String) -> Result<Term, SyntaxError> {
        self.next();
        let args = self.arg_sequence()?;
        self.expect(Tok::Close, "`)` or `,`")?;
        Ok(Term::Compound(name, args))
    }

    fn arg_sequence(&mut self) -> Result<Vec<Term>, SyntaxError> {
        let mut args = vec![self.parse(999)?.0];
        while self.peek().tok == Tok::Comma {
            self.next();
            args.push(self.parse(999)?.0);
        }
        Ok(args)
    }

    fn clause(&mut self) -> Result<Option<ReadTerm>, SyntaxError> {
        if self.peek().tok == Tok::Eof {
            return Ok(None);
        }
        let line = self.peek().line;
        let (term, _) = self.parse(1200)?;
        match self.peek().tok {
            Tok::End => {
                self.next();
                Ok(Some(ReadTerm { term, line }))
            }
            Tok::Eof => {
                let line = self.toks[self.pos.saturating_sub(1)].line;
                Err(SyntaxError { line, message: "missing `.` at end of clause".into() })
            }
            ref other => Err(self.err_here(format!("operator expected, found {}", describe(other)))),
        }
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Atom(a) | Tok::QuotedAtom(a) => format!("`{a}`"),
        Tok::Var(v) => format!("variable `{v}`"),
        Tok::Int(n) => format!("`{n}`"),
        Tok::Open => "`(`".into(),
        Tok::Close => "`)`".into(),
        Tok::LBracket => "`[`".into(),
        Tok::RBracket => "`]`".into(),
        Tok::LBrace => "`{`".into(),
        Tok::RBrace => "`}`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Bar => "`|`".into(),
        Tok::End => "end of clause".into(),
        Tok::Eof => "end of input".into(),
    }
}

/// Reads every `.`-terminated term in `src`.
pub fn read_terms(src: &str) -> Result<Vec<ReadTerm>, SyntaxError> {
    let mut parser = Parser::new(src)?;
    let mut out = Vec::new();
    while let Some(t) = parser.clause()? {
        out.push(t);
    }
    Ok(out)
}

/// Reads a single term; the terminating `.` is optional.
pub fn parse_term(src: &str) -> Result<Term, SyntaxError> {
    let mut parser = Parser::new(src)?;
    if parser.peek().tok == Tok::Eof {
        return Err(parser.err_here("empty term"));
    }
    let (term, _) = parser.parse(1200)?;
    if parser.peek().tok == Tok::End {
        parser.next();
    }
    if parser.peek().tok != Tok::Eof {
        return Err(parser.err_here(format!("unexpected {} after term", describe(&parser.peek().tok))));
    }
    Ok(term)
}

/// Reads a goal as typed into a query cell: an optional leading `?-` and an
/// optional trailing `.` are accepted.
pub fn parse_query(src: &str) -> Result<Term, SyntaxError> {
    let term = parse_term(src)?;
    match term {
        Term::Compound(ref f, ref args) if f == "?-" && args.len() == 1 => Ok(args[0].clone()),
        other => Ok(other),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(src: &str) -> Term {
        parse_term(src).unwrap()
    }

    #[test]
    fn operator_precedence() {
        assert_eq!(
            t("X is 3*4+1"),
            Term::compound(
                "is",
                vec![
                    Term::var("X"),
                    Term::compound(
                        "+",
                        vec![Term::compound("*", vec![Term::Integer(3), Term::Integer(4)]), Term::Integer(1)]
                    )
                ]
            )
        );
        assert_eq!(t("a-b-c"), t("(a-b)-c"));
        assert_eq!(t("a,b,c"), t("a,(b,c)"));
    }

    #[test]
    fn negative_literals_and_unary_minus() {
        assert_eq!(t("-1"), Term::Integer(-1));
        assert_eq!(t("- 1"), Term::compound("-", vec![Term::Integer(1)]));
        assert_eq!(t("3 - 1"), Term::compound("-", vec![Term::Integer(3), Term::Integer(1)]));
        assert_eq!(t("f(-1,B)"), Term::compound("f", vec![Term::Integer(-1), Term::var("B")]));
    }

    #[test]
    fn lists_desugar() {
        assert_eq!(t("[1,2]"), Term::list([Term::Integer(1), Term::Integer(2)]));
        assert_eq!(t("[H|T]"), Term::cons(Term::var("H"), Term::var("T")));
        assert_eq!(t("[]"), Term::nil());
    }

    #[test]
    fn test_directive_shape() {
        let d = t(":- test factorial(5, B) => (B = 120) + (not_fails).");
        let Term::Compound(f, args) = d else { panic!() };
        assert_eq!(f, ":-");
        let Term::Compound(test, inner) = &args[0] else { panic!() };
        assert_eq!(test, "test");
        assert_eq!(inner[0].indicator(), Some(("=>", 2)));
    }

    #[test]
    fn assertion_shape() {
        let d = t(":- pred app(A,B,C) : (list(A), list(B)) => var(C).");
        assert_eq!(d.to_string(), ":- pred app(A,B,C):(list(A),list(B)) => var(C)");
    }

    #[test]
    fn module_package_list() {
        let d = t(":- module(_, _, [assertions,library(bf/bfall)]).");
        assert!(d.to_string().contains("library(bf/bfall)"));
    }

    #[test]
    fn operators_as_atoms() {
        assert_eq!(t("f(-, +)"), Term::compound("f", vec![Term::atom("-"), Term::atom("+")]));
        assert_eq!(t("X = -"), Term::compound("=", vec![Term::var("X"), Term::atom("-")]));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = read_terms("a.\nb(.\n").unwrap_err();
        assert_eq!(e.line, 2);
        let e = read_terms("a.\n\nfoo(X) :- bar(X)\n").unwrap_err();
        assert_eq!(e.line, 3);
    }

    #[test]
    fn comments_are_layout() {
        let terms = read_terms("% c\na. /* b.\n */ c.\n").unwrap();
        assert_eq!(terms.len(), 2);
        assert_eq!(terms[0].line, 2);
        assert_eq!(terms[1].line, 3);
    }

    #[test]
    fn query_prefix_stripped() {
        assert_eq!(parse_query("?- p(X).").unwrap(), t("p(X)"));
        assert_eq!(parse_query("p(X)").unwrap(), t("p(X)"));
    }

    #[test]
    fn quoted_atoms() {
        assert_eq!(t("'hello world'"), Term::atom("hello world"));
        assert_eq!(t("'it''s'"), Term::atom("it's"));
    }
}
