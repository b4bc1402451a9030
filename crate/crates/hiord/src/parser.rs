//! Surface syntax parser.
//!
//! Accepted forms:
//!   Head :- B1, ..., Bn.            rules (heads are normalized on the fly)
//!   Head.                           facts
//!   :- prop p/1.                    property predicate declaration
//!   :- regtype t/1.                 regular type declaration
//!   t := a | b | f(t).              functional regtype definition
//!   name := { :- pred _(X) : P => Q. ... }.   predicate property
//!   :- pred p(X,Y) : Pre => Post.   assertion (either formula optional)
//!   :- entry Goal : Pre.            entry declaration
//!   :- wrap p/N with Prop as name.  wrapper directive
//!
//! `%` starts a comment. Constraints: `=`, `is`, `<`, `=<`, `>`, `>=`, `@<`.

use crate::assertions::{PredAssertion, PredicateProperty, PropFormula, PropLiteral};
use crate::syntax::*;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub span: Span,
    pub msg: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.span, self.msg)
    }
}

#[derive(Clone, Debug, Default)]
pub struct ParseErrorList(pub Vec<ParseError>);

impl fmt::Display for ParseErrorList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.0 {
            writeln!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseErrorList {}

/// Builtin predicates; these names cannot be redefined by program rules.
pub const BUILTIN_TESTS: &[(&str, usize)] = &[
    ("int", 1),
    ("integer", 1),
    ("nat", 1),
    ("atm", 1),
    ("atom", 1),
    ("num", 1),
    ("term", 1),
    ("true", 0),
];

pub fn is_builtin(name: &str, arity: usize) -> bool {
    BUILTIN_TESTS.iter().any(|&(n, a)| n == name && a == arity)
        || (name == "list" && arity == 2)
}

// ---------------------------------------------------------------- lexer ----

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Atom(String),
    Var(String),
    Int(i64),
    Sym(String),
    Punct(char), // ( ) [ ] { } , |
    EndDot,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    span: Span,
}

const SYM_CHARS: &str = "+-*/\\^<>=~:.?@#&";

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let mut chars = src.chars().peekable();
    let mut line: u32 = 1;
    let mut col: u32 = 1;
    macro_rules! bump {
        () => {{
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                col = 1;
            } else if c.is_some() {
                col += 1;
            }
            c
        }};
    }
    loop {
        let span = Span { line, col };
        let Some(&c) = chars.peek() else { break };
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '%' {
            while let Some(&c) = chars.peek() {
                if c == '\n' {
                    break;
                }
                bump!();
            }
            continue;
        }
        if c.is_ascii_digit() {
            let mut n: i64 = 0;
            while let Some(&c) = chars.peek() {
                if let Some(d) = c.to_digit(10) {
                    n = n
                        .checked_mul(10)
                        .and_then(|n| n.checked_add(d as i64))
                        .ok_or_else(|| ParseError {
                            span,
                            msg: "integer literal overflows i64".into(),
                        })?;
                    bump!();
                } else {
                    break;
                }
            }
            out.push(Token { tok: Tok::Int(n), span });
            continue;
        }
        if c.is_ascii_lowercase() {
            let mut s = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    s.push(c);
                    bump!();
                } else {
                    break;
                }
            }
            out.push(Token { tok: Tok::Atom(s), span });
            continue;
        }
        if c.is_ascii_uppercase() || c == '_' {
            let mut s = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    s.push(c);
                    bump!();
                } else {
                    break;
                }
            }
            out.push(Token { tok: Tok::Var(s), span });
            continue;
        }
        if c == '\'' {
            bump!();
            let mut s = String::new();
            loop {
                match bump!() {
                    None => {
                        return Err(ParseError { span, msg: "unterminated quoted atom".into() })
                    }
                    Some('\\') => match bump!() {
                        Some('\'') => s.push('\''),
                        Some('\\') => s.push('\\'),
                        Some('n') => s.push('\n'),
                        other => {
                            return Err(ParseError {
                                span,
                                msg: format!("unsupported escape: \\{:?}", other),
                            })
                        }
                    },
                    Some('\'') => break,
                    Some(c) => s.push(c),
                }
            }
            out.push(Token { tok: Tok::Atom(s), span });
            continue;
        }
        if "()[]{},|;".contains(c) {
            bump!();
            if c == ';' {
                out.push(Token { tok: Tok::Sym(";".into()), span });
            } else {
                out.push(Token { tok: Tok::Punct(c), span });
            }
            continue;
        }
        if SYM_CHARS.contains(c) {
            // A '.' followed by layout (or EOF) terminates a clause.
            if c == '.' {
                let mut look = chars.clone();
                look.next();
                match look.peek() {
                    None => {
                        bump!();
                        out.push(Token { tok: Tok::EndDot, span });
                        continue;
                    }
                    Some(&n) if n.is_whitespace() || n == '%' => {
                        bump!();
                        out.push(Token { tok: Tok::EndDot, span });
                        continue;
                    }
                    _ => {}
                }
            }
            let mut s = String::new();
            while let Some(&c) = chars.peek() {
                if SYM_CHARS.contains(c) {
                    // Stop before a clause-terminating dot.
                    if c == '.' && !s.is_empty() {
                        let mut look = chars.clone();
                        look.next();
                        let next = look.peek().copied();
                        if next.is_none()
                            || next.map(|n| n.is_whitespace() || n == '%').unwrap_or(false)
                        {
                            break;
                        }
                    }
                    s.push(c);
                    bump!();
                } else {
                    break;
                }
            }
            out.push(Token { tok: Tok::Sym(s), span });
            continue;
        }
        return Err(ParseError { span, msg: format!("unexpected character {c:?}") });
    }
    Ok(out)
}

// --------------------------------------------------------------- parser ----

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    errors: Vec<ParseError>,
    anon: u64,
}

/// Raw items before program assembly.
enum Item {
    Rule(Rule),
    PropDecl(PredKey),
    RegtypeDecl(PredKey),
    RegtypeDef(RegTypeDef),
    Property(PredicateProperty),
    Assertion(PredAssertion),
    Entry(EntryDecl),
    Wrap(WrapDecl),
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek2(&self) -> Option<&Tok> {
        self.toks.get(self.pos + 1).map(|t| &t.tok)
    }

    fn span(&self) -> Span {
        self.toks
            .get(self.pos.min(self.toks.len().saturating_sub(1)))
            .map(|t| t.span)
            .unwrap_or_default()
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.tok.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError { span: self.span(), msg: msg.into() })
    }

    fn expect_punct(&mut self, c: char) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::Punct(p)) if *p == c => {
                self.next();
                Ok(())
            }
            other => self.err(format!("expected '{c}', found {other:?}")),
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::Sym(x)) if x == s => {
                self.next();
                Ok(())
            }
            other => self.err(format!("expected '{s}', found {other:?}")),
        }
    }

    fn expect_end(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::EndDot) => {
                self.next();
                Ok(())
            }
            other => self.err(format!("expected '.', found {other:?}")),
        }
    }

    fn at_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(x)) if x == s)
    }

    fn at_punct(&self, c: char) -> bool {
        matches!(self.peek(), Some(Tok::Punct(p)) if *p == c)
    }

    fn fresh_anon(&mut self) -> String {
        let n = self.anon;
        self.anon += 1;
        format!("_A{n}")
    }

    // terms ------------------------------------------------------------

    fn parse_term(&mut self) -> Result<Term, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Int(i)) => {
                self.next();
                Ok(Term::Int(i))
            }
            Some(Tok::Sym(s)) if s == "-" && matches!(self.peek2(), Some(Tok::Int(_))) => {
                self.next();
                match self.next() {
                    Some(Tok::Int(i)) => Ok(Term::Int(-i)),
                    _ => unreachable!(),
                }
            }
            Some(Tok::Var(v)) => {
                self.next();
                if self.at_punct('(') {
                    return self.err("variables cannot appear in functor position");
                }
                if v == "_" {
                    Ok(Term::Var(self.fresh_anon()))
                } else {
                    Ok(Term::Var(v))
                }
            }
            Some(Tok::Atom(name)) => {
                self.next();
                if self.at_punct('(') {
                    self.next();
                    let args = self.parse_term_list(')')?;
                    Ok(Term::Compound(name, args))
                } else {
                    Ok(Term::atom(&name))
                }
            }
            Some(Tok::Punct('[')) => {
                self.next();
                self.parse_list_tail()
            }
            Some(Tok::Sym(s)) => {
                // Symbolic atoms as constants (e.g. <, >>, =).
                self.next();
                Ok(Term::atom(&s))
            }
            other => self.err(format!("expected a term, found {other:?}")),
        }
    }

    fn parse_term_list(&mut self, close: char) -> Result<Vec<Term>, ParseError> {
        let mut args = Vec::new();
        if self.at_punct(close) {
            self.next();
            return Ok(args);
        }
        loop {
            args.push(self.parse_term()?);
            if self.at_punct(',') {
                self.next();
                continue;
            }
            self.expect_punct(close)?;
            return Ok(args);
        }
    }

    fn parse_list_tail(&mut self) -> Result<Term, ParseError> {
        if self.at_punct(']') {
            self.next();
            return Ok(Term::atom("[]"));
        }
        let mut elems = vec![self.parse_term()?];
        loop {
            if self.at_punct(',') {
                self.next();
                elems.push(self.parse_term()?);
                continue;
            }
            let tail = if self.at_punct('|') {
                self.next();
                self.parse_term()?
            } else {
                Term::atom("[]")
            };
            self.expect_punct(']')?;
            let mut t = tail;
            for e in elems.into_iter().rev() {
                t = Term::Compound(".".into(), vec![e, t]);
            }
            return Ok(t);
        }
    }

    // arithmetic ---------------------------------------------------------

    fn parse_arith(&mut self) -> Result<ArithExpr, ParseError> {
        let mut e = self.parse_arith_mul()?;
        loop {
            if self.at_sym("+") {
                self.next();
                e = ArithExpr::Bin(ArithOp::Add, Box::new(e), Box::new(self.parse_arith_mul()?));
            } else if self.at_sym("-") {
                self.next();
                e = ArithExpr::Bin(ArithOp::Sub, Box::new(e), Box::new(self.parse_arith_mul()?));
            } else {
                return Ok(e);
            }
        }
    }

    fn parse_arith_mul(&mut self) -> Result<ArithExpr, ParseError> {
        let mut e = self.parse_arith_primary()?;
        loop {
            if self.at_sym("*") {
                self.next();
                e = ArithExpr::Bin(ArithOp::Mul, Box::new(e), Box::new(self.parse_arith_primary()?));
            } else if self.at_sym("//") {
                self.next();
                e = ArithExpr::Bin(ArithOp::Div, Box::new(e), Box::new(self.parse_arith_primary()?));
            } else if matches!(self.peek(), Some(Tok::Atom(a)) if a == "mod") {
                self.next();
                e = ArithExpr::Bin(ArithOp::Mod, Box::new(e), Box::new(self.parse_arith_primary()?));
            } else {
                return Ok(e);
            }
        }
    }

    fn parse_arith_primary(&mut self) -> Result<ArithExpr, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Int(i)) => {
                self.next();
                Ok(ArithExpr::Int(i))
            }
            Some(Tok::Var(v)) if v != "_" => {
                self.next();
                Ok(ArithExpr::Var(v))
            }
            Some(Tok::Sym(s)) if s == "-" => {
                self.next();
                Ok(ArithExpr::Neg(Box::new(self.parse_arith_primary()?)))
            }
            Some(Tok::Punct('(')) => {
                self.next();
                let e = self.parse_arith()?;
                self.expect_punct(')')?;
                Ok(e)
            }
            other => self.err(format!("expected arithmetic expression, found {other:?}")),
        }
    }

    // literals -----------------------------------------------------------

    fn cmp_operand(&self, t: &Term) -> Result<(), ParseError> {
        match t {
            Term::Var(_) | Term::Int(_) => Ok(()),
            _ => Err(ParseError {
                span: self.span(),
                msg: "integer comparison operands must be variables or integers".into(),
            }),
        }
    }

    fn parse_body_literal(&mut self) -> Result<Literal, ParseError> {
        // Higher-order atom: Var(...)
        if let Some(Tok::Var(v)) = self.peek().cloned() {
            if matches!(self.peek2(), Some(Tok::Punct('('))) {
                if v == "_" {
                    return self.err("higher-order callee must be a named variable");
                }
                self.next();
                self.next();
                let args = self.parse_term_list(')')?;
                return Ok(Literal::HigherOrder(v, args));
            }
        }
        if matches!(self.peek(), Some(Tok::Atom(a)) if a == "true")
            && !matches!(self.peek2(), Some(Tok::Punct('(')))
        {
            self.next();
            return Ok(Literal::Atom(Atom::new("true", vec![])));
        }
        let left = self.parse_term()?;
        match self.peek().cloned() {
            Some(Tok::Sym(s)) if s == "=" => {
                self.next();
                let right = self.parse_term()?;
                Ok(Literal::Constraint(Constraint::Eq(left, right)))
            }
            Some(Tok::Atom(a)) if a == "is" => {
                self.next();
                let e = self.parse_arith()?;
                Ok(Literal::Constraint(Constraint::Is(left, e)))
            }
            Some(Tok::Sym(s)) if s == "<" || s == "=<" || s == ">" || s == ">=" => {
                self.next();
                let right = self.parse_term()?;
                self.cmp_operand(&left)?;
                self.cmp_operand(&right)?;
                let op = match s.as_str() {
                    "<" => CmpOp::Lt,
                    "=<" => CmpOp::Le,
                    ">" => CmpOp::Gt,
                    ">=" => CmpOp::Ge,
                    _ => unreachable!(),
                };
                Ok(Literal::Constraint(Constraint::Cmp(op, left, right)))
            }
            Some(Tok::Sym(s)) if s == "@<" => {
                self.next();
                let right = self.parse_term()?;
                Ok(Literal::Constraint(Constraint::Cmp(CmpOp::TermLt, left, right)))
            }
            _ => match left {
                Term::Compound(name, args) => Ok(Literal::Atom(Atom { pred: name, args })),
                other => self.err(format!(
                    "expected a body literal, found bare term {}",
                    pretty::term(&other)
                )),
            },
        }
    }

    fn parse_body(&mut self) -> Result<Vec<Literal>, ParseError> {
        let mut body = Vec::new();
        loop {
            let lit = self.parse_body_literal()?;
            // `true` contributes nothing.
            if !matches!(&lit, Literal::Atom(a) if a.pred == "true" && a.args.is_empty()) {
                body.push(lit);
            }
            if self.at_punct(',') {
                self.next();
                continue;
            }
            return Ok(body);
        }
    }

    // formulas -----------------------------------------------------------

    fn parse_formula(&mut self) -> Result<PropFormula, ParseError> {
        let mut f = self.parse_formula_conj()?;
        while self.at_sym(";") {
            self.next();
            let g = self.parse_formula_conj()?;
            f = f.or(&g);
        }
        Ok(f)
    }

    fn parse_formula_conj(&mut self) -> Result<PropFormula, ParseError> {
        let mut f = self.parse_formula_elem()?;
        while self.at_punct(',') {
            self.next();
            let g = self.parse_formula_elem()?;
            f = f.and(&g);
        }
        Ok(f)
    }

    fn parse_formula_elem(&mut self) -> Result<PropFormula, ParseError> {
        if self.at_punct('(') {
            self.next();
            let f = self.parse_formula()?;
            self.expect_punct(')')?;
            return Ok(f);
        }
        match self.peek().cloned() {
            Some(Tok::Atom(name)) => {
                self.next();
                if name == "true" && !self.at_punct('(') {
                    return Ok(PropFormula::truth());
                }
                let args = if self.at_punct('(') {
                    self.next();
                    self.parse_term_list(')')?
                } else {
                    Vec::new()
                };
                if args.is_empty() {
                    return self.err(format!("property literal {name} needs arguments"));
                }
                Ok(PropFormula::single(vec![PropLiteral { pred: name, args }]))
            }
            other => self.err(format!("expected a property literal, found {other:?}")),
        }
    }

    // heads and assertions -------------------------------------------------

    /// Parse `name(args...)` or bare `name` as an atom.
    fn parse_head_atom(&mut self) -> Result<Atom, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Atom(name)) => {
                self.next();
                let args = if self.at_punct('(') {
                    self.next();
                    self.parse_term_list(')')?
                } else {
                    Vec::new()
                };
                Ok(Atom { pred: name, args })
            }
            other => self.err(format!("expected a predicate head, found {other:?}")),
        }
    }

    /// Assertion heads: arguments must be distinct variables.
    fn check_assertion_head(&self, head: &Atom) -> Result<(), ParseError> {
        let mut seen = BTreeSet::new();
        for a in &head.args {
            match a {
                Term::Var(v) => {
                    if !seen.insert(v.clone()) {
                        return Err(ParseError {
                            span: self.span(),
                            msg: format!("assertion head repeats variable {v}"),
                        });
                    }
                }
                _ => {
                    return Err(ParseError {
                        span: self.span(),
                        msg: "assertion head arguments must be distinct variables".into(),
                    })
                }
            }
        }
        Ok(())
    }

    fn parse_pred_assertion(&mut self, span: Span, anon: bool) -> Result<PredAssertion, ParseError> {
        let head = if anon {
            match self.peek().cloned() {
                Some(Tok::Var(v)) if v == "_" => {
                    self.next();
                    self.expect_punct('(')?;
                    let args = self.parse_term_list(')')?;
                    Atom { pred: "_".into(), args }
                }
                other => return self.err(format!("expected anonymous head _(...), found {other:?}")),
            }
        } else {
            self.parse_head_atom()?
        };
        self.check_assertion_head(&head)?;
        let pre = if self.at_sym(":") {
            self.next();
            self.parse_formula()?
        } else {
            PropFormula::truth()
        };
        let post = if self.at_sym("=>") {
            self.next();
            self.parse_formula()?
        } else {
            PropFormula::truth()
        };
        Ok(PredAssertion { head, pre, post, span })
    }

    // directives -----------------------------------------------------------

    fn parse_pred_indicator(&mut self) -> Result<PredKey, ParseError> {
        let name = match self.next() {
            Some(Tok::Atom(n)) => n,
            other => return self.err(format!("expected predicate name, found {other:?}")),
        };
        self.expect_sym("/")?;
        let arity = match self.next() {
            Some(Tok::Int(i)) if i >= 0 => i as usize,
            other => return self.err(format!("expected arity, found {other:?}")),
        };
        Ok(PredKey::new(&name, arity))
    }

    fn parse_directive(&mut self, span: Span) -> Result<Vec<Item>, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Atom(w)) if w == "prop" => {
                self.next();
                let key = self.parse_pred_indicator()?;
                self.expect_end()?;
                Ok(vec![Item::PropDecl(key)])
            }
            Some(Tok::Atom(w)) if w == "regtype" => {
                self.next();
                let key = self.parse_pred_indicator()?;
                self.expect_end()?;
                Ok(vec![Item::RegtypeDecl(key)])
            }
            Some(Tok::Atom(w)) if w == "pred" => {
                self.next();
                let a = self.parse_pred_assertion(span, false)?;
                self.expect_end()?;
                Ok(vec![Item::Assertion(a)])
            }
            Some(Tok::Atom(w)) if w == "entry" => {
                self.next();
                let goal = self.parse_head_atom()?;
                let pre = if self.at_sym(":") {
                    self.next();
                    self.parse_formula()?
                } else {
                    PropFormula::truth()
                };
                self.expect_end()?;
                Ok(vec![Item::Entry(EntryDecl { goal, pre, span })])
            }
            Some(Tok::Atom(w)) if w == "wrap" => {
                self.next();
                let target = self.parse_pred_indicator()?;
                match self.next() {
                    Some(Tok::Atom(w)) if w == "with" => {}
                    other => return self.err(format!("expected 'with', found {other:?}")),
                }
                let property = match self.next() {
                    Some(Tok::Atom(n)) => n,
                    other => return self.err(format!("expected property name, found {other:?}")),
                };
                match self.next() {
                    Some(Tok::Atom(w)) if w == "as" => {}
                    other => return self.err(format!("expected 'as', found {other:?}")),
                }
                let wrapper = match self.next() {
                    Some(Tok::Atom(n)) => n,
                    other => return self.err(format!("expected wrapper name, found {other:?}")),
                };
                self.expect_end()?;
                Ok(vec![Item::Wrap(WrapDecl { target, property, wrapper, span })])
            }
            other => self.err(format!("unknown directive {other:?}")),
        }
    }

    // functional definitions -------------------------------------------------

    fn parse_property_block(&mut self, name: String, span: Span) -> Result<Item, ParseError> {
        self.expect_punct('{')?;
        let mut assertions = Vec::new();
        loop {
            if self.at_punct('}') {
                self.next();
                break;
            }
            let aspan = self.span();
            self.expect_sym(":-")?;
            match self.next() {
                Some(Tok::Atom(w)) if w == "pred" => {}
                other => return self.err(format!("expected 'pred', found {other:?}")),
            }
            let a = self.parse_pred_assertion(aspan, true)?;
            self.expect_end()?;
            assertions.push(a);
        }
        self.expect_end()?;
        if assertions.is_empty() {
            return self.err(format!("property {name} has no assertions"));
        }
        let arity = assertions[0].head.args.len();
        if assertions.iter().any(|a| a.head.args.len() != arity) {
            return self.err(format!("property {name}: inconsistent anonymous head arity"));
        }
        Ok(Item::Property(PredicateProperty { name, arity, assertions, span }))
    }

    fn parse_regtype_def(&mut self, name: String, span: Span) -> Result<Item, ParseError> {
        let mut alts = Vec::new();
        loop {
            match self.peek().cloned() {
                Some(Tok::Int(i)) => {
                    self.next();
                    alts.push(TypeAlt::Int(i));
                }
                Some(Tok::Sym(s)) if s == "-" && matches!(self.peek2(), Some(Tok::Int(_))) => {
                    self.next();
                    match self.next() {
                        Some(Tok::Int(i)) => alts.push(TypeAlt::Int(-i)),
                        _ => unreachable!(),
                    }
                }
                Some(Tok::Atom(a)) => {
                    self.next();
                    if self.at_punct('(') {
                        self.next();
                        let mut refs = Vec::new();
                        loop {
                            match self.next() {
                                Some(Tok::Atom(r)) => refs.push(r),
                                other => {
                                    return self.err(format!(
                                        "expected type name in shape, found {other:?}"
                                    ))
                                }
                            }
                            if self.at_punct(',') {
                                self.next();
                                continue;
                            }
                            self.expect_punct(')')?;
                            break;
                        }
                        alts.push(TypeAlt::Shape(a, refs));
                    } else {
                        alts.push(TypeAlt::Const(a));
                    }
                }
                Some(Tok::Sym(s)) => {
                    // Symbolic constants like <, >>, =.
                    self.next();
                    alts.push(TypeAlt::Const(s));
                }
                Some(Tok::Punct('[')) => {
                    self.next();
                    self.expect_punct(']')?;
                    alts.push(TypeAlt::Const("[]".into()));
                }
                other => return self.err(format!("expected type alternative, found {other:?}")),
            }
            if self.at_punct('|') {
                self.next();
                continue;
            }
            self.expect_end()?;
            break;
        }
        Ok(Item::RegtypeDef(RegTypeDef { key: PredKey::new(&name, 1), alts, span }))
    }

    // rules ------------------------------------------------------------------

    fn normalize_rule(&mut self, head: Atom, body: Vec<Literal>, span: Span) -> Rule {
        let mut used: BTreeSet<Name> = head.vars();
        for l in &body {
            used.extend(l.vars());
        }
        let fresh_head_var = |used: &mut BTreeSet<Name>, i: usize| -> Name {
            let mut n = 0;
            loop {
                let cand = if n == 0 { format!("_H{i}") } else { format!("_H{i}_{n}") };
                if used.insert(cand.clone()) {
                    return cand;
                }
                n += 1;
            }
        };
        let mut seen = BTreeSet::new();
        let mut eqs = Vec::new();
        let mut args = Vec::new();
        for (i, t) in head.args.iter().enumerate() {
            match t {
                Term::Var(v) if seen.insert(v.clone()) => args.push(Term::Var(v.clone())),
                _ => {
                    let v = fresh_head_var(&mut used, i);
                    eqs.push(Literal::Constraint(Constraint::Eq(
                        Term::Var(v.clone()),
                        t.clone(),
                    )));
                    args.push(Term::Var(v));
                }
            }
        }
        let mut full = eqs;
        full.extend(body);
        Rule { head: Atom { pred: head.pred, args }, body: full, span }
    }

    fn parse_item(&mut self) -> Result<Vec<Item>, ParseError> {
        let span = self.span();
        if self.at_sym(":-") {
            self.next();
            return self.parse_directive(span);
        }
        // `name := ...` introduces a property block or a regtype definition.
        if let Some(Tok::Atom(name)) = self.peek().cloned() {
            if matches!(self.peek2(), Some(Tok::Sym(s)) if s == ":=") {
                self.next();
                self.next();
                if self.at_punct('{') {
                    return Ok(vec![self.parse_property_block(name, span)?]);
                }
                return Ok(vec![self.parse_regtype_def(name, span)?]);
            }
        }
        let head = self.parse_head_atom()?;
        let body = if self.at_sym(":-") {
            self.next();
            self.parse_body()?
        } else {
            Vec::new()
        };
        self.expect_end()?;
        Ok(vec![Item::Rule(self.normalize_rule(head, body, span))])
    }

    fn recover(&mut self) {
        while let Some(t) = self.next() {
            if t == Tok::EndDot {
                break;
            }
        }
    }
}

/// Names reserved for generated conformance regtypes.
pub fn conf_type_names(property: &str) -> (String, String) {
    (format!("{property}_minus"), format!("{property}_plus"))
}

pub fn parse_program(src: &str) -> Result<Program, ParseErrorList> {
    let toks = match lex(src) {
        Ok(t) => t,
        Err(e) => return Err(ParseErrorList(vec![e])),
    };
    let mut p = Parser { toks, pos: 0, errors: Vec::new(), anon: 0 };
    let mut items = Vec::new();
    while p.peek().is_some() {
        match p.parse_item() {
            Ok(mut is) => items.append(&mut is),
            Err(e) => {
                p.errors.push(e);
                p.recover();
            }
        }
    }
    let mut errors = std::mem::take(&mut p.errors);
    let program = assemble(items, &mut errors);
    if errors.is_empty() {
        Ok(program)
    } else {
        Err(ParseErrorList(errors))
    }
}

fn assemble(items: Vec<Item>, errors: &mut Vec<ParseError>) -> Program {
    let mut prog = Program::default();
    let mut pending_wraps = Vec::new();
    for item in &items {
        match item {
            Item::PropDecl(k) => {
                prog.props.insert(k.clone());
            }
            Item::RegtypeDecl(k) => {
                prog.regtypes.insert(k.clone());
            }
            _ => {}
        }
    }
    for item in items {
        match item {
            Item::PropDecl(..) | Item::RegtypeDecl(..) => {}
            Item::Rule(r) => {
                let key = r.head.key();
                if is_builtin(&key.name, key.arity) {
                    errors.push(ParseError {
                        span: r.span,
                        msg: format!("cannot redefine builtin {key}"),
                    });
                    continue;
                }
                prog.push_rule(r);
            }
            Item::RegtypeDef(def) => {
                if !prog.regtypes.contains(&def.key) {
                    errors.push(ParseError {
                        span: def.span,
                        msg: format!(
                            "functional definition of {} requires a ':- regtype {}.' declaration",
                            def.key.name, def.key
                        ),
                    });
                    continue;
                }
                if prog.regtype_defs.contains_key(&def.key.name) {
                    errors.push(ParseError {
                        span: def.span,
                        msg: format!("duplicate definition of regtype {}", def.key.name),
                    });
                    continue;
                }
                // Lower to executable clauses: t := f(s) becomes t(V) :- V = f(A), s(A).
                // A bare alternative naming a known type (a builtin test or a
                // declared regtype) means inclusion of that type, not the atom:
                // t := num lowers to t(V) :- num(V).
                let known_regtypes = prog.regtypes.clone();
                let is_type_name = move |c: &str| {
                    matches!(c, "int" | "integer" | "num" | "nat" | "atm" | "atom" | "term")
                        || known_regtypes.contains(&PredKey::new(c, 1))
                };
                for alt in &def.alts {
                    if let TypeAlt::Const(c) = alt {
                        if is_type_name(c) {
                            prog.push_rule(Rule {
                                head: Atom {
                                    pred: def.key.name.clone(),
                                    args: vec![Term::Var("_V".into())],
                                },
                                body: vec![Literal::Atom(Atom {
                                    pred: c.clone(),
                                    args: vec![Term::Var("_V".into())],
                                })],
                                span: def.span,
                            });
                            continue;
                        }
                    }
                    let (pattern, checks): (Term, Vec<Literal>) = match alt {
                        TypeAlt::Int(i) => (Term::Int(*i), vec![]),
                        TypeAlt::Const(c) => (Term::atom(c), vec![]),
                        TypeAlt::Shape(f, refs) => {
                            let vars: Vec<Term> = (0..refs.len())
                                .map(|i| Term::Var(format!("_T{i}")))
                                .collect();
                            let checks = refs
                                .iter()
                                .zip(&vars)
                                .map(|(r, v)| {
                                    Literal::Atom(Atom { pred: r.clone(), args: vec![v.clone()] })
                                })
                                .collect();
                            (Term::Compound(f.clone(), vars), checks)
                        }
                    };
                    let mut body = vec![Literal::Constraint(Constraint::Eq(
                        Term::Var("_V".into()),
                        pattern,
                    ))];
                    body.extend(checks);
                    prog.push_rule(Rule {
                        head: Atom { pred: def.key.name.clone(), args: vec![Term::Var("_V".into())] },
                        body,
                        span: def.span,
                    });
                }
                prog.regtype_defs.insert(def.key.name.clone(), def);
            }
            Item::Property(p) => {
                if prog.properties.contains_key(&p.name) {
                    errors.push(ParseError {
                        span: p.span,
                        msg: format!("duplicate predicate property {}", p.name),
                    });
                    continue;
                }
                prog.property_order.push(p.name.clone());
                prog.properties.insert(p.name.clone(), p);
            }
            Item::Assertion(a) => {
                prog.assertions.entry(a.key()).or_default().push(a);
            }
            Item::Entry(e) => prog.entries.push(e),
            Item::Wrap(w) => pending_wraps.push(w),
        }
    }
    // Prelude: parametric list/2, executable through the higher-order rule.
    // Registered as a property so it is never a conformance candidate.
    prog.props.insert(PredKey::new("list", 2));
    let prelude_span = Span::default();
    prog.push_rule(Rule {
        head: Atom::new("list", vec![Term::var("_PT"), Term::var("_PL")]),
        body: vec![Literal::Constraint(Constraint::Eq(
            Term::var("_PL"),
            Term::atom("[]"),
        ))],
        span: prelude_span,
    });
    prog.push_rule(Rule {
        head: Atom::new("list", vec![Term::var("_PT"), Term::var("_PL")]),
        body: vec![
            Literal::Constraint(Constraint::Eq(
                Term::var("_PL"),
                Term::Compound(".".into(), vec![Term::var("_PX"), Term::var("_PXs")]),
            )),
            Literal::HigherOrder("_PT".into(), vec![Term::var("_PX")]),
            Literal::Atom(Atom::new(
                "list",
                vec![Term::var("_PT"), Term::var("_PXs")],
            )),
        ],
        span: prelude_span,
    });
    // Wrapper directives.
    for w in pending_wraps {
        let Some(property) = prog.properties.get(&w.property).cloned() else {
            errors.push(ParseError {
                span: w.span,
                msg: format!("wrap directive names unknown property {}", w.property),
            });
            continue;
        };
        match crate::assertions::make_wrapper(&w.target, &property, &w.wrapper, &prog) {
            Ok((rule, asserts)) => {
                let key = rule.head.key();
                prog.push_rule(rule);
                prog.assertions.entry(key).or_default().extend(asserts);
                prog.wraps.push(w);
            }
            Err(msg) => errors.push(ParseError { span: w.span, msg }),
        }
    }
    validate(&mut prog, errors);
    prog
}

fn validate(prog: &mut Program, errors: &mut Vec<ParseError>) {
    // prop/regtype-declared predicates must not carry pred assertions.
    for key in prog.assertions.keys() {
        if prog.is_prop_or_regtype(key) {
            errors.push(ParseError {
                span: prog.assertions[key][0].span,
                msg: format!("{key} is declared as a property; it cannot also carry pred assertions"),
            });
        }
    }
    // Reserved generated names.
    let defined = prog.defined_preds();
    for name in prog.property_order.clone() {
        let (minus, plus) = conf_type_names(&name);
        for d in &defined {
            if d.name == minus || d.name == plus {
                errors.push(ParseError {
                    span: Span::default(),
                    msg: format!("predicate name {} is reserved for property {}", d.name, name),
                });
            }
        }
    }
    // Unknown predicates in rule bodies: diagnostic only.
    let mut known: BTreeSet<PredKey> = defined.iter().cloned().collect();
    for k in prog.props.iter().chain(prog.regtypes.iter()) {
        known.insert(k.clone());
    }
    let mut unknown = BTreeMap::new();
    for r in &prog.rules {
        for l in &r.body {
            if let Literal::Atom(a) = l {
                let k = a.key();
                if !known.contains(&k)
                    && !is_builtin(&k.name, k.arity)
                    && !prog.properties.contains_key(&k.name)
                {
                    unknown.entry(k).or_insert(r.span);
                }
            }
        }
    }
    for (k, span) in unknown {
        prog.warnings
            .push(format!("{span}: unknown predicate {k} in rule body"));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_list_prefix_listing() {
        let src = "
            :- prop list/1.
            list([]).
            list([_|Xs]) :- list(Xs).
            :- prop prefix/2.
            prefix([],Ys) :- list(Ys).
            prefix([X|Xs],[X|Ys]) :- prefix(Xs,Ys).
        ";
        let p = parse_program(src).expect("parses");
        // The two declared props plus the prelude list/2.
        assert_eq!(p.props.len(), 3);
        // 4 source rules + 2 prelude list/2 rules.
        assert_eq!(p.rules.len(), 6);
        let list1: Vec<_> = p.rules_for(&PredKey::new("list", 1)).collect();
        assert_eq!(list1.len(), 2);
        // Heads normalized to distinct variables.
        for r in &p.rules {
            let mut seen = BTreeSet::new();
            for a in &r.head.args {
                match a {
                    Term::Var(v) => assert!(seen.insert(v.clone())),
                    other => panic!("non-var head arg {other:?}"),
                }
            }
        }
    }

    #[test]
    fn normalizes_constant_head() {
        let p = parse_program("p(a).").unwrap();
        let r = p.rules_for(&PredKey::new("p", 1)).next().unwrap();
        assert_eq!(r.body.len(), 1);
        match &r.body[0] {
            Literal::Constraint(Constraint::Eq(Term::Var(_), t)) => {
                assert_eq!(t, &Term::atom("a"))
            }
            other => panic!("expected eq constraint, got {other:?}"),
        }
    }

    #[test]
    fn parses_assertion_and_property() {
        let src = "
            p_nat_nat := { :- pred _(X,Y) : nat(X) => nat(Y). }.
            :- pred n2n(X,Y) : nat(X) => nat(Y).
            n2n(X,Y) :- Y = X.
        ";
        let p = parse_program(src).unwrap();
        assert_eq!(p.property_order, vec!["p_nat_nat".to_string()]);
        let prop = &p.properties["p_nat_nat"];
        assert_eq!(prop.arity, 2);
        let a = &p.assertions[&PredKey::new("n2n", 2)][0];
        assert!(!a.pre.is_truth());
        assert!(!a.post.is_truth());
    }

    #[test]
    fn parses_regtype_functional_def() {
        let src = "
            :- regtype rwb/1.
            rwb := r | w | b.
            :- regtype lge/1.
            lge := < | > | =.
        ";
        let p = parse_program(src).unwrap();
        assert_eq!(p.regtype_defs["rwb"].alts.len(), 3);
        assert_eq!(
            p.regtype_defs["lge"].alts,
            vec![
                TypeAlt::Const("<".into()),
                TypeAlt::Const(">".into()),
                TypeAlt::Const("=".into())
            ]
        );
        // Lowered clauses are executable.
        assert_eq!(p.rules_for(&PredKey::new("rwb", 1)).count(), 3);
    }

    #[test]
    fn regtype_alternative_naming_a_type_means_inclusion() {
        let src = "
            :- regtype t/1.
            t := num | pair(t, t) | nil.
            :- regtype u/1.
            u := t | none.
        ";
        let p = parse_program(src).unwrap();
        let t_rules: Vec<_> = p.rules_for(&PredKey::new("t", 1)).collect();
        assert_eq!(t_rules.len(), 3);
        // t := num lowers to an alias clause t(V) :- num(V).
        assert!(t_rules.iter().any(|r| {
            r.body.len() == 1
                && matches!(&r.body[0], Literal::Atom(a) if a.pred == "num" && a.args == r.head.args)
        }));
        // t := nil stays the atom constant.
        assert!(t_rules.iter().any(|r| {
            matches!(&r.body[0], Literal::Constraint(Constraint::Eq(_, rhs)) if *rhs == Term::atom("nil"))
        }));
        // u := t aliases the declared regtype, u := none is a constant.
        let u_rules: Vec<_> = p.rules_for(&PredKey::new("u", 1)).collect();
        assert!(u_rules.iter().any(|r| {
            r.body.len() == 1 && matches!(&r.body[0], Literal::Atom(a) if a.pred == "t")
        }));
    }

    #[test]
    fn parses_higher_order_and_arith() {
        let src = "
            foo(P) :- P(10).
            even(N) :- integer(N), 0 is N mod 2.
            lex(X,Y) :- X @< Y.
        ";
        let p = parse_program(src).unwrap();
        let foo = p.rules_for(&PredKey::new("foo", 1)).next().unwrap();
        assert!(matches!(&foo.body[0], Literal::HigherOrder(v, args) if v == "P" && args.len() == 1));
        let even = p.rules_for(&PredKey::new("even", 1)).next().unwrap();
        assert!(matches!(&even.body[1], Literal::Constraint(Constraint::Is(..))));
    }

    #[test]
    fn rejects_variable_functor_and_builtin_redefinition() {
        assert!(parse_program("p(X) :- q(X(a)).").is_err());
        assert!(parse_program("int(X) :- X = 3.").is_err());
        // prop + pred assertion conflict
        let src = ":- prop q/1. q(a). :- pred q(X) : nat(X).";
        assert!(parse_program(src).is_err());
    }

    #[test]
    fn parses_entry_and_wrap() {
        let src = "
            p_nat := { :- pred _(N) : nat(N). }.
            :- pred even(N) : int(N).
            even(N) :- integer(N), 0 is N mod 2.
            :- entry even(4).
            :- wrap even/1 with p_nat as even_nat.
        ";
        let p = parse_program(src).unwrap();
        assert_eq!(p.entries.len(), 1);
        assert_eq!(p.wraps.len(), 1);
        assert!(p.defines(&PredKey::new("even_nat", 1)));
        let wa = &p.assertions[&PredKey::new("even_nat", 1)][0];
        assert_eq!(wa.pre.disjuncts[0][0].pred, "nat");
    }

    #[test]
    fn quoted_atoms_and_disjunction() {
        let src = "
            :- regtype res/1.
            res := 'OK' | 'CREATED'.
            :- pred h(A,B) : (nat(A); atm(A)) => res(B).
            h(A,B) :- B = 'OK'.
        ";
        let p = parse_program(src).unwrap();
        let a = &p.assertions[&PredKey::new("h", 2)][0];
        assert_eq!(a.pre.disjuncts.len(), 2);
    }

    #[test]
    fn round_trips_pretty_printed_rules() {
        let src = "
            qsort(Xs,C,Ys) :- qsort(Xs,C,Ys).
            take(0,Xs,Ys) :- Ys = [].
            take(N,Xs,Ys) :- 0 < N, Xs = [X|Xs1], M is N - 1, take(M,Xs1,Ys1), Ys = [X|Ys1].
        ";
        let p = parse_program(src).unwrap();
        for r in p.rules.iter().take(3) {
            let printed = pretty::rule(r);
            let reparsed = parse_program(&printed).unwrap();
            let again = reparsed.rules_for(&r.head.key()).next().unwrap();
            assert_eq!(again.head, r.head, "head round trip for {printed}");
            assert_eq!(again.body, r.body, "body round trip for {printed}");
        }
    }
}
