//! Program syntax: terms, literals, rules and the program table.
//!
//! Rule heads are kept normalized: every head argument is a distinct variable,
//! with the original argument patterns moved into leading `=` constraints by
//! the parser. Higher-order atoms always have a variable in callee position;
//! variables never appear in functor position inside terms.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Predicate, functor and constant names.
pub type Name = String;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(Name),
    Int(i64),
    /// Constants are zero-arity compounds.
    Compound(Name, Vec<Term>),
}

impl Term {
    pub fn atom(name: &str) -> Term {
        Term::Compound(name.to_string(), Vec::new())
    }

    pub fn var(name: &str) -> Term {
        Term::Var(name.to_string())
    }

    pub fn is_const(&self) -> bool {
        match self {
            Term::Int(_) => true,
            Term::Compound(_, args) => args.is_empty(),
            Term::Var(_) => false,
        }
    }

    /// Atom constant name, if this is a zero-arity compound.
    pub fn const_name(&self) -> Option<&str> {
        match self {
            Term::Compound(f, args) if args.is_empty() => Some(f),
            _ => None,
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Int(_) => true,
            Term::Compound(_, args) => args.iter().all(Term::is_ground),
        }
    }

    pub fn vars_into(&self, out: &mut BTreeSet<Name>) {
        match self {
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::Int(_) => {}
            Term::Compound(_, args) => {
                for a in args {
                    a.vars_into(out);
                }
            }
        }
    }

    pub fn vars(&self) -> BTreeSet<Name> {
        let mut s = BTreeSet::new();
        self.vars_into(&mut s);
        s
    }

    /// Replace variables by terms.
    pub fn subst(&self, map: &BTreeMap<Name, Term>) -> Term {
        match self {
            Term::Var(v) => map.get(v).cloned().unwrap_or_else(|| self.clone()),
            Term::Int(_) => self.clone(),
            Term::Compound(f, args) => {
                Term::Compound(f.clone(), args.iter().map(|a| a.subst(map)).collect())
            }
        }
    }

    pub fn rename(&self, map: &BTreeMap<Name, Name>) -> Term {
        match self {
            Term::Var(v) => match map.get(v) {
                Some(n) => Term::Var(n.clone()),
                None => self.clone(),
            },
            Term::Int(_) => self.clone(),
            Term::Compound(f, args) => {
                Term::Compound(f.clone(), args.iter().map(|a| a.rename(map)).collect())
            }
        }
    }

    /// Standard order on ground terms: Int < Atom < Compound, then by value,
    /// by (arity, functor, args) for compounds. None if either side is non-ground.
    pub fn std_cmp(&self, other: &Term) -> Option<std::cmp::Ordering> {
        use std::cmp::Ordering;
        if !self.is_ground() || !other.is_ground() {
            return None;
        }
        fn rank(t: &Term) -> u8 {
            match t {
                Term::Var(_) => 0,
                Term::Int(_) => 1,
                Term::Compound(_, a) if a.is_empty() => 2,
                Term::Compound(..) => 3,
            }
        }
        let (ra, rb) = (rank(self), rank(other));
        if ra != rb {
            return Some(ra.cmp(&rb));
        }
        match (self, other) {
            (Term::Int(a), Term::Int(b)) => Some(a.cmp(b)),
            (Term::Compound(f, fa), Term::Compound(g, ga)) => {
                match fa.len().cmp(&ga.len()).then_with(|| f.cmp(g)) {
                    Ordering::Equal => {
                        for (x, y) in fa.iter().zip(ga) {
                            match x.std_cmp(y)? {
                                Ordering::Equal => continue,
                                o => return Some(o),
                            }
                        }
                        Some(Ordering::Equal)
                    }
                    o => Some(o),
                }
            }
            _ => unreachable!(),
        }
    }

    /// Nesting depth: constants 1, f(ts) is 1 + max depth of args.
    pub fn depth(&self) -> usize {
        match self {
            Term::Var(_) | Term::Int(_) => 1,
            Term::Compound(_, args) => {
                1 + args.iter().map(Term::depth).max().unwrap_or(0)
            }
        }
    }

    /// Total symbol count.
    pub fn size(&self) -> usize {
        match self {
            Term::Var(_) | Term::Int(_) => 1,
            Term::Compound(_, args) => 1 + args.iter().map(Term::size).sum::<usize>(),
        }
    }
}

/// Build a proper list term from elements.
pub fn list_term(elems: &[Term]) -> Term {
    let mut t = Term::atom("[]");
    for e in elems.iter().rev() {
        t = Term::Compound(".".to_string(), vec![e.clone(), t]);
    }
    t
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub pred: Name,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(pred: &str, args: Vec<Term>) -> Atom {
        Atom { pred: pred.to_string(), args }
    }

    pub fn key(&self) -> PredKey {
        PredKey { name: self.pred.clone(), arity: self.args.len() }
    }

    pub fn vars(&self) -> BTreeSet<Name> {
        let mut s = BTreeSet::new();
        for a in &self.args {
            a.vars_into(&mut s);
        }
        s
    }

    pub fn rename(&self, map: &BTreeMap<Name, Name>) -> Atom {
        Atom {
            pred: self.pred.clone(),
            args: self.args.iter().map(|a| a.rename(map)).collect(),
        }
    }
}

/// Predicate name/arity pair, the key for rules, assertions and tables.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PredKey {
    pub name: Name,
    pub arity: usize,
}

impl PredKey {
    pub fn new(name: &str, arity: usize) -> PredKey {
        PredKey { name: name.to_string(), arity }
    }
}

impl fmt::Display for PredKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
}

/// Ground integer arithmetic expressions (right side of `is`, comparison operands).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ArithExpr {
    Int(i64),
    Var(Name),
    Neg(Box<ArithExpr>),
    Bin(ArithOp, Box<ArithExpr>, Box<ArithExpr>),
}

impl ArithExpr {
    pub fn vars_into(&self, out: &mut BTreeSet<Name>) {
        match self {
            ArithExpr::Int(_) => {}
            ArithExpr::Var(v) => {
                out.insert(v.clone());
            }
            ArithExpr::Neg(e) => e.vars_into(out),
            ArithExpr::Bin(_, a, b) => {
                a.vars_into(out);
                b.vars_into(out);
            }
        }
    }

    pub fn rename(&self, map: &BTreeMap<Name, Name>) -> ArithExpr {
        match self {
            ArithExpr::Int(_) => self.clone(),
            ArithExpr::Var(v) => match map.get(v) {
                Some(n) => ArithExpr::Var(n.clone()),
                None => self.clone(),
            },
            ArithExpr::Neg(e) => ArithExpr::Neg(Box::new(e.rename(map))),
            ArithExpr::Bin(op, a, b) => {
                ArithExpr::Bin(*op, Box::new(a.rename(map)), Box::new(b.rename(map)))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    /// `@<`: standard order on ground terms.
    TermLt,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Constraint {
    /// Herbrand equality with occurs check.
    Eq(Term, Term),
    /// `X is Expr` over ground integers.
    Is(Term, ArithExpr),
    /// Integer comparison; TermLt compares terms in standard order.
    Cmp(CmpOp, Term, Term),
}

impl Constraint {
    pub fn vars(&self) -> BTreeSet<Name> {
        let mut s = BTreeSet::new();
        match self {
            Constraint::Eq(a, b) | Constraint::Cmp(_, a, b) => {
                a.vars_into(&mut s);
                b.vars_into(&mut s);
            }
            Constraint::Is(t, e) => {
                t.vars_into(&mut s);
                e.vars_into(&mut s);
            }
        }
        s
    }

    pub fn rename(&self, map: &BTreeMap<Name, Name>) -> Constraint {
        match self {
            Constraint::Eq(a, b) => Constraint::Eq(a.rename(map), b.rename(map)),
            Constraint::Is(t, e) => Constraint::Is(t.rename(map), e.rename(map)),
            Constraint::Cmp(op, a, b) => Constraint::Cmp(*op, a.rename(map), b.rename(map)),
        }
    }
}

/// Label of an assertion condition; injective across a program.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label(pub u32);

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Literal {
    Constraint(Constraint),
    Atom(Atom),
    /// X(t1,...,tn) with a variable callee.
    HigherOrder(Name, Vec<Term>),
    /// Pending post-condition check for a completed call; never in source.
    Check(Atom, Label),
}

impl Literal {
    pub fn vars(&self) -> BTreeSet<Name> {
        match self {
            Literal::Constraint(c) => c.vars(),
            Literal::Atom(a) | Literal::Check(a, _) => a.vars(),
            Literal::HigherOrder(v, args) => {
                let mut s = BTreeSet::new();
                s.insert(v.clone());
                for a in args {
                    a.vars_into(&mut s);
                }
                s
            }
        }
    }

    pub fn rename(&self, map: &BTreeMap<Name, Name>) -> Literal {
        match self {
            Literal::Constraint(c) => Literal::Constraint(c.rename(map)),
            Literal::Atom(a) => Literal::Atom(a.rename(map)),
            Literal::Check(a, l) => Literal::Check(a.rename(map), *l),
            Literal::HigherOrder(v, args) => Literal::HigherOrder(
                map.get(v).cloned().unwrap_or_else(|| v.clone()),
                args.iter().map(|a| a.rename(map)).collect(),
            ),
        }
    }

    pub fn is_check(&self) -> bool {
        matches!(self, Literal::Check(..))
    }
}

/// Source position, 1-based.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    /// Normalized: distinct variable arguments.
    pub head: Atom,
    pub body: Vec<Literal>,
    pub span: Span,
}

impl Rule {
    pub fn vars(&self) -> BTreeSet<Name> {
        let mut s = self.head.vars();
        for l in &self.body {
            s.extend(l.vars());
        }
        s
    }
}

/// Fresh-variable source. Generated names use a reserved prefix so they can
/// never collide with source variables.
#[derive(Clone, Debug, Default)]
pub struct VarGen {
    next: u64,
}

impl VarGen {
    pub fn new() -> VarGen {
        VarGen { next: 0 }
    }

    pub fn fresh(&mut self) -> Name {
        let n = self.next;
        self.next += 1;
        format!("_G{n}")
    }
}

/// Renamed-apart copies of the rules defining `key`. Two consecutive calls
/// return rules with disjoint fresh variable sets.
pub fn defn(key: &PredKey, program: &Program, vars: &mut VarGen) -> Vec<Rule> {
    let mut out = Vec::new();
    for rule in program.rules_for(key) {
        let mut map = BTreeMap::new();
        for v in rule.vars() {
            map.insert(v, vars.fresh());
        }
        out.push(Rule {
            head: rule.head.rename(&map),
            body: rule.body.iter().map(|l| l.rename(&map)).collect(),
            span: rule.span,
        });
    }
    out
}

pub use crate::assertions::{PredAssertion, PredicateProperty};

/// An `:- entry Goal : Pre.` declaration (or its CLI override).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EntryDecl {
    pub goal: Atom,
    pub pre: crate::assertions::PropFormula,
    pub span: Span,
}

/// A `:- wrap p/N with Property as name.` directive.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WrapDecl {
    pub target: PredKey,
    pub property: Name,
    pub wrapper: Name,
    pub span: Span,
}

/// Source of a regtype definition: functional notation or clause form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegTypeDef {
    pub key: PredKey,
    /// Alternatives in declaration order: each a ground shape whose variables
    /// have been replaced by type references. See domain::regtype.
    pub alts: Vec<TypeAlt>,
    pub span: Span,
}

/// One alternative of a functional regtype definition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TypeAlt {
    Int(i64),
    Const(Name),
    /// functor(typeref, ...); typerefs are type names (possibly builtins).
    Shape(Name, Vec<Name>),
}

#[derive(Clone, Debug, Default)]
pub struct Program {
    pub rules: Vec<Rule>,
    /// Predicates declared `:- prop p/1.` etc.
    pub props: BTreeSet<PredKey>,
    /// Predicates declared `:- regtype t/1.`
    pub regtypes: BTreeSet<PredKey>,
    /// Functional-notation regtype definitions (`t := a | b | f(t).`).
    pub regtype_defs: BTreeMap<Name, RegTypeDef>,
    /// Predicate properties (`name := { :- pred _(...) ... }.`), in source order.
    pub properties: BTreeMap<Name, PredicateProperty>,
    pub property_order: Vec<Name>,
    /// User `:- pred` assertions, in source order per predicate.
    pub assertions: BTreeMap<PredKey, Vec<PredAssertion>>,
    pub entries: Vec<EntryDecl>,
    pub wraps: Vec<WrapDecl>,
    /// Non-fatal diagnostics gathered at parse/assembly time.
    pub warnings: Vec<String>,
    rule_index: BTreeMap<PredKey, Vec<usize>>,
}

impl Program {
    pub fn push_rule(&mut self, rule: Rule) {
        let key = rule.head.key();
        self.rule_index.entry(key).or_default().push(self.rules.len());
        self.rules.push(rule);
    }

    pub fn rules_for(&self, key: &PredKey) -> impl Iterator<Item = &Rule> {
        self.rule_index
            .get(key)
            .into_iter()
            .flatten()
            .map(|&i| &self.rules[i])
    }

    pub fn defines(&self, key: &PredKey) -> bool {
        self.rule_index.contains_key(key)
    }

    /// All predicate keys with rules, in first-definition order.
    pub fn defined_preds(&self) -> Vec<PredKey> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for r in &self.rules {
            let k = r.head.key();
            if seen.insert(k.clone()) {
                out.push(k);
            }
        }
        out
    }

    pub fn is_prop_or_regtype(&self, key: &PredKey) -> bool {
        self.props.contains(key) || self.regtypes.contains(key)
    }

    /// Zero-arity constant names that name a defined predicate of the given arity.
    pub fn pred_named(&self, name: &str, arity: usize) -> bool {
        self.defines(&PredKey::new(name, arity))
    }
}

pub mod pretty {
    //! Plain-text rendering; parseable back by the parser (round trip up to
    //! whitespace and the normalization constraints already present).

    use super::*;

    pub fn term(t: &Term) -> String {
        match t {
            Term::Var(v) => v.clone(),
            Term::Int(i) => i.to_string(),
            Term::Compound(f, args) if args.is_empty() => atom_name(f),
            Term::Compound(f, args) if f == "." && args.len() == 2 => render_list(t),
            Term::Compound(f, args) => {
                let inner: Vec<String> = args.iter().map(term).collect();
                format!("{}({})", atom_name(f), inner.join(","))
            }
        }
    }

    /// Quote atom names that are not plain identifiers or symbol atoms.
    pub fn atom_name(name: &str) -> String {
        let plain_ident = name
            .chars()
            .next()
            .map(|c| c.is_ascii_lowercase())
            .unwrap_or(false)
            && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
        let symbolic = !name.is_empty() && name.chars().all(|c| "+-*/\\^<>=~:.?@#&".contains(c));
        if plain_ident || symbolic || name == "[]" {
            name.to_string()
        } else {
            format!("'{}'", name.replace('\'', "\\'"))
        }
    }

    fn render_list(t: &Term) -> String {
        let mut elems = Vec::new();
        let mut cur = t;
        loop {
            match cur {
                Term::Compound(f, args) if f == "." && args.len() == 2 => {
                    elems.push(term(&args[0]));
                    cur = &args[1];
                }
                Term::Compound(f, args) if f == "[]" && args.is_empty() => {
                    return format!("[{}]", elems.join(","));
                }
                other => {
                    return format!("[{}|{}]", elems.join(","), term(other));
                }
            }
        }
    }

    pub fn arith(e: &ArithExpr) -> String {
        match e {
            ArithExpr::Int(i) => i.to_string(),
            ArithExpr::Var(v) => v.clone(),
            ArithExpr::Neg(x) => format!("-({})", arith(x)),
            ArithExpr::Bin(op, a, b) => {
                let s = match op {
                    ArithOp::Add => "+",
                    ArithOp::Sub => "-",
                    ArithOp::Mul => "*",
                    ArithOp::Div => "//",
                    ArithOp::Mod => "mod",
                };
                format!("({} {} {})", arith(a), s, arith(b))
            }
        }
    }

    pub fn constraint(c: &Constraint) -> String {
        match c {
            Constraint::Eq(a, b) => format!("{} = {}", term(a), term(b)),
            Constraint::Is(t, e) => format!("{} is {}", term(t), arith(e)),
            Constraint::Cmp(op, a, b) => {
                let s = match op {
                    CmpOp::Lt => "<",
                    CmpOp::Le => "=<",
                    CmpOp::Gt => ">",
                    CmpOp::Ge => ">=",
                    CmpOp::TermLt => "@<",
                };
                format!("{} {} {}", term(a), s, term(b))
            }
        }
    }

    pub fn literal(l: &Literal) -> String {
        match l {
            Literal::Constraint(c) => constraint(c),
            Literal::Atom(a) => atom(a),
            Literal::HigherOrder(v, args) => {
                let inner: Vec<String> = args.iter().map(term).collect();
                format!("{}({})", v, inner.join(","))
            }
            Literal::Check(a, l) => format!("check({}, {})", atom(a), l),
        }
    }

    pub fn atom(a: &Atom) -> String {
        if a.args.is_empty() {
            atom_name(&a.pred)
        } else {
            let inner: Vec<String> = a.args.iter().map(term).collect();
            format!("{}({})", atom_name(&a.pred), inner.join(","))
        }
    }

    pub fn rule(r: &Rule) -> String {
        if r.body.is_empty() {
            format!("{}.", atom(&r.head))
        } else {
            let body: Vec<String> = r.body.iter().map(literal).collect();
            format!("{} :- {}.", atom(&r.head), body.join(", "))
        }
    }

    pub fn goal(ls: &[Literal]) -> String {
        if ls.is_empty() {
            "true".to_string()
        } else {
            ls.iter().map(literal).collect::<Vec<_>>().join(", ")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn std_order_ranks_ints_before_atoms_before_compounds() {
        use std::cmp::Ordering::*;
        let i = Term::Int(5);
        let a = Term::atom("zebra");
        let c = Term::Compound("f".into(), vec![Term::Int(1)]);
        assert_eq!(i.std_cmp(&a), Some(Less));
        assert_eq!(a.std_cmp(&c), Some(Less));
        assert_eq!(Term::Int(-2).std_cmp(&Term::Int(3)), Some(Less));
        assert_eq!(Term::atom("a").std_cmp(&Term::atom("b")), Some(Less));
        let v = Term::var("X");
        assert_eq!(v.std_cmp(&i), None);
    }

    #[test]
    fn defn_renames_apart() {
        let mut p = Program::default();
        p.push_rule(Rule {
            head: Atom::new("q", vec![Term::var("X")]),
            body: vec![Literal::Constraint(Constraint::Eq(
                Term::var("X"),
                Term::atom("a"),
            ))],
            span: Span::default(),
        });
        let mut vg = VarGen::new();
        let key = PredKey::new("q", 1);
        let r1 = defn(&key, &p, &mut vg);
        let r2 = defn(&key, &p, &mut vg);
        let v1 = r1[0].vars();
        let v2 = r2[0].vars();
        assert!(v1.is_disjoint(&v2));
        assert!(v1.iter().all(|v| v.starts_with("_G")));
    }

    #[test]
    fn list_pretty_round_shape() {
        let t = list_term(&[Term::Int(1), Term::atom("a")]);
        assert_eq!(pretty::term(&t), "[1,a]");
        let partial = Term::Compound(".".into(), vec![Term::Int(1), Term::var("T")]);
        assert_eq!(pretty::term(&partial), "[1|T]");
    }
}
