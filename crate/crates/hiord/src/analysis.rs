//! Goal-dependent abstract interpretation of programs over the value
//! domains, tabulating one success abstraction per distinct call pattern.
//!
//! Each table entry keys a predicate with a canonical abstract call: the
//! argument abstractions projected onto positional parameters `$0..$n-1`.
//! The success abstraction is always below the call abstraction, since
//! derivation only extends stores and resolving variables deeper never
//! leaves a regular type. Higher-order calls resolve through the abstract
//! value of the callee variable; when that value does not pin down a finite
//! set of predicate names the analysis over-approximates with top and marks
//! itself incomplete.

use crate::domain::regtype::RegType;
use crate::domain::{AbsEnv, Ctx, Val};
use crate::syntax::{
    ArithExpr, ArithOp, Atom, CmpOp, Constraint, Literal, Name, PredKey, Program, Term,
};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// Canonical positional parameter name. `$` cannot appear in source
/// variables, so these never collide with program text.
pub fn param(i: usize) -> Name {
    format!("${i}")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Triple {
    pub pred: PredKey,
    /// Abstract call, over `$i` parameters.
    pub call: AbsEnv,
    /// Abstract success for that call, over the same parameters.
    pub success: AbsEnv,
}

#[derive(Clone, Debug, Default)]
pub struct AnalysisResult {
    pub triples: Vec<Triple>,
    pub incomplete: bool,
    pub diagnostics: BTreeSet<String>,
}

impl AnalysisResult {
    pub fn for_pred<'a>(&'a self, key: &'a PredKey) -> impl Iterator<Item = &'a Triple> {
        self.triples.iter().filter(move |t| t.pred == *key)
    }

    /// Join of every observed call abstraction; bottom when unreached.
    pub fn call_env(&self, key: &PredKey, ctx: &Ctx) -> AbsEnv {
        self.for_pred(key)
            .fold(AbsEnv::bot(), |acc, t| acc.join(&t.call, ctx).0)
    }

    /// Join of every success abstraction; bottom when nothing succeeds.
    pub fn success_env(&self, key: &PredKey, ctx: &Ctx) -> AbsEnv {
        self.for_pred(key)
            .fold(AbsEnv::bot(), |acc, t| acc.join(&t.success, ctx).0)
    }

    /// Does a concrete atom (its resolved arguments) fall inside some
    /// recorded call abstraction? `None` when no triple has term semantics.
    pub fn covers_call(&self, atom: &Atom) -> Option<bool> {
        self.covers(atom, |t| &t.call)
    }

    pub fn covers_success(&self, atom: &Atom) -> Option<bool> {
        self.covers(atom, |t| &t.success)
    }

    fn covers(&self, atom: &Atom, side: impl Fn(&Triple) -> &AbsEnv) -> Option<bool> {
        let key = atom.key();
        let store = positional_store(atom);
        let mut any = false;
        for t in self.for_pred(&key) {
            match side(t).accepts_store(&store) {
                Some(true) => return Some(true),
                Some(false) => any = true,
                None => {}
            }
        }
        if any {
            Some(false)
        } else {
            None
        }
    }
}

fn positional_store(atom: &Atom) -> crate::store::Store {
    let mut store = crate::store::Store::empty();
    for (i, arg) in atom.args.iter().enumerate() {
        store = store
            .unify(&Term::Var(param(i)), arg)
            .expect("fresh positional variables always unify");
    }
    store
}

/// Analyze `program` from the given entry calls. Each entry pairs a goal
/// atom with an abstraction of its variables.
pub fn analyze(program: &Program, ctx: &Ctx, entries: &[(Atom, AbsEnv)]) -> AnalysisResult {
    let mut a = Analyzer {
        program,
        ctx,
        table: BTreeMap::new(),
        deps: BTreeMap::new(),
        work: VecDeque::new(),
        incomplete: false,
        diagnostics: BTreeSet::new(),
        steps: 0,
    };
    for (atom, env) in entries {
        let key = a.canonical_call(atom, env);
        a.ensure(key, None);
    }
    let budget_hit = a.run();
    let mut result = AnalysisResult {
        triples: Vec::new(),
        incomplete: a.incomplete || budget_hit,
        diagnostics: a.diagnostics,
    };
    for ((pred, call), success) in a.table {
        // On budget exhaustion the tabled successes may still be growing;
        // only the call side is trustworthy, so degrade success to call.
        let success = if budget_hit { call.clone() } else { success };
        result.triples.push(Triple { pred, call, success });
    }
    result
}

type CallKey = (PredKey, AbsEnv);

struct Analyzer<'p> {
    program: &'p Program,
    ctx: &'p Ctx,
    table: BTreeMap<CallKey, AbsEnv>,
    deps: BTreeMap<CallKey, BTreeSet<CallKey>>,
    work: VecDeque<CallKey>,
    incomplete: bool,
    diagnostics: BTreeSet<String>,
    steps: usize,
}

const MAX_STEPS: usize = 50_000;

impl<'p> Analyzer<'p> {
    /// Project a call onto positional parameters and widen, producing the
    /// canonical table key.
    fn canonical_call(&mut self, atom: &Atom, env: &AbsEnv) -> CallKey {
        let mut call = AbsEnv::top();
        if env.is_bot() {
            return (atom.key(), AbsEnv::bot());
        }
        for (i, arg) in atom.args.iter().enumerate() {
            if let Some(v) = abs_term(env, arg, self.ctx) {
                let v = widen_val(v);
                call.meet_bind(&param(i), v, self.ctx);
            }
        }
        (atom.key(), call)
    }

    fn ensure(&mut self, key: CallKey, dependent: Option<&CallKey>) -> AbsEnv {
        if let Some(dep) = dependent {
            self.deps.entry(key.clone()).or_default().insert(dep.clone());
        }
        match self.table.get(&key) {
            Some(s) => s.clone(),
            None => {
                self.table.insert(key.clone(), AbsEnv::bot());
                self.work.push_back(key);
                AbsEnv::bot()
            }
        }
    }

    /// Returns true if the step budget ran out.
    fn run(&mut self) -> bool {
        while let Some(key) = self.work.pop_front() {
            self.steps += 1;
            if self.steps > MAX_STEPS {
                self.diagnostics
                    .insert("analysis step budget exhausted".to_string());
                return true;
            }
            let mut result = AbsEnv::bot();
            for idx in 0..self.program.rules_for(&key.0).count() {
                let rule = self.program.rules_for(&key.0).nth(idx).unwrap().clone();
                let contrib = self.clause_success(&key, &rule);
                result = result.join(&contrib, self.ctx).0;
            }
            // Success refines the call; keep the invariant by construction.
            result = result.meet(&key.1, self.ctx);
            result = widen_env(result);
            let old = self.table.get(&key).cloned().unwrap_or(AbsEnv::Bot);
            if !result.leq(&old, self.ctx) {
                let grown = old.join(&result, self.ctx).0;
                let grown = widen_env(grown).meet(&key.1, self.ctx);
                self.table.insert(key.clone(), grown);
                if let Some(deps) = self.deps.get(&key) {
                    for d in deps.clone() {
                        if !self.work.contains(&d) {
                            self.work.push_back(d);
                        }
                    }
                }
            }
        }
        false
    }

    fn clause_success(&mut self, key: &CallKey, rule: &crate::syntax::Rule) -> AbsEnv {
        // Normalized heads have distinct variable arguments.
        let mut env = AbsEnv::top();
        let mut head_vars = Vec::new();
        for (i, arg) in rule.head.args.iter().enumerate() {
            let Term::Var(v) = arg else { return AbsEnv::Bot };
            head_vars.push(v.clone());
            if let Some(val) = key.1.get(&param(i)) {
                env.meet_bind(v, val.clone(), self.ctx);
            }
        }
        for lit in &rule.body {
            if env.is_bot() {
                return AbsEnv::Bot;
            }
            env = self.literal(env, lit, key);
        }
        if env.is_bot() {
            return AbsEnv::Bot;
        }
        // Constraints are symmetric facts, but the environment is a flat
        // map: an equation seen before a call cannot pick up what the call
        // binds later. Re-applying the pure constraints settles chained
        // equations without touching the call table.
        for _ in 0..3 {
            let before = env.clone();
            for lit in &rule.body {
                if let Literal::Constraint(c) = lit {
                    env = self.constraint(env, c);
                    if env.is_bot() {
                        return AbsEnv::Bot;
                    }
                }
            }
            if env == before {
                break;
            }
        }
        // Project onto the head and rename to parameter positions.
        let vars: BTreeSet<Name> = head_vars.iter().cloned().collect();
        let map: BTreeMap<Name, Name> = head_vars
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), param(i)))
            .collect();
        env.project(&vars).rename(&map)
    }

    fn literal(&mut self, env: AbsEnv, lit: &Literal, key: &CallKey) -> AbsEnv {
        match lit {
            Literal::Constraint(c) => self.constraint(env, c),
            Literal::Check(..) => env,
            Literal::Atom(atom) => self.call_atom(env, atom, key),
            Literal::HigherOrder(x, args) => {
                let callees = env.get(x).and_then(finite_callees);
                match callees {
                    Some(names) => {
                        let mut out = AbsEnv::bot();
                        for name in names {
                            let target = Atom { pred: name.clone(), args: args.clone() };
                            if !self.program.defines(&target.key()) {
                                continue;
                            }
                            // This branch also pins the callee variable.
                            let mut branch = env.clone();
                            branch.meet_bind(
                                x,
                                Val::Type(RegType::atoms([name.clone()])),
                                self.ctx,
                            );
                            let after = self.call_atom(branch, &target, key);
                            out = out.join(&after, self.ctx).0;
                        }
                        out
                    }
                    None => {
                        self.incomplete = true;
                        self.diagnostics.insert(format!(
                            "higher-order call {x}(..) cannot be resolved to a finite predicate set"
                        ));
                        // The unknown callee may bind any argument variable.
                        let mut out = env;
                        for t in args {
                            for v in t.vars() {
                                out = clear_var(out, &v);
                            }
                        }
                        out
                    }
                }
            }
        }
    }

    fn call_atom(&mut self, env: AbsEnv, atom: &Atom, key: &CallKey) -> AbsEnv {
        if env.is_bot() {
            return env;
        }
        // Builtin type tests refine their argument and bind nothing else.
        if let [arg] = atom.args.as_slice() {
            let test = match atom.pred.as_str() {
                "int" | "integer" | "num" => Some(RegType::int()),
                "nat" => Some(RegType::nat()),
                "atm" | "atom" => Some(RegType::atm()),
                "term" => Some(RegType::any()),
                _ => None,
            };
            if let Some(t) = test {
                return refine_term(env, arg, &Val::Type(t), self.ctx);
            }
        }
        if atom.pred == "true" && atom.args.is_empty() {
            return env;
        }
        if !self.program.defines(&atom.key()) {
            return AbsEnv::Bot;
        }
        let callee = self.canonical_call(atom, &env);
        let success = self.ensure(callee, Some(key));
        if success.is_bot() {
            return AbsEnv::Bot;
        }
        // Refine the argument terms with the positional successes.
        let mut out = env;
        for (i, arg) in atom.args.iter().enumerate() {
            if let Some(val) = success.get(&param(i)) {
                out = refine_term(out, arg, val, self.ctx);
                if out.is_bot() {
                    return out;
                }
            }
        }
        out
    }

    fn constraint(&mut self, env: AbsEnv, c: &Constraint) -> AbsEnv {
        match c {
            Constraint::Eq(a, b) => abs_unify(env, a, b, self.ctx),
            Constraint::Is(target, expr) => {
                let (env, val) = self.arith(env, expr);
                if env.is_bot() {
                    return env;
                }
                refine_term(env, target, &Val::Type(val), self.ctx)
            }
            Constraint::Cmp(op, a, b) => {
                if *op == CmpOp::TermLt {
                    return env;
                }
                let env = refine_term(env, a, &Val::Type(RegType::int()), self.ctx);
                if env.is_bot() {
                    return env;
                }
                refine_term(env, b, &Val::Type(RegType::int()), self.ctx)
            }
        }
    }

    /// Evaluate an arithmetic expression abstractly, refining the operand
    /// variables to integers (evaluation requires ground integers).
    fn arith(&mut self, env: AbsEnv, e: &ArithExpr) -> (AbsEnv, RegType) {
        match e {
            ArithExpr::Int(i) => (env, RegType::singleton(&Term::Int(*i))),
            ArithExpr::Var(v) => {
                let mut env = env;
                env.meet_bind(v, Val::Type(RegType::int()), self.ctx);
                let t = match env.get(v) {
                    Some(Val::Type(t)) => t.clone(),
                    _ => RegType::int(),
                };
                (env, t)
            }
            ArithExpr::Neg(inner) => {
                let (env, _) = self.arith(env, inner);
                (env, RegType::int())
            }
            ArithExpr::Bin(op, l, r) => {
                let (env, lt) = self.arith(env, l);
                let (env, rt) = self.arith(env, r);
                let nat = RegType::nat();
                let t = match op {
                    ArithOp::Add | ArithOp::Mul
                        if lt.subtype(&nat) && rt.subtype(&nat) =>
                    {
                        nat
                    }
                    ArithOp::Mod if rt.subtype(&nat) => nat,
                    _ => RegType::int(),
                };
                (env, t)
            }
        }
    }
}

fn clear_var(env: AbsEnv, v: &str) -> AbsEnv {
    match env {
        AbsEnv::Bot => AbsEnv::Bot,
        AbsEnv::Env(mut m) => {
            m.remove(v);
            AbsEnv::Env(m)
        }
    }
}

fn widen_val(v: Val) -> Val {
    match v {
        Val::Type(t) => Val::Type(t.widen()),
        other => other,
    }
}

fn widen_env(env: AbsEnv) -> AbsEnv {
    match env {
        AbsEnv::Bot => AbsEnv::Bot,
        AbsEnv::Env(m) => {
            AbsEnv::Env(m.into_iter().map(|(k, v)| (k, widen_val(v))).collect())
        }
    }
}

/// The finite set of predicate names an abstract value can stand for.
fn finite_callees(v: &Val) -> Option<BTreeSet<Name>> {
    match v {
        Val::Lat(_) => None,
        Val::Type(t) => t.root_atom_names(),
        Val::Props { preds, .. } => Some(preds.clone()),
    }
}

/// Abstraction of a term under an environment; `None` is top. Lattice
/// values do not embed into term structure, so compounds over them widen.
pub fn abs_term(env: &AbsEnv, t: &Term, ctx: &Ctx) -> Option<Val> {
    match t {
        Term::Var(v) => env.get(v).cloned(),
        Term::Int(i) => Some(Val::Type(RegType::singleton(&Term::Int(*i)))),
        Term::Compound(f, args) if args.is_empty() => {
            Some(Val::Type(RegType::atoms([f.clone()])))
        }
        Term::Compound(f, args) => {
            let mut arg_types = Vec::new();
            for a in args {
                let ty = match abs_term(env, a, ctx) {
                    None => RegType::any(),
                    Some(Val::Type(t)) => t,
                    Some(Val::Props { preds, .. }) => RegType::atoms(preds),
                    Some(Val::Lat(_)) => return None,
                };
                arg_types.push(ty);
            }
            Some(Val::Type(RegType::compound(f, &arg_types)))
        }
    }
}

/// Constrain a term by an abstract value, pushing the constraint into the
/// term's variables. Lattice values pass through without refinement.
pub fn refine_term(env: AbsEnv, t: &Term, val: &Val, ctx: &Ctx) -> AbsEnv {
    if env.is_bot() {
        return env;
    }
    match t {
        Term::Var(v) => {
            let mut env = env;
            env.meet_bind(v, val.clone(), ctx);
            env
        }
        _ => match val.accepts_shallow(t, ctx) {
            ShallowFit::No => AbsEnv::Bot,
            ShallowFit::Opaque => env,
            ShallowFit::Args(arg_vals) => {
                let Term::Compound(_, args) = t else { return env };
                let mut env = env;
                for (a, av) in args.iter().zip(arg_vals) {
                    env = refine_term(env, a, &av, ctx);
                    if env.is_bot() {
                        break;
                    }
                }
                env
            }
        },
    }
}

pub enum ShallowFit {
    /// The term cannot inhabit the value.
    No,
    /// No structural information (lattice values, constants that fit).
    Opaque,
    /// Compound fits; per-argument values to push down.
    Args(Vec<Val>),
}

impl Val {
    /// One-level compatibility of a non-variable term with this value.
    pub fn accepts_shallow(&self, t: &Term, _ctx: &Ctx) -> ShallowFit {
        let ty = match self {
            Val::Lat(_) => return ShallowFit::Opaque,
            Val::Type(ty) => ty.clone(),
            Val::Props { preds, .. } => RegType::atoms(preds.iter().cloned()),
        };
        match t {
            Term::Var(_) => ShallowFit::Opaque,
            Term::Int(_) | Term::Compound(_, _) if ty.is_any() => ShallowFit::Opaque,
            Term::Int(i) => {
                if ty.member(&Term::Int(*i)) {
                    ShallowFit::Opaque
                } else {
                    ShallowFit::No
                }
            }
            Term::Compound(_, args) if args.is_empty() => {
                if ty.member(t) {
                    ShallowFit::Opaque
                } else {
                    ShallowFit::No
                }
            }
            Term::Compound(f, args) => match ty.functor_args(f, args.len()) {
                None => ShallowFit::No,
                Some(arg_types) => {
                    ShallowFit::Args(arg_types.into_iter().map(Val::Type).collect())
                }
            },
        }
    }
}

/// Abstract unification of two terms.
pub fn abs_unify(env: AbsEnv, a: &Term, b: &Term, ctx: &Ctx) -> AbsEnv {
    if env.is_bot() {
        return env;
    }
    match (a, b) {
        (Term::Var(_), _) => {
            let mut env = env;
            if let Some(bv) = abs_term(&env, b, ctx) {
                env = refine_term(env, a, &bv, ctx);
            }
            if env.is_bot() {
                return env;
            }
            if let Some(av) = abs_term(&env, a, ctx) {
                env = refine_term(env, b, &av, ctx);
            }
            env
        }
        (_, Term::Var(_)) => abs_unify(env, b, a, ctx),
        (Term::Int(i), Term::Int(j)) => {
            if i == j {
                env
            } else {
                AbsEnv::Bot
            }
        }
        (Term::Compound(f, fa), Term::Compound(g, ga)) => {
            if f != g || fa.len() != ga.len() {
                return AbsEnv::Bot;
            }
            let mut env = env;
            for (x, y) in fa.iter().zip(ga) {
                env = abs_unify(env, x, y, ctx);
                if env.is_bot() {
                    break;
                }
            }
            env
        }
        _ => AbsEnv::Bot,
    }
}

// ------------------------------------------------------------- inference --

/// Join of the argument shapes a predicate's clauses accept: leading
/// unifications contribute their patterns, unary type-shaped checks
/// contribute their types, anything else contributes no constraint.
pub fn head_shape(program: &Program, ctx: &Ctx, pred: &PredKey) -> AbsEnv {
    let mut acc = AbsEnv::bot();
    for rule in program.rules_for(pred) {
        let mut checks: BTreeMap<Name, RegType> = BTreeMap::new();
        let mut eqs: BTreeMap<Name, Term> = BTreeMap::new();
        for lit in &rule.body {
            match lit {
                Literal::Atom(a) => {
                    if let [Term::Var(v)] = a.args.as_slice() {
                        if let Some((t, _)) = ctx.types.convert(&a.pred) {
                            checks
                                .entry(v.clone())
                                .and_modify(|old| *old = old.intersect(&t))
                                .or_insert(t);
                        }
                    }
                }
                Literal::Constraint(Constraint::Eq(Term::Var(v), pat)) => {
                    eqs.entry(v.clone()).or_insert_with(|| pat.clone());
                }
                Literal::Constraint(Constraint::Eq(pat, Term::Var(v))) => {
                    eqs.entry(v.clone()).or_insert_with(|| pat.clone());
                }
                _ => {}
            }
        }
        fn pattern_type(t: &Term, checks: &BTreeMap<Name, RegType>) -> RegType {
            match t {
                Term::Var(v) => checks.get(v).cloned().unwrap_or_else(RegType::any),
                Term::Int(i) => RegType::singleton(&Term::Int(*i)),
                Term::Compound(_, args) if args.is_empty() => RegType::singleton(t),
                Term::Compound(f, args) => {
                    let ats: Vec<RegType> =
                        args.iter().map(|a| pattern_type(a, checks)).collect();
                    RegType::compound(f, &ats)
                }
            }
        }
        let mut env = AbsEnv::top();
        for (i, arg) in rule.head.args.iter().enumerate() {
            let Term::Var(v) = arg else { continue };
            let mut ty = match eqs.get(v) {
                Some(pat) => pattern_type(pat, &checks),
                None => RegType::any(),
            };
            if let Some(t) = checks.get(v) {
                ty = ty.intersect(t);
            }
            env.meet_bind(&param(i), Val::Type(ty), ctx);
        }
        acc = acc.join(&env, ctx).0;
    }
    widen_env(acc)
}

/// Infer a success condition for a predicate: a shape precondition from the
/// clause heads, and the analyzed success under it.
pub fn infer_condition(
    program: &Program,
    ctx: &Ctx,
    pred: &PredKey,
) -> (AbsEnv, AbsEnv, bool) {
    let pre = head_shape(program, ctx, pred);
    let args: Vec<Term> = (0..pred.arity).map(|i| Term::Var(param(i))).collect();
    let atom = Atom { pred: pred.name.clone(), args };
    let result = analyze(program, ctx, &[(atom, pre.clone())]);
    let post = result.success_env(pred, ctx);
    (pre, post, !result.incomplete)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;
    use crate::syntax::list_term;

    fn ctx_of(p: &Program) -> Ctx {
        Ctx::new(p)
    }

    fn entry(p: &Program, ctx: &Ctx, goal: &str, pre: &[(&str, Val)]) -> AnalysisResult {
        let wrapped = format!("probe_entry :- {goal}.");
        let parsed = parse_program(&wrapped).unwrap();
        let atom = match &parsed.rules[0].body[0] {
            Literal::Atom(a) => a.clone(),
            other => panic!("unexpected literal {other:?}"),
        };
        let mut env = AbsEnv::top();
        for (v, val) in pre {
            env.meet_bind(v, val.clone(), ctx);
        }
        analyze(p, ctx, &[(atom, env)])
    }

    #[test]
    fn tabulates_list_recursion_with_widening() {
        let p = parse_program(
            "
            :- regtype rwb/1.
            rwb := r | w | b.
            mklist(N, L) :- N = 0, L = [].
            mklist(N, L) :- N > 0, M is N - 1, mklist(M, T), L = [r|T].
            ",
        )
        .unwrap();
        let ctx = ctx_of(&p);
        let res = entry(&p, &ctx, "mklist(X, Y)", &[("X", Val::Type(RegType::nat()))]);
        assert!(!res.incomplete);
        let key = PredKey::new("mklist", 2);
        let succ = res.success_env(&key, &ctx);
        // The result type is a list of r, found by widening the growing
        // prefix chain.
        let want = RegType::list_of(&RegType::atoms(["r".to_string()]));
        match succ.get(&param(1)) {
            Some(Val::Type(t)) => {
                assert!(
                    t.subtype(&want) && want.subtype(t),
                    "inferred {t:?}"
                );
            }
            other => panic!("unexpected success value {other:?}"),
        }
        // Success stays below the call.
        for t in res.for_pred(&key) {
            assert!(t.success.leq(&t.call, &ctx));
        }
    }

    #[test]
    fn propagates_types_through_calls_and_arith() {
        let p = parse_program(
            "
            step(X, Y) :- nat(X), Y is X + 1.
            twice(X, Z) :- step(X, Y), step(Y, Z).
            ",
        )
        .unwrap();
        let ctx = ctx_of(&p);
        let res = entry(&p, &ctx, "twice(A, B)", &[("A", Val::Type(RegType::nat()))]);
        let succ = res.success_env(&PredKey::new("twice", 2), &ctx);
        match succ.get(&param(1)) {
            Some(Val::Type(t)) => assert!(t.subtype(&RegType::nat())),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn higher_order_calls_resolve_through_finite_sets() {
        let p = parse_program(
            "
            zero_to(X, Y) :- X = ignored, Y = 0.
            one_to(X, Y) :- X = ignored, Y = 1.
            apply(F, A, B) :- F(A, B).
            ",
        )
        .unwrap();
        let ctx = ctx_of(&p);
        let res = entry(
            &p,
            &ctx,
            "apply(F, X, Y)",
            &[(
                "F",
                Val::Type(RegType::atoms(["zero_to".to_string(), "one_to".to_string()])),
            )],
        );
        assert!(!res.incomplete);
        let succ = res.success_env(&PredKey::new("apply", 3), &ctx);
        match succ.get(&param(2)) {
            Some(Val::Type(t)) => {
                assert!(t.member(&Term::Int(0)) && t.member(&Term::Int(1)));
                assert!(!t.member(&Term::Int(2)));
            }
            other => panic!("unexpected {other:?}"),
        }
        // With an unconstrained callee the analysis widens and flags it.
        let res = entry(&p, &ctx, "apply(F, X, Y)", &[]);
        assert!(res.incomplete);
        assert!(!res.diagnostics.is_empty());
    }

    #[test]
    fn failing_branches_are_bottom() {
        let p = parse_program(
            "
            only_a(X) :- X = a.
            drive(Y) :- only_a(b), Y = unreachable.
            ",
        )
        .unwrap();
        let ctx = ctx_of(&p);
        let res = entry(&p, &ctx, "drive(Y)", &[]);
        let succ = res.success_env(&PredKey::new("drive", 1), &ctx);
        assert!(succ.is_bot());
    }

    #[test]
    fn prelude_list_checks_parametrically_in_the_abstract() {
        let p = parse_program(
            "
            :- regtype rwb/1.
            rwb := r | w | b.
            check(L) :- list(rwb, L).
            ",
        )
        .unwrap();
        let ctx = ctx_of(&p);
        let rwb_list = RegType::list_of(&RegType::atoms([
            "r".to_string(),
            "w".to_string(),
            "b".to_string(),
        ]));
        let res = entry(&p, &ctx, "check(L)", &[("L", Val::Type(rwb_list.clone()))]);
        assert!(!res.incomplete);
        let succ = res.success_env(&PredKey::new("check", 1), &ctx);
        match succ.get(&param(0)) {
            Some(Val::Type(t)) => assert!(t.subtype(&rwb_list)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn head_shape_reads_patterns_and_guards() {
        let p = parse_program(
            "
            :- regtype rwb/1.
            rwb := r | w | b.
            cmp(X, Y, R) :- rwb(X), rwb(Y), X = Y, R = eq.
            cmp(X, Y, R) :- rwb(X), rwb(Y), R = lt.
            ",
        )
        .unwrap();
        let ctx = ctx_of(&p);
        let shape = head_shape(&p, &ctx, &PredKey::new("cmp", 3));
        let rwb = RegType::atoms(["r".to_string(), "w".to_string(), "b".to_string()]);
        match shape.get(&param(0)) {
            Some(Val::Type(t)) => assert!(t.same_language(&rwb)),
            other => panic!("unexpected {other:?}"),
        }
        let (pre, post, complete) = infer_condition(&p, &ctx, &PredKey::new("cmp", 3));
        assert!(complete);
        assert_eq!(pre, shape);
        match post.get(&param(2)) {
            Some(Val::Type(t)) => {
                assert!(t.member(&Term::atom("eq")) && t.member(&Term::atom("lt")));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn concrete_derivations_fall_inside_triples() {
        let p = parse_program(
            "
            app(X, Y, Z) :- X = [], Z = Y.
            app(X, Y, Z) :- X = [H|T], Z = [H|U], app(T, Y, U).
            ",
        )
        .unwrap();
        let ctx = ctx_of(&p);
        let nat_list = RegType::list_of(&RegType::nat());
        let res = entry(
            &p,
            &ctx,
            "app(A, B, C)",
            &[
                ("A", Val::Type(nat_list.clone())),
                ("B", Val::Type(nat_list.clone())),
            ],
        );
        // Drive the engine on a concrete query and compare.
        let mut machine = crate::engine::Machine::new(&p);
        let goal = Atom {
            pred: "app".into(),
            args: vec![
                list_term(&[Term::Int(1), Term::Int(2)]),
                list_term(&[Term::Int(3)]),
                Term::var("Out"),
            ],
        };
        let mut observed = crate::engine::Observed::default();
        let _res2 = machine.derive_observed(
            crate::engine::goal_of_literals(&[Literal::Atom(goal)]),
            crate::store::Store::empty(),
            &["Out".to_string()].into(),
            &crate::engine::Budget::default(),
            &mut observed,
        );
        assert!(!observed.calls.is_empty() && !observed.successes.is_empty());
        for call in &observed.calls {
            assert_eq!(res.covers_call(call), Some(true), "call {call:?}");
        }
        for s in &observed.successes {
            assert_eq!(res.covers_success(s), Some(true), "success {s:?}");
        }
    }
}
