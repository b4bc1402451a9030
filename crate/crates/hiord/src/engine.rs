//! Operational semantics.
//!
//! Three layers:
//!   * single-step reduction of goals over a store ([`Machine::successors`],
//!     [`Machine::checked_successors`]),
//!   * bounded derivation-tree exploration collecting answers
//!     ([`Machine::derive`], [`Machine::derive_checked`]),
//!   * trivial success of property formulas ([`Machine::trivially_succeeds`]),
//!     which underlies both runtime checking and the conformance analysis.
//!
//! Freshness discipline: the machine's own variable generator is consumed
//! only by clause renaming during reduction. Formula instantiation and the
//! nested derivations of trivial-success checks draw from throwaway clones,
//! so two derivations that make the same sequence of non-check reductions
//! use the same fresh names. The redundance oracle relies on this to walk
//! two programs in lockstep.

use crate::assertions::{ConditionKind, ConditionSet, PropFormula};
use crate::parser::is_builtin;
use crate::store::Store;
use crate::syntax::*;
use std::collections::{BTreeMap, BTreeSet};

/// Exploration limits. `max_depth` bounds reductions along one branch,
/// `max_states` bounds total expanded states per derivation.
#[derive(Clone, Copy, Debug)]
pub struct Budget {
    pub max_depth: usize,
    pub max_states: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { max_depth: 400, max_states: 60_000 }
    }
}

/// Budget for nested trivial-success derivations.
pub const TS_BUDGET: Budget = Budget { max_depth: 120, max_states: 4_000 };

/// Goal items: source literals plus return markers that record when a
/// predicate call's subtree has completed (used for success observation and
/// for pushing nothing else; markers are transparent to reduction).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GoalItem {
    Lit(Literal),
    Return(Atom),
}

pub fn goal_of_literals(lits: &[Literal]) -> Vec<GoalItem> {
    lits.iter().cloned().map(GoalItem::Lit).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct State {
    pub goal: Vec<GoalItem>,
    pub store: Store,
}

/// State of the semantics with assertions: an error component holding at
/// most one violated condition label. Erroneous states are final.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtState {
    pub goal: Vec<GoalItem>,
    pub store: Store,
    pub err: Option<Label>,
}

impl ExtState {
    pub fn is_final(&self) -> bool {
        self.err.is_some() || self.goal.is_empty()
    }
}

#[derive(Clone, Debug, Default)]
pub struct DeriveResult {
    /// Success stores projected onto the requested variables, deduplicated.
    pub answers: Vec<Store>,
    /// True when the whole tree was explored within budget.
    pub complete: bool,
}

#[derive(Clone, Debug)]
pub struct CheckViolation {
    pub label: Label,
    pub store: Store,
    /// The call whose condition was violated.
    pub culprit: Atom,
}

#[derive(Clone, Debug, Default)]
pub struct CheckedResult {
    pub answers: Vec<Store>,
    pub violations: Vec<CheckViolation>,
    pub complete: bool,
}

/// Concrete call and success patterns observed during a derivation.
#[derive(Clone, Debug, Default)]
pub struct Observed {
    pub calls: Vec<Atom>,
    pub successes: Vec<Atom>,
}

pub struct Machine<'p> {
    pub program: &'p Program,
    pub vargen: VarGen,
    pub diagnostics: BTreeSet<String>,
    /// Set when a nested trivial-success check ran out of budget, i.e. a
    /// reported violation or non-success may be an artifact of the budget.
    pub ts_incomplete: bool,
}

fn seed_vargen(program: &Program) -> VarGen {
    let mut gen = VarGen::new();
    // Skip past program variables that look like generated ones.
    let mut max_used = 0u64;
    let mut names = BTreeSet::new();
    for r in &program.rules {
        names.extend(r.vars());
    }
    for n in &names {
        if let Some(num) = n.strip_prefix("_G").and_then(|s| s.parse::<u64>().ok()) {
            max_used = max_used.max(num + 1);
        }
    }
    for _ in 0..max_used {
        let _ = gen.fresh();
    }
    gen
}

impl<'p> Machine<'p> {
    pub fn new(program: &'p Program) -> Self {
        Machine {
            program,
            vargen: seed_vargen(program),
            diagnostics: BTreeSet::new(),
            ts_incomplete: false,
        }
    }

    pub fn diag(&mut self, msg: impl Into<String>) {
        self.diagnostics.insert(msg.into());
    }

    // ------------------------------------------------------------ builtins --

    /// Type-test builtins are non-generative: applied to an unbound variable
    /// they have no successor (and we record a diagnostic), they never bind.
    fn builtin_test(&mut self, a: &Atom, store: &Store) -> Option<bool> {
        let t = store.resolve(&a.args.first().cloned().unwrap_or(Term::Int(0)));
        let unbound = matches!(t, Term::Var(_));
        let verdict = match (a.pred.as_str(), a.args.len()) {
            ("true", 0) => return Some(true),
            ("int", 1) | ("integer", 1) | ("num", 1) => matches!(t, Term::Int(_)),
            ("nat", 1) => matches!(t, Term::Int(n) if n >= 0),
            ("atm", 1) | ("atom", 1) => matches!(t, Term::Compound(_, ref args) if args.is_empty()),
            ("term", 1) => true,
            _ => return None,
        };
        if unbound && a.pred != "term" {
            self.diag(format!(
                "type test {}({}) on an unbound variable has no successor",
                a.pred,
                pretty::term(&t)
            ));
            return Some(false);
        }
        Some(verdict)
    }

    fn eval_arith(&mut self, e: &ArithExpr, store: &Store) -> Option<i64> {
        match e {
            ArithExpr::Int(i) => Some(*i),
            ArithExpr::Var(v) => match store.resolve(&Term::Var(v.clone())) {
                Term::Int(i) => Some(i),
                other => {
                    self.diag(format!(
                        "arithmetic over non-integer term {}",
                        pretty::term(&other)
                    ));
                    None
                }
            },
            ArithExpr::Neg(e) => self.eval_arith(e, store)?.checked_neg(),
            ArithExpr::Bin(op, a, b) => {
                let a = self.eval_arith(a, store)?;
                let b = self.eval_arith(b, store)?;
                let r = match op {
                    ArithOp::Add => a.checked_add(b),
                    ArithOp::Sub => a.checked_sub(b),
                    ArithOp::Mul => a.checked_mul(b),
                    ArithOp::Div => {
                        if b == 0 {
                            self.diag("division by zero".to_string());
                            None
                        } else {
                            a.checked_div(b)
                        }
                    }
                    ArithOp::Mod => {
                        if b == 0 {
                            self.diag("division by zero".to_string());
                            None
                        } else {
                            a.checked_rem_euclid(b)
                        }
                    }
                };
                if r.is_none() {
                    self.diag("arithmetic overflow".to_string());
                }
                r
            }
        }
    }

    /// Constraint satisfiability: Some(store') extends, None fails.
    fn add_constraint(&mut self, c: &Constraint, store: &Store) -> Option<Store> {
        match c {
            Constraint::Eq(a, b) => store.unify(a, b),
            Constraint::Is(t, e) => {
                let v = self.eval_arith(e, store)?;
                store.unify(t, &Term::Int(v))
            }
            Constraint::Cmp(op, a, b) => {
                let ra = store.resolve(a);
                let rb = store.resolve(b);
                let holds = match op {
                    CmpOp::TermLt => {
                        match ra.std_cmp(&rb) {
                            Some(ord) => ord == std::cmp::Ordering::Less,
                            None => {
                                self.diag(format!(
                                    "term order comparison {} @< {} on non-ground terms",
                                    pretty::term(&ra),
                                    pretty::term(&rb)
                                ));
                                return None;
                            }
                        }
                    }
                    _ => {
                        let (Term::Int(x), Term::Int(y)) = (&ra, &rb) else {
                            self.diag(format!(
                                "integer comparison {} with non-integer operands",
                                pretty::constraint(c)
                            ));
                            return None;
                        };
                        match op {
                            CmpOp::Lt => x < y,
                            CmpOp::Le => x <= y,
                            CmpOp::Gt => x > y,
                            CmpOp::Ge => x >= y,
                            CmpOp::TermLt => unreachable!(),
                        }
                    }
                };
                if holds {
                    Some(store.clone())
                } else {
                    None
                }
            }
        }
    }

    // ------------------------------------------------------------ stepping --

    /// Plain reduction. One successor per matching clause for atoms; the
    /// callee of a higher-order atom must be entailed to be a predicate name.
    pub fn successors(&mut self, state: &State) -> Vec<State> {
        let Some((first, rest)) = state.goal.split_first() else {
            return Vec::new();
        };
        let rest: Vec<GoalItem> = rest.to_vec();
        match first {
            GoalItem::Return(_) => vec![State { goal: rest, store: state.store.clone() }],
            GoalItem::Lit(Literal::Check(_, _)) => {
                // Plain semantics ignores residual check literals.
                vec![State { goal: rest, store: state.store.clone() }]
            }
            GoalItem::Lit(Literal::Constraint(c)) => {
                match self.add_constraint(c, &state.store) {
                    Some(store) => vec![State { goal: rest, store }],
                    None => Vec::new(),
                }
            }
            GoalItem::Lit(Literal::HigherOrder(x, args)) => {
                match self.resolve_callee(x, args.len(), &state.store) {
                    Some(pred) => {
                        let mut goal = vec![GoalItem::Lit(Literal::Atom(Atom {
                            pred,
                            args: args.clone(),
                        }))];
                        goal.extend(rest);
                        vec![State { goal, store: state.store.clone() }]
                    }
                    None => Vec::new(),
                }
            }
            GoalItem::Lit(Literal::Atom(a)) => {
                if let Some(ok) = self.builtin_test(a, &state.store) {
                    return if ok {
                        vec![State { goal: rest, store: state.store.clone() }]
                    } else {
                        Vec::new()
                    };
                }
                self.atom_successors(a, &rest, &state.store)
                    .into_iter()
                    .map(|(goal, store)| State { goal, store })
                    .collect()
            }
        }
    }

    fn resolve_callee(&mut self, x: &Name, arity: usize, store: &Store) -> Option<Name> {
        match store.resolve(&Term::Var(x.clone())) {
            Term::Compound(p, args) if args.is_empty() => {
                let key = PredKey::new(&p, arity);
                if self.program.defines(&key) || is_builtin(&p, arity) {
                    Some(p)
                } else {
                    self.diag(format!("higher-order call to undefined predicate {key}"));
                    None
                }
            }
            Term::Var(_) => {
                self.diag(format!("higher-order call through unbound variable {x}"));
                None
            }
            other => {
                self.diag(format!(
                    "higher-order callee {} is not a predicate name",
                    pretty::term(&other)
                ));
                None
            }
        }
    }

    /// Clause resolution with eager head unification.
    fn atom_successors(
        &mut self,
        call: &Atom,
        rest: &[GoalItem],
        store: &Store,
    ) -> Vec<(Vec<GoalItem>, Store)> {
        let key = call.key();
        if !self.program.defines(&key) {
            self.diag(format!("call to undefined predicate {key}"));
            return Vec::new();
        }
        let rules = defn(&key, self.program, &mut self.vargen);
        let mut out = Vec::new();
        for rule in rules {
            if let Some(store) = store.unify_atoms(call, &rule.head) {
                let mut goal = goal_of_literals(&rule.body);
                goal.push(GoalItem::Return(call.clone()));
                goal.extend(rest.iter().cloned());
                out.push((goal, store));
            }
        }
        out
    }

    /// Reduction of the semantics with assertions. `state.err` must be None
    /// (erroneous states are final).
    pub fn checked_successors(
        &mut self,
        state: &ExtState,
        conds: &ConditionSet,
    ) -> Vec<ExtState> {
        debug_assert!(state.err.is_none());
        let Some((first, rest)) = state.goal.split_first() else {
            return Vec::new();
        };
        let rest: Vec<GoalItem> = rest.to_vec();
        let plain = |s: State| ExtState { goal: s.goal, store: s.store, err: None };
        match first {
            GoalItem::Lit(Literal::Check(a, label)) => {
                let Some(cond) = conds.by_label(*label) else {
                    self.diag(format!("dangling check label {label}"));
                    return vec![ExtState { goal: rest, store: state.store.clone(), err: None }];
                };
                let ConditionKind::Success { post, .. } = &cond.kind else {
                    return vec![ExtState { goal: rest, store: state.store.clone(), err: None }];
                };
                let f = self.instantiate(post, &cond.head, &a.args);
                if self.trivially_succeeds(&f, &state.store) {
                    vec![ExtState { goal: rest, store: state.store.clone(), err: None }]
                } else {
                    vec![ExtState {
                        goal: state.goal.clone(),
                        store: state.store.clone(),
                        err: Some(*label),
                    }]
                }
            }
            GoalItem::Lit(Literal::Atom(a)) => {
                if self.builtin_test(a, &state.store).is_some() {
                    return self
                        .successors(&State { goal: state.goal.clone(), store: state.store.clone() })
                        .into_iter()
                        .map(plain)
                        .collect();
                }
                let key = a.key();
                if let Some(cond) = conds.calls_for(&key) {
                    let ConditionKind::Calls { pre } = &cond.kind else { unreachable!() };
                    let f = self.instantiate(pre, &cond.head, &a.args);
                    if !self.trivially_succeeds(&f, &state.store) {
                        return vec![ExtState {
                            goal: state.goal.clone(),
                            store: state.store.clone(),
                            err: Some(cond.label),
                        }];
                    }
                }
                // Success conditions whose pre holds now are checked on exit.
                let mut checks = Vec::new();
                for cond in conds.successes_for(&key) {
                    let ConditionKind::Success { pre, .. } = &cond.kind else { continue };
                    let f = self.instantiate(pre, &cond.head, &a.args);
                    if self.trivially_succeeds(&f, &state.store) {
                        checks.push(GoalItem::Lit(Literal::Check(a.clone(), cond.label)));
                    }
                }
                self.atom_successors(a, &rest, &state.store)
                    .into_iter()
                    .map(|(mut goal, store)| {
                        // goal = body ++ Return ++ rest; checks go between
                        // the body's return marker and the continuation.
                        let ret_pos = goal.len() - rest.len() - 1;
                        debug_assert!(matches!(goal[ret_pos], GoalItem::Return(_)));
                        goal.splice(ret_pos..ret_pos, checks.iter().cloned());
                        ExtState { goal, store, err: None }
                    })
                    .collect()
            }
            _ => self
                .successors(&State { goal: state.goal.clone(), store: state.store.clone() })
                .into_iter()
                .map(plain)
                .collect(),
        }
    }

    // ---------------------------------------------------------- derivation --

    pub fn derive(
        &mut self,
        goal: Vec<GoalItem>,
        store: Store,
        proj: &BTreeSet<Name>,
        budget: &Budget,
    ) -> DeriveResult {
        self.derive_inner(goal, store, proj, budget, None, None)
    }

    pub fn derive_observed(
        &mut self,
        goal: Vec<GoalItem>,
        store: Store,
        proj: &BTreeSet<Name>,
        budget: &Budget,
        obs: &mut Observed,
    ) -> DeriveResult {
        self.derive_inner(goal, store, proj, budget, Some(obs), None)
    }

    fn derive_inner(
        &mut self,
        goal: Vec<GoalItem>,
        store: Store,
        proj: &BTreeSet<Name>,
        budget: &Budget,
        mut obs: Option<&mut Observed>,
        mut stop_on: Option<&mut dyn FnMut(&Store) -> bool>,
    ) -> DeriveResult {
        let mut result = DeriveResult { answers: Vec::new(), complete: true };
        let mut stack = vec![(State { goal, store }, 0usize)];
        let mut expanded = 0usize;
        while let Some((state, depth)) = stack.pop() {
            if state.goal.is_empty() {
                let ans = state.store.project(proj);
                let stop = stop_on.as_mut().map(|f| f(&ans)).unwrap_or(false);
                if !result.answers.contains(&ans) {
                    result.answers.push(ans);
                }
                if stop {
                    return result;
                }
                continue;
            }
            if depth >= budget.max_depth || expanded >= budget.max_states {
                result.complete = false;
                continue;
            }
            expanded += 1;
            if let Some(obs) = obs.as_deref_mut() {
                match &state.goal[0] {
                    GoalItem::Lit(Literal::Atom(a)) if !is_builtin(&a.pred, a.args.len()) => {
                        obs.calls.push(state.store.resolve_atom(a));
                    }
                    GoalItem::Return(a) => {
                        obs.successes.push(state.store.resolve_atom(a));
                    }
                    _ => {}
                }
            }
            // Push in reverse so the first clause is explored first.
            for s in self.successors(&state).into_iter().rev() {
                stack.push((s, depth + 1));
            }
        }
        result
    }

    /// Derivation under the semantics with assertions, collecting answers
    /// and condition violations.
    pub fn derive_checked(
        &mut self,
        goal: Vec<GoalItem>,
        store: Store,
        conds: &ConditionSet,
        proj: &BTreeSet<Name>,
        budget: &Budget,
    ) -> CheckedResult {
        let mut result = CheckedResult { answers: Vec::new(), violations: Vec::new(), complete: true };
        let mut stack = vec![(ExtState { goal, store, err: None }, 0usize)];
        let mut expanded = 0usize;
        while let Some((state, depth)) = stack.pop() {
            if let Some(label) = state.err {
                let culprit = state
                    .goal
                    .first()
                    .and_then(|g| match g {
                        GoalItem::Lit(Literal::Atom(a)) => Some(a.clone()),
                        GoalItem::Lit(Literal::Check(a, _)) => Some(a.clone()),
                        _ => None,
                    })
                    .unwrap_or_else(|| Atom::new("?", vec![]));
                result.violations.push(CheckViolation {
                    label,
                    store: state.store.clone(),
                    culprit,
                });
                continue;
            }
            if state.goal.is_empty() {
                let ans = state.store.project(proj);
                if !result.answers.contains(&ans) {
                    result.answers.push(ans);
                }
                continue;
            }
            if depth >= budget.max_depth || expanded >= budget.max_states {
                result.complete = false;
                continue;
            }
            expanded += 1;
            for s in self.checked_successors(&state, conds).into_iter().rev() {
                stack.push((s, depth + 1));
            }
        }
        result
    }

    /// Success stores of a call under the semantics with assertions,
    /// projected onto the call's variables.
    pub fn success_context(
        &mut self,
        call: &Atom,
        store: &Store,
        conds: &ConditionSet,
        budget: &Budget,
    ) -> CheckedResult {
        let proj = call.vars();
        self.derive_checked(
            vec![GoalItem::Lit(Literal::Atom(call.clone()))],
            store.clone(),
            conds,
            &proj,
            budget,
        )
    }

    // ------------------------------------------------------ trivial success --

    /// Instantiate a condition formula for a call: head variables map to the
    /// call's argument terms, local variables to fresh ones. Freshness comes
    /// from a throwaway clone of the generator (see module docs).
    pub fn instantiate(&self, f: &PropFormula, head: &Atom, args: &[Term]) -> PropFormula {
        let mut scratch = self.vargen.clone();
        let mut map: BTreeMap<Name, Term> = BTreeMap::new();
        for (v, t) in head.args.iter().zip(args) {
            if let Term::Var(v) = v {
                map.insert(v.clone(), t.clone());
            }
        }
        for v in f.vars() {
            map.entry(v).or_insert_with(|| Term::Var(scratch.fresh()));
        }
        f.subst(&map)
    }

    /// A formula trivially succeeds for a store when some disjunct has all
    /// its literals trivially succeeding: some answer of the literal's
    /// derivation is entailed by the store itself. Runs on a scratch machine
    /// so the main generator is untouched; a budget shortfall before finding
    /// a witness makes the result conservatively false and sets
    /// [`Machine::ts_incomplete`].
    pub fn trivially_succeeds(&mut self, f: &PropFormula, store: &Store) -> bool {
        // A clone of the current generator cannot re-issue a name already in
        // the store: generated store variables came from earlier, lower
        // counter values.
        let mut scratch = Machine {
            program: self.program,
            vargen: self.vargen.clone(),
            diagnostics: BTreeSet::new(),
            ts_incomplete: false,
        };
        let holds = scratch.ts_holds(f, store);
        self.ts_incomplete |= scratch.ts_incomplete;
        self.diagnostics.extend(scratch.diagnostics);
        holds
    }

    fn ts_holds(&mut self, f: &PropFormula, store: &Store) -> bool {
        'disjunct: for conj in &f.disjuncts {
            for lit in conj {
                if !self.ts_literal(lit, store) {
                    continue 'disjunct;
                }
            }
            return true;
        }
        false
    }

    fn ts_literal(&mut self, lit: &crate::assertions::PropLiteral, store: &Store) -> bool {
        let atom = lit.to_atom();
        let vars = atom.vars();
        let goal = vec![GoalItem::Lit(Literal::Atom(atom))];
        let mut found = false;
        {
            let store_ref = &store.clone();
            let vars_ref = &vars;
            let mut check = |ans: &Store| {
                if store_ref.entails(ans, vars_ref) {
                    found = true;
                    true
                } else {
                    false
                }
            };
            let res = self.derive_inner(
                goal,
                store.clone(),
                &vars,
                &TS_BUDGET,
                None,
                Some(&mut check),
            );
            if !found && !res.complete {
                self.ts_incomplete = true;
            }
        }
        found
    }
}

/// Assertion-condition bookkeeping used by the verifier and the CLI `run`
/// mode; thin wrapper so callers need not thread four arguments.
pub fn check_entry(
    program: &Program,
    conds: &ConditionSet,
    entry: &EntryDecl,
    budget: &Budget,
) -> (CheckedResult, Vec<String>, bool) {
    let mut m = Machine::new(program);
    let proj = entry.goal.vars();
    let res = m.derive_checked(
        vec![GoalItem::Lit(Literal::Atom(entry.goal.clone()))],
        Store::empty(),
        conds,
        &proj,
        budget,
    );
    let diags = m.diagnostics.into_iter().collect();
    (res, diags, m.ts_incomplete)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assertions::program_conditions;
    use crate::parser::parse_program;

    fn answers_of(src: &str, query: &str) -> Vec<String> {
        let program = parse_program(src).unwrap();
        let qp = parse_program(&format!("q_ :- {query}.")).unwrap();
        let rule = qp.rules_for(&PredKey::new("q_", 0)).next().unwrap().clone();
        let mut m = Machine::new(&program);
        let goal = goal_of_literals(&rule.body);
        let mut proj = BTreeSet::new();
        for l in &rule.body {
            proj.extend(l.vars());
        }
        let res = m.derive(goal, Store::empty(), &proj, &Budget::default());
        assert!(res.complete, "query should finish in budget");
        res.answers
            .iter()
            .map(|s| {
                s.bindings()
                    .map(|(v, t)| format!("{v}={}", pretty::term(t)))
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect()
    }

    #[test]
    fn clause_resolution_collects_all_answers() {
        let src = "p(a). p(b). q(X,Y) :- p(X), p(Y).";
        let mut ans = answers_of(src, "q(X,Y)");
        ans.sort();
        assert_eq!(ans, vec!["X=a,Y=a", "X=a,Y=b", "X=b,Y=a", "X=b,Y=b"]);
    }

    #[test]
    fn higher_order_call_goes_through_binding() {
        let src = "inc(X,Y) :- Y is X + 1. apply(P,X,Y) :- P(X,Y).";
        let ans = answers_of(src, "P = inc, apply(P, 3, Y)");
        assert_eq!(ans, vec!["P=inc,Y=4"]);
    }

    #[test]
    fn unbound_higher_order_call_has_no_successor() {
        let src = "apply(P,X,Y) :- P(X,Y). inc(X,Y) :- Y is X + 1.";
        let program = parse_program(src).unwrap();
        let mut m = Machine::new(&program);
        let goal = vec![GoalItem::Lit(Literal::HigherOrder("Q".into(), vec![Term::Int(1), Term::var("Y")]))];
        let res = m.derive(goal, Store::empty(), &BTreeSet::new(), &Budget::default());
        assert!(res.answers.is_empty());
        assert!(res.complete);
        assert!(m
            .diagnostics
            .iter()
            .any(|d| d.contains("unbound variable Q")));
    }

    #[test]
    fn builtin_type_tests_do_not_generate() {
        let ans = answers_of("p(X) :- nat(X).", "p(3)");
        assert_eq!(ans.len(), 1);
        let none = answers_of("p(X) :- nat(X).", "p(a)");
        assert!(none.is_empty());
        // Unbound: no successor rather than enumeration.
        let none = answers_of("p(X) :- nat(X).", "p(Z)");
        assert!(none.is_empty());
    }

    #[test]
    fn list_prelude_checks_parametrically() {
        let src = ":- regtype t/1. t := a | b.";
        assert_eq!(answers_of(src, "list(t, [a,b,a])").len(), 1);
        assert!(answers_of(src, "list(t, [a,c])").is_empty());
    }

    #[test]
    fn trivial_success_matches_entailment_semantics() {
        let src = "
            :- prop list1/1.
            list1(L) :- L = [].
            list1(L) :- L = [_|T], list1(T).
        ";
        let program = parse_program(src).unwrap();
        let mut m = Machine::new(&program);
        let f = |name: &str, arg: &str| {
            let p = parse_program(&format!("q_ :- {name}({arg}).")).unwrap();
            let r = p.rules_for(&PredKey::new("q_", 0)).next().unwrap().clone();
            match &r.body[0] {
                Literal::Atom(a) => crate::assertions::PropLiteral {
                    pred: a.pred.clone(),
                    args: a.args.clone(),
                },
                _ => unreachable!(),
            }
        };
        let lit = f("list1", "L");
        let formula = PropFormula::single(vec![lit]);
        // L = [1,X]: trivially succeeds (the answer [_,_] is entailed).
        let mut s1 = Store::empty();
        assert!(s1.unify_mut(
            &Term::var("L"),
            &Term::Compound(
                ".".into(),
                vec![
                    Term::Int(1),
                    Term::Compound(".".into(), vec![Term::var("X"), Term::atom("[]")]),
                ],
            ),
        ));
        assert!(m.trivially_succeeds(&formula, &s1));
        // L = [1|M]: does not (every list answer constrains M).
        let mut s2 = Store::empty();
        assert!(s2.unify_mut(
            &Term::var("L"),
            &Term::Compound(".".into(), vec![Term::Int(1), Term::var("M")]),
        ));
        assert!(!m.trivially_succeeds(&formula, &s2));
        // Unbound L: not trivially successful either.
        assert!(!m.trivially_succeeds(&formula, &Store::empty()));
    }

    #[test]
    fn calls_violation_yields_single_error_state() {
        let src = "
            :- pred p(X) : nat(X).
            p(X) :- X = X.
            q :- p(a).
            r :- p(3).
        ";
        let program = parse_program(src).unwrap();
        let conds = program_conditions(&program);
        let mut m = Machine::new(&program);
        let bad = m.derive_checked(
            vec![GoalItem::Lit(Literal::Atom(Atom::new("q", vec![])))],
            Store::empty(),
            &conds,
            &BTreeSet::new(),
            &Budget::default(),
        );
        assert!(bad.answers.is_empty());
        assert_eq!(bad.violations.len(), 1);
        assert!(!m.ts_incomplete);
        let good = m.derive_checked(
            vec![GoalItem::Lit(Literal::Atom(Atom::new("r", vec![])))],
            Store::empty(),
            &conds,
            &BTreeSet::new(),
            &Budget::default(),
        );
        assert_eq!(good.answers.len(), 1);
        assert!(good.violations.is_empty());
    }

    #[test]
    fn success_violation_detected_on_exit() {
        let src = "
            :- pred f(X,Y) : nat(X) => nat(Y).
            f(X,Y) :- Y = a.
        ";
        let program = parse_program(src).unwrap();
        let conds = program_conditions(&program);
        let mut m = Machine::new(&program);
        let res = m.derive_checked(
            vec![GoalItem::Lit(Literal::Atom(Atom::new(
                "f",
                vec![Term::Int(1), Term::var("Y")],
            )))],
            Store::empty(),
            &conds,
            &["Y".to_string()].into_iter().collect(),
            &Budget::default(),
        );
        assert!(res.answers.is_empty());
        assert_eq!(res.violations.len(), 1);
        // The violated condition is the success condition (second label).
        let label = res.violations[0].label;
        let cond = conds.by_label(label).unwrap();
        assert!(!cond.is_calls());
    }

    #[test]
    fn success_check_skipped_when_its_pre_did_not_hold() {
        // Success condition applies only to calls whose pre held.
        let src = "
            :- pred f(X,Y) : nat(X) => nat(Y).
            f(X,Y) :- Y = a.
        ";
        let program = parse_program(src).unwrap();
        let conds = program_conditions(&program);
        let mut m = Machine::new(&program);
        // Call with X = a: the calls condition itself is violated first.
        let res = m.derive_checked(
            vec![GoalItem::Lit(Literal::Atom(Atom::new(
                "f",
                vec![Term::atom("a"), Term::var("Y")],
            )))],
            Store::empty(),
            &conds,
            &BTreeSet::new(),
            &Budget::default(),
        );
        assert_eq!(res.violations.len(), 1);
        let cond = conds.by_label(res.violations[0].label).unwrap();
        assert!(cond.is_calls());
    }

    #[test]
    fn observation_records_calls_and_successes() {
        let src = "p(a). q(X) :- p(X).";
        let program = parse_program(src).unwrap();
        let mut m = Machine::new(&program);
        let mut obs = Observed::default();
        let res = m.derive_observed(
            vec![GoalItem::Lit(Literal::Atom(Atom::new("q", vec![Term::var("X")])))],
            Store::empty(),
            &["X".to_string()].into_iter().collect(),
            &Budget::default(),
            &mut obs,
        );
        assert_eq!(res.answers.len(), 1);
        assert_eq!(obs.calls.iter().filter(|a| a.pred == "q").count(), 1);
        assert_eq!(obs.calls.iter().filter(|a| a.pred == "p").count(), 1);
        // Successes resolved: q(a), p(a).
        assert!(obs.successes.iter().any(|a| a.pred == "q" && a.args == vec![Term::atom("a")]));
    }

    #[test]
    fn take_behaves_as_specified() {
        let src = "
            take(N,Xs,Ys) :- N = 0, Ys = [].
            take(N,Xs,Ys) :- 0 < N, Xs = [X|Xs1], M is N - 1, take(M,Xs1,Ys1), Ys = [X|Ys1].
        ";
        let ans = answers_of(src, "take(2, [a,b,c], Ys)");
        assert_eq!(ans, vec!["Ys=[a,b]"]);
        assert!(answers_of(src, "take(5, [a], Ys)").is_empty());
    }
}
