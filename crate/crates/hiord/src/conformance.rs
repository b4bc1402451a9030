//! Abstract conformance of predicates to predicate properties.
//!
//! A predicate conforms to a property when adding the property's assertion
//! conditions to its own can never introduce a new run-time error. Deciding
//! that exactly would need every derivation of every query, so this module
//! compares two-sided abstractions of the condition formulas instead: the
//! strong criterion proves conformance (Yes), its dual on the
//! over-approximating side disproves it (No), and everything in between
//! stays Maybe. A No is only reported once a concrete counterexample query
//! has been found and replayed through the redundance oracle, so every No
//! carries a witness.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::analysis;
pub use crate::assertions::make_wrapper;
use crate::assertions::{
    assertion_conditions, AssertionCondition, ConditionKind, ConditionSet,
    PredicateProperty,
};
use crate::domain::{triv_sub, triv_sup, AbsEnv, Ctx, Unresolved, Val};
use crate::engine::{Budget, GoalItem, Machine};
use crate::oracle::{check_redundance, OracleBudget, Redundance, Witness};
use crate::store::Store;
use crate::syntax::{
    Atom, Constraint, Label, Literal, Name, PredKey, Program, Rule, Span, Term,
};

// ---------------------------------------------------------------- verdicts --

/// Three-valued conformance result.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum TriState {
    Yes,
    No,
    Maybe,
}

impl TriState {
    /// Proven to conform.
    pub fn strong(self) -> bool {
        self == TriState::Yes
    }

    /// Not disproven.
    pub fn weak(self) -> bool {
        self != TriState::No
    }
}

impl fmt::Display for TriState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TriState::Yes => "yes",
            TriState::No => "no",
            TriState::Maybe => "maybe",
        })
    }
}

/// Where the compared conditions of a predicate came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    User,
    Inferred,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::User => "user",
            Provenance::Inferred => "inferred",
        })
    }
}

// radix for positional environments: formulas talk about the head variables
// of their condition, comparisons happen over `$i` parameters.

/// Two-sided abstraction of a calls pre-condition over positional
/// parameters.
#[derive(Clone, Debug)]
pub struct AbsCalls {
    pub pre_sub: AbsEnv,
    pub pre_sup: AbsEnv,
}

impl AbsCalls {
    /// A missing calls condition restricts nothing.
    fn unrestricted() -> AbsCalls {
        AbsCalls { pre_sub: AbsEnv::top(), pre_sup: AbsEnv::top() }
    }
}

/// Two-sided abstraction of one success condition over positional
/// parameters.
#[derive(Clone, Debug)]
pub struct AbsSuccess {
    /// Source condition label; `None` for inferred conditions.
    pub label: Option<Label>,
    pub pre_sub: AbsEnv,
    pub pre_sup: AbsEnv,
    pub post_sub: AbsEnv,
    pub post_sup: AbsEnv,
}

/// A predicate's assertion conditions in the abstract domain.
#[derive(Clone, Debug)]
pub struct AbsConditions {
    pub pred: PredKey,
    pub provenance: Provenance,
    /// `None` when nothing restricts the predicate's calls.
    pub calls: Option<AbsCalls>,
    pub successes: Vec<AbsSuccess>,
}

pub(crate) fn positional_map(head: &Atom) -> BTreeMap<Name, Name> {
    head.args
        .iter()
        .enumerate()
        .filter_map(|(i, t)| match t {
            Term::Var(v) => Some((v.clone(), analysis::param(i))),
            _ => None,
        })
        .collect()
}

fn abs_of_conditions<'a>(
    ctx: &Ctx,
    conds: impl Iterator<Item = &'a AssertionCondition>,
) -> Result<(Option<AbsCalls>, Vec<AbsSuccess>), Unresolved> {
    let mut calls = None;
    let mut successes = Vec::new();
    for c in conds {
        let open = c.head.vars();
        let map = positional_map(&c.head);
        match &c.kind {
            ConditionKind::Calls { pre } => {
                calls = Some(AbsCalls {
                    pre_sub: triv_sub(ctx, pre, &open)?.rename(&map),
                    pre_sup: triv_sup(ctx, pre, &open)?.rename(&map),
                });
            }
            ConditionKind::Success { pre, post } => {
                successes.push(AbsSuccess {
                    label: Some(c.label),
                    pre_sub: triv_sub(ctx, pre, &open)?.rename(&map),
                    pre_sup: triv_sup(ctx, pre, &open)?.rename(&map),
                    post_sub: triv_sub(ctx, post, &open)?.rename(&map),
                    post_sup: triv_sup(ctx, post, &open)?.rename(&map),
                });
            }
        }
    }
    Ok((calls, successes))
}

/// A predicate's conditions in the abstract domain: the user's assertions
/// when present, otherwise inferred ones. Inference emits a calls
/// description taken from the clause-head shapes (No direction only) and
/// two success conditions, one under those shapes and one under
/// unrestricted calls; both posts come from the analysis and are sound for
/// their respective pre, so the conformance checks below may pick
/// whichever side is sharper.
pub fn abs_conditions(
    program: &Program,
    ctx: &Ctx,
    conds: &ConditionSet,
    p: &PredKey,
) -> Result<AbsConditions, Unresolved> {
    let user: Vec<&AssertionCondition> = conds.for_pred(p).collect();
    if !user.is_empty() {
        let (calls, successes) = abs_of_conditions(ctx, user.into_iter())?;
        return Ok(AbsConditions {
            pred: p.clone(),
            provenance: Provenance::User,
            calls,
            successes,
        });
    }
    let (shape, post_shape, _) = analysis::infer_condition(program, ctx, p);
    let mut successes = vec![AbsSuccess {
        label: None,
        pre_sub: shape.clone(),
        pre_sup: shape.clone(),
        post_sub: AbsEnv::bot(),
        post_sup: post_shape,
    }];
    if !shape.is_top() {
        let args: Vec<Term> =
            (0..p.arity).map(|i| Term::Var(analysis::param(i))).collect();
        let atom = Atom { pred: p.name.clone(), args };
        let res = analysis::analyze(program, ctx, &[(atom, AbsEnv::top())]);
        successes.push(AbsSuccess {
            label: None,
            pre_sub: AbsEnv::top(),
            pre_sup: AbsEnv::top(),
            post_sub: AbsEnv::bot(),
            post_sup: res.success_env(p, ctx),
        });
    }
    // The shape doubles as an inferred calls description. It only ever
    // argues in the No direction (see conf_calls): the original program has
    // no calls check for this predicate, so claiming Yes would promise an
    // error behavior the program cannot exhibit.
    Ok(AbsConditions {
        pred: p.clone(),
        provenance: Provenance::Inferred,
        calls: Some(AbsCalls { pre_sub: shape.clone(), pre_sup: shape }),
        successes,
    })
}

/// The anonymous conditions of a property in the abstract domain.
pub fn abs_anon_conditions(
    ctx: &Ctx,
    property: &PredicateProperty,
) -> Result<(AbsCalls, Vec<AbsSuccess>), Unresolved> {
    let mut next = 0;
    let conds = assertion_conditions(&property.assertions, &mut next);
    let (calls, successes) = abs_of_conditions(ctx, conds.iter())?;
    Ok((calls.expect("conditions always lead with a calls condition"), successes))
}

// ------------------------------------------------------------ per condition --

/// Conformance of a predicate's calls pre-condition to the property's:
/// Yes when each pre is bounded by the other (they describe the same
/// calls), No when they are disjoint even in the over-approximation,
/// Maybe otherwise.
pub fn conf_calls(cand: &AbsConditions, anon: &AbsCalls, ctx: &Ctx) -> TriState {
    let unrestricted = AbsCalls::unrestricted();
    let c = cand.calls.as_ref().unwrap_or(&unrestricted);
    // An inferred calls description never argues Yes: without a declared
    // check the strengthened program errors on calls the original silently
    // fails, no matter how well the shapes line up.
    if cand.provenance == Provenance::User
        && c.pre_sup.leq(&anon.pre_sub, ctx)
        && anon.pre_sup.leq(&c.pre_sub, ctx)
    {
        TriState::Yes
    } else if c.pre_sup.meet(&anon.pre_sup, ctx).is_bot() {
        TriState::No
    } else {
        TriState::Maybe
    }
}

/// Conformance of a predicate's success conditions to one anonymous
/// success condition. Yes when some non-empty subset of the predicate's
/// conditions covers every call the property admits (exact join of the
/// under-approximated pres) while keeping every post inside the
/// property's; No when one condition applies to all of the property's
/// calls, its post is disjoint from the property's even over-approximated,
/// and a concrete call inside the condition's pre is seen to succeed.
/// Maybe otherwise, including when that success witness search comes back
/// empty-handed.
pub fn conf_success(
    program: &Program,
    ctx: &Ctx,
    conds: &ConditionSet,
    cand: &AbsConditions,
    anon: &AbsSuccess,
    budget: &Budget,
) -> TriState {
    // Subsets in mask order, so the first hit is deterministic.
    let n = cand.successes.len().min(16);
    for mask in 1u32..(1u32 << n) {
        let mut pre = AbsEnv::bot();
        let mut post = AbsEnv::bot();
        for (i, s) in cand.successes.iter().take(n).enumerate() {
            if mask & (1 << i) != 0 {
                pre = pre.join_under(&s.pre_sub, ctx);
                post = post.join(&s.post_sup, ctx).0;
            }
        }
        if anon.pre_sup.leq(&pre, ctx) && post.leq(&anon.post_sub, ctx) {
            return TriState::Yes;
        }
    }
    for s in &cand.successes {
        if s.pre_sup.leq(&anon.pre_sub, ctx)
            && s.post_sup.meet(&anon.post_sup, ctx).is_bot()
            && success_witnessed(program, ctx, conds, &cand.pred, &s.pre_sub, budget)
        {
            return TriState::No;
        }
    }
    TriState::Maybe
}

/// Bounded search for one call inside `pre_sub` whose success context under
/// the predicate's own conditions is non-empty. Enumerating from the
/// under-approximation keeps every candidate store inside the condition's
/// trivial success set by construction.
fn success_witnessed(
    program: &Program,
    ctx: &Ctx,
    conds: &ConditionSet,
    p: &PredKey,
    pre_sub: &AbsEnv,
    budget: &Budget,
) -> bool {
    let mut machine = Machine::new(program);
    for q in queries_from_env(program, ctx, p, pre_sub, 3, 16) {
        let r = machine.success_context(&q, &Store::empty(), conds, budget);
        if !r.answers.is_empty() {
            return true;
        }
    }
    false
}

// ------------------------------------------------------------- enumeration --

/// Small ground inhabitants of an abstract value. Types enumerate directly,
/// property sets contribute their predicate names as constants, and named
/// lattice elements are probed concretely: a term inhabits the element when
/// the unary predicate of the same name (user-defined or built-in) derives
/// on it.
pub fn sample_terms(
    program: &Program,
    ctx: &Ctx,
    val: &Val,
    depth: usize,
) -> Vec<Term> {
    match val {
        Val::Type(t) => t.enumerate(depth),
        Val::Props { preds, .. } => preds.iter().map(|p| Term::atom(p)).collect(),
        Val::Lat(e) => {
            let Some(lat) = &ctx.lattice else { return Vec::new() };
            if *e == lat.bot {
                return Vec::new();
            }
            let universe = [
                Term::Int(0),
                Term::Int(1),
                Term::Int(2),
                Term::Int(-1),
                Term::Int(-2),
                Term::atom("a"),
                Term::atom("b"),
                Term::atom("c"),
            ];
            if *e == lat.top {
                return universe.to_vec();
            }
            let name = lat.name(*e).clone();
            let probe = Budget { max_depth: 60, max_states: 2_000 };
            let mut machine = Machine::new(program);
            universe
                .into_iter()
                .filter(|t| {
                    let goal = vec![GoalItem::Lit(Literal::Atom(Atom {
                        pred: name.clone(),
                        args: vec![t.clone()],
                    }))];
                    let r =
                        machine.derive(goal, Store::empty(), &BTreeSet::new(), &probe);
                    !r.answers.is_empty()
                })
                .collect()
        }
    }
}

/// Queries to `p` drawn from an abstract call description: constrained
/// positions run over small members of their value, unconstrained positions
/// stay fresh variables. Empty when some constrained position has no known
/// inhabitant.
pub fn queries_from_env(
    program: &Program,
    ctx: &Ctx,
    p: &PredKey,
    env: &AbsEnv,
    depth: usize,
    cap: usize,
) -> Vec<Atom> {
    if env.is_bot() {
        return Vec::new();
    }
    let mut tuples: Vec<Vec<Term>> = vec![Vec::new()];
    for i in 0..p.arity {
        let col = match env.get(&analysis::param(i)) {
            None => vec![Term::Var(format!("_W{i}"))],
            Some(val) => {
                let mut s = sample_terms(program, ctx, val, depth);
                s.truncate(8);
                if s.is_empty() {
                    return Vec::new();
                }
                s
            }
        };
        let mut next = Vec::new();
        'fill: for t in &tuples {
            for u in &col {
                let mut t = t.clone();
                t.push(u.clone());
                next.push(t);
                if next.len() >= cap {
                    break 'fill;
                }
            }
        }
        tuples = next;
    }
    tuples
        .into_iter()
        .map(|args| Atom { pred: p.name.clone(), args })
        .collect()
}

// ------------------------------------------------------------ per property --

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CondTag {
    Calls,
    Success,
}

impl fmt::Display for CondTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CondTag::Calls => "calls",
            CondTag::Success => "success",
        })
    }
}

/// One anonymous condition's comparison, rendered for reports.
#[derive(Clone, Debug)]
pub struct CondOutcome {
    pub tag: CondTag,
    pub verdict: TriState,
    pub detail: String,
}

/// Verdict of one predicate against one property.
#[derive(Clone, Debug)]
pub struct PropertyVerdict {
    pub pred: PredKey,
    pub property: Name,
    pub verdict: TriState,
    pub provenance: Provenance,
    pub conditions: Vec<CondOutcome>,
    /// Concrete counterexample; present exactly when the verdict is No.
    pub witness: Option<Witness>,
    pub notes: Vec<String>,
}

/// Conformance of one predicate to one property: Yes when every anonymous
/// condition conforms, No when some condition fails and a concrete
/// counterexample query replays through the redundance oracle (without one
/// the verdict degrades to Maybe), Maybe otherwise. `Err` names a property
/// referenced by some formula whose conformance sets are not known yet;
/// the caller is expected to retry after another fixpoint round.
pub fn conf_property(
    program: &Program,
    ctx: &Ctx,
    conds: &ConditionSet,
    p: &PredKey,
    property: &PredicateProperty,
    budget: &Budget,
    oracle: &OracleBudget,
) -> Result<PropertyVerdict, Unresolved> {
    assert_eq!(p.arity, property.arity, "candidates are filtered by arity");
    let cand = abs_conditions(program, ctx, conds, p)?;
    let (anon_calls, anon_successes) = abs_anon_conditions(ctx, property)?;

    let mut outcomes = Vec::new();
    {
        let unrestricted = AbsCalls::unrestricted();
        let c = cand.calls.as_ref().unwrap_or(&unrestricted);
        outcomes.push(CondOutcome {
            tag: CondTag::Calls,
            verdict: conf_calls(&cand, &anon_calls, ctx),
            detail: format!("pre {}", compare(&c.pre_sup, &anon_calls.pre_sup, ctx)),
        });
    }
    let pre_all = cand
        .successes
        .iter()
        .fold(AbsEnv::bot(), |acc, s| acc.join(&s.pre_sup, ctx).0);
    let post_all = cand
        .successes
        .iter()
        .fold(AbsEnv::bot(), |acc, s| acc.join(&s.post_sup, ctx).0);
    for anon in &anon_successes {
        outcomes.push(CondOutcome {
            tag: CondTag::Success,
            verdict: conf_success(program, ctx, conds, &cand, anon, budget),
            detail: format!(
                "pre {}; post {}",
                compare(&pre_all, &anon.pre_sup, ctx),
                compare(&post_all, &anon.post_sup, ctx),
            ),
        });
    }

    let mut notes = Vec::new();
    let mut witness = None;
    let verdict = if outcomes.iter().all(|o| o.verdict == TriState::Yes) {
        TriState::Yes
    } else if outcomes.iter().any(|o| o.verdict == TriState::No) {
        match disprove(
            program,
            ctx,
            conds,
            p,
            property,
            &cand,
            &anon_calls,
            &anon_successes,
            oracle,
        ) {
            Some(w) => {
                witness = Some(w);
                TriState::No
            }
            None => {
                notes.push(
                    "no concrete counterexample found within budget; \
                     verdict demoted to maybe"
                        .to_string(),
                );
                TriState::Maybe
            }
        }
    } else {
        TriState::Maybe
    };
    Ok(PropertyVerdict {
        pred: p.clone(),
        property: property.name.clone(),
        verdict,
        provenance: cand.provenance,
        conditions: outcomes,
        witness,
        notes,
    })
}

/// Replay candidate queries through the redundance oracle until one yields
/// a counterexample. Queries are drawn both from the property's admissible
/// calls and from the predicate's own: an error matched on one side can be
/// unmatched on the other.
#[allow(clippy::too_many_arguments)]
fn disprove(
    program: &Program,
    ctx: &Ctx,
    conds: &ConditionSet,
    p: &PredKey,
    property: &PredicateProperty,
    cand: &AbsConditions,
    anon_calls: &AbsCalls,
    anon_successes: &[AbsSuccess],
    oracle: &OracleBudget,
) -> Option<Witness> {
    let mut envs: Vec<&AbsEnv> = vec![&anon_calls.pre_sup];
    if let Some(c) = &cand.calls {
        envs.push(&c.pre_sup);
    }
    for s in &cand.successes {
        envs.push(&s.pre_sup);
    }
    for s in anon_successes {
        envs.push(&s.pre_sup);
    }
    let mut queries: Vec<Atom> = Vec::new();
    let mut seen = BTreeSet::new();
    for env in envs {
        for q in queries_from_env(program, ctx, p, env, 3, 32) {
            if seen.insert(q.clone()) {
                queries.push(q);
            }
        }
    }
    queries.truncate(64);
    for q in &queries {
        if let Redundance::NotRedundant(w) =
            check_redundance(program, conds, p, property, q, oracle)
        {
            return Some(w);
        }
    }
    None
}

/// Textual relation between two abstract values, for reports.
fn compare(a: &AbsEnv, b: &AbsEnv, ctx: &Ctx) -> String {
    let (l, r) = (a.render(ctx), b.render(ctx));
    match (a.leq(b, ctx), b.leq(a, ctx)) {
        (true, true) => format!("{l} = {r}"),
        (true, false) => format!("{l} =< {r}"),
        (false, true) => format!("{l} >= {r}"),
        (false, false) => {
            if a.meet(b, ctx).is_bot() {
                format!("{l} /\\ {r} = bot")
            } else {
                format!("{l} overlaps {r}")
            }
        }
    }
}

// ------------------------------------------------------------------- table --

/// All computed (predicate, property) verdicts with their per-condition
/// comparisons.
#[derive(Clone, Debug, Default)]
pub struct ConformanceTable {
    pub entries: Vec<PropertyVerdict>,
}

impl ConformanceTable {
    pub fn verdict(&self, p: &PredKey, property: &str) -> Option<TriState> {
        self.entries
            .iter()
            .find(|e| e.pred == *p && e.property == property)
            .map(|e| e.verdict)
    }

    /// Names of the predicates proven to conform to `property`.
    pub fn pi_minus(&self, property: &str) -> BTreeSet<Name> {
        self.entries
            .iter()
            .filter(|e| e.property == property && e.verdict.strong())
            .map(|e| e.pred.name.clone())
            .collect()
    }

    /// Names of the predicates not disproven to conform to `property`.
    pub fn pi_plus(&self, property: &str) -> BTreeSet<Name> {
        self.entries
            .iter()
            .filter(|e| e.property == property && e.verdict.weak())
            .map(|e| e.pred.name.clone())
            .collect()
    }

    pub fn properties(&self) -> BTreeSet<Name> {
        self.entries.iter().map(|e| e.property.clone()).collect()
    }

    /// One block per property, one line per predicate, with the compared
    /// values inline.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for prop in self.properties() {
            out.push_str(&format!("property {prop}\n"));
            for e in self.entries.iter().filter(|e| e.property == prop) {
                out.push_str(&format!(
                    "  {:<14} {:<6} ({})",
                    e.pred.to_string(),
                    e.verdict.to_string(),
                    e.provenance,
                ));
                for c in &e.conditions {
                    out.push_str(&format!("  [{} {}: {}]", c.tag, c.verdict, c.detail));
                }
                out.push('\n');
                if let Some(w) = &e.witness {
                    out.push_str(&format!(
                        "    counterexample {} at condition {}\n",
                        crate::syntax::pretty::atom(&w.query),
                        w.label,
                    ));
                }
                for n in &e.notes {
                    out.push_str(&format!("    note: {n}\n"));
                }
            }
        }
        out
    }
}

/// The first-order image of a property's verdicts: one unary fact per
/// conforming predicate, `<prop>_minus` for the proven ones and
/// `<prop>_plus` for those not disproven. The minus type is a subtype of
/// the plus type by construction. Rules are in normalized head form.
pub fn regtype_repr(
    property: &str,
    table: &ConformanceTable,
) -> (Vec<Rule>, Vec<Rule>) {
    let fact = |type_name: &str, pred: &Name| Rule {
        head: Atom {
            pred: type_name.to_string(),
            args: vec![Term::Var("V".to_string())],
        },
        body: vec![Literal::Constraint(Constraint::Eq(
            Term::Var("V".to_string()),
            Term::atom(pred),
        ))],
        span: Span::default(),
    };
    let minus_name = format!("{property}_minus");
    let plus_name = format!("{property}_plus");
    let minus = table
        .pi_minus(property)
        .iter()
        .map(|p| fact(&minus_name, p))
        .collect();
    let plus = table
        .pi_plus(property)
        .iter()
        .map(|p| fact(&plus_name, p))
        .collect();
    (minus, plus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assertions::program_conditions;
    use crate::domain::lattice::FiniteLattice;
    use crate::parser::parse_program;

    fn check(
        program: &Program,
        ctx: &Ctx,
        conds: &ConditionSet,
        pred: &str,
        arity: usize,
        property: &str,
    ) -> PropertyVerdict {
        conf_property(
            program,
            ctx,
            conds,
            &PredKey::new(pred, arity),
            &program.properties[property],
            &Budget::default(),
            &OracleBudget::default(),
        )
        .unwrap()
    }

    #[test]
    fn lattice_case_analysis_matches_the_worked_tables() {
        // Five candidates against nat -> nat, interpreted over an explicit
        // ordering of the unary checks. Expected per-condition verdicts:
        // calls [yes, no, maybe, maybe, maybe] and success
        // [yes, maybe, yes, maybe, maybe]; only n2n conforms outright and
        // only a2n is disproven.
        let src = "
            p_nat_nat := { :- pred _(X,Y) : nat(X) => nat(Y). }.

            :- pred n2n(X,Y) : nat(X) => nat(Y).
            n2n(X,Y) :- Y = X.
            :- pred a2n(X,Y) : atm(X) => nat(Y).
            a2n(X,Y) :- Y = 1.
            :- pred i2z(X,Y) : int(X) => zero(Y).
            i2z(X,Y) :- Y = 0.
            :- pred z2i(X,Y) : zero(X) => int(Y).
            z2i(X,Y) :- Y = X.
            :- pred nz2n(X,Y) : negz(X) => nat(Y).
            nz2n(X,Y) :- Y is 0 - X.

            zero(X) :- X = 0.
            negz(X) :- int(X), X =< 0.
        ";
        let program = parse_program(src).unwrap();
        let lat = FiniteLattice::parse(
            "lattice {
                elems: [bot, zero, nat, negz, int, atm, top];
                edges: [bot < zero, bot < atm, zero < nat, zero < negz,
                        nat < int, negz < int, int < top, atm < top];
            }",
        )
        .unwrap();
        let ctx = Ctx::with_lattice(&program, lat);
        let conds = program_conditions(&program);

        let expect = [
            ("n2n", TriState::Yes, TriState::Yes, TriState::Yes),
            ("a2n", TriState::No, TriState::Maybe, TriState::No),
            ("i2z", TriState::Maybe, TriState::Yes, TriState::Maybe),
            ("z2i", TriState::Maybe, TriState::Maybe, TriState::Maybe),
            ("nz2n", TriState::Maybe, TriState::Maybe, TriState::Maybe),
        ];
        let mut table = ConformanceTable::default();
        for (pred, on_calls, on_success, overall) in expect {
            let v = check(&program, &ctx, &conds, pred, 2, "p_nat_nat");
            assert_eq!(v.conditions[0].verdict, on_calls, "{pred} calls");
            assert_eq!(v.conditions[1].verdict, on_success, "{pred} success");
            assert_eq!(v.verdict, overall, "{pred} overall");
            assert_eq!(v.witness.is_some(), overall == TriState::No, "{pred}");
            table.entries.push(v);
        }
        let minus: Vec<String> = table.pi_minus("p_nat_nat").into_iter().collect();
        assert_eq!(minus, ["n2n"]);
        let plus: Vec<String> = table.pi_plus("p_nat_nat").into_iter().collect();
        assert_eq!(plus, ["i2z", "n2n", "nz2n", "z2i"]);
        let (minus_rules, plus_rules) = regtype_repr("p_nat_nat", &table);
        assert_eq!(minus_rules.len(), 1);
        assert_eq!(plus_rules.len(), 4);
        assert_eq!(minus_rules[0].head.pred, "p_nat_nat_minus");
    }

    #[test]
    fn disproof_carries_a_replayable_counterexample() {
        // The post is disjoint from the property's and the pre applies to
        // every admissible call, so the strengthened conditions err where
        // the original ones stay clean.
        let src = "
            p_nat_nat := { :- pred _(X,Y) : nat(X) => nat(Y). }.
            :- pred n2a(X,Y) : nat(X) => atm(Y).
            n2a(X,Y) :- Y = a.
        ";
        let program = parse_program(src).unwrap();
        let ctx = Ctx::new(&program);
        let conds = program_conditions(&program);
        let v = check(&program, &ctx, &conds, "n2a", 2, "p_nat_nat");
        assert_eq!(v.conditions[0].verdict, TriState::Yes);
        assert_eq!(v.conditions[1].verdict, TriState::No);
        assert_eq!(v.verdict, TriState::No);
        let w = v.witness.expect("a No verdict must carry a witness");
        let again = check_redundance(
            &program,
            &conds,
            &PredKey::new("n2a", 2),
            &program.properties["p_nat_nat"],
            &w.query,
            &OracleBudget::default(),
        );
        assert!(matches!(again, Redundance::NotRedundant(_)));
    }

    #[test]
    fn subset_of_conditions_covers_the_property_pre() {
        // Neither assertion alone covers all three colors, but their pres
        // union exactly, so the pair proves the success condition.
        let src = "
            :- regtype rb/1.
            rb := r | b.
            :- regtype g1/1.
            g1 := g.
            :- regtype rbg/1.
            rbg := r | b | g.
            p_col := { :- pred _(X,Y) : rbg(X) => rbg(Y). }.
            :- pred paint(X,Y) : rb(X) => rbg(Y).
            :- pred paint(X,Y) : g1(X) => rbg(Y).
            paint(X,Y) :- Y = X.
        ";
        let program = parse_program(src).unwrap();
        let ctx = Ctx::new(&program);
        let conds = program_conditions(&program);
        let v = check(&program, &ctx, &conds, "paint", 2, "p_col");
        assert_eq!(v.verdict, TriState::Yes);

        // Dropping one assertion loses the cover.
        let narrower = "
            :- regtype rb/1.
            rb := r | b.
            :- regtype rbg/1.
            rbg := r | b | g.
            p_col := { :- pred _(X,Y) : rbg(X) => rbg(Y). }.
            :- pred paint(X,Y) : rb(X) => rbg(Y).
            paint(X,Y) :- Y = X.
        ";
        let program = parse_program(narrower).unwrap();
        let ctx = Ctx::new(&program);
        let conds = program_conditions(&program);
        let v = check(&program, &ctx, &conds, "paint", 2, "p_col");
        assert_eq!(v.conditions[1].verdict, TriState::Maybe);
    }

    #[test]
    fn nested_property_literals_wait_for_their_tables() {
        let src = "
            p_nat := { :- pred _(X) : nat(X). }.
            q_prop := { :- pred _(F) : p_nat(F). }.
            :- pred useq(F) : p_nat(F).
            useq(F) :- F(1).
        ";
        let program = parse_program(src).unwrap();
        let mut ctx = Ctx::new(&program);
        let conds = program_conditions(&program);
        let key = PredKey::new("useq", 1);
        let err = conf_property(
            &program,
            &ctx,
            &conds,
            &key,
            &program.properties["q_prop"],
            &Budget::default(),
            &OracleBudget::default(),
        )
        .unwrap_err();
        assert_eq!(err.prop, "p_nat");

        // Once the referenced property has tables, the identical literal on
        // both sides makes the comparison exact regardless of their content.
        ctx.pi_minus.insert("p_nat".to_string(), BTreeSet::new());
        ctx.pi_plus.insert("p_nat".to_string(), BTreeSet::new());
        let v = conf_property(
            &program,
            &ctx,
            &conds,
            &key,
            &program.properties["q_prop"],
            &Budget::default(),
            &OracleBudget::default(),
        )
        .unwrap();
        assert_eq!(v.conditions[0].verdict, TriState::Yes);
    }

    #[test]
    fn wrapper_conditions_match_the_property_syntactically() {
        // even/1 accepts any integer, so it only maybe-conforms; its
        // wrapper narrows the calls to the property's own pre and conforms.
        let src = "
            p_nat := { :- pred _(N) : nat(N). }.
            :- pred even(N) : int(N).
            even(N) :- integer(N), 0 is N mod 2.
            :- wrap even/1 with p_nat as even_nat.
        ";
        let program = parse_program(src).unwrap();
        let ctx = Ctx::new(&program);
        let conds = program_conditions(&program);
        let even = check(&program, &ctx, &conds, "even", 1, "p_nat");
        assert_eq!(even.verdict, TriState::Maybe);
        let wrapped = check(&program, &ctx, &conds, "even_nat", 1, "p_nat");
        assert_eq!(wrapped.conditions[0].verdict, TriState::Yes);
        assert_eq!(wrapped.verdict, TriState::Yes);
    }

    #[test]
    fn inferred_conditions_come_from_the_clauses() {
        // No assertions anywhere: the shapes and analyzed successes stand
        // in. doubles maps nats to nats; stash always returns the atom a.
        let src = "
            p_nat_nat := { :- pred _(X,Y) : nat(X) => nat(Y). }.
            doubles(X,Y) :- nat(X), Y is X + X.
            stash(X,Y) :- nat(X), Y = a.
        ";
        let program = parse_program(src).unwrap();
        let ctx = Ctx::new(&program);
        let conds = program_conditions(&program);

        // Inferred calls shapes never prove the calls side outright; the
        // success side of doubles is still provable from the analyzed
        // posts, while stash is disproven because its only success shape
        // is disjoint from the property's post.
        let d = check(&program, &ctx, &conds, "doubles", 2, "p_nat_nat");
        assert_eq!(d.provenance, Provenance::Inferred);
        assert_eq!(d.conditions[0].verdict, TriState::Maybe);
        assert_eq!(d.conditions[1].verdict, TriState::Yes);
        assert_eq!(d.verdict, TriState::Maybe);

        let s = check(&program, &ctx, &conds, "stash", 2, "p_nat_nat");
        assert_eq!(s.conditions[1].verdict, TriState::No);
        assert_eq!(s.verdict, TriState::No);
        assert!(s.witness.is_some());
    }
}
