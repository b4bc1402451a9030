//! Whole-program verification: a fixpoint over predicate properties that
//! grows the sets of strongly and weakly conforming predicates, materializes
//! them as regular-type facts, and then checks every user assertion
//! first-order against the analysis of the augmented program.
//!
//! The loop recomputes conformance from scratch each round against the
//! tables of the previous round, so nested property references resolve one
//! level per iteration and the generated rule set only ever grows.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::analysis::{self, AnalysisResult};
use crate::assertions::{
    program_conditions, AssertionCondition, ConditionKind, ConditionSet,
    PropFormula,
};
use crate::conformance::{
    conf_property, positional_map, regtype_repr, ConformanceTable,
};
use crate::domain::lattice::FiniteLattice;
use crate::domain::{triv_sub, triv_sup, AbsEnv, Ctx, Role, Val};
use crate::engine::Budget;
use crate::oracle::OracleBudget;
use crate::syntax::{Atom, EntryDecl, Label, Name, PredKey, Program, Rule, Span};

// ----------------------------------------------------------------- results --

/// Status of one assertion condition after checking.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    /// Proven to hold for every admissible derivation.
    Checked,
    /// Proven violated on a reachable pattern.
    False,
    /// Neither proven nor disproven; a run-time check remains.
    Check,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Checked => "checked",
            Status::False => "false",
            Status::Check => "check",
        })
    }
}

/// One analyzed call or success pattern of the condition's predicate, with
/// its own classification. The verdict aggregates over patterns; these keep
/// the per-pattern detail for diagnostics.
#[derive(Clone, Debug)]
pub struct SiteDiag {
    pub env: String,
    pub status: Status,
    pub note: Option<String>,
}

/// Verdict for one assertion condition.
#[derive(Clone, Debug)]
pub struct Verdict {
    pub pred: PredKey,
    pub label: Label,
    pub kind: &'static str,
    pub status: Status,
    /// Compared abstract values and, for false, the emptiness certificate.
    pub reason: String,
    pub span: Span,
    pub sites: Vec<SiteDiag>,
}

/// Everything a verification run produces.
#[derive(Clone, Debug)]
pub struct VerifyOutcome {
    pub verdicts: Vec<Verdict>,
    pub conformance: ConformanceTable,
    /// Generated regular-type facts for every property, in emission order.
    pub generated: Vec<Rule>,
    pub analysis: AnalysisResult,
    /// Entry calls the analysis started from.
    pub entries: Vec<(Atom, AbsEnv)>,
    pub warnings: Vec<String>,
    /// Fixpoint rounds executed (a stable round is counted).
    pub iterations: usize,
    /// Round at which each (property, predicate) pair entered the strongly
    /// conforming set.
    pub strong_at: BTreeMap<(Name, Name), usize>,
    /// Final conforming-set tables, keyed by property.
    pub pi_minus: BTreeMap<Name, BTreeSet<Name>>,
    pub pi_plus: BTreeMap<Name, BTreeSet<Name>>,
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    /// Fixpoint round cap; properties still unresolved at the cap are
    /// treated as unrestricted.
    pub max_iterations: usize,
    pub budget: Budget,
    pub oracle: OracleBudget,
}

impl Default for VerifyOptions {
    fn default() -> VerifyOptions {
        VerifyOptions {
            max_iterations: 16,
            budget: Budget::default(),
            oracle: OracleBudget::default(),
        }
    }
}

/// Exit code of a verdict set: 1 when anything is false, 2 when anything
/// remains to check, 0 when all checked.
pub fn exit_code(verdicts: &[Verdict]) -> i32 {
    if verdicts.iter().any(|v| v.status == Status::False) {
        1
    } else if verdicts.iter().any(|v| v.status == Status::Check) {
        2
    } else {
        0
    }
}

// ------------------------------------------------------------ augmentation --

fn pi_fact(type_name: &str, pred: &str) -> Rule {
    use crate::syntax::{Constraint, Literal, Term};
    Rule {
        head: Atom {
            pred: type_name.to_string(),
            args: vec![Term::Var("V".to_string())],
        },
        body: vec![Literal::Constraint(Constraint::Eq(
            Term::Var("V".to_string()),
            Term::atom(pred),
        ))],
        span: Span::default(),
    }
}

type PiTables = BTreeMap<Name, BTreeSet<Name>>;

/// The program plus one `<prop>_minus` / `<prop>_plus` fact per table
/// entry. The generated predicates are registered as regular types so they
/// never become conformance candidates themselves.
fn augmented(program: &Program, minus: &PiTables, plus: &PiTables) -> Program {
    let mut aug = program.clone();
    for (tables, suffix) in [(minus, "_minus"), (plus, "_plus")] {
        for (prop, preds) in tables.iter() {
            let type_name = format!("{prop}{suffix}");
            aug.regtypes.insert(PredKey::new(&type_name, 1));
            for p in preds {
                aug.push_rule(pi_fact(&type_name, p));
            }
        }
    }
    aug
}

fn make_ctx(
    aug: &Program,
    lattice: &Option<FiniteLattice>,
    minus: &PiTables,
    plus: &PiTables,
) -> Ctx {
    let mut ctx = match lattice {
        Some(l) => Ctx::with_lattice(aug, l.clone()),
        None => Ctx::new(aug),
    };
    ctx.pi_minus = minus.clone();
    ctx.pi_plus = plus.clone();
    ctx
}

/// Predicates eligible for conformance against a property of this arity:
/// every defined predicate that is not itself a property carrier or a
/// regular type.
fn candidates(program: &Program, arity: usize) -> Vec<PredKey> {
    program
        .defined_preds()
        .into_iter()
        .filter(|k| k.arity == arity && !program.is_prop_or_regtype(k))
        .collect()
}

// ---------------------------------------------------------------- fixpoint --

/// Verify a program: run the conformance fixpoint over all predicate
/// properties, augment with the generated types, analyze from the entry
/// queries, and check every user assertion condition against the result.
pub fn hiord_verify(
    program: &Program,
    lattice: Option<FiniteLattice>,
    extra_entries: &[EntryDecl],
    opts: &VerifyOptions,
) -> VerifyOutcome {
    let conds = program_conditions(program);
    let mut warnings: Vec<String> = program.warnings.clone();
    let mut minus: PiTables = BTreeMap::new();
    let mut plus: PiTables = BTreeMap::new();
    let mut table = ConformanceTable::default();
    let mut strong_at: BTreeMap<(Name, Name), usize> = BTreeMap::new();
    let mut iterations = 0;

    loop {
        iterations += 1;
        let aug = augmented(program, &minus, &plus);
        let ctx = make_ctx(&aug, &lattice, &minus, &plus);
        let mut next_minus = minus.clone();
        let mut next_plus = plus.clone();
        let mut round_entries = Vec::new();
        let mut pending: BTreeSet<Name> = BTreeSet::new();

        for prop_name in &program.property_order {
            let property = &program.properties[prop_name];
            let em = next_minus.entry(prop_name.clone()).or_default();
            let ep = next_plus.entry(prop_name.clone()).or_default();
            for p in candidates(program, property.arity) {
                match conf_property(
                    &aug,
                    &ctx,
                    &conds,
                    &p,
                    property,
                    &opts.budget,
                    &opts.oracle,
                ) {
                    Ok(v) => {
                        if v.verdict.strong() {
                            em.insert(p.name.clone());
                            strong_at
                                .entry((prop_name.clone(), p.name.clone()))
                                .or_insert(iterations);
                        }
                        if v.verdict.weak() {
                            ep.insert(p.name.clone());
                        }
                        round_entries.push(v);
                    }
                    Err(u) => {
                        pending.insert(u.prop.clone());
                    }
                }
            }
        }
        // Latest verdict wins per pair; pairs that stayed unresolved this
        // round keep their previous entry.
        for v in round_entries {
            match table
                .entries
                .iter_mut()
                .find(|e| e.pred == v.pred && e.property == v.property)
            {
                Some(slot) => *slot = v,
                None => table.entries.push(v),
            }
        }
        let stable = next_minus == minus && next_plus == plus;
        minus = next_minus;
        plus = next_plus;
        if stable && pending.is_empty() {
            break;
        }
        if iterations >= opts.max_iterations {
            // Whatever is still unresolved stays unrestricted: its literals
            // prove nothing and disprove nothing below.
            if stable || !pending.is_empty() {
                warnings.push(format!(
                    "conformance fixpoint stopped after {iterations} rounds \
                     with unresolved properties [{}]; they are treated as \
                     unrestricted",
                    pending.iter().cloned().collect::<Vec<_>>().join(", "),
                ));
            }
            break;
        }
        if stable {
            // Only pendings remain and the tables cannot move: circular
            // property references.
            warnings.push(format!(
                "properties [{}] reference each other circularly; they are \
                 treated as unrestricted",
                pending.iter().cloned().collect::<Vec<_>>().join(", "),
            ));
            break;
        }
    }

    let aug = augmented(program, &minus, &plus);
    let ctx = make_ctx(&aug, &lattice, &minus, &plus);
    let mut generated = Vec::new();
    for prop_name in &program.property_order {
        let (m, p) = regtype_repr(prop_name, &table);
        generated.extend(m);
        generated.extend(p);
    }

    let (entries, mut entry_warnings) =
        entry_envs(program, &ctx, &conds, extra_entries);
    warnings.append(&mut entry_warnings);
    let analysis = analysis::analyze(&aug, &ctx, &entries);
    for d in &analysis.diagnostics {
        warnings.push(d.clone());
    }
    let verdicts = check_assertions(&conds, &analysis, &ctx);

    VerifyOutcome {
        verdicts,
        conformance: table,
        generated,
        analysis,
        entries,
        warnings,
        iterations,
        strong_at,
        pi_minus: minus,
        pi_plus: plus,
    }
}

/// Reconstruct the augmented program and abstract context a finished run
/// ended on, for rendering its analysis or re-running its entries under
/// the semantics with assertions.
pub fn rebuild_ctx(
    program: &Program,
    lattice: Option<FiniteLattice>,
    out: &VerifyOutcome,
) -> (Program, Ctx) {
    let aug = augmented(program, &out.pi_minus, &out.pi_plus);
    let ctx = make_ctx(&aug, &lattice, &out.pi_minus, &out.pi_plus);
    (aug, ctx)
}

/// Abstract entry queries: the program's entry directives plus any given on
/// the side; with none at all, each predicate carrying a user calls
/// condition is assumed called within its own pre.
fn entry_envs(
    program: &Program,
    ctx: &Ctx,
    conds: &ConditionSet,
    extra: &[EntryDecl],
) -> (Vec<(Atom, AbsEnv)>, Vec<String>) {
    fn push(
        ctx: &Ctx,
        goal: &Atom,
        pre: &PropFormula,
        out: &mut Vec<(Atom, AbsEnv)>,
        warnings: &mut Vec<String>,
    ) {
        let env = match triv_sup(ctx, pre, &goal.vars()) {
            Ok(e) => e,
            Err(u) => {
                warnings.push(format!(
                    "entry {} pre mentions unresolved property {}; assuming \
                     unrestricted calls",
                    goal.pred, u.prop,
                ));
                AbsEnv::top()
            }
        };
        out.push((goal.clone(), env));
    }
    let mut warnings = Vec::new();
    let mut out = Vec::new();
    for e in program.entries.iter().chain(extra) {
        push(ctx, &e.goal, &e.pre, &mut out, &mut warnings);
    }
    if out.is_empty() {
        for c in &conds.conditions {
            if c.head.pred == "_" {
                continue;
            }
            if let ConditionKind::Calls { pre } = &c.kind {
                push(ctx, &c.head, pre, &mut out, &mut warnings);
            }
        }
    }
    (out, warnings)
}

// ---------------------------------------------------------------- checking --

struct Approx {
    sub: AbsEnv,
    sup: AbsEnv,
    notes: Vec<String>,
}

/// Both approximations of a formula over a condition head, renamed to
/// positional parameters. A formula mentioning a property without tables
/// proves nothing (bottom under-approximation) and rules out nothing (top
/// over-approximation).
fn approx(ctx: &Ctx, f: &PropFormula, head: &Atom) -> Approx {
    let open = head.vars();
    let map = positional_map(head);
    let mut notes = Vec::new();
    let sub = match triv_sub(ctx, f, &open) {
        Ok(e) => e.rename(&map),
        Err(u) => {
            notes.push(format!("property {} unresolved", u.prop));
            AbsEnv::bot()
        }
    };
    let sup = match triv_sup(ctx, f, &open) {
        Ok(e) => e.rename(&map),
        Err(_) => AbsEnv::top(),
    };
    Approx { sub, sup, notes }
}

/// When a pattern is not provably inside a property-typed requirement,
/// name the predicates that conform only weakly: they are the reason the
/// condition stays a run-time check rather than an error.
fn weak_note(ctx: &Ctx, observed: &AbsEnv, required_sub: &AbsEnv) -> Option<String> {
    let (AbsEnv::Env(req), AbsEnv::Env(obs)) = (required_sub, observed) else {
        return None;
    };
    for (var, want) in req {
        let Val::Props { prop, role: Role::Minus, preds: strong } = want else {
            continue;
        };
        let names: Vec<Name> = match obs.get(var) {
            Some(Val::Props { preds, .. }) => preds.iter().cloned().collect(),
            Some(Val::Type(t)) => match t.root_atom_names() {
                Some(s) => s.into_iter().collect(),
                None => continue,
            },
            _ => continue,
        };
        let weak = ctx.pi_plus.get(prop);
        let only_weak: Vec<Name> = names
            .into_iter()
            .filter(|n| {
                !strong.contains(n)
                    && weak.map_or(false, |w| w.contains(n))
            })
            .collect();
        if !only_weak.is_empty() {
            return Some(format!(
                "{} conform(s) to {} only weakly",
                only_weak.join(", "),
                prop,
            ));
        }
    }
    None
}

fn classify(
    observed: &AbsEnv,
    a: &Approx,
    ctx: &Ctx,
) -> (Status, String, Option<String>) {
    if observed.is_bot() {
        return (Status::Checked, "pattern unreachable".to_string(), None);
    }
    if observed.leq(&a.sub, ctx) {
        let reason = format!(
            "{} inside {}",
            observed.render(ctx),
            a.sub.render(ctx),
        );
        return (Status::Checked, reason, None);
    }
    if observed.meet(&a.sup, ctx).is_bot() {
        let reason = format!(
            "{} /\\ {} = bot",
            observed.render(ctx),
            a.sup.render(ctx),
        );
        return (Status::False, reason, None);
    }
    let reason = format!(
        "{} not inside {} and overlaps {}",
        observed.render(ctx),
        a.sub.render(ctx),
        a.sup.render(ctx),
    );
    (Status::Check, reason, weak_note(ctx, observed, &a.sub))
}

/// Check every user assertion condition against the analysis: a calls
/// condition against the join of its call patterns, a success condition
/// against the successes of the patterns its pre may apply to. Anonymous
/// property conditions are skipped; they act through conformance only.
pub fn check_assertions(
    conds: &ConditionSet,
    result: &AnalysisResult,
    ctx: &Ctx,
) -> Vec<Verdict> {
    let mut out = Vec::new();
    for c in &conds.conditions {
        if c.head.pred == "_" {
            continue;
        }
        out.push(match &c.kind {
            ConditionKind::Calls { pre } => check_calls(c, pre, result, ctx),
            ConditionKind::Success { pre, post } => {
                check_success(c, pre, post, result, ctx)
            }
        });
    }
    out
}

fn check_calls(
    c: &AssertionCondition,
    pre: &PropFormula,
    result: &AnalysisResult,
    ctx: &Ctx,
) -> Verdict {
    let key = c.key();
    let a = approx(ctx, pre, &c.head);
    let lam_c = result.call_env(&key, ctx);
    let (status, mut reason, note) = classify(&lam_c, &a, ctx);
    if lam_c.is_bot() {
        reason = "no reachable calls".to_string();
    }
    for n in &a.notes {
        reason.push_str("; ");
        reason.push_str(n);
    }
    let mut sites = Vec::new();
    for t in result.for_pred(&key) {
        let (status, _, note) = classify(&t.call, &a, ctx);
        sites.push(SiteDiag { env: t.call.render(ctx), status, note });
    }
    Verdict {
        pred: key,
        label: c.label,
        kind: "calls",
        status,
        reason: match note {
            Some(n) => format!("{reason} ({n})"),
            None => reason,
        },
        span: c.span,
        sites,
    }
}

fn check_success(
    c: &AssertionCondition,
    pre: &PropFormula,
    post: &PropFormula,
    result: &AnalysisResult,
    ctx: &Ctx,
) -> Verdict {
    let key = c.key();
    let pre_a = approx(ctx, pre, &c.head);
    let post_a = approx(ctx, post, &c.head);
    // Patterns the condition may apply to: call overlaps the pre. Their
    // successes, narrowed by the pre, are what the post must cover.
    let mut lam_s = AbsEnv::bot();
    let mut sites = Vec::new();
    for t in result.for_pred(&key) {
        if t.call.meet(&pre_a.sup, ctx).is_bot() {
            continue;
        }
        let s = t.success.meet(&pre_a.sup, ctx);
        let (status, _, note) = classify(&s, &post_a, ctx);
        sites.push(SiteDiag { env: s.render(ctx), status, note });
        lam_s = lam_s.join(&s, ctx).0;
    }
    let (status, mut reason, note) = classify(&lam_s, &post_a, ctx);
    if lam_s.is_bot() {
        reason = "no applicable successes".to_string();
    }
    for n in pre_a.notes.iter().chain(&post_a.notes) {
        reason.push_str("; ");
        reason.push_str(n);
    }
    Verdict {
        pred: key,
        label: c.label,
        kind: "success",
        status,
        reason: match note {
            Some(n) => format!("{reason} ({n})"),
            None => reason,
        },
        span: c.span,
        sites,
    }
}

// -------------------------------------------------------- run-time checks --

/// Conditions rewritten for concrete execution: a property literal becomes
/// a test of its generated weak regular type when the augmented program
/// defines one, turning the otherwise undecidable membership check into
/// the first-order test the verification itself used.
pub fn runtime_conditions(aug: &Program, conds: &ConditionSet) -> ConditionSet {
    let rewrite = |f: &PropFormula| -> PropFormula {
        let mut g = f.clone();
        for d in &mut g.disjuncts {
            for lit in d {
                if lit.args.len() == 1 {
                    let plus = format!("{}_plus", lit.pred);
                    if aug.defines(&PredKey::new(&plus, 1)) {
                        lit.pred = plus;
                    }
                }
            }
        }
        g
    };
    let conditions = conds
        .conditions
        .iter()
        .map(|c| {
            let mut c = c.clone();
            c.kind = match &c.kind {
                ConditionKind::Calls { pre } => {
                    ConditionKind::Calls { pre: rewrite(pre) }
                }
                ConditionKind::Success { pre, post } => ConditionKind::Success {
                    pre: rewrite(pre),
                    post: rewrite(post),
                },
            };
            c
        })
        .collect();
    ConditionSet::from_conditions(conditions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformance::TriState;
    use crate::parser::parse_program;

    fn verify(src: &str) -> VerifyOutcome {
        let program = parse_program(src).unwrap();
        hiord_verify(&program, None, &[], &VerifyOptions::default())
    }

    fn status_of(out: &VerifyOutcome, pred: &str, kind: &str) -> Status {
        out.verdicts
            .iter()
            .find(|v| v.pred.name == pred && v.kind == kind)
            .unwrap_or_else(|| panic!("no {kind} verdict for {pred}"))
            .status
    }

    #[test]
    fn all_conditions_proven_gives_exit_zero() {
        let out = verify(
            "
            :- pred inc(X,Y) : nat(X) => nat(Y).
            inc(X,Y) :- Y is X + 1.
            :- entry main.
            main :- inc(3,_).
            ",
        );
        assert_eq!(status_of(&out, "inc", "calls"), Status::Checked);
        assert_eq!(status_of(&out, "inc", "success"), Status::Checked);
        assert_eq!(exit_code(&out.verdicts), 0);
    }

    #[test]
    fn incompatible_call_pattern_is_false() {
        let out = verify(
            "
            :- pred takes_nat(X) : nat(X).
            takes_nat(X) :- integer(X).
            :- entry main.
            main :- takes_nat(a).
            ",
        );
        assert_eq!(status_of(&out, "takes_nat", "calls"), Status::False);
        assert_eq!(exit_code(&out.verdicts), 1);
        let v = out.verdicts.iter().find(|v| v.pred.name == "takes_nat").unwrap();
        assert!(v.reason.contains("bot"), "reason: {}", v.reason);
    }

    #[test]
    fn unproven_overlap_remains_a_check() {
        let out = verify(
            "
            :- pred takes_nat(X) : nat(X).
            takes_nat(X) :- integer(X).
            inty(X) :- X = 1.
            inty(X) :- X = -1.
            :- entry main.
            main :- inty(V), takes_nat(V).
            ",
        );
        assert_eq!(status_of(&out, "takes_nat", "calls"), Status::Check);
        assert_eq!(exit_code(&out.verdicts), 2);
    }

    #[test]
    fn property_argument_flows_through_the_generated_types() {
        // Both callees conform: higher-order dispatch on the property-typed
        // argument verifies end to end.
        let out = verify(
            "
            p_nat := { :- pred _(N) : nat(N). }.
            :- pred apply(P,X) : (p_nat(P), nat(X)).
            apply(P,X) :- P(X).
            :- pred f(N) : nat(N).
            f(N) :- N >= 0.
            :- pred g(N) : nat(N).
            g(N) :- N = 0.
            :- entry main.
            main :- apply(f,1), apply(g,0).
            ",
        );
        assert_eq!(
            out.conformance.verdict(&PredKey::new("f", 1), "p_nat"),
            Some(TriState::Yes)
        );
        assert_eq!(
            out.conformance.verdict(&PredKey::new("g", 1), "p_nat"),
            Some(TriState::Yes)
        );
        assert_eq!(status_of(&out, "apply", "calls"), Status::Checked);
        assert_eq!(exit_code(&out.verdicts), 0);
        // One minus and one plus fact per conforming predicate.
        let minus: Vec<&Rule> = out
            .generated
            .iter()
            .filter(|r| r.head.pred == "p_nat_minus")
            .collect();
        assert_eq!(minus.len(), 2);
    }

    #[test]
    fn weakly_conforming_callee_keeps_the_check_and_names_itself() {
        // h takes any int, so it only weakly conforms to p_nat; the calls
        // condition of apply survives as a check naming h.
        let out = verify(
            "
            p_nat := { :- pred _(N) : nat(N). }.
            :- pred apply(P,X) : (p_nat(P), nat(X)).
            apply(P,X) :- P(X).
            :- pred h(N) : int(N).
            h(N) :- integer(N).
            :- entry main.
            main :- apply(h,1).
            ",
        );
        assert_eq!(
            out.conformance.verdict(&PredKey::new("h", 1), "p_nat"),
            Some(TriState::Maybe)
        );
        let v = out
            .verdicts
            .iter()
            .find(|v| v.pred.name == "apply" && v.kind == "calls")
            .unwrap();
        assert_eq!(v.status, Status::Check);
        assert!(v.reason.contains("h conform"), "reason: {}", v.reason);
        assert_eq!(exit_code(&out.verdicts), 2);
    }

    #[test]
    fn nonconforming_callee_is_false_at_the_call_site() {
        // neg maps nats to negatives; it is disproven against p_id and the
        // call pattern requiring the property becomes empty.
        let out = verify(
            "
            p_id := { :- pred _(X,Y) : nat(X) => nat(Y). }.
            :- pred apply(P) : p_id(P).
            apply(P) :- P(1,_).
            :- pred neg(X,Y) : nat(X) => neg1(Y).
            neg(X,Y) :- Y is 0 - X - 1.
            :- regtype neg1/1.
            neg1 := -1 | -2.
            :- entry main.
            main :- apply(neg).
            ",
        );
        assert_eq!(
            out.conformance.verdict(&PredKey::new("neg", 2), "p_id"),
            Some(TriState::No)
        );
        let e = out
            .conformance
            .entries
            .iter()
            .find(|e| e.pred.name == "neg")
            .unwrap();
        assert!(e.witness.is_some());
        assert_eq!(status_of(&out, "apply", "calls"), Status::False);
        assert_eq!(exit_code(&out.verdicts), 1);
    }

    #[test]
    fn nested_property_resolves_on_a_later_round() {
        // q_use's pre mentions p_nat, so its conformance entries only
        // resolve once p_nat's tables exist: round two.
        let out = verify(
            "
            p_nat := { :- pred _(N) : nat(N). }.
            q_use := { :- pred _(F) : p_nat(F). }.
            :- pred call_it(F) : p_nat(F).
            call_it(F) :- F(0).
            :- pred f(N) : nat(N).
            f(N) :- N >= 0.
            :- entry main.
            main :- call_it(f).
            ",
        );
        assert!(out.iterations >= 2, "iterations: {}", out.iterations);
        assert_eq!(
            out.strong_at.get(&("q_use".to_string(), "call_it".to_string())),
            Some(&2)
        );
        assert_eq!(
            out.strong_at.get(&("p_nat".to_string(), "f".to_string())),
            Some(&1)
        );
        assert_eq!(exit_code(&out.verdicts), 0);
    }

    #[test]
    fn generated_rules_define_the_pi_types() {
        let out = verify(
            "
            p_nat := { :- pred _(N) : nat(N). }.
            :- pred f(N) : nat(N).
            f(N) :- N >= 0.
            ",
        );
        let names: BTreeSet<&str> =
            out.generated.iter().map(|r| r.head.pred.as_str()).collect();
        assert!(names.contains("p_nat_minus"));
        assert!(names.contains("p_nat_plus"));
    }

    #[test]
    fn runtime_rewrite_targets_generated_types() {
        let program = parse_program(
            "
            p_nat := { :- pred _(N) : nat(N). }.
            :- pred apply(P) : p_nat(P).
            apply(P) :- P(1).
            :- pred f(N) : nat(N).
            f(N) :- N >= 0.
            ",
        )
        .unwrap();
        let out = hiord_verify(&program, None, &[], &VerifyOptions::default());
        let mut aug = program.clone();
        for r in &out.generated {
            aug.push_rule(r.clone());
        }
        let conds = program_conditions(&program);
        let rt = runtime_conditions(&aug, &conds);
        let apply_calls = rt
            .conditions
            .iter()
            .find(|c| c.head.pred == "apply" && c.is_calls())
            .unwrap();
        let ConditionKind::Calls { pre } = &apply_calls.kind else {
            panic!("calls condition expected")
        };
        assert!(pre
            .disjuncts
            .iter()
            .flatten()
            .any(|l| l.pred == "p_nat_plus"));

        // The rewritten condition passes concretely for a conforming
        // argument and errs for an unknown one.
        use crate::engine::{Budget, Machine};
        use crate::store::Store;
        use crate::syntax::Term;
        let mut machine = Machine::new(&aug);
        let good = Atom::new("apply", vec![Term::atom("f")]);
        let r = machine.success_context(&good, &Store::empty(), &rt, &Budget::default());
        assert!(r.violations.is_empty());
        assert!(!r.answers.is_empty());
        let bad = Atom::new("apply", vec![Term::atom("zzz")]);
        let r = machine.success_context(&bad, &Store::empty(), &rt, &Budget::default());
        assert!(!r.violations.is_empty());
    }
}
