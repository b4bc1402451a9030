//! Ground-truth redundance oracle.
//!
//! A property's conditions are redundant for a predicate when adding them to
//! the program's own assertions changes nothing observable for any query.
//! The oracle walks the derivation trees of the original condition set A and
//! the strengthened set A' in lockstep: both sides make the same non-check
//! reductions with the same fresh-variable choices, so stores stay
//! syntactically equal and goals differ only in pending check literals (every
//! check pending on the A side is also pending on the A' side).
//!
//! A branch where A' reaches an error that the A side does not reach is a
//! counterexample; a matched error (both sides) just closes the branch. If
//! the whole tree is explored without an A'-only error, the property's
//! conditions were redundant for that query.

use crate::assertions::{ConditionSet, PredicateProperty};
use crate::engine::{ExtState, GoalItem, Machine};
use crate::store::Store;
use crate::syntax::*;
use std::collections::BTreeSet;

#[derive(Clone, Copy, Debug)]
pub struct OracleBudget {
    pub max_depth: usize,
    pub max_pairs: usize,
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget { max_depth: 200, max_pairs: 20_000 }
    }
}

/// A query on which the strengthened program errs while the original stays
/// clean on the same branch. `strong` additionally promises the original
/// program reaches no error anywhere in the query's tree.
#[derive(Clone, Debug)]
pub struct Witness {
    pub query: Atom,
    pub label: Label,
    pub store: Store,
    pub strong: bool,
}

#[derive(Clone, Debug)]
pub enum Redundance {
    Redundant,
    NotRedundant(Witness),
    Unknown(String),
}

impl Redundance {
    pub fn is_redundant(&self) -> bool {
        matches!(self, Redundance::Redundant)
    }
}

/// Decide redundance of `property`'s conditions for `p` on one ground query.
pub fn check_redundance(
    program: &Program,
    base: &ConditionSet,
    p: &PredKey,
    property: &PredicateProperty,
    query: &Atom,
    budget: &OracleBudget,
) -> Redundance {
    let strengthened = base.strengthened_for(p, property);
    lockstep(program, base, &strengthened, query, budget)
}

struct Pair {
    a: ExtState,
    b: ExtState,
    depth: usize,
}

fn head_check_label(s: &ExtState) -> Option<Label> {
    match s.goal.first() {
        Some(GoalItem::Lit(Literal::Check(_, l))) => Some(*l),
        _ => None,
    }
}

pub fn erase_checks(goal: &[GoalItem]) -> Vec<GoalItem> {
    goal.iter()
        .filter(|g| !matches!(g, GoalItem::Lit(Literal::Check(_, _))))
        .cloned()
        .collect()
}

/// User-observable image of a derivation: check literals and the error
/// component dropped, consecutive duplicates collapsed.
pub fn erase_trace(states: &[ExtState]) -> Vec<(Vec<GoalItem>, Store)> {
    let mut out: Vec<(Vec<GoalItem>, Store)> = Vec::new();
    for s in states {
        let obs = (erase_checks(&s.goal), s.store.clone());
        if out.last() != Some(&obs) {
            out.push(obs);
        }
    }
    out
}

fn lockstep(
    program: &Program,
    base: &ConditionSet,
    strengthened: &ConditionSet,
    query: &Atom,
    budget: &OracleBudget,
) -> Redundance {
    let base_labels: BTreeSet<Label> =
        (0..base.max_label()).map(Label).collect();
    let mut ma = Machine::new(program);
    let mut mb = Machine::new(program);
    let start = ExtState {
        goal: vec![GoalItem::Lit(Literal::Atom(query.clone()))],
        store: Store::empty(),
        err: None,
    };
    let mut stack = vec![Pair { a: start.clone(), b: start, depth: 0 }];
    let mut expanded = 0usize;
    let mut matched_error = false;
    let mut found: Option<Witness> = None;
    'pairs: while let Some(Pair { mut a, mut b, depth }) = stack.pop() {
        // Drain pending checks. Invariant: every check pending on the A side
        // is pending on the A' side in the same order, possibly interleaved
        // with extra property checks that A does not have.
        loop {
            let la = head_check_label(&a);
            let lb = head_check_label(&b);
            match (la, lb) {
                (Some(la), Some(lb)) if la == lb => {
                    let sa = ma.checked_successors(&a, base);
                    let sb = mb.checked_successors(&b, strengthened);
                    let (Some(na), Some(nb)) = (sa.into_iter().next(), sb.into_iter().next())
                    else {
                        return Redundance::Unknown("check step produced no state".into());
                    };
                    match (na.err, nb.err) {
                        (Some(_), Some(_)) => {
                            matched_error = true;
                            continue 'pairs;
                        }
                        (None, None) => {
                            a = na;
                            b = nb;
                        }
                        _ => {
                            return Redundance::Unknown(
                                "shared check diverged between condition sets".into(),
                            )
                        }
                    }
                }
                (_, Some(lb)) if !base_labels.contains(&lb) => {
                    // Property-derived check pending only on the A' side.
                    let sb = mb.checked_successors(&b, strengthened);
                    let Some(nb) = sb.into_iter().next() else {
                        return Redundance::Unknown("check step produced no state".into());
                    };
                    if nb.err.is_some() {
                        let w = Witness {
                            query: query.clone(),
                            label: lb,
                            store: nb.store.clone(),
                            strong: !matched_error,
                        };
                        if found.is_none() {
                            found = Some(w);
                        }
                        continue 'pairs;
                    }
                    b = nb;
                }
                (Some(_), _) => {
                    return Redundance::Unknown(
                        "check pending on the original side only".into(),
                    )
                }
                (None, None) => break,
                (None, Some(_)) => {
                    return Redundance::Unknown(
                        "unexpected base check on strengthened side".into(),
                    )
                }
            }
        }
        if a.goal.is_empty() {
            // Both sides succeeded.
            continue;
        }
        if depth >= budget.max_depth || expanded >= budget.max_pairs {
            return Redundance::Unknown("derivation budget exhausted".into());
        }
        expanded += 1;
        let sa = ma.checked_successors(&a, base);
        let sb = mb.checked_successors(&b, strengthened);
        if ma.ts_incomplete || mb.ts_incomplete {
            return Redundance::Unknown("condition evaluation budget exhausted".into());
        }
        let a_err = sa.len() == 1 && sa[0].err.is_some();
        let b_err = sb.len() == 1 && sb[0].err.is_some();
        match (a_err, b_err) {
            (true, true) => {
                matched_error = true;
                continue;
            }
            (true, false) => {
                // The strengthened pre-condition is implied by the original
                // one, so this cannot happen.
                return Redundance::Unknown(
                    "original side erred where strengthened side did not".into(),
                );
            }
            (false, true) => {
                let w = Witness {
                    query: query.clone(),
                    label: sb[0].err.unwrap(),
                    store: sb[0].store.clone(),
                    strong: !matched_error,
                };
                if found.is_none() {
                    found = Some(w);
                }
                continue;
            }
            (false, false) => {
                if sa.len() != sb.len() {
                    return Redundance::Unknown("successor sets diverged".into());
                }
                for (na, nb) in sa.into_iter().zip(sb).rev() {
                    debug_assert_eq!(na.store, nb.store);
                    debug_assert_eq!(erase_checks(&na.goal), erase_checks(&nb.goal));
                    stack.push(Pair { a: na, b: nb, depth: depth + 1 });
                }
            }
        }
    }
    match found {
        Some(w) => Redundance::NotRedundant(w),
        None => Redundance::Redundant,
    }
}

/// All ground queries for `p` over a term universe, smallest first: total
/// symbol count, then structural order. Truncated at `max_queries`.
pub fn enumerate_queries(
    p: &PredKey,
    universe: &[Term],
    max_queries: usize,
) -> Vec<Atom> {
    let mut tuples: Vec<Vec<Term>> = vec![Vec::new()];
    for _ in 0..p.arity {
        let mut next = Vec::new();
        for t in &tuples {
            for u in universe {
                let mut t = t.clone();
                t.push(u.clone());
                next.push(t);
            }
        }
        tuples = next;
    }
    tuples.sort_by_key(|args| {
        (args.iter().map(Term::size).sum::<usize>(), args.clone())
    });
    tuples
        .into_iter()
        .take(max_queries)
        .map(|args| Atom { pred: p.name.clone(), args })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assertions::program_conditions;
    use crate::parser::parse_program;

    fn prop_of<'p>(p: &'p Program, name: &str) -> &'p PredicateProperty {
        &p.properties[name]
    }

    #[test]
    fn conforming_predicate_is_redundant_on_all_small_queries() {
        // n2n maps nats to nats and declares exactly that: adding p_nat_nat's
        // conditions can never introduce a new error.
        let src = "
            p_nat_nat := { :- pred _(X,Y) : nat(X) => nat(Y). }.
            :- pred n2n(X,Y) : nat(X) => nat(Y).
            n2n(X,Y) :- Y = X.
        ";
        let program = parse_program(src).unwrap();
        let base = program_conditions(&program);
        let p = PredKey::new("n2n", 2);
        let property = prop_of(&program, "p_nat_nat").clone();
        let universe =
            vec![Term::Int(0), Term::Int(3), Term::Int(-2), Term::atom("a")];
        for q in enumerate_queries(&p, &universe, 64) {
            let r = check_redundance(
                &program,
                &base,
                &p,
                &property,
                &q,
                &OracleBudget::default(),
            );
            assert!(
                r.is_redundant(),
                "query {} should be redundant, got {r:?}",
                pretty::atom(&q)
            );
        }
    }

    #[test]
    fn weaker_declared_post_is_caught_not_redundant() {
        // i2z declares int => int; the property wants nat out. On query
        // i2z(0,Y) the property's success check fails while i2z's own
        // assertions hold.
        let src = "
            p_nat_nat := { :- pred _(X,Y) : nat(X) => nat(Y). }.
            :- pred i2z(X,Y) : int(X) => int(Y).
            i2z(X,Y) :- Y = -1.
        ";
        let program = parse_program(src).unwrap();
        let base = program_conditions(&program);
        let p = PredKey::new("i2z", 2);
        let property = prop_of(&program, "p_nat_nat").clone();
        let q = Atom::new("i2z", vec![Term::Int(0), Term::var("Y")]);
        let r = check_redundance(&program, &base, &p, &property, &q, &OracleBudget::default());
        match r {
            Redundance::NotRedundant(w) => {
                assert!(w.strong);
                assert!(w.label.0 >= base.max_label());
            }
            other => panic!("expected NotRedundant, got {other:?}"),
        }
    }

    #[test]
    fn stronger_property_pre_is_caught_on_calls() {
        // even/1 accepts any int; p_nat requires nat. Calling through the
        // property with -2 errs only on the strengthened side.
        let src = "
            p_nat := { :- pred _(N) : nat(N). }.
            :- pred even(N) : int(N).
            even(N) :- integer(N), 0 is N mod 2.
        ";
        let program = parse_program(src).unwrap();
        let base = program_conditions(&program);
        let p = PredKey::new("even", 1);
        let property = prop_of(&program, "p_nat").clone();
        let bad = Atom::new("even", vec![Term::Int(-2)]);
        let r = check_redundance(&program, &base, &p, &property, &bad, &OracleBudget::default());
        assert!(matches!(r, Redundance::NotRedundant(_)), "got {r:?}");
        // On a nat query nothing new can go wrong.
        let good = Atom::new("even", vec![Term::Int(4)]);
        let r = check_redundance(&program, &base, &p, &property, &good, &OracleBudget::default());
        assert!(r.is_redundant(), "got {r:?}");
    }

    #[test]
    fn matched_errors_stay_redundant() {
        // The program's own pre is violated: both sides err, no difference.
        let src = "
            p_nat_nat := { :- pred _(X,Y) : nat(X) => nat(Y). }.
            :- pred n2n(X,Y) : nat(X) => nat(Y).
            n2n(X,Y) :- Y = X.
        ";
        let program = parse_program(src).unwrap();
        let base = program_conditions(&program);
        let p = PredKey::new("n2n", 2);
        let property = prop_of(&program, "p_nat_nat").clone();
        let q = Atom::new("n2n", vec![Term::atom("a"), Term::var("Y")]);
        let r = check_redundance(&program, &base, &p, &property, &q, &OracleBudget::default());
        assert!(r.is_redundant(), "got {r:?}");
    }

    #[test]
    fn query_enumeration_is_by_size_then_order() {
        let universe = vec![
            Term::atom("b"),
            Term::atom("a"),
            Term::Compound("f".into(), vec![Term::atom("a")]),
        ];
        let qs = enumerate_queries(&PredKey::new("p", 2), &universe, 100);
        assert_eq!(qs.len(), 9);
        let sizes: Vec<usize> =
            qs.iter().map(|q| q.args.iter().map(Term::size).sum()).collect();
        let mut sorted = sizes.clone();
        sorted.sort();
        assert_eq!(sizes, sorted);
        // Smallest queries are over the constants only.
        assert_eq!(qs[0].args, vec![Term::atom("a"), Term::atom("a")]);
    }

    #[test]
    fn erasure_collapses_check_steps() {
        let s1 = ExtState {
            goal: vec![
                GoalItem::Lit(Literal::Check(Atom::new("p", vec![]), Label(0))),
                GoalItem::Lit(Literal::Atom(Atom::new("q", vec![]))),
            ],
            store: Store::empty(),
            err: None,
        };
        let s2 = ExtState {
            goal: vec![GoalItem::Lit(Literal::Atom(Atom::new("q", vec![])))],
            store: Store::empty(),
            err: None,
        };
        let trace = erase_trace(&[s1, s2]);
        assert_eq!(trace.len(), 1);
    }
}
