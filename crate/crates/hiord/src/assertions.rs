//! Assertions, predicate properties and assertion conditions.
//!
//! A `:- pred Head : Pre => Post.` assertion contributes, together with the
//! other assertions for the same predicate, one calls condition (the
//! disjunction of all pre-conditions) plus one success condition per
//! assertion whose pre-condition held at call time. Labels are injective
//! across the whole program, properties included.

use crate::syntax::{Atom, Label, Name, PredKey, Span, Term};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// One property literal, e.g. `nat(X)` or `list(t, Xs)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PropLiteral {
    pub pred: Name,
    pub args: Vec<Term>,
}

impl PropLiteral {
    pub fn vars(&self) -> BTreeSet<Name> {
        let mut s = BTreeSet::new();
        for a in &self.args {
            a.vars_into(&mut s);
        }
        s
    }

    pub fn subst(&self, map: &BTreeMap<Name, Term>) -> PropLiteral {
        PropLiteral {
            pred: self.pred.clone(),
            args: self.args.iter().map(|t| t.subst(map)).collect(),
        }
    }

    pub fn rename(&self, map: &BTreeMap<Name, Name>) -> PropLiteral {
        PropLiteral {
            pred: self.pred.clone(),
            args: self.args.iter().map(|a| a.rename(map)).collect(),
        }
    }

    pub fn to_atom(&self) -> Atom {
        Atom { pred: self.pred.clone(), args: self.args.clone() }
    }
}

/// Property formula in disjunctive normal form. `true` is the formula with a
/// single empty conjunct: its trivial success set is all stores.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PropFormula {
    pub disjuncts: Vec<Vec<PropLiteral>>,
}

impl PropFormula {
    pub fn truth() -> PropFormula {
        PropFormula { disjuncts: vec![Vec::new()] }
    }

    pub fn is_truth(&self) -> bool {
        self.disjuncts.len() == 1 && self.disjuncts[0].is_empty()
    }

    pub fn single(lits: Vec<PropLiteral>) -> PropFormula {
        PropFormula { disjuncts: vec![lits] }
    }

    pub fn vars(&self) -> BTreeSet<Name> {
        let mut s = BTreeSet::new();
        for d in &self.disjuncts {
            for l in d {
                s.extend(l.vars());
            }
        }
        s
    }

    pub fn subst(&self, map: &BTreeMap<Name, Term>) -> PropFormula {
        PropFormula {
            disjuncts: self
                .disjuncts
                .iter()
                .map(|c| c.iter().map(|l| l.subst(map)).collect())
                .collect(),
        }
    }

    pub fn rename(&self, map: &BTreeMap<Name, Name>) -> PropFormula {
        PropFormula {
            disjuncts: self
                .disjuncts
                .iter()
                .map(|d| d.iter().map(|l| l.rename(map)).collect())
                .collect(),
        }
    }

    /// Conjunction: DNF product of the two formulas.
    pub fn and(&self, other: &PropFormula) -> PropFormula {
        let mut disjuncts = Vec::new();
        for a in &self.disjuncts {
            for b in &other.disjuncts {
                let mut c = a.clone();
                c.extend(b.iter().cloned());
                disjuncts.push(c);
            }
        }
        PropFormula { disjuncts }
    }

    /// Disjunction: concatenation of disjunct lists.
    pub fn or(&self, other: &PropFormula) -> PropFormula {
        let mut disjuncts = self.disjuncts.clone();
        disjuncts.extend(other.disjuncts.iter().cloned());
        PropFormula { disjuncts }
    }
}

impl fmt::Display for PropFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", fmt_helpers::formula(self))
    }
}

/// A `:- pred Head : Pre => Post.` assertion. Head arguments are distinct
/// variables (the parser rejects anything else). An omitted pre or post is
/// `true`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredAssertion {
    pub head: Atom,
    pub pre: PropFormula,
    pub post: PropFormula,
    pub span: Span,
}

impl PredAssertion {
    pub fn key(&self) -> PredKey {
        self.head.key()
    }

    /// Rename head and formulas to the given argument variables.
    pub fn instantiate_args(&self, args: &[Name]) -> PredAssertion {
        assert_eq!(args.len(), self.head.args.len());
        let mut map = BTreeMap::new();
        for (old, new) in self.head.args.iter().zip(args) {
            if let Term::Var(v) = old {
                map.insert(v.clone(), new.clone());
            }
        }
        PredAssertion {
            head: Atom {
                pred: self.head.pred.clone(),
                args: args.iter().map(|v| Term::Var(v.clone())).collect(),
            },
            pre: self.pre.rename(&map),
            post: self.post.rename(&map),
            span: self.span,
        }
    }
}

/// A predicate property: named set of anonymous assertions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredicateProperty {
    pub name: Name,
    pub arity: usize,
    /// Anonymous assertions with placeholder heads `_(v...)`.
    pub assertions: Vec<PredAssertion>,
    pub span: Span,
}

impl PredicateProperty {
    /// Instantiate every anonymous assertion for predicate `p`.
    pub fn instantiate(&self, p: &PredKey) -> Vec<PredAssertion> {
        assert_eq!(p.arity, self.arity);
        self.assertions
            .iter()
            .map(|a| {
                let mut inst = a.clone();
                inst.head.pred = p.name.clone();
                inst
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConditionKind {
    /// calls(Head, Pre-disjunction)
    Calls { pre: PropFormula },
    /// success(Head, Pre_i, Post_i)
    Success { pre: PropFormula, post: PropFormula },
}

/// A labeled assertion condition attached to a predicate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AssertionCondition {
    pub label: Label,
    /// Normalized head `p(v1,...,vn)`; formulas are over these variables.
    pub head: Atom,
    pub kind: ConditionKind,
    pub span: Span,
}

impl AssertionCondition {
    pub fn key(&self) -> PredKey {
        self.head.key()
    }

    pub fn is_calls(&self) -> bool {
        matches!(self.kind, ConditionKind::Calls { .. })
    }
}

/// Compute the assertion conditions of one predicate from its assertions:
/// the calls condition (disjunction of the pre-conditions) followed by one
/// success condition per assertion, labeled consecutively from `next`.
pub fn assertion_conditions(
    asserts: &[PredAssertion],
    next: &mut u32,
) -> Vec<AssertionCondition> {
    assert!(!asserts.is_empty());
    let head = asserts[0].head.clone();
    let canon: Vec<Name> = head
        .args
        .iter()
        .map(|t| match t {
            Term::Var(v) => v.clone(),
            _ => unreachable!("assertion heads are normalized"),
        })
        .collect();
    let mut pre_disj: Option<PropFormula> = None;
    let mut out = Vec::new();
    let calls_label = Label(*next);
    *next += 1;
    for a in asserts {
        let a = a.instantiate_args(&canon);
        pre_disj = Some(match pre_disj {
            None => a.pre.clone(),
            Some(d) => d.or(&a.pre),
        });
        out.push(AssertionCondition {
            label: Label(*next),
            head: head.clone(),
            kind: ConditionKind::Success { pre: a.pre, post: a.post },
            span: a.span,
        });
        *next += 1;
    }
    out.insert(
        0,
        AssertionCondition {
            label: calls_label,
            head,
            kind: ConditionKind::Calls { pre: pre_disj.unwrap() },
            span: asserts[0].span,
        },
    );
    out
}

/// The assertion conditions of a whole program, indexed by predicate.
#[derive(Clone, Debug, Default)]
pub struct ConditionSet {
    pub conditions: Vec<AssertionCondition>,
    by_pred: BTreeMap<PredKey, Vec<usize>>,
    by_label: BTreeMap<Label, usize>,
}

impl ConditionSet {
    pub fn from_conditions(conditions: Vec<AssertionCondition>) -> ConditionSet {
        let mut set = ConditionSet::default();
        for c in conditions {
            set.push(c);
        }
        set
    }

    pub fn push(&mut self, c: AssertionCondition) {
        assert!(
            !self.by_label.contains_key(&c.label),
            "labels must be injective"
        );
        self.by_label.insert(c.label, self.conditions.len());
        self.by_pred
            .entry(c.key())
            .or_default()
            .push(self.conditions.len());
        self.conditions.push(c);
    }

    pub fn for_pred(&self, key: &PredKey) -> impl Iterator<Item = &AssertionCondition> {
        self.by_pred
            .get(key)
            .into_iter()
            .flatten()
            .map(|&i| &self.conditions[i])
    }

    pub fn calls_for(&self, key: &PredKey) -> Option<&AssertionCondition> {
        self.for_pred(key).find(|c| c.is_calls())
    }

    pub fn successes_for(&self, key: &PredKey) -> Vec<&AssertionCondition> {
        self.for_pred(key).filter(|c| !c.is_calls()).collect()
    }

    pub fn by_label(&self, l: Label) -> Option<&AssertionCondition> {
        self.by_label.get(&l).map(|&i| &self.conditions[i])
    }

    pub fn max_label(&self) -> u32 {
        self.conditions
            .iter()
            .map(|c| c.label.0 + 1)
            .max()
            .unwrap_or(0)
    }

    /// Conditions for the redundance construction A' = {calls(p, Pre /\ Pre_a)}
    /// u (A \ {C}) u (Pi \ {C_a})[p]. Fresh labels extend the existing space.
    pub fn strengthened_for(
        &self,
        p: &PredKey,
        property: &PredicateProperty,
    ) -> ConditionSet {
        let mut next = self.max_label();
        let inst = property.instantiate(p);
        let inst_conds = assertion_conditions(&inst, &mut next);
        let own_calls = self.calls_for(p);
        let mut out = Vec::new();
        for c in &self.conditions {
            if c.is_calls() && &c.key() == p {
                continue;
            }
            out.push(c.clone());
        }
        // Strengthened calls condition: own pre (or true) conjoined with the
        // property's anonymous pre, over the predicate's canonical head vars.
        let anon_calls = inst_conds
            .iter()
            .find(|c| c.is_calls())
            .expect("property has a calls condition");
        let head = own_calls
            .map(|c| c.head.clone())
            .unwrap_or_else(|| anon_calls.head.clone());
        let canon: Vec<Name> = head
            .args
            .iter()
            .map(|t| match t {
                Term::Var(v) => v.clone(),
                _ => unreachable!(),
            })
            .collect();
        let own_pre = match own_calls {
            Some(AssertionCondition { kind: ConditionKind::Calls { pre }, .. }) => pre.clone(),
            _ => PropFormula::truth(),
        };
        let anon_pre = match &anon_calls.kind {
            ConditionKind::Calls { pre } => {
                realign(&anon_calls.head, &canon, pre)
            }
            _ => unreachable!(),
        };
        let strengthened = AssertionCondition {
            label: Label(next),
            head: head.clone(),
            kind: ConditionKind::Calls { pre: own_pre.and(&anon_pre) },
            span: own_calls.map(|c| c.span).unwrap_or(property.span),
        };
        out.insert(0, strengthened);
        // The property's success conditions, realigned to the canonical vars.
        for c in inst_conds {
            if c.is_calls() {
                continue;
            }
            if let ConditionKind::Success { pre, post } = &c.kind {
                out.push(AssertionCondition {
                    label: c.label,
                    head: head.clone(),
                    kind: ConditionKind::Success {
                        pre: realign(&c.head, &canon, pre),
                        post: realign(&c.head, &canon, post),
                    },
                    span: c.span,
                });
            }
        }
        ConditionSet::from_conditions(out)
    }
}

/// Rename a formula from one head's argument variables to another's.
fn realign(from_head: &Atom, to_args: &[Name], f: &PropFormula) -> PropFormula {
    let mut map = BTreeMap::new();
    for (t, n) in from_head.args.iter().zip(to_args) {
        if let Term::Var(v) = t {
            map.insert(v.clone(), n.clone());
        }
    }
    f.rename(&map)
}

/// Build the full condition set of a program: user assertions first (source
/// order), then the anonymous conditions of every predicate property.
pub fn program_conditions(program: &crate::syntax::Program) -> ConditionSet {
    let mut next = 0;
    let mut all = Vec::new();
    let mut keys: Vec<&PredKey> = program.assertions.keys().collect();
    keys.sort_by_key(|k| {
        program.assertions[*k]
            .first()
            .map(|a| a.span)
            .unwrap_or_default()
    });
    for k in keys {
        all.extend(assertion_conditions(&program.assertions[k], &mut next));
    }
    for name in &program.property_order {
        let p = &program.properties[name];
        all.extend(assertion_conditions(&p.assertions, &mut next));
    }
    ConditionSet::from_conditions(all)
}

/// `w(v...) :- p(v...).` plus `:- pred w(v...) : Pre_a => Post_a.` for every
/// anonymous assertion of the property. Errors if `name` is already defined.
pub fn make_wrapper(
    p: &PredKey,
    property: &PredicateProperty,
    name: &str,
    program: &crate::syntax::Program,
) -> Result<(crate::syntax::Rule, Vec<PredAssertion>), String> {
    if p.arity != property.arity {
        return Err(format!(
            "arity mismatch: {} has arity {}, property {} expects {}",
            p, p.arity, property.name, property.arity
        ));
    }
    let wkey = PredKey::new(name, p.arity);
    if program.defines(&wkey) || program.assertions.contains_key(&wkey) {
        return Err(format!("wrapper name collision: {} already defined", wkey));
    }
    let vars: Vec<Name> = (0..p.arity).map(|i| format!("V{i}")).collect();
    let head = Atom {
        pred: name.to_string(),
        args: vars.iter().map(|v| Term::Var(v.clone())).collect(),
    };
    let call = Atom {
        pred: p.name.clone(),
        args: vars.iter().map(|v| Term::Var(v.clone())).collect(),
    };
    let rule = crate::syntax::Rule {
        head: head.clone(),
        body: vec![crate::syntax::Literal::Atom(call)],
        span: property.span,
    };
    let asserts = property
        .instantiate(&wkey)
        .into_iter()
        .map(|a| a.instantiate_args(&vars))
        .collect();
    Ok((rule, asserts))
}

mod fmt_helpers {
    use super::*;

    pub fn formula(f: &PropFormula) -> String {
        if f.is_truth() {
            return "true".to_string();
        }
        let ds: Vec<String> = f
            .disjuncts
            .iter()
            .map(|d| {
                if d.is_empty() {
                    "true".to_string()
                } else {
                    let ls: Vec<String> = d
                        .iter()
                        .map(|l| crate::syntax::pretty::atom(&l.to_atom()))
                        .collect();
                    if ls.len() == 1 {
                        ls.into_iter().next().unwrap()
                    } else {
                        format!("({})", ls.join(", "))
                    }
                }
            })
            .collect();
        ds.join("; ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::Span;

    fn lit(p: &str, v: &str) -> PropLiteral {
        PropLiteral { pred: p.into(), args: vec![Term::var(v)] }
    }

    fn assertion(head: Atom, pre: PropFormula, post: PropFormula) -> PredAssertion {
        PredAssertion { head, pre, post, span: Span::default() }
    }

    #[test]
    fn conditions_are_calls_plus_one_success_each() {
        let head = Atom::new("take", vec![Term::var("N"), Term::var("Xs"), Term::var("Ys")]);
        let a1 = assertion(
            head.clone(),
            PropFormula::single(vec![lit("int", "N"), lit("list", "Xs")]),
            PropFormula::single(vec![PropLiteral {
                pred: "prefix".into(),
                args: vec![Term::var("Ys"), Term::var("Xs")],
            }]),
        );
        let a2 = assertion(
            head.clone(),
            PropFormula::single(vec![lit("list", "Xs")]),
            PropFormula::single(vec![lit("list", "Ys")]),
        );
        let mut next = 0;
        let conds = assertion_conditions(&[a1, a2], &mut next);
        assert_eq!(conds.len(), 3);
        assert!(conds[0].is_calls());
        match &conds[0].kind {
            ConditionKind::Calls { pre } => assert_eq!(pre.disjuncts.len(), 2),
            _ => unreachable!(),
        }
        assert_eq!(next, 3);
        let labels: BTreeSet<u32> = conds.iter().map(|c| c.label.0).collect();
        assert_eq!(labels.len(), 3);
    }

    #[test]
    fn instantiation_commutes_with_condition_building() {
        // Conditions of Pi[p] equal the instantiated conditions of Pi.
        let anon_head = Atom::new("_", vec![Term::var("X"), Term::var("Y")]);
        let prop = PredicateProperty {
            name: "p_nat_nat".into(),
            arity: 2,
            assertions: vec![assertion(
                anon_head,
                PropFormula::single(vec![lit("nat", "X")]),
                PropFormula::single(vec![lit("nat", "Y")]),
            )],
            span: Span::default(),
        };
        let p = PredKey::new("n2n", 2);
        let inst = prop.instantiate(&p);
        let mut n1 = 0;
        let direct = assertion_conditions(&inst, &mut n1);
        let mut n2 = 0;
        let via_anon = assertion_conditions(&prop.assertions, &mut n2);
        assert_eq!(direct.len(), via_anon.len());
        for (d, v) in direct.iter().zip(&via_anon) {
            assert_eq!(d.label, v.label);
            // Same structure once the head predicate is ignored.
            match (&d.kind, &v.kind) {
                (ConditionKind::Calls { pre: a }, ConditionKind::Calls { pre: b }) => {
                    assert_eq!(a, b)
                }
                (
                    ConditionKind::Success { pre: a, post: pa },
                    ConditionKind::Success { pre: b, post: pb },
                ) => {
                    assert_eq!(a, b);
                    assert_eq!(pa, pb);
                }
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn strengthened_set_conjoins_calls_pre() {
        let head = Atom::new("even", vec![Term::var("N")]);
        let mut program = crate::syntax::Program::default();
        program
            .assertions
            .insert(PredKey::new("even", 1), vec![assertion(
                head,
                PropFormula::single(vec![lit("int", "N")]),
                PropFormula::truth(),
            )]);
        let conds = program_conditions(&program);
        let prop = PredicateProperty {
            name: "p_nat".into(),
            arity: 1,
            assertions: vec![assertion(
                Atom::new("_", vec![Term::var("M")]),
                PropFormula::single(vec![lit("nat", "M")]),
                PropFormula::truth(),
            )],
            span: Span::default(),
        };
        let strengthened = conds.strengthened_for(&PredKey::new("even", 1), &prop);
        let calls = strengthened.calls_for(&PredKey::new("even", 1)).unwrap();
        match &calls.kind {
            ConditionKind::Calls { pre } => {
                assert_eq!(pre.disjuncts.len(), 1);
                assert_eq!(pre.disjuncts[0].len(), 2);
                // Both literals constrain the same canonical variable.
                assert_eq!(pre.disjuncts[0][0].args, pre.disjuncts[0][1].args);
            }
            _ => unreachable!(),
        }
        // One extra success condition from the property.
        assert_eq!(strengthened.successes_for(&PredKey::new("even", 1)).len(), 2);
    }
}
