//! Constraint stores over the Herbrand domain.
//!
//! A store is a substitution in solved form: acyclic (unification performs
//! the occurs check), so deep resolution always terminates. Entailment of an
//! answer substitution is one-sided matching: the answer's residual
//! (existential) variables may be instantiated, everything else must agree
//! syntactically after resolving both sides in the current store.

use crate::syntax::{Atom, Name, Term};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Store {
    map: BTreeMap<Name, Term>,
}

impl Store {
    pub fn empty() -> Self {
        Store::default()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn bindings(&self) -> impl Iterator<Item = (&Name, &Term)> {
        self.map.iter()
    }

    pub fn domain(&self) -> impl Iterator<Item = &Name> {
        self.map.keys()
    }

    /// Follow variable bindings until a non-variable or unbound variable.
    pub fn walk(&self, t: &Term) -> Term {
        let mut t = t.clone();
        while let Term::Var(v) = &t {
            match self.map.get(v) {
                Some(next) => t = next.clone(),
                None => break,
            }
        }
        t
    }

    /// Deep resolution: apply the store exhaustively.
    pub fn resolve(&self, t: &Term) -> Term {
        match self.walk(t) {
            Term::Compound(f, args) => {
                Term::Compound(f, args.iter().map(|a| self.resolve(a)).collect())
            }
            leaf => leaf,
        }
    }

    pub fn resolve_atom(&self, a: &Atom) -> Atom {
        Atom { pred: a.pred.clone(), args: a.args.iter().map(|t| self.resolve(t)).collect() }
    }

    fn occurs(&self, v: &Name, t: &Term) -> bool {
        match self.walk(t) {
            Term::Var(w) => w == *v,
            Term::Int(_) => false,
            Term::Compound(_, args) => args.iter().any(|a| self.occurs(v, a)),
        }
    }

    /// Extend the store so that `a = b` holds. Fails on clash or occurs check.
    pub fn unify_mut(&mut self, a: &Term, b: &Term) -> bool {
        let a = self.walk(a);
        let b = self.walk(b);
        match (a, b) {
            (Term::Var(x), Term::Var(y)) if x == y => true,
            (Term::Var(x), t) | (t, Term::Var(x)) => {
                if self.occurs(&x, &t) {
                    false
                } else {
                    self.map.insert(x, t);
                    true
                }
            }
            (Term::Int(i), Term::Int(j)) => i == j,
            (Term::Compound(f, xs), Term::Compound(g, ys)) => {
                f == g
                    && xs.len() == ys.len()
                    && xs.iter().zip(&ys).all(|(x, y)| self.unify_mut(x, y))
            }
            _ => false,
        }
    }

    pub fn unify(&self, a: &Term, b: &Term) -> Option<Store> {
        let mut s = self.clone();
        if s.unify_mut(a, b) {
            Some(s)
        } else {
            None
        }
    }

    pub fn unify_atoms(&self, a: &Atom, b: &Atom) -> Option<Store> {
        if a.pred != b.pred || a.args.len() != b.args.len() {
            return None;
        }
        let mut s = self.clone();
        for (x, y) in a.args.iter().zip(&b.args) {
            if !s.unify_mut(x, y) {
                return None;
            }
        }
        Some(s)
    }

    /// Restrict to `vars`, deep-resolving each binding. Unbound variables are
    /// dropped: an answer that says nothing about a variable constrains
    /// nothing.
    pub fn project(&self, vars: &BTreeSet<Name>) -> Store {
        let mut map = BTreeMap::new();
        for v in vars {
            let t = self.resolve(&Term::Var(v.clone()));
            if t != Term::Var(v.clone()) {
                map.insert(v.clone(), t);
            }
        }
        Store { map }
    }

    /// Does this store entail the (projected) `answer`, existentially
    /// quantifying answer variables outside `answer_vars`?
    ///
    /// For every binding `v = t` of the answer, `v` resolved here must match
    /// `t`, where residual variables of `t` (those not in `answer_vars`) may
    /// be bound consistently by the match and all other variables must agree
    /// exactly.
    pub fn entails(&self, answer: &Store, answer_vars: &BTreeSet<Name>) -> bool {
        let mut rho: BTreeMap<Name, Term> = BTreeMap::new();
        for (v, t) in &answer.map {
            let subject = self.resolve(&Term::Var(v.clone()));
            if !self.match_pattern(t, &subject, answer_vars, &mut rho) {
                return false;
            }
        }
        true
    }

    fn match_pattern(
        &self,
        pattern: &Term,
        subject: &Term,
        answer_vars: &BTreeSet<Name>,
        rho: &mut BTreeMap<Name, Term>,
    ) -> bool {
        match pattern {
            Term::Var(w) if !answer_vars.contains(w) => {
                // Residual variable: bind consistently.
                match rho.get(w) {
                    Some(prev) => prev == subject,
                    None => {
                        rho.insert(w.clone(), subject.clone());
                        true
                    }
                }
            }
            Term::Var(w) => {
                // Shared variable: both sides resolved in self must agree.
                &self.resolve(&Term::Var(w.clone())) == subject
            }
            Term::Int(i) => matches!(subject, Term::Int(j) if i == j),
            Term::Compound(f, xs) => match subject {
                Term::Compound(g, ys) if f == g && xs.len() == ys.len() => {
                    xs.iter().zip(ys).all(|(x, y)| self.match_pattern(x, y, answer_vars, rho))
                }
                _ => false,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::pretty;

    fn v(n: &str) -> Term {
        Term::Var(n.into())
    }

    fn parse_term_str(s: &str) -> Term {
        // Lean on the program parser for term syntax in tests.
        let p = crate::parser::parse_program(&format!("t_({s}).")).unwrap();
        let r = p
            .rules_for(&crate::syntax::PredKey::new("t_", 1))
            .next()
            .unwrap();
        match &r.body[0] {
            crate::syntax::Literal::Constraint(crate::syntax::Constraint::Eq(_, t)) => t.clone(),
            _ => unreachable!(),
        }
    }

    #[test]
    fn occurs_check_rejects_cyclic_binding() {
        let s = Store::empty();
        assert!(s.unify(&v("X"), &parse_term_str("f(a)")).is_some());
        let mut s2 = Store::empty();
        assert!(s2.unify_mut(&v("X"), &v("Y")));
        assert!(!s2.unify_mut(&v("Y"), &Term::Compound("f".into(), vec![v("X")])));
    }

    #[test]
    fn resolve_is_deep_and_idempotent() {
        let mut s = Store::empty();
        assert!(s.unify_mut(&v("L"), &parse_term_str("[1|M]")));
        assert!(s.unify_mut(&v("M"), &parse_term_str("[]")));
        let r = s.resolve(&v("L"));
        assert_eq!(pretty::term(&r), "[1]");
        assert_eq!(s.resolve(&r), r);
    }

    #[test]
    fn entailment_instantiates_residual_vars_only() {
        let vars: BTreeSet<Name> = ["L".to_string()].into_iter().collect();
        // Current store: L = [1|M].
        let mut theta = Store::empty();
        assert!(theta.unify_mut(&v("L"), &parse_term_str("[1|M]")));
        // Answer L = [H|T] with residual H, T: entailed.
        let mut cons = Store::empty();
        assert!(cons.unify_mut(&v("L"), &parse_term_str("[H|T]")));
        assert!(theta.entails(&cons.project(&vars), &vars));
        // Answer L = []: not entailed.
        let mut nil = Store::empty();
        assert!(nil.unify_mut(&v("L"), &parse_term_str("[]")));
        assert!(!theta.entails(&nil.project(&vars), &vars));
        // Unbound L entails nothing but the empty answer.
        let free = Store::empty();
        assert!(free.entails(&Store::empty(), &vars));
        assert!(!free.entails(&cons.project(&vars), &vars));
    }

    #[test]
    fn entailment_matching_is_consistent() {
        let vars: BTreeSet<Name> = ["X".to_string()].into_iter().collect();
        let mut pat = Store::empty();
        assert!(pat.unify_mut(&v("X"), &parse_term_str("f(Y,Y)")));
        let answer = pat.project(&vars);
        let mut same = Store::empty();
        assert!(same.unify_mut(&v("X"), &parse_term_str("f(a,a)")));
        assert!(same.entails(&answer, &vars));
        let mut diff = Store::empty();
        assert!(diff.unify_mut(&v("X"), &parse_term_str("f(a,b)")));
        assert!(!diff.entails(&answer, &vars));
    }

    #[test]
    fn shared_vars_must_agree_exactly() {
        let vars: BTreeSet<Name> = ["X".into(), "Z".into()].into_iter().collect();
        // Answer: X = f(Z) with Z shared (in answer_vars).
        let mut a = Store::empty();
        assert!(a.unify_mut(&v("X"), &Term::Compound("f".into(), vec![v("Z")])));
        let answer = a.project(&vars);
        let mut good = Store::empty();
        assert!(good.unify_mut(&v("X"), &Term::Compound("f".into(), vec![v("Z")])));
        assert!(good.entails(&answer, &vars));
        let mut bad = Store::empty();
        assert!(bad.unify_mut(&v("X"), &parse_term_str("f(a)")));
        // Z unbound here, so X = f(Z) does not hold.
        assert!(!bad.entails(&answer, &vars));
        // But binding Z = a as well makes it hold.
        assert!(bad.unify_mut(&v("Z"), &Term::atom("a")));
        assert!(bad.entails(&answer, &vars));
    }

    #[test]
    fn projection_drops_unbound_and_resolves_deep() {
        let mut s = Store::empty();
        assert!(s.unify_mut(&v("X"), &v("Y")));
        assert!(s.unify_mut(&v("Y"), &Term::atom("a")));
        let vars: BTreeSet<Name> = ["X".into(), "U".into()].into_iter().collect();
        let p = s.project(&vars);
        assert_eq!(p.map.len(), 1);
        assert_eq!(p.map["X"], Term::atom("a"));
    }
}
