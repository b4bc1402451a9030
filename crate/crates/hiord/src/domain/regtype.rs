//! Regular term types as deterministic top-down tree automata.
//!
//! A type is a finite set of states; state 0 is the root. Each state accepts
//! the union of its alternatives: builtin leaf classes, integer constants,
//! atom constants, and compound shapes with one production per functor
//! (argument positions are independent, so these are tuple-distributive
//! languages). Values are kept in a normal form: leaf classes absorb the
//! constants they cover, unproductive and unreachable states are removed,
//! equivalent states are merged, and states are numbered breadth-first, so
//! structural equality is semantic equality of canonical forms and values
//! work as memo keys.

use crate::syntax::{Name, Term};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// Builtin leaf classes. `Any` is the class of all terms, including
/// variables; the others only contain ground terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Leaf {
    Int,
    Nat,
    Atm,
    Any,
}

pub type FKey = (Name, usize);

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateDef {
    pub leaves: BTreeSet<Leaf>,
    pub ints: BTreeSet<i64>,
    pub atoms: BTreeSet<Name>,
    pub compounds: BTreeMap<FKey, Vec<usize>>,
}

impl StateDef {
    fn is_void(&self) -> bool {
        self.leaves.is_empty()
            && self.ints.is_empty()
            && self.atoms.is_empty()
            && self.compounds.is_empty()
    }

    fn accepts_int(&self, i: i64) -> bool {
        self.leaves.contains(&Leaf::Any)
            || self.leaves.contains(&Leaf::Int)
            || (self.leaves.contains(&Leaf::Nat) && i >= 0)
            || self.ints.contains(&i)
    }

    fn accepts_atom(&self, a: &str) -> bool {
        self.leaves.contains(&Leaf::Any)
            || self.leaves.contains(&Leaf::Atm)
            || self.atoms.contains(a)
    }

    fn int_like(&self) -> bool {
        self.leaves.contains(&Leaf::Any) || self.leaves.contains(&Leaf::Int)
    }

    fn nat_like(&self) -> bool {
        self.int_like() || self.leaves.contains(&Leaf::Nat)
    }

    fn atm_like(&self) -> bool {
        self.leaves.contains(&Leaf::Any) || self.leaves.contains(&Leaf::Atm)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RegType {
    states: Vec<StateDef>,
}

impl RegType {
    // -------------------------------------------------------- constructors --

    pub fn bottom() -> RegType {
        RegType { states: vec![StateDef::default()] }
    }

    pub fn any() -> RegType {
        Self::leaf(Leaf::Any)
    }

    pub fn int() -> RegType {
        Self::leaf(Leaf::Int)
    }

    pub fn nat() -> RegType {
        Self::leaf(Leaf::Nat)
    }

    pub fn atm() -> RegType {
        Self::leaf(Leaf::Atm)
    }

    fn leaf(l: Leaf) -> RegType {
        let mut s = StateDef::default();
        s.leaves.insert(l);
        RegType { states: vec![s] }
    }

    pub fn atoms(names: impl IntoIterator<Item = Name>) -> RegType {
        let mut s = StateDef::default();
        s.atoms.extend(names);
        normalize(vec![s])
    }

    /// The singleton type of one term; variables widen to `Any`.
    pub fn singleton(t: &Term) -> RegType {
        fn go(t: &Term, states: &mut Vec<StateDef>) -> usize {
            let id = states.len();
            states.push(StateDef::default());
            match t {
                Term::Var(_) => {
                    states[id].leaves.insert(Leaf::Any);
                }
                Term::Int(i) => {
                    states[id].ints.insert(*i);
                }
                Term::Compound(f, args) if args.is_empty() => {
                    states[id].atoms.insert(f.clone());
                }
                Term::Compound(f, args) => {
                    let refs: Vec<usize> = args.iter().map(|a| go(a, states)).collect();
                    states[id].compounds.insert((f.clone(), args.len()), refs);
                }
            }
            id
        }
        let mut states = Vec::new();
        let root = go(t, &mut states);
        debug_assert_eq!(root, 0);
        normalize(states)
    }

    /// The type of `f(a1, ..., an)` terms with the given argument types.
    pub fn compound(f: &str, args: &[RegType]) -> RegType {
        let mut states = vec![StateDef::default()];
        let mut refs = Vec::new();
        for a in args {
            let offset = states.len();
            refs.push(offset);
            for s in &a.states {
                let mut s = s.clone();
                for rs in s.compounds.values_mut() {
                    for r in rs.iter_mut() {
                        *r += offset;
                    }
                }
                states.push(s);
            }
        }
        states[0].compounds.insert((f.to_string(), args.len()), refs);
        normalize(states)
    }

    /// Lists whose elements inhabit `elem`.
    pub fn list_of(elem: &RegType) -> RegType {
        let mut states = vec![StateDef::default()];
        states[0].atoms.insert("[]".into());
        let offset = 1;
        for s in &elem.states {
            let mut s = s.clone();
            for refs in s.compounds.values_mut() {
                for r in refs.iter_mut() {
                    *r += offset;
                }
            }
            states.push(s);
        }
        states[0].compounds.insert((".".into(), 2), vec![offset, 0]);
        normalize(states)
    }

    pub(crate) fn from_states(states: Vec<StateDef>) -> RegType {
        normalize(states)
    }

    // ------------------------------------------------------------- queries --

    pub fn states(&self) -> &[StateDef] {
        &self.states
    }

    pub fn is_empty(&self) -> bool {
        self.states[0].is_void()
    }

    pub fn is_any(&self) -> bool {
        self.states[0].leaves.contains(&Leaf::Any)
    }

    /// Membership. Only `Any` admits non-ground terms.
    pub fn member(&self, t: &Term) -> bool {
        self.member_at(0, t)
    }

    fn member_at(&self, state: usize, t: &Term) -> bool {
        let s = &self.states[state];
        if s.leaves.contains(&Leaf::Any) {
            return true;
        }
        match t {
            Term::Var(_) => false,
            Term::Int(i) => s.accepts_int(*i),
            Term::Compound(f, args) if args.is_empty() => s.accepts_atom(f),
            Term::Compound(f, args) => match s.compounds.get(&(f.clone(), args.len())) {
                Some(refs) => {
                    args.iter().zip(refs).all(|(a, &r)| self.member_at(r, a))
                }
                None => false,
            },
        }
    }

    /// Language inclusion via pairwise simulation. Sound and complete for
    /// this deterministic, normalized representation.
    pub fn subtype(&self, other: &RegType) -> bool {
        let mut assumed = BTreeSet::new();
        self.le_at(0, other, 0, &mut assumed)
    }

    fn le_at(
        &self,
        ia: usize,
        other: &RegType,
        ib: usize,
        assumed: &mut BTreeSet<(usize, usize)>,
    ) -> bool {
        if !assumed.insert((ia, ib)) {
            return true;
        }
        let a = &self.states[ia];
        let b = &other.states[ib];
        if b.leaves.contains(&Leaf::Any) {
            return true;
        }
        if a.leaves.contains(&Leaf::Any) {
            return false;
        }
        if a.leaves.contains(&Leaf::Int) && !b.leaves.contains(&Leaf::Int) {
            return false;
        }
        if a.leaves.contains(&Leaf::Nat) && !b.nat_like() {
            return false;
        }
        if a.leaves.contains(&Leaf::Atm) && !b.leaves.contains(&Leaf::Atm) {
            return false;
        }
        if !a.ints.iter().all(|&i| b.accepts_int(i)) {
            return false;
        }
        if !a.atoms.iter().all(|n| b.accepts_atom(n)) {
            return false;
        }
        for (f, aargs) in &a.compounds {
            match b.compounds.get(f) {
                Some(bargs) => {
                    for (&x, &y) in aargs.iter().zip(bargs) {
                        if !self.le_at(x, other, y, assumed) {
                            return false;
                        }
                    }
                }
                None => return false,
            }
        }
        true
    }

    pub fn same_language(&self, other: &RegType) -> bool {
        self == other || (self.subtype(other) && other.subtype(self))
    }

    fn extract_from(&self, start: usize) -> RegType {
        let mut order: BTreeMap<usize, usize> = BTreeMap::new();
        let mut out: Vec<StateDef> = Vec::new();
        let mut stack = vec![start];
        order.insert(start, 0);
        out.push(StateDef::default());
        while let Some(i) = stack.pop() {
            let slot = order[&i];
            let mut def = self.states[i].clone();
            for refs in def.compounds.values_mut() {
                for r in refs.iter_mut() {
                    let id = *order.entry(*r).or_insert_with(|| {
                        out.push(StateDef::default());
                        stack.push(*r);
                        out.len() - 1
                    });
                    *r = id;
                }
            }
            out[slot] = def;
        }
        normalize(out)
    }

    /// Argument types of the root's `f/arity` production; `None` when no
    /// such term inhabits the type.
    pub fn functor_args(&self, f: &str, arity: usize) -> Option<Vec<RegType>> {
        let root = &self.states[0];
        if root.leaves.contains(&Leaf::Any) {
            return Some(vec![RegType::any(); arity]);
        }
        root.compounds
            .get(&(f.to_string(), arity))
            .map(|refs| refs.iter().map(|&r| self.extract_from(r)).collect())
    }

    /// The atom constants the type admits, when that set is finite;
    /// `None` if the type covers all atoms.
    pub fn root_atom_names(&self) -> Option<BTreeSet<Name>> {
        let root = &self.states[0];
        if root.leaves.contains(&Leaf::Any) || root.leaves.contains(&Leaf::Atm) {
            None
        } else {
            Some(root.atoms.clone())
        }
    }

    /// Human-readable form: named leaves, alternative lists, `list(T)`
    /// sugar where the shape allows, `...` on back references.
    pub fn render(&self) -> String {
        if self.is_empty() {
            return "bot".to_string();
        }
        let mut on_path = vec![false; self.states.len()];
        self.render_state(0, &mut on_path)
    }

    fn render_state(&self, i: usize, on_path: &mut Vec<bool>) -> String {
        if on_path[i] {
            return "...".to_string();
        }
        let s = &self.states[i];
        if s.leaves.contains(&Leaf::Any) {
            return "term".to_string();
        }
        // list(E): exactly nil plus cons cells recursing on the tail.
        if s.leaves.is_empty()
            && s.ints.is_empty()
            && s.atoms.iter().eq(["[]"])
            && s.compounds.len() == 1
        {
            if let Some(refs) = s.compounds.get(&(".".to_string(), 2)) {
                if refs[1] == i {
                    on_path[i] = true;
                    let e = self.render_state(refs[0], on_path);
                    on_path[i] = false;
                    return format!("list({e})");
                }
            }
        }
        on_path[i] = true;
        let mut alts: Vec<String> = Vec::new();
        for l in &s.leaves {
            alts.push(
                match l {
                    Leaf::Int => "int",
                    Leaf::Nat => "nat",
                    Leaf::Atm => "atm",
                    Leaf::Any => "term",
                }
                .to_string(),
            );
        }
        for n in &s.ints {
            alts.push(n.to_string());
        }
        for a in &s.atoms {
            alts.push(a.clone());
        }
        for ((f, _), refs) in &s.compounds {
            let args: Vec<String> =
                refs.iter().map(|&r| self.render_state(r, on_path)).collect();
            if f == "." && refs.len() == 2 {
                alts.push(format!("[{}|{}]", args[0], args[1]));
            } else {
                alts.push(format!("{}({})", f, args.join(",")));
            }
        }
        on_path[i] = false;
        if alts.len() == 1 {
            alts.pop().unwrap()
        } else {
            format!("({})", alts.join("|"))
        }
    }

    // ------------------------------------------------------------- algebra --

    /// Exact intersection (the class is closed under it).
    pub fn intersect(&self, other: &RegType) -> RegType {
        // Product over state pairs; None stands for a virtual all-accepting
        // state so one side's Any can expose the other side's productions.
        type Key = (Option<usize>, Option<usize>);
        let mut map: BTreeMap<Key, usize> = BTreeMap::new();
        let mut out: Vec<StateDef> = Vec::new();
        let mut todo: VecDeque<Key> = VecDeque::new();
        let key0 = (Some(0), Some(0));
        map.insert(key0, 0);
        out.push(StateDef::default());
        todo.push_back(key0);
        let any_state = StateDef {
            leaves: [Leaf::Any].into_iter().collect(),
            ..StateDef::default()
        };
        while let Some((ka, kb)) = todo.pop_front() {
            let a = ka.map(|i| &self.states[i]).unwrap_or(&any_state);
            let b = kb.map(|i| &other.states[i]).unwrap_or(&any_state);
            let id = map[&(ka, kb)];
            let mut def = StateDef::default();
            if a.leaves.contains(&Leaf::Any) && b.leaves.contains(&Leaf::Any) {
                def.leaves.insert(Leaf::Any);
            }
            if a.int_like() && b.int_like() {
                def.leaves.insert(Leaf::Int);
            } else if a.nat_like() && b.nat_like() {
                def.leaves.insert(Leaf::Nat);
            }
            if a.atm_like() && b.atm_like() {
                def.leaves.insert(Leaf::Atm);
            }
            for &i in a.ints.iter().chain(&b.ints) {
                if a.accepts_int(i) && b.accepts_int(i) && !def.accepts_int(i) {
                    def.ints.insert(i);
                }
            }
            for n in a.atoms.iter().chain(&b.atoms) {
                if a.accepts_atom(n) && b.accepts_atom(n) && !def.accepts_atom(n) {
                    def.atoms.insert(n.clone());
                }
            }
            let fa: BTreeSet<&FKey> = a.compounds.keys().collect();
            let fb: BTreeSet<&FKey> = b.compounds.keys().collect();
            let fs: BTreeSet<&FKey> = if a.leaves.contains(&Leaf::Any) {
                fb.clone()
            } else if b.leaves.contains(&Leaf::Any) {
                fa.clone()
            } else {
                fa.intersection(&fb).copied().collect()
            };
            for f in fs {
                let aargs: Vec<Option<usize>> = match a.compounds.get(f) {
                    Some(v) => v.iter().map(|&x| Some(x)).collect(),
                    None => vec![None; f.1],
                };
                let bargs: Vec<Option<usize>> = match b.compounds.get(f) {
                    Some(v) => v.iter().map(|&x| Some(x)).collect(),
                    None => vec![None; f.1],
                };
                let mut refs = Vec::new();
                for (x, y) in aargs.into_iter().zip(bargs) {
                    let k = (x, y);
                    let id = *map.entry(k).or_insert_with(|| {
                        out.push(StateDef::default());
                        todo.push_back(k);
                        out.len() - 1
                    });
                    refs.push(id);
                }
                def.compounds.insert(f.clone(), refs);
            }
            out[id] = def;
        }
        normalize(out)
    }

    /// Join, with an exactness flag: true means the result is the union of
    /// the two languages, false that it may be a proper over-approximation.
    pub fn join(&self, other: &RegType) -> (RegType, bool) {
        if self.subtype(other) {
            return (other.clone(), true);
        }
        if other.subtype(self) {
            return (self.clone(), true);
        }
        type Key = (Option<usize>, Option<usize>);
        let mut map: BTreeMap<Key, usize> = BTreeMap::new();
        let mut out: Vec<StateDef> = Vec::new();
        let mut todo: VecDeque<Key> = VecDeque::new();
        let mut exact = true;
        let key0 = (Some(0), Some(0));
        map.insert(key0, 0);
        out.push(StateDef::default());
        todo.push_back(key0);
        let void = StateDef::default();
        while let Some((ka, kb)) = todo.pop_front() {
            let a = ka.map(|i| &self.states[i]).unwrap_or(&void);
            let b = kb.map(|i| &other.states[i]).unwrap_or(&void);
            let id = map[&(ka, kb)];
            let mut def = StateDef::default();
            def.leaves.extend(a.leaves.iter().chain(b.leaves.iter()));
            def.ints.extend(a.ints.iter().chain(b.ints.iter()));
            def.atoms.extend(a.atoms.iter().cloned().chain(b.atoms.iter().cloned()));
            let mut alloc = |k: Key, out: &mut Vec<StateDef>, todo: &mut VecDeque<Key>| {
                *map.entry(k).or_insert_with(|| {
                    out.push(StateDef::default());
                    todo.push_back(k);
                    out.len() - 1
                })
            };
            let fa: BTreeSet<FKey> = a.compounds.keys().cloned().collect();
            let fb: BTreeSet<FKey> = b.compounds.keys().cloned().collect();
            for f in fa.union(&fb) {
                let refs = match (a.compounds.get(f), b.compounds.get(f)) {
                    (Some(av), None) => av
                        .iter()
                        .map(|&x| alloc((Some(x), None), &mut out, &mut todo))
                        .collect(),
                    (None, Some(bv)) => bv
                        .iter()
                        .map(|&y| alloc((None, Some(y)), &mut out, &mut todo))
                        .collect(),
                    (Some(av), Some(bv)) => {
                        // The pointwise product is exact only when the union
                        // of the two argument rectangles is a rectangle:
                        // languages differ at no more than one position, or
                        // one rectangle contains the other.
                        if ka.is_some() && kb.is_some() {
                            let differing = av
                                .iter()
                                .zip(bv)
                                .filter(|(&x, &y)| {
                                    !(sub_state(self, x, other, y)
                                        && sub_state(other, y, self, x))
                                })
                                .count();
                            if differing > 1 {
                                let a_in_b = av
                                    .iter()
                                    .zip(bv)
                                    .all(|(&x, &y)| sub_state(self, x, other, y));
                                let b_in_a = av
                                    .iter()
                                    .zip(bv)
                                    .all(|(&x, &y)| sub_state(other, y, self, x));
                                if !a_in_b && !b_in_a {
                                    exact = false;
                                }
                            }
                        }
                        av.iter()
                            .zip(bv)
                            .map(|(&x, &y)| alloc((Some(x), Some(y)), &mut out, &mut todo))
                            .collect()
                    }
                    (None, None) => unreachable!(),
                };
                def.compounds.insert(f.clone(), refs);
            }
            out[id] = def;
        }
        (normalize(out), exact)
    }

    /// Shape widening: fold a state into a same-signature ancestor, then
    /// close under determinism (position-wise unions). Only ever grows the
    /// language. Collapses term chains built by iteration into recursive
    /// types such as lists.
    pub fn widen_shape(&self) -> RegType {
        let n = self.states.len();
        if n <= 1 {
            return self.clone();
        }
        let mut uf: Vec<usize> = (0..n).collect();
        fn find(uf: &mut Vec<usize>, i: usize) -> usize {
            if uf[i] != i {
                let r = find(uf, uf[i]);
                uf[i] = r;
                r
            } else {
                i
            }
        }
        let sig = |s: &StateDef| {
            (
                s.leaves.clone(),
                s.ints.clone(),
                s.atoms.clone(),
                s.compounds.keys().cloned().collect::<Vec<_>>(),
            )
        };
        let sigs: Vec<_> = self.states.iter().map(sig).collect();
        // DFS from the root, folding descendants into same-signature
        // ancestors on the current path.
        let mut visited = vec![false; n];
        let mut path: Vec<usize> = Vec::new();
        let mut stack: Vec<(usize, bool)> = vec![(0, false)];
        while let Some((i, leaving)) = stack.pop() {
            if leaving {
                path.pop();
                continue;
            }
            if visited[i] {
                continue;
            }
            visited[i] = true;
            if let Some(&anc) = path.iter().find(|&&p| sigs[p] == sigs[i]) {
                let (ri, ra) = (find(&mut uf, i), find(&mut uf, anc));
                if ri != ra {
                    uf[ri] = ra;
                }
            }
            path.push(i);
            stack.push((i, true));
            for refs in self.states[i].compounds.values() {
                for &r in refs {
                    stack.push((r, false));
                }
            }
        }
        // Determinism closure: within a class, all productions for the same
        // functor must agree, so union their argument classes position-wise.
        loop {
            let mut changed = false;
            let mut per_class: BTreeMap<usize, BTreeMap<FKey, Vec<usize>>> = BTreeMap::new();
            for i in 0..n {
                let c = find(&mut uf, i);
                for (f, refs) in &self.states[i].compounds {
                    let entry = per_class
                        .entry(c)
                        .or_default()
                        .entry(f.clone())
                        .or_insert_with(|| refs.iter().map(|&r| find(&mut uf, r)).collect());
                    for (pos, &r) in refs.iter().enumerate() {
                        let rc = find(&mut uf, r);
                        let prev = find(&mut uf, entry[pos]);
                        if prev != rc {
                            uf[rc.max(prev)] = rc.min(prev);
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let mut reps: BTreeMap<usize, usize> = BTreeMap::new();
        let mut out: Vec<StateDef> = Vec::new();
        for i in 0..n {
            let c = find(&mut uf, i);
            reps.entry(c).or_insert_with(|| {
                out.push(StateDef::default());
                out.len() - 1
            });
        }
        for i in 0..n {
            let c = find(&mut uf, i);
            let tgt = reps[&c];
            let src = &self.states[i];
            out[tgt].leaves.extend(src.leaves.iter());
            out[tgt].ints.extend(src.ints.iter());
            out[tgt].atoms.extend(src.atoms.iter().cloned());
            for (f, refs) in &src.compounds {
                let mapped: Vec<usize> =
                    refs.iter().map(|&r| reps[&find(&mut uf, r)]).collect();
                out[tgt].compounds.insert(f.clone(), mapped);
            }
        }
        let root = reps[&find(&mut uf, 0)];
        if root != 0 {
            out.swap(0, root);
            for s in out.iter_mut() {
                for refs in s.compounds.values_mut() {
                    for r in refs.iter_mut() {
                        if *r == 0 {
                            *r = root;
                        } else if *r == root {
                            *r = 0;
                        }
                    }
                }
            }
        }
        normalize(out)
    }

    /// Widening with two backstops: large constant sets promote to their
    /// covering leaf class, and beyond 64 states argument references deeper
    /// than two levels from the root degrade to `Any`.
    pub fn widen(&self) -> RegType {
        let mut w = self.widen_shape();
        if w.states.iter().any(|s| s.ints.len() > 8 || s.atoms.len() > 16) {
            let mut states = w.states.clone();
            for s in states.iter_mut() {
                if s.ints.len() > 8 {
                    s.leaves.insert(if s.ints.iter().all(|&i| i >= 0) {
                        Leaf::Nat
                    } else {
                        Leaf::Int
                    });
                    s.ints.clear();
                }
                if s.atoms.len() > 16 {
                    s.leaves.insert(Leaf::Atm);
                    s.atoms.clear();
                }
            }
            w = normalize(states);
        }
        if w.states.len() <= 64 {
            return w;
        }
        let mut depth = vec![usize::MAX; w.states.len()];
        let mut q = VecDeque::new();
        depth[0] = 0;
        q.push_back(0);
        while let Some(i) = q.pop_front() {
            for refs in w.states[i].compounds.values() {
                for &r in refs {
                    if depth[r] == usize::MAX {
                        depth[r] = depth[i] + 1;
                        q.push_back(r);
                    }
                }
            }
        }
        let any_id = w.states.len();
        let mut states = w.states.clone();
        states.push(StateDef {
            leaves: [Leaf::Any].into_iter().collect(),
            ..StateDef::default()
        });
        for s in states.iter_mut() {
            for refs in s.compounds.values_mut() {
                for r in refs.iter_mut() {
                    if depth[*r] >= 2 {
                        *r = any_id;
                    }
                }
            }
        }
        normalize(states)
    }

    // ---------------------------------------------------------- enumeration --

    /// Deterministically enumerate members up to a nesting depth, smallest
    /// first within each alternative class. Builtin classes contribute fixed
    /// samples: Int yields -2..2, Nat yields 0..2, Atm yields a, b, c, and
    /// Any yields a and 0. Capped at 500 terms per state and depth.
    pub fn enumerate(&self, depth: usize) -> Vec<Term> {
        let mut memo = BTreeMap::new();
        self.enumerate_at(0, depth, &mut memo)
    }

    fn enumerate_at(
        &self,
        state: usize,
        depth: usize,
        memo: &mut BTreeMap<(usize, usize), Vec<Term>>,
    ) -> Vec<Term> {
        const CAP: usize = 500;
        if depth == 0 {
            return Vec::new();
        }
        if let Some(v) = memo.get(&(state, depth)) {
            return v.clone();
        }
        // Break cycles: a state being expanded at this depth yields nothing
        // extra for its own expansion.
        memo.insert((state, depth), Vec::new());
        let s = &self.states[state];
        let mut out: Vec<Term> = Vec::new();
        let push = |t: Term, out: &mut Vec<Term>| {
            if out.len() < CAP && !out.contains(&t) {
                out.push(t);
            }
        };
        for l in &s.leaves {
            match l {
                Leaf::Int => {
                    for i in -2..=2 {
                        push(Term::Int(i), &mut out);
                    }
                }
                Leaf::Nat => {
                    for i in 0..=2 {
                        push(Term::Int(i), &mut out);
                    }
                }
                Leaf::Atm => {
                    for n in ["a", "b", "c"] {
                        push(Term::atom(n), &mut out);
                    }
                }
                Leaf::Any => {
                    push(Term::atom("a"), &mut out);
                    push(Term::Int(0), &mut out);
                }
            }
        }
        for &i in &s.ints {
            push(Term::Int(i), &mut out);
        }
        for n in &s.atoms {
            push(Term::atom(n), &mut out);
        }
        for ((f, arity), refs) in &s.compounds {
            let arg_terms: Vec<Vec<Term>> = refs
                .iter()
                .map(|&r| self.enumerate_at(r, depth - 1, memo))
                .collect();
            if arg_terms.iter().any(|v| v.is_empty()) {
                continue;
            }
            let mut idx = vec![0usize; *arity];
            'rows: loop {
                let args: Vec<Term> = idx
                    .iter()
                    .zip(&arg_terms)
                    .map(|(&i, v)| v[i].clone())
                    .collect();
                push(Term::Compound(f.clone(), args), &mut out);
                if out.len() >= CAP {
                    break;
                }
                // Row-major advance.
                for pos in (0..*arity).rev() {
                    idx[pos] += 1;
                    if idx[pos] < arg_terms[pos].len() {
                        continue 'rows;
                    }
                    idx[pos] = 0;
                }
                break;
            }
        }
        memo.insert((state, depth), out.clone());
        out
    }
}

fn sub_state(a: &RegType, ia: usize, b: &RegType, ib: usize) -> bool {
    let mut assumed = BTreeSet::new();
    a.le_at(ia, b, ib, &mut assumed)
}

// -------------------------------------------------------------- normalize --

fn normalize(mut states: Vec<StateDef>) -> RegType {
    if states.is_empty() {
        return RegType::bottom();
    }
    // Leaf absorption.
    for s in states.iter_mut() {
        if s.leaves.contains(&Leaf::Any) {
            s.leaves = [Leaf::Any].into_iter().collect();
            s.ints.clear();
            s.atoms.clear();
            s.compounds.clear();
            continue;
        }
        if s.leaves.contains(&Leaf::Int) {
            s.leaves.remove(&Leaf::Nat);
            s.ints.clear();
        }
        if s.leaves.contains(&Leaf::Nat) {
            s.ints.retain(|&i| i < 0);
        }
        if s.leaves.contains(&Leaf::Atm) {
            s.atoms.clear();
        }
    }
    // Productivity.
    let n = states.len();
    let mut productive = vec![false; n];
    loop {
        let mut changed = false;
        for (i, s) in states.iter().enumerate() {
            if productive[i] {
                continue;
            }
            let p = !s.leaves.is_empty()
                || !s.ints.is_empty()
                || !s.atoms.is_empty()
                || s.compounds.values().any(|refs| refs.iter().all(|&r| productive[r]));
            if p {
                productive[i] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    for (i, s) in states.iter_mut().enumerate() {
        s.compounds.retain(|_, refs| refs.iter().all(|&r| productive[r]));
        if !productive[i] {
            *s = StateDef::default();
        }
    }
    // Merge language-equivalent states: partition by local signature, then
    // refine by production targets until stable. Equal languages imply equal
    // local signatures here because absorption and the productivity trim
    // already ran, so the final partition is exactly language equivalence.
    let mut class = {
        let mut key2c: BTreeMap<(Vec<Leaf>, Vec<i64>, Vec<Name>, Vec<FKey>), usize> =
            BTreeMap::new();
        let mut class = vec![0usize; n];
        for (i, s) in states.iter().enumerate() {
            let key = (
                s.leaves.iter().copied().collect(),
                s.ints.iter().copied().collect(),
                s.atoms.iter().cloned().collect(),
                s.compounds.keys().cloned().collect(),
            );
            let next_id = key2c.len();
            class[i] = *key2c.entry(key).or_insert(next_id);
        }
        class
    };
    loop {
        let mut key2c: BTreeMap<(usize, Vec<Vec<usize>>), usize> = BTreeMap::new();
        let mut next = vec![0usize; n];
        for (i, s) in states.iter().enumerate() {
            let vecs: Vec<Vec<usize>> = s
                .compounds
                .values()
                .map(|refs| refs.iter().map(|&r| class[r]).collect())
                .collect();
            let key = (class[i], vecs);
            let next_id = key2c.len();
            next[i] = *key2c.entry(key).or_insert(next_id);
        }
        let stable = key2c.len() == class.iter().collect::<BTreeSet<_>>().len();
        class = next;
        if stable {
            break;
        }
    }
    let mut rep_of_class: BTreeMap<usize, usize> = BTreeMap::new();
    for i in 0..n {
        rep_of_class.entry(class[i]).or_insert(i);
    }
    let repr: Vec<usize> = (0..n).map(|i| rep_of_class[&class[i]]).collect();
    // Breadth-first renumbering of reachable representatives.
    let mut order: BTreeMap<usize, usize> = BTreeMap::new();
    let mut out: Vec<StateDef> = Vec::new();
    let mut q = VecDeque::new();
    let root = repr[0];
    order.insert(root, 0);
    out.push(StateDef::default());
    q.push_back(root);
    while let Some(i) = q.pop_front() {
        let mut def = states[i].clone();
        for refs in def.compounds.values_mut() {
            for r in refs.iter_mut() {
                let rep = repr[*r];
                let id = *order.entry(rep).or_insert_with(|| {
                    out.push(StateDef::default());
                    q.push_back(rep);
                    out.len() - 1
                });
                *r = id;
            }
        }
        let id = order[&i];
        out[id] = def;
    }
    RegType { states: out }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::list_term;

    fn rwb() -> RegType {
        RegType::atoms(["r".to_string(), "w".to_string(), "b".to_string()])
    }

    #[test]
    fn leaf_orders_and_membership() {
        assert!(RegType::nat().subtype(&RegType::int()));
        assert!(!RegType::int().subtype(&RegType::nat()));
        assert!(RegType::int().subtype(&RegType::any()));
        assert!(RegType::nat().member(&Term::Int(2)));
        assert!(!RegType::nat().member(&Term::Int(-2)));
        assert!(!RegType::atm().member(&Term::Int(0)));
        assert!(RegType::atm().member(&Term::atom("x")));
        // Only Any admits variables.
        assert!(RegType::any().member(&Term::var("X")));
        assert!(!RegType::int().member(&Term::var("X")));
    }

    #[test]
    fn intersection_is_exact_and_detects_emptiness() {
        let i = RegType::int().intersect(&RegType::nat());
        assert!(i.same_language(&RegType::nat()));
        assert!(RegType::atm().intersect(&RegType::int()).is_empty());
        let lge = RegType::atoms(["<".to_string(), ">".to_string(), "=".to_string()]);
        assert!(rwb().intersect(&lge).is_empty());
        let rb = RegType::atoms(["r".to_string(), "b".to_string(), "o".to_string()]);
        let both = rwb().intersect(&rb);
        assert!(both.same_language(&RegType::atoms(["r".to_string(), "b".to_string()])));
    }

    #[test]
    fn join_tracks_exactness() {
        // Single position differs: exact.
        let (j, exact) = RegType::nat().join(&RegType::atm());
        assert!(exact);
        assert!(j.member(&Term::Int(1)) && j.member(&Term::atom("a")));
        // Comparable: exact.
        let (j, exact) = RegType::nat().join(&RegType::int());
        assert!(exact);
        assert!(j.same_language(&RegType::int()));
        // Two independent positions differ: inexact.
        let f_nn = RegType::singleton(&Term::Compound(
            "f".into(),
            vec![Term::Int(1), Term::Int(2)],
        ));
        let f_aa = RegType::singleton(&Term::Compound(
            "f".into(),
            vec![Term::atom("a"), Term::atom("b")],
        ));
        let (j, exact) = f_nn.join(&f_aa);
        assert!(!exact);
        // The over-approximation contains the mixed tuple.
        assert!(j.member(&Term::Compound("f".into(), vec![Term::Int(1), Term::atom("b")])));
    }

    #[test]
    fn list_type_members_and_enumeration() {
        let l = RegType::list_of(&rwb());
        assert!(l.member(&list_term(&[Term::atom("r"), Term::atom("b")])));
        assert!(l.member(&Term::atom("[]")));
        assert!(!l.member(&list_term(&[Term::atom("x")])));
        assert!(!l.member(&Term::var("X")));
        assert_eq!(rwb().enumerate(1).len(), 3);
        // Depth 3 lists over three constants: [] + 3 heads x ([] + 3 x 1).
        assert_eq!(l.enumerate(3).len(), 13);
    }

    #[test]
    fn normalization_gives_canonical_equality() {
        // The same language built two ways compares equal structurally.
        let a = RegType::list_of(&RegType::nat());
        let duplicated = {
            // Extra unreachable and duplicate states collapse away.
            let mut states = vec![StateDef::default(); 4];
            states[0].atoms.insert("[]".into());
            states[0].compounds.insert((".".into(), 2), vec![1, 2]);
            states[1].leaves.insert(Leaf::Nat);
            states[2].atoms.insert("[]".into());
            states[2].compounds.insert((".".into(), 2), vec![1, 0]);
            states[3].leaves.insert(Leaf::Any);
            RegType::from_states(states)
        };
        assert_eq!(a, duplicated);
        // Unproductive recursion normalizes to bottom.
        let mut states = vec![StateDef::default()];
        states[0].compounds.insert(("f".into(), 1), vec![0]);
        assert!(RegType::from_states(states).is_empty());
    }

    #[test]
    fn widening_folds_growing_chains_into_lists() {
        let chain = [
            Term::atom("[]"),
            list_term(&[Term::atom("r")]),
            list_term(&[Term::atom("r"), Term::atom("r")]),
            list_term(&[Term::atom("r"), Term::atom("r"), Term::atom("r")]),
        ];
        let mut acc = RegType::bottom();
        for t in &chain {
            acc = acc.join(&RegType::singleton(t)).0;
        }
        let widened = acc.widen();
        let target = RegType::list_of(&RegType::atoms(["r".to_string()]));
        assert!(acc.subtype(&widened));
        assert!(widened.same_language(&target), "widened: {widened:?}");
        // Widening is inflationary and idempotent here.
        assert_eq!(widened.widen(), widened);
    }

    #[test]
    fn singleton_types_are_exact_for_ground_terms() {
        let t = Term::Compound(
            "pair".into(),
            vec![Term::Int(3), list_term(&[Term::atom("a")])],
        );
        let s = RegType::singleton(&t);
        assert!(s.member(&t));
        assert!(!s.member(&Term::Compound(
            "pair".into(),
            vec![Term::Int(4), list_term(&[Term::atom("a")])],
        )));
        assert_eq!(s.enumerate(4), vec![t]);
    }
}
