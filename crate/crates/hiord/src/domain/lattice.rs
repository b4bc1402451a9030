//! Finite lattices loaded from text files.
//!
//! Format (whitespace and `%` comments are free):
//!
//! ```text
//! lattice {
//!   elems: [bot, zero, nat, negz, int, atm, top];
//!   edges: [bot < zero, zero < nat, nat < int, int < top];
//! }
//! ```
//!
//! Edges declare the order (any relation whose reflexive-transitive closure
//! is intended; covers suffice). Loading verifies the result is a lattice:
//! antisymmetry and a unique meet and join for every pair.

use crate::syntax::Name;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LatticeError {
    #[error("lattice parse error: {0}")]
    Parse(String),
    #[error("duplicate element {0}")]
    Duplicate(Name),
    #[error("edge mentions undeclared element {0}")]
    Undeclared(Name),
    #[error("order is cyclic through {0}")]
    Cyclic(Name),
    #[error("elements {0} and {1} have no unique {2}")]
    NotALattice(Name, Name, &'static str),
}

#[derive(Clone, Debug)]
pub struct FiniteLattice {
    pub elems: Vec<Name>,
    index: BTreeMap<Name, usize>,
    leq: Vec<Vec<bool>>,
    meet: Vec<Vec<usize>>,
    join: Vec<Vec<usize>>,
    pub bot: usize,
    pub top: usize,
}

impl FiniteLattice {
    pub fn parse(src: &str) -> Result<FiniteLattice, LatticeError> {
        let (elems, edges) = parse_file(src)?;
        FiniteLattice::build(elems, edges)
    }

    pub fn build(
        elems: Vec<Name>,
        edges: Vec<(Name, Name)>,
    ) -> Result<FiniteLattice, LatticeError> {
        let n = elems.len();
        if n == 0 {
            return Err(LatticeError::Parse("no elements declared".into()));
        }
        let mut index = BTreeMap::new();
        for (i, e) in elems.iter().enumerate() {
            if index.insert(e.clone(), i).is_some() {
                return Err(LatticeError::Duplicate(e.clone()));
            }
        }
        let mut leq = vec![vec![false; n]; n];
        for (i, row) in leq.iter_mut().enumerate() {
            row[i] = true;
        }
        for (a, b) in &edges {
            let ia = *index.get(a).ok_or_else(|| LatticeError::Undeclared(a.clone()))?;
            let ib = *index.get(b).ok_or_else(|| LatticeError::Undeclared(b.clone()))?;
            leq[ia][ib] = true;
        }
        // Reflexive-transitive closure.
        for k in 0..n {
            for i in 0..n {
                if leq[i][k] {
                    for j in 0..n {
                        if leq[k][j] {
                            leq[i][j] = true;
                        }
                    }
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                if i != j && leq[i][j] && leq[j][i] {
                    return Err(LatticeError::Cyclic(elems[i].clone()));
                }
            }
        }
        let mut meet = vec![vec![0; n]; n];
        let mut join = vec![vec![0; n]; n];
        for a in 0..n {
            for b in 0..n {
                meet[a][b] = bound(&leq, n, a, b, true)
                    .ok_or_else(|| LatticeError::NotALattice(
                        elems[a].clone(),
                        elems[b].clone(),
                        "greatest lower bound",
                    ))?;
                join[a][b] = bound(&leq, n, a, b, false)
                    .ok_or_else(|| LatticeError::NotALattice(
                        elems[a].clone(),
                        elems[b].clone(),
                        "least upper bound",
                    ))?;
            }
        }
        let mut bot = 0;
        let mut top = 0;
        for i in 0..n {
            bot = meet[bot][i];
            top = join[top][i];
        }
        Ok(FiniteLattice { elems, index, leq, meet, join, bot, top })
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn elem(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, i: usize) -> &Name {
        &self.elems[i]
    }

    pub fn leq(&self, a: usize, b: usize) -> bool {
        self.leq[a][b]
    }

    pub fn meet(&self, a: usize, b: usize) -> usize {
        self.meet[a][b]
    }

    pub fn join(&self, a: usize, b: usize) -> usize {
        self.join[a][b]
    }

    /// Join with an exactness flag: certain only when comparable.
    pub fn join_exact(&self, a: usize, b: usize) -> (usize, bool) {
        (self.join[a][b], self.leq(a, b) || self.leq(b, a))
    }
}

/// Greatest lower / least upper bound of a pair, None if not unique.
fn bound(leq: &[Vec<bool>], n: usize, a: usize, b: usize, lower: bool) -> Option<usize> {
    let below = |x: usize, y: usize| if lower { leq[x][y] } else { leq[y][x] };
    let bounds: Vec<usize> =
        (0..n).filter(|&c| below(c, a) && below(c, b)).collect();
    let mut best: Option<usize> = None;
    'cand: for &c in &bounds {
        for &d in &bounds {
            if !below(d, c) {
                continue 'cand;
            }
        }
        if best.is_some() {
            return None;
        }
        best = Some(c);
    }
    best
}

// ------------------------------------------------------------------ parse --

fn parse_file(src: &str) -> Result<(Vec<Name>, Vec<(Name, Name)>), LatticeError> {
    let mut toks = Vec::new();
    let mut chars = src.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if c == '%' {
            while let Some(&c) = chars.peek() {
                if c == '\n' {
                    break;
                }
                chars.next();
            }
        } else if c.is_ascii_alphanumeric() || c == '_' {
            let mut s = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    s.push(c);
                    chars.next();
                } else {
                    break;
                }
            }
            toks.push(s);
        } else if "{}[]:;,<".contains(c) {
            chars.next();
            toks.push(c.to_string());
        } else {
            return Err(LatticeError::Parse(format!("unexpected character {c:?}")));
        }
    }
    let mut pos = 0;
    let expect = |want: &str, pos: &mut usize| -> Result<(), LatticeError> {
        if toks.get(*pos).map(String::as_str) == Some(want) {
            *pos += 1;
            Ok(())
        } else {
            Err(LatticeError::Parse(format!(
                "expected {want:?}, found {:?}",
                toks.get(*pos)
            )))
        }
    };
    expect("lattice", &mut pos)?;
    expect("{", &mut pos)?;
    expect("elems", &mut pos)?;
    expect(":", &mut pos)?;
    expect("[", &mut pos)?;
    let mut elems = Vec::new();
    while toks.get(pos).map(String::as_str) != Some("]") {
        let e = toks
            .get(pos)
            .ok_or_else(|| LatticeError::Parse("unterminated element list".into()))?;
        elems.push(e.clone());
        pos += 1;
        if toks.get(pos).map(String::as_str) == Some(",") {
            pos += 1;
        }
    }
    pos += 1;
    expect(";", &mut pos)?;
    expect("edges", &mut pos)?;
    expect(":", &mut pos)?;
    expect("[", &mut pos)?;
    let mut edges = Vec::new();
    while toks.get(pos).map(String::as_str) != Some("]") {
        let a = toks
            .get(pos)
            .ok_or_else(|| LatticeError::Parse("unterminated edge list".into()))?
            .clone();
        pos += 1;
        expect("<", &mut pos)?;
        let b = toks
            .get(pos)
            .ok_or_else(|| LatticeError::Parse("edge missing right element".into()))?
            .clone();
        pos += 1;
        edges.push((a, b));
        if toks.get(pos).map(String::as_str) == Some(",") {
            pos += 1;
        }
    }
    pos += 1;
    expect(";", &mut pos)?;
    expect("}", &mut pos)?;
    Ok((elems, edges))
}

#[cfg(test)]
mod tests {
    use super::*;

    const DIAMOND: &str = "
        lattice {
          elems: [bot, zero, nat, negz, int, atm, top];
          edges: [bot < zero, bot < atm, zero < nat, zero < negz,
                  nat < int, negz < int, int < top, atm < top];
        }
    ";

    #[test]
    fn parses_and_verifies_diamond() {
        let l = FiniteLattice::parse(DIAMOND).unwrap();
        assert_eq!(l.len(), 7);
        assert_eq!(l.name(l.bot), "bot");
        assert_eq!(l.name(l.top), "top");
        let nat = l.elem("nat").unwrap();
        let negz = l.elem("negz").unwrap();
        let zero = l.elem("zero").unwrap();
        let int = l.elem("int").unwrap();
        let atm = l.elem("atm").unwrap();
        assert_eq!(l.meet(nat, negz), zero);
        assert_eq!(l.join(nat, negz), int);
        assert_eq!(l.meet(nat, atm), l.bot);
        assert_eq!(l.join(int, atm), l.top);
        assert!(l.leq(zero, int));
        assert!(!l.leq(atm, int));
        let (j, exact) = l.join_exact(zero, nat);
        assert_eq!(j, nat);
        assert!(exact);
        assert!(!l.join_exact(nat, negz).1);
    }

    #[test]
    fn rejects_non_lattices_and_cycles() {
        // a and b have two maximal lower bounds c and d.
        let bad = "
            lattice {
              elems: [bot, c, d, a, b, top];
              edges: [bot < c, bot < d, c < a, c < b, d < a, d < b,
                      a < top, b < top];
            }
        ";
        assert!(matches!(
            FiniteLattice::parse(bad),
            Err(LatticeError::NotALattice(..))
        ));
        let cyclic = "
            lattice {
              elems: [a, b];
              edges: [a < b, b < a];
            }
        ";
        assert!(matches!(FiniteLattice::parse(cyclic), Err(LatticeError::Cyclic(_))));
        let undeclared = "
            lattice {
              elems: [a];
              edges: [a < b];
            }
        ";
        assert!(matches!(
            FiniteLattice::parse(undeclared),
            Err(LatticeError::Undeclared(_))
        ));
    }

    #[test]
    fn single_element_lattice_is_fine() {
        let l = FiniteLattice::parse("lattice { elems: [x]; edges: []; }").unwrap();
        assert_eq!(l.bot, l.top);
    }
}
