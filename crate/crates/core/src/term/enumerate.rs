use std::collections::BTreeSet;

use super::{Tag, Term};
use crate::error::{Error, Result};

pub const DEFAULT_UNIVERSE_CAP: usize = 2_000_000;

/// Finite stand-in for the value universe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Universe {
    /// Every ground term of depth at most the bound.
    Depth(usize),
    /// An explicit finite set of ground terms.
    Explicit(BTreeSet<Term>),
}

impl Universe {
    pub fn contains(&self, t: &Term) -> bool {
        match self {
            Universe::Depth(d) => t.is_ground() && t.depth() <= *d,
            Universe::Explicit(set) => set.contains(t),
        }
    }

    pub fn max_depth(&self) -> Option<usize> {
        match self {
            Universe::Depth(d) => Some(*d),
            Universe::Explicit(set) => set.iter().map(Term::depth).max(),
        }
    }
}

/// All ground terms over `atoms` and `constructors` with nesting depth at most
/// `max_depth`, in canonical order.
pub fn enumerate_universe(
    atoms: &BTreeSet<Term>,
    constructors: &BTreeSet<Tag>,
    max_depth: usize,
    cap: usize,
) -> Result<BTreeSet<Term>> {
    if let Some(bad) = atoms.iter().find(|a| !a.is_ground()) {
        return Err(Error::Validation(format!("universe seed `{bad}` is not ground")));
    }
    let mut blocks = atoms.clone();
    if constructors.contains(&Tag::Epsilon) {
        blocks.insert(Term::eps());
    }
    enumerate_from_blocks(&blocks, constructors, max_depth, cap)
}

/// Like [`enumerate_universe`] but seeded with arbitrary ground blocks, which
/// may themselves be compound. A generated term has depth
/// `1 + max(child depths)` and is kept when that is within `max_depth`.
pub(crate) fn enumerate_from_blocks(
    blocks: &BTreeSet<Term>,
    constructors: &BTreeSet<Tag>,
    max_depth: usize,
    cap: usize,
) -> Result<BTreeSet<Term>> {
    let ops: Vec<Tag> = constructors
        .iter()
        .copied()
        .filter(|t| t.arity() > 0)
        .collect();
    let mut level: BTreeSet<Term> = blocks
        .iter()
        .filter(|b| b.depth() == 0)
        .cloned()
        .collect();
    for depth in 1..=max_depth {
        let lower: Vec<Term> = level.iter().cloned().collect();
        let n = lower.len();
        let projected = n
            + ops
                .iter()
                .map(|op| match op.arity() {
                    1 => n,
                    _ => n.saturating_mul(n),
                })
                .fold(0usize, usize::saturating_add);
        if projected > cap {
            return Err(Error::Resource {
                what: format!("term universe at depth {depth}"),
                size: projected,
                cap,
            });
        }
        let mut next: BTreeSet<Term> = blocks
            .iter()
            .filter(|b| b.depth() <= depth)
            .cloned()
            .collect();
        next.extend(lower.iter().cloned());
        for op in &ops {
            match op.arity() {
                1 => {
                    for c in &lower {
                        next.insert(Term::intern_unchecked(*op, None, vec![c.clone()]));
                    }
                }
                _ => {
                    for (i, l) in lower.iter().enumerate() {
                        let rights = if *op == Tag::Set2 { &lower[i..] } else { &lower[..] };
                        for r in rights {
                            next.insert(Term::intern_unchecked(*op, None, vec![l.clone(), r.clone()]));
                        }
                    }
                }
            }
        }
        level = next;
    }
    Ok(level)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atoms(names: &[&str]) -> BTreeSet<Term> {
        names.iter().map(|n| Term::atom(n)).collect()
    }

    #[test]
    fn unary_closure() {
        let u = enumerate_universe(&atoms(&["a"]), &BTreeSet::from([Tag::Hash]), 2, 1000).unwrap();
        let a = Term::atom("a");
        assert_eq!(
            u,
            BTreeSet::from([a.clone(), Term::hash(a.clone()), Term::hash(Term::hash(a))])
        );
    }

    #[test]
    fn exhaustive_pairs() {
        let u = enumerate_universe(&atoms(&["a", "b"]), &BTreeSet::from([Tag::Pair]), 1, 1000).unwrap();
        let (a, b) = (Term::atom("a"), Term::atom("b"));
        assert_eq!(
            u,
            BTreeSet::from([
                a.clone(),
                b.clone(),
                Term::pair(a.clone(), a.clone()),
                Term::pair(a.clone(), b.clone()),
                Term::pair(b.clone(), a.clone()),
                Term::pair(b.clone(), b),
            ])
        );
    }

    /// Counting formula for one unary and one binary constructor over `k`
    /// atoms: N(0) = k, N(d) = k + N(d-1) + N(d-1)^2.
    fn count_unary_binary(k: usize, depth: usize) -> usize {
        (0..depth).fold(k, |n, _| k + n + n * n)
    }

    #[test]
    fn key_and_cipher_universe_matches_counting_formula() {
        let u = enumerate_universe(
            &atoms(&["s", "x"]),
            &BTreeSet::from([Tag::PubKey, Tag::Enc]),
            2,
            10_000,
        )
        .unwrap();
        assert_eq!(u.len(), count_unary_binary(2, 2));
        assert_eq!(u.len(), 74);
        assert!(u.contains(&Term::enc(Term::pk(Term::atom("s")), Term::atom("x"))));
    }

    #[test]
    fn set2_counts_unordered_pairs() {
        let u = enumerate_universe(&atoms(&["a", "b", "c"]), &BTreeSet::from([Tag::Set2]), 1, 1000).unwrap();
        assert_eq!(u.len(), 3 + 6);
    }

    #[test]
    fn cap_is_enforced() {
        let err = enumerate_universe(&atoms(&["a", "b", "c"]), &BTreeSet::from([Tag::Pair]), 3, 100)
            .unwrap_err();
        assert!(matches!(err, Error::Resource { .. }));
    }

    #[test]
    fn no_term_is_its_own_proper_subterm() {
        let u = enumerate_universe(
            &atoms(&["s", "x"]),
            &BTreeSet::from([Tag::PubKey, Tag::Enc, Tag::Pair]),
            2,
            100_000,
        )
        .unwrap();
        for t in &u {
            for c in t.children() {
                assert!(!c.subterms().contains(t));
            }
        }
    }
}
