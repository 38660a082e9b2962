//! Seeded random protocols and knowledge-flow instances for property suites.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::engine::{compare, Bounds, Comparison, RuleSet};
use crate::error::{Error, Result};
use crate::knowledge::{KnowledgeState, Principal, PrincipalKind, OSCAR};
use crate::primitives::{builtin_spec, PrimitiveSpec};
use crate::rules::{PatternRule, ProjectedRule};
use crate::term::{enumerate_universe, Tag, Term};

const ATOMS: [&str; 3] = ["a", "b", "c"];
const VARS: [&str; 2] = ["x", "y"];
const SPECS: [&str; 6] = ["t", "h", "e", "sym", "set2", "r"];
const SHAPES: [Tag; 6] = [Tag::Pair, Tag::Hash, Tag::Enc, Tag::PubKey, Tag::Sig, Tag::Set2];

/// Oracle size cap for one comparison attempt.
pub const CASE_CAP: usize = 100_000;

fn build(tag: Tag, mut kids: Vec<Term>) -> Term {
    let second = if tag.arity() == 2 { kids.pop() } else { None };
    let first = kids.pop().expect("at least one child");
    match (tag, second) {
        (Tag::Pair, Some(b)) => Term::pair(first, b),
        (Tag::Enc, Some(b)) => Term::enc(first, b),
        (Tag::Sig, Some(b)) => Term::sig(first, b),
        (Tag::Set2, Some(b)) => Term::set2(first, b),
        (Tag::RuleVal, Some(b)) => Term::rule_val(first, b),
        (Tag::Hash, None) => Term::hash(first),
        (Tag::PubKey, None) => Term::pk(first),
        _ => unreachable!("unsupported shape {tag}"),
    }
}

/// A random term of depth at most `depth` over `leaves`.
fn random_term(rng: &mut impl Rng, leaves: &[Term], depth: usize) -> Term {
    if depth == 0 || rng.gen_bool(0.35) {
        return leaves.choose(rng).expect("nonempty leaves").clone();
    }
    let tag = *SHAPES.choose(rng).expect("nonempty shapes");
    let kids = (0..tag.arity()).map(|_| random_term(rng, leaves, depth - 1)).collect();
    build(tag, kids)
}

/// A random protocol together with some terms to probe for membership.
#[derive(Debug, Clone)]
pub struct RandomProtocol {
    pub specs: Vec<String>,
    pub rules: RuleSet,
    pub x0: BTreeSet<Term>,
    pub probes: Vec<Term>,
}

/// At most three atoms and at most four protocol rule families.
pub fn random_protocol(rng: &mut impl Rng) -> Result<RandomProtocol> {
    let atoms: Vec<Term> = ATOMS[..rng.gen_range(1..=3)].iter().map(|a| Term::atom(a)).collect();
    let mut specs: Vec<String> = SPECS
        .iter()
        .filter(|_| rng.gen_bool(0.4))
        .map(|s| s.to_string())
        .collect();
    if specs.is_empty() {
        specs.push(SPECS.choose(rng).expect("nonempty").to_string());
    }
    let x0: BTreeSet<Term> = (0..rng.gen_range(1..=3)).map(|_| random_term(rng, &atoms, 2)).collect();

    let mut protocol = Vec::new();
    for i in 0..rng.gen_range(0..=4) {
        let mut leaves = atoms.clone();
        leaves.extend(VARS.iter().map(|v| Term::var(v)));
        let premises: Vec<Term> = (0..rng.gen_range(0..=2)).map(|_| random_term(rng, &leaves, 2)).collect();
        let bound: BTreeSet<String> = premises.iter().flat_map(Term::vars).collect();
        let mut usable = atoms.clone();
        usable.extend(bound.iter().map(|v| Term::var(v)));
        let conclusion = random_term(rng, &usable, 2);
        protocol.push(ProjectedRule::new(&format!("p{}", i + 1), "h", premises, conclusion));
    }

    let parsed: Vec<PrimitiveSpec> = specs.iter().filter_map(|s| builtin_spec(s)).collect();
    let primitive = parsed.iter().flat_map(|s| s.rules(&[OSCAR.to_string()])).collect();
    let rules = RuleSet::new(primitive, protocol)?;

    let mut shapes: BTreeSet<Tag> = SHAPES.iter().copied().collect();
    shapes.extend(rules.composing_constructors());
    let atom_set: BTreeSet<Term> = atoms.iter().cloned().collect();
    let mut probes: Vec<Term> = match enumerate_universe(&atom_set, &shapes, 2, 1_000_000) {
        Ok(u) => u.into_iter().collect(),
        Err(_) => Vec::new(),
    };
    probes.shuffle(rng);
    probes.truncate(200);
    for t in &x0 {
        probes.extend(t.subterms());
    }
    Ok(RandomProtocol {
        specs,
        rules,
        x0,
        probes,
    })
}

/// Compares the engines on `p` at depth 3, or at depth 2 when the naive
/// fixpoint at depth 3 outgrows [`CASE_CAP`]. Returns the depth used.
pub fn compare_case(p: &RandomProtocol) -> Result<(usize, Comparison)> {
    let attempt = |depth: usize| {
        let bounds = Bounds {
            universe_cap: CASE_CAP,
            ..Bounds::new(depth, usize::MAX, depth)
        };
        compare(&p.rules, &p.x0, bounds, &p.probes)
    };
    match attempt(3) {
        Err(Error::Resource { .. }) => Ok((2, attempt(2)?)),
        other => Ok((3, other?)),
    }
}

/// `cases` random protocols drawn in order from one stream seeded by `seed`.
pub fn random_suite(seed: u64, cases: usize) -> Result<Vec<RandomProtocol>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..cases).map(|_| random_protocol(&mut rng)).collect()
}

/// [`compare_case`] over every case, in parallel. Results keep case order.
pub fn compare_suite(cases: &[RandomProtocol]) -> Vec<Result<(usize, Comparison)>> {
    cases.par_iter().map(compare_case).collect()
}

/// A finite knowledge-flow instance over an explicit universe.
#[derive(Debug, Clone)]
pub struct FlowInstance {
    pub principals: Vec<Principal>,
    pub adversaries: BTreeSet<String>,
    pub k0: KnowledgeState,
    pub rules: Vec<PatternRule>,
    pub universe: BTreeSet<Term>,
}

/// Honest `a`, `b`, a primitive `e` and the given adversaries. Rules never
/// have the same teller and learner.
pub fn random_flow(rng: &mut impl Rng, adversaries: &[&str]) -> FlowInstance {
    let atoms: Vec<Term> = ["x", "y", "z"].iter().map(|a| Term::atom(a)).collect();
    let mut universe: BTreeSet<Term> = atoms.iter().cloned().collect();
    while universe.len() < rng.gen_range(5..=9) {
        universe.insert(random_term(rng, &atoms, 2));
    }
    let values: Vec<Term> = universe.iter().cloned().collect();

    let mut principals = vec![
        Principal::new("a", PrincipalKind::Honest),
        Principal::new("b", PrincipalKind::Honest),
        Principal::new("e", PrincipalKind::Primitive),
    ];
    principals.extend(adversaries.iter().map(|o| Principal::new(o, PrincipalKind::Adversary)));
    let names: Vec<String> = principals.iter().map(|p| p.name.clone()).collect();

    let mut k0 = KnowledgeState::new();
    for _ in 0..rng.gen_range(2..=8) {
        let p = names.choose(rng).expect("principals").clone();
        let v = values.choose(rng).expect("values").clone();
        k0.insert(p, v).expect("ground values");
    }

    let mut rules = Vec::new();
    for i in 0..rng.gen_range(2..=6) {
        let teller = names.choose(rng).expect("principals").clone();
        let learner = loop {
            let l = names.choose(rng).expect("principals").clone();
            if l != teller {
                break l;
            }
        };
        let mut premises: Vec<Term> = (0..rng.gen_range(0..=2))
            .map(|_| values.choose(rng).expect("values").clone())
            .collect();
        // Sometimes a parameterized rule: teach `v` to whoever knows H(v)
        // or (v, w).
        let taught = if rng.gen_bool(0.3) {
            let v = Term::var("v");
            premises.push(if rng.gen_bool(0.5) {
                Term::hash(v.clone())
            } else {
                Term::pair(v.clone(), Term::var("w"))
            });
            v
        } else {
            values.choose(rng).expect("values").clone()
        };
        rules.push(PatternRule {
            id: format!("f{}", i + 1),
            teller,
            taught,
            learner,
            premises,
            guards: Vec::new(),
        });
    }
    FlowInstance {
        principals,
        adversaries: adversaries.iter().map(|s| s.to_string()).collect(),
        k0,
        rules,
        universe,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic_per_seed() {
        let a = random_protocol(&mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = random_protocol(&mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a.rules, b.rules);
        assert_eq!(a.x0, b.x0);
        assert_eq!(a.probes, b.probes);
    }

    #[test]
    fn protocols_respect_the_size_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let p = random_protocol(&mut rng).unwrap();
            assert!(p.rules.protocol.len() <= 4);
            let atoms: BTreeSet<Term> = p.x0.iter().flat_map(Term::leaves).collect();
            assert!(atoms.len() <= 3);
        }
    }

    #[test]
    fn flows_have_no_self_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let f = random_flow(&mut rng, &["o1", "o2"]);
            assert!(f.rules.iter().all(|r| !r.is_self_rule()));
            assert!(f.k0.facts().all(|(_, t)| f.universe.contains(t)));
        }
    }
}
