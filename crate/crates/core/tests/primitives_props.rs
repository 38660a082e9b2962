use std::collections::BTreeSet;

use kflow::primitives::{
    builtin_spec, builtin_specs, check_local_cf, classify, fixed_set, image_collisions, strata, Class,
};
use kflow::term::enumerate_universe;
use kflow::{Tag, Term};

fn leaves() -> BTreeSet<Term> {
    [Term::atom("a"), Term::atom("b"), Term::identity("a")].into()
}

#[test]
fn builtins_are_locally_collision_free() {
    for s in builtin_specs() {
        let u = enumerate_universe(&leaves(), &s.constructors(), 2, 100_000).unwrap();
        let report = check_local_cf(&s, &u).unwrap();
        assert!(report.pass(), "{}: {:?}", s.name, report.violations);
    }
}

#[test]
fn composing_images_are_globally_disjoint() {
    let specs = builtin_specs();
    let tags: BTreeSet<Tag> = specs.iter().flat_map(|s| s.constructors()).collect();
    let u = enumerate_universe(&leaves(), &tags, 2, 200_000).unwrap();
    assert!(image_collisions(&u, &specs).is_empty());
}

#[test]
fn strata_examples() {
    let a = Term::atom("a");
    let ha = Term::hash(a.clone());
    let h = builtin_spec("h").unwrap();
    let m = strata(&[a.clone(), ha.clone()].into(), std::slice::from_ref(&h));
    assert_eq!((m.get(&a), m.get(&ha)), (Some(0), Some(1)));
    assert!(fixed_set(&[a.clone(), ha].into(), &h).members.is_empty());

    // Hand-run: s, x in S_0; (pk s) in S_1; the cipher needs (pk s), so S_2.
    let (s, x) = (Term::atom("s"), Term::atom("x"));
    let c = Term::enc(Term::pk(s.clone()), x.clone());
    let e = builtin_spec("e").unwrap();
    let m = strata(&c.subterms(), std::slice::from_ref(&e));
    assert_eq!(m.get(&c), Some(2));
    assert!(m.precedes(&Term::pk(s), &c));
}

#[test]
fn rule_primitive_application_is_controlled_by_the_rule_value() {
    let r = builtin_spec("r").unwrap();
    let classes = classify(&r);
    let apply = classes.iter().find(|c| c.label == "apply").unwrap();
    let ruleval = classes.iter().find(|c| c.label == "ruleval").unwrap();
    assert_eq!(apply.class, Class::Decomposing { controlled_by: ruleval.position });
    assert_eq!(ruleval.class, Class::Composing);
}

#[test]
fn pair_spec_has_one_composing_and_two_decomposing_rules() {
    let t = builtin_spec("t").unwrap();
    let rules = t.rules(&[]);
    let shown: Vec<String> = rules.iter().map(|r| r.rule.to_string()).collect();
    assert_eq!(
        shown,
        [
            "t.pair: {(var x), (var y)} -> (pair (var x) (var y))",
            "t.first: {(pair (var x) (var y))} -> (var x)",
            "t.second: {(pair (var x) (var y))} -> (var y)",
        ]
    );
}
