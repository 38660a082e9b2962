mod common;

use proptest::prelude::*;

use common::{ground_term, pattern_term};
use kflow::rules::{instantiate, match_all, match_term, Substitution};
use kflow::Term;

fn substitution_for(p: &Term) -> impl Strategy<Value = Substitution> {
    let vars: Vec<String> = p.vars().into_iter().collect();
    prop::collection::vec(ground_term(), vars.len())
        .prop_map(move |values| vars.iter().cloned().zip(values).collect())
}

proptest! {
    #[test]
    fn instantiating_then_matching_recovers_the_substitution(
        (p, s) in pattern_term().prop_flat_map(|p| (Just(p.clone()), substitution_for(&p)))
    ) {
        let g = instantiate(&p, &s).unwrap();
        prop_assert!(g.is_ground());
        let found = match_all(&p, &g, &Substitution::new());
        prop_assert!(found.iter().any(|m| p.vars().iter().all(|v| m.get(v) == s.get(v))));
    }

    #[test]
    fn a_match_instantiates_to_the_ground_term(p in pattern_term(), g in ground_term()) {
        if let Some(m) = match_term(&p, &g, &Substitution::new()) {
            prop_assert_eq!(instantiate(&p, &m).unwrap(), g);
        }
    }

    #[test]
    fn matching_a_ground_pattern_is_equality(a in ground_term(), b in ground_term()) {
        prop_assert_eq!(match_term(&a, &b, &Substitution::new()).is_some(), a == b);
    }

    #[test]
    fn uncovered_variables_fail_to_instantiate(p in pattern_term()) {
        prop_assert_eq!(instantiate(&p, &Substitution::new()).is_ok(), p.is_ground());
    }
}

#[test]
fn nonlinear_pattern_requires_equal_bindings() {
    let k = Term::var("k");
    let p = Term::enc(k.clone(), k);
    let (a, b) = (Term::atom("a"), Term::atom("b"));
    assert!(match_term(&p, &Term::enc(a.clone(), b), &Substitution::new()).is_none());
    let m = match_term(&p, &Term::enc(a.clone(), a.clone()), &Substitution::new()).unwrap();
    assert_eq!(m.get("k"), Some(&a));
}
