use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use kflow::dsl::builtin_protocol;
use kflow::engine::{
    derivable, f_iterates, g_iterates, g_step, replay, saturate_naive, Analyzer, Bounds, DerivationProof, RuleSet,
    Status,
};
use kflow::gen::{random_flow, random_protocol, RandomProtocol};
use kflow::knowledge::{saturate_honest, OSCAR};
use kflow::primitives::builtin_spec;
use kflow::rules::project;
use kflow::term::Universe;
use kflow::Term;

fn case(seed: u64) -> RandomProtocol {
    random_protocol(&mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn small() -> Bounds {
    Bounds {
        universe_cap: 200_000,
        ..Bounds::new(2, usize::MAX, 2)
    }
}

fn rules(specs: &[&str]) -> RuleSet {
    let prims = specs
        .iter()
        .flat_map(|s| builtin_spec(s).unwrap().rules(&[OSCAR.into()]))
        .collect();
    RuleSet::new(prims, vec![]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn g_is_extensive_and_monotone(seed in any::<u64>(), drop in any::<prop::sample::Index>()) {
        let p = case(seed);
        let flat = p.rules.flat();
        let u = Universe::Depth(2);
        let x = g_step(&p.x0, &flat, &u);
        prop_assert!(p.x0.is_subset(&x));
        let smaller: BTreeSet<Term> = p.x0.iter().enumerate().filter(|(i, _)| *i != drop.index(p.x0.len())).map(|(_, t)| t.clone()).collect();
        prop_assert!(g_step(&smaller, &flat, &u).is_subset(&x));
    }

    #[test]
    fn naive_saturation_is_monotone(seed in any::<u64>(), drop in any::<prop::sample::Index>()) {
        let p = case(seed);
        let Ok(full) = saturate_naive(&p.x0, &p.rules.flat(), &small()) else { return Ok(()) };
        let smaller: BTreeSet<Term> = p.x0.iter().skip(1).cloned().collect();
        let mut fewer = p.rules.flat();
        if !fewer.is_empty() {
            fewer.remove(drop.index(fewer.len()));
        }
        let sub = saturate_naive(&smaller, &fewer, &small()).unwrap();
        prop_assert!(sub.terms.is_subset(&full.terms));
    }

    #[test]
    fn verdicts_and_proofs_are_deterministic(seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let p = case(seed);
        let target = p.probes[pick.index(p.probes.len())].clone();
        let bounds = Bounds::new(3, 3, 3);
        let (a, b) = match (
            derivable(&p.rules, &p.x0, &target, bounds),
            derivable(&p.rules, &p.x0, &target, bounds),
        ) {
            (Ok(a), Ok(b)) => (a, b),
            // Capped runs must fail the same way.
            (a, b) => {
                prop_assert_eq!(format!("{a:?}"), format!("{b:?}"));
                return Ok(());
            }
        };
        prop_assert_eq!(a.to_json().to_string(), b.to_json().to_string());
        prop_assert_eq!(&a, &b);
        if let Some(proof) = &a.proof {
            prop_assert!(replay(proof, &p.rules, &p.x0).unwrap());
            let back = DerivationProof::from_json(&proof.to_json()).unwrap();
            prop_assert_eq!(&back, proof);
        }
    }

    #[test]
    fn audited_runs_never_decompose_into_new_terms(seed in any::<u64>()) {
        let p = case(seed);
        let mut a = Analyzer::new(&p.rules, &p.x0, small()).unwrap().with_audit(true);
        // A capped run proves nothing either way.
        if a.saturate(None).is_err() {
            return Ok(());
        }
        prop_assert_eq!(a.statistics().audit_violations, 0);
    }

    #[test]
    fn flow_iterates_project_onto_g_iterates(seed in any::<u64>()) {
        let f = random_flow(&mut ChaCha8Rng::seed_from_u64(seed), &[OSCAR]);
        let k = saturate_honest(&f.k0, &f.principals, &f.universe, &[]);
        let projected: Vec<_> = f.rules.iter().filter_map(|r| project(r, OSCAR)).collect();
        let fs: Vec<_> = f_iterates(&k, &f.rules, &f.universe).iter().map(|s| s.projection(OSCAR)).collect();
        let gs = g_iterates(&k.projection(OSCAR), &projected, &Universe::Explicit(f.universe.clone()));
        prop_assert_eq!(fs, gs);
    }
}

#[test]
fn analysis_examples() {
    let (x, y, s) = (Term::atom("x"), Term::atom("y"), Term::atom("s"));
    let pair = Term::pair(x.clone(), y.clone());
    let t = rules(&["t"]);
    let mut a = Analyzer::new(&t, &BTreeSet::from([pair.clone()]), Bounds::default()).unwrap();
    a.close();
    let analyzed: BTreeSet<Term> = a.analyzed().cloned().collect();
    assert_eq!(analyzed, BTreeSet::from([pair, x.clone(), y]));

    let e = rules(&["e"]);
    let c = Term::enc(Term::pk(s.clone()), x.clone());
    let without_key = derivable(&e, &BTreeSet::from([c.clone()]), &x, Bounds::default()).unwrap();
    assert_eq!(without_key.status, Status::SecureAtBound);
    let with_key = derivable(&e, &BTreeSet::from([c, s]), &x, Bounds::default()).unwrap();
    assert_eq!(with_key.status, Status::AttackFound);
}

#[test]
fn synthesis_builds_the_opening_message() {
    let (ia, na) = (Term::identity("a"), Term::atom("na"));
    let pkb = Term::pk(Term::secret_key("b"));
    let target = Term::enc(pkb.clone(), Term::pair(ia.clone(), na.clone()));
    let rs = rules(&["e", "t"]);
    let x0 = BTreeSet::from([pkb, ia, na]);
    let v = derivable(&rs, &x0, &target, Bounds::default()).unwrap();
    let proof = v.proof.unwrap();
    assert_eq!(proof.rules_used(), ["t.pair", "e.encrypt"]);
    assert!(replay(&proof, &rs, &x0).unwrap());
}

#[test]
fn tampered_proofs_do_not_replay() {
    let m = builtin_protocol("ns").unwrap().compile().unwrap();
    let target = m.targets("responder-nonce-secrecy").unwrap()[0].1.clone();
    let proof = derivable(&m.rules, &m.x0, &target, Bounds::new(6, 3, 8)).unwrap().proof.unwrap();
    assert!(m.replay(&proof).unwrap());

    let mut wrong_premise = proof.clone();
    wrong_premise.premises[0] = DerivationProof::initial(Term::secret_key("a"));
    assert!(!m.replay(&wrong_premise).unwrap());

    let mut wrong_rule = proof.clone();
    wrong_rule.rule = Some("t.first".into());
    assert!(!m.replay(&wrong_rule).unwrap());

    let mut unknown_rule = proof;
    unknown_rule.rule = Some("nope".into());
    assert!(m.replay(&unknown_rule).is_err());
}

#[test]
fn secret_keys_stay_secret_in_ns() {
    let m = builtin_protocol("ns").unwrap().compile().unwrap();
    let v = derivable(&m.rules, &m.x0, &Term::secret_key("a"), Bounds::new(6, 3, 8)).unwrap();
    assert_eq!(v.status, Status::SecureAtBound);
    assert_eq!(v.bounds, Bounds::new(6, 3, 8));
}

#[test]
fn non_ground_targets_are_rejected() {
    let rs = rules(&["t"]);
    assert!(derivable(&rs, &BTreeSet::new(), &Term::var("v"), Bounds::default()).is_err());
}
