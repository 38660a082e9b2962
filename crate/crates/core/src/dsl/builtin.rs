use std::collections::BTreeMap;

use super::{ProtocolSpec, QueryDecl, RuleDecl};
use crate::knowledge::{Principal, PrincipalKind};
use crate::term::Term;

fn pk(p: &str) -> Term {
    Term::pk(Term::secret_key(p))
}

fn id(p: &str) -> Term {
    Term::identity(p)
}

fn roles(pairs: &[(&str, &[&str])]) -> Vec<(String, Vec<String>)> {
    pairs
        .iter()
        .map(|(r, cs)| (r.to_string(), cs.iter().map(|c| c.to_string()).collect()))
        .collect()
}

/// Initiator `p` opens a session with `p2`.
fn ns1() -> RuleDecl {
    RuleDecl {
        name: "ns1".into(),
        roles: roles(&[("p", &["a", "b"]), ("p2", &["a", "b", "o"])]),
        teller: Some("p".into()),
        premises: vec![],
        conclusion: Term::enc(pk("p2"), Term::pair(id("p"), Term::nonce(Term::eps(), id("p")))),
    }
}

/// The opening message responder `p2` accepts from a claimed initiator `p`.
fn opening() -> Term {
    Term::enc(pk("p2"), Term::pair(id("p"), Term::var("v")))
}

/// Responder `p2` answers with its nonce, seeded by the opening message.
/// With `lowe`, the answer also names the responder.
fn ns2(lowe: bool) -> RuleDecl {
    let nb = Term::nonce(opening(), id("p2"));
    let payload = if lowe {
        Term::pair(Term::pair(Term::var("v"), nb), id("p2"))
    } else {
        Term::pair(Term::var("v"), nb)
    };
    RuleDecl {
        name: "ns2".into(),
        roles: roles(&[("p2", &["a", "b"]), ("p", &["a", "b", "o"])]),
        teller: Some("p2".into()),
        premises: vec![opening()],
        conclusion: Term::enc(pk("p"), payload),
    }
}

/// Initiator `p` returns whatever follows its own nonce.
fn ns3() -> RuleDecl {
    RuleDecl {
        name: "ns3".into(),
        roles: roles(&[("p", &["a", "b"]), ("p2", &["a", "b", "o"])]),
        teller: Some("p".into()),
        premises: vec![Term::enc(
            pk("p"),
            Term::pair(Term::nonce(Term::eps(), id("p")), Term::var("v")),
        )],
        conclusion: Term::enc(pk("p2"), Term::var("v")),
    }
}

fn needham_schroeder(name: &str, lowe: bool) -> ProtocolSpec {
    let mut initial = Vec::new();
    for p in ["a", "b"] {
        initial.push((p.to_string(), Term::secret_key(p)));
        for q in ["a", "b", "o"] {
            initial.push((p.to_string(), pk(q)));
            initial.push((p.to_string(), id(q)));
        }
    }
    initial.push(("o".into(), Term::eps()));
    initial.push(("o".into(), Term::secret_key("o")));
    for q in ["a", "b", "o"] {
        initial.push(("o".into(), id(q)));
    }
    initial.push(("o".into(), pk("a")));
    initial.push(("o".into(), pk("b")));
    let na = Term::nonce(Term::eps(), id("a"));
    let alice_opening = Term::enc(pk("b"), Term::pair(id("a"), na));
    ProtocolSpec {
        name: name.into(),
        principals: vec![
            Principal::new("a", PrincipalKind::Honest),
            Principal::new("b", PrincipalKind::Honest),
            Principal::new("o", PrincipalKind::Adversary),
        ],
        atoms: vec![],
        primitives: ["e", "t", "n", "r"].iter().map(|s| s.to_string()).collect(),
        initial,
        rules: vec![ns1(), ns2(lowe), ns3()],
        queries: vec![
            QueryDecl {
                name: "responder-nonce-secrecy".into(),
                roles: vec![],
                target: Term::nonce(alice_opening, id("b")),
            },
            QueryDecl {
                name: "initiator-key-secrecy".into(),
                roles: vec![],
                target: Term::secret_key("a"),
            },
        ],
    }
}

/// `ns`: the three-message public-key protocol. `ns-lowe`: the same with the
/// responder's identity added to the second message.
pub fn builtin_protocols() -> BTreeMap<String, ProtocolSpec> {
    [needham_schroeder("ns", false), needham_schroeder("ns-lowe", true)]
        .into_iter()
        .map(|p| (p.name.clone(), p))
        .collect()
}

pub fn builtin_protocol(name: &str) -> Option<ProtocolSpec> {
    builtin_protocols().remove(name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse, pretty};
    use crate::knowledge::{knowledge, source};

    #[test]
    fn builtins_validate_and_round_trip() {
        for spec in builtin_protocols().values() {
            spec.validate().unwrap();
            assert_eq!(&parse(&pretty(spec)).unwrap(), spec);
        }
    }

    #[test]
    fn lowe_differs_in_one_rule_family() {
        let ns = builtin_protocol("ns").unwrap();
        let lowe = builtin_protocol("ns-lowe").unwrap();
        let differing: Vec<&str> = ns
            .rules
            .iter()
            .zip(&lowe.rules)
            .filter(|(x, y)| x != y)
            .map(|(x, _)| x.name.as_str())
            .collect();
        assert_eq!(differing, ["ns2"]);
    }

    #[test]
    fn initial_knowledge() {
        let model = builtin_protocol("ns").unwrap().compile().unwrap();
        assert_eq!(source(&model.k0, &Term::secret_key("a")), ["a".to_string()].into());
        let all = knowledge(&model.k0);
        for t in [pk("a"), pk("b"), id("a"), id("b")] {
            assert!(all.contains(&t));
        }
        // 2 * 3 instances of ns1, 2 * 3 of ns2, 2 * 3 of ns3.
        assert_eq!(model.rules.protocol.len(), 18);
    }
}
