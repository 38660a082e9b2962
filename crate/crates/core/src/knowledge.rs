//! Knowledge states, adversary merging and fixed sets.

use std::collections::BTreeSet;
use std::fmt;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::rules::PatternRule;
use crate::term::Term;

/// Name of the single merged adversary.
pub const OSCAR: &str = "o";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PrincipalKind {
    Honest,
    Adversary,
    Primitive,
}

impl PrincipalKind {
    pub fn keyword(self) -> &'static str {
        match self {
            PrincipalKind::Honest => "honest",
            PrincipalKind::Adversary => "adversary",
            PrincipalKind::Primitive => "primitive",
        }
    }

    pub fn from_keyword(word: &str) -> Option<Self> {
        match word {
            "honest" => Some(PrincipalKind::Honest),
            "adversary" => Some(PrincipalKind::Adversary),
            "primitive" => Some(PrincipalKind::Primitive),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Principal {
    pub name: String,
    pub kind: PrincipalKind,
}

impl Principal {
    pub fn new(name: &str, kind: PrincipalKind) -> Self {
        Principal {
            name: name.to_string(),
            kind,
        }
    }
}

/// A finite set of `(principal, term)` facts over ground terms.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnowledgeState {
    facts: BTreeSet<(String, Term)>,
}

impl KnowledgeState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_facts<I, S>(facts: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Term)>,
        S: Into<String>,
    {
        let mut k = Self::new();
        for (p, t) in facts {
            k.insert(p, t)?;
        }
        Ok(k)
    }

    pub fn insert(&mut self, principal: impl Into<String>, t: Term) -> Result<bool> {
        if !t.is_ground() {
            return Err(Error::Validation(format!("knowledge fact `{t}` is not ground")));
        }
        Ok(self.facts.insert((principal.into(), t)))
    }

    pub fn knows(&self, principal: &str, t: &Term) -> bool {
        self.facts.contains(&(principal.to_string(), t.clone()))
    }

    /// Terms known by `principal`.
    pub fn projection(&self, principal: &str) -> BTreeSet<Term> {
        self.facts
            .iter()
            .filter(|(p, _)| p == principal)
            .map(|(_, t)| t.clone())
            .collect()
    }

    pub fn facts(&self) -> impl Iterator<Item = (&str, &Term)> {
        self.facts.iter().map(|(p, t)| (p.as_str(), t))
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn is_subset(&self, other: &KnowledgeState) -> bool {
        self.facts.is_subset(&other.facts)
    }

    pub fn union(&self, other: &KnowledgeState) -> KnowledgeState {
        KnowledgeState {
            facts: self.facts.union(&other.facts).cloned().collect(),
        }
    }

    pub fn to_json(&self) -> Value {
        let facts: Vec<Value> = self
            .facts
            .iter()
            .map(|(p, t)| json!({ "principal": p, "term": t.to_string() }))
            .collect();
        json!({ "facts": facts })
    }
}

impl fmt::Display for KnowledgeState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (p, t) in &self.facts {
            writeln!(f, "{p} knows {t}")?;
        }
        Ok(())
    }
}

/// Principals holding `v` in `k0`.
pub fn source(k0: &KnowledgeState, v: &Term) -> BTreeSet<String> {
    k0.facts
        .iter()
        .filter(|(_, t)| t == v)
        .map(|(p, _)| p.clone())
        .collect()
}

/// Every term known by someone.
pub fn knowledge(k: &KnowledgeState) -> BTreeSet<Term> {
    k.facts.iter().map(|(_, t)| t.clone()).collect()
}

/// Values only `owner` may ever draw.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixedSet {
    pub owner: String,
    pub members: BTreeSet<Term>,
}

impl FixedSet {
    /// Whether every ground rule in which the owner teaches a member requires
    /// the learner to already hold some member.
    pub fn is_fixed(&self, rules: &[PatternRule]) -> bool {
        rules
            .iter()
            .filter(|r| r.teller == self.owner && self.members.contains(&r.taught))
            .all(|r| r.premises.iter().any(|p| self.members.contains(p)))
    }

    /// Whether nobody but the owner holds a member in `k0`.
    pub fn single_source(&self, k0: &KnowledgeState) -> bool {
        k0.facts
            .iter()
            .all(|(p, t)| !self.members.contains(t) || *p == self.owner)
    }
}

fn union_of(fixed: &[FixedSet]) -> BTreeSet<Term> {
    fixed.iter().flat_map(|f| f.members.iter().cloned()).collect()
}

/// Collapses `adversaries` into [`OSCAR`] in facts and in teller / learner
/// slots, dropping the self-rules this creates. Terms are left untouched.
pub fn merge(
    principals: &[Principal],
    adversaries: &BTreeSet<String>,
    k: &KnowledgeState,
    rules: &[PatternRule],
) -> Result<(KnowledgeState, Vec<PatternRule>)> {
    if adversaries.is_empty() {
        return Err(Error::Validation("merge needs at least one adversary".into()));
    }
    for p in principals {
        if p.kind == PrincipalKind::Primitive && adversaries.contains(&p.name) {
            return Err(Error::Validation(format!(
                "primitive principal `{}` cannot be merged into the adversary",
                p.name
            )));
        }
    }
    let rename = |p: &str| {
        if adversaries.contains(p) {
            OSCAR.to_string()
        } else {
            p.to_string()
        }
    };
    let facts = k.facts.iter().map(|(p, t)| (rename(p), t.clone())).collect();
    let rules = rules
        .iter()
        .map(|r| PatternRule {
            teller: rename(&r.teller),
            learner: rename(&r.learner),
            ..r.clone()
        })
        .filter(|r| !r.is_self_rule())
        .collect();
    Ok((KnowledgeState { facts }, rules))
}

/// Adds `(p, v)` for every non-adversary `p` and every learnable `v` outside
/// the fixed sets. Learnable values are those of `k0` together with
/// `universe`.
pub fn saturate_honest(
    k0: &KnowledgeState,
    principals: &[Principal],
    universe: &BTreeSet<Term>,
    fixed: &[FixedSet],
) -> KnowledgeState {
    let excluded = union_of(fixed);
    let mut values = knowledge(k0);
    values.extend(universe.iter().cloned());
    let mut out = k0.clone();
    for p in principals.iter().filter(|p| p.kind != PrincipalKind::Adversary) {
        for v in values.iter().filter(|v| !excluded.contains(v)) {
            out.facts.insert((p.name.clone(), v.clone()));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(n: &str) -> Term {
        Term::atom(n)
    }

    #[test]
    fn source_and_knowledge() {
        let k0 = KnowledgeState::from_facts([("alice", a("na"))]).unwrap();
        assert_eq!(source(&k0, &a("na")), BTreeSet::from(["alice".to_string()]));
        assert!(source(&k0, &a("nb")).is_empty());
        assert!(knowledge(&KnowledgeState::new()).is_empty());
        let k = KnowledgeState::from_facts([("a", a("x")), ("b", a("x"))]).unwrap();
        assert_eq!(knowledge(&k), BTreeSet::from([a("x")]));
    }

    #[test]
    fn non_ground_facts_are_rejected() {
        assert!(KnowledgeState::from_facts([("a", Term::var("v"))]).is_err());
    }

    fn principals() -> Vec<Principal> {
        vec![
            Principal::new("a", PrincipalKind::Honest),
            Principal::new("b", PrincipalKind::Honest),
            Principal::new("o1", PrincipalKind::Adversary),
            Principal::new("o2", PrincipalKind::Adversary),
            Principal::new("h", PrincipalKind::Primitive),
        ]
    }

    #[test]
    fn merge_collapses_adversaries_and_drops_self_rules() {
        let advs = BTreeSet::from(["o1".to_string(), "o2".to_string()]);
        let k = KnowledgeState::from_facts([("o1", a("x")), ("o2", a("y"))]).unwrap();
        let rule = PatternRule {
            id: "r".into(),
            teller: "o1".into(),
            taught: Term::var("v"),
            learner: "o2".into(),
            premises: vec![Term::var("w")],
            guards: vec![],
        };
        let (merged, rules) = merge(&principals(), &advs, &k, &[rule]).unwrap();
        assert_eq!(
            merged,
            KnowledgeState::from_facts([(OSCAR, a("x")), (OSCAR, a("y"))]).unwrap()
        );
        assert!(rules.is_empty());
    }

    #[test]
    fn merging_a_primitive_is_an_error() {
        let advs = BTreeSet::from(["h".to_string()]);
        assert!(matches!(
            merge(&principals(), &advs, &KnowledgeState::new(), &[]),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn honest_saturation_skips_fixed_values() {
        let ps = vec![
            Principal::new("a", PrincipalKind::Honest),
            Principal::new("b", PrincipalKind::Honest),
            Principal::new(OSCAR, PrincipalKind::Adversary),
        ];
        let u = BTreeSet::from([a("x")]);
        let out = saturate_honest(&KnowledgeState::new(), &ps, &u, &[]);
        assert!(out.knows("a", &a("x")) && out.knows("b", &a("x")));
        assert!(!out.knows(OSCAR, &a("x")));
        let f = FixedSet {
            owner: "h".into(),
            members: BTreeSet::from([a("x")]),
        };
        let out = saturate_honest(&KnowledgeState::new(), &ps, &u, &[f]);
        assert!(!out.knows("a", &a("x")));
    }

    #[test]
    fn fixed_set_conditions() {
        let tok = a("tok");
        let f = FixedSet {
            owner: "h".into(),
            members: BTreeSet::from([tok.clone()]),
        };
        let guarded = PatternRule {
            id: "r".into(),
            teller: "h".into(),
            taught: tok.clone(),
            learner: "a".into(),
            premises: vec![tok.clone()],
            guards: vec![],
        };
        let open = PatternRule {
            premises: vec![a("x")],
            ..guarded.clone()
        };
        assert!(f.is_fixed(&[guarded]));
        assert!(!f.is_fixed(&[open]));
        let ok = KnowledgeState::from_facts([("h", tok.clone())]).unwrap();
        let bad = KnowledgeState::from_facts([("a", tok)]).unwrap();
        assert!(f.single_source(&ok));
        assert!(!f.single_source(&bad));
    }

    #[test]
    fn json_form() {
        let k = KnowledgeState::from_facts([("a", Term::pk(a("s")))]).unwrap();
        assert_eq!(
            k.to_json().to_string(),
            r#"{"facts":[{"principal":"a","term":"(pk s)"}]}"#
        );
    }
}
