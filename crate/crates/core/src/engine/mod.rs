//! Saturation engines.
//!
//! [`oracle`] iterates `f_R` and `g` literally over a bounded universe.
//! [`analysis`] computes the same closure in two phases: the analyzed set
//! `A` is closed under decomposition and protocol-rule firing, and every
//! other derivable term is synthesized from `A` by composition alone.

pub mod analysis;
pub mod compare;
pub mod oracle;
pub mod proof;

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::primitives::{PrimitiveRule, RuleKind};
use crate::rules::ProjectedRule;
use crate::term::{Tag, Term, DEFAULT_UNIVERSE_CAP};

pub use analysis::{derivable, Analyzer};
pub use compare::{compare, Comparison, Mismatch};
pub use oracle::{f_iterates, f_step, g_iterates, g_step, saturate_naive, Saturation};
pub use proof::{replay, DerivationProof, StepKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bounds {
    pub max_term_depth: usize,
    pub max_rounds: usize,
    pub max_synthesis_depth: usize,
    /// Largest term set either engine may build before giving up.
    pub universe_cap: usize,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            max_term_depth: 6,
            max_rounds: 4,
            max_synthesis_depth: 8,
            universe_cap: DEFAULT_UNIVERSE_CAP,
        }
    }
}

impl Bounds {
    pub fn new(depth: usize, rounds: usize, synth: usize) -> Self {
        Bounds {
            max_term_depth: depth,
            max_rounds: rounds,
            max_synthesis_depth: synth,
            ..Bounds::default()
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "max_term_depth": self.max_term_depth,
            "max_rounds": self.max_rounds,
            "max_synthesis_depth": self.max_synthesis_depth,
            "universe_cap": self.universe_cap,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Statistics {
    pub terms_explored: usize,
    pub rules_fired: usize,
    pub decompositions: usize,
    pub rounds: usize,
    pub synth_calls: usize,
    pub candidates: usize,
    pub generic_skips: usize,
    pub audit_checks: usize,
    pub audit_violations: usize,
}

impl Statistics {
    pub fn to_json(&self) -> Value {
        json!({
            "terms_explored": self.terms_explored,
            "rules_fired": self.rules_fired,
            "decompositions": self.decompositions,
            "rounds": self.rounds,
            "synth_calls": self.synth_calls,
            "candidates": self.candidates,
            "generic_skips": self.generic_skips,
            "audit_checks": self.audit_checks,
            "audit_violations": self.audit_violations,
        })
    }
}

/// Rules split by class. Decomposing rules carry the index of their
/// controlling premise.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RuleSet {
    pub composing: Vec<ProjectedRule>,
    pub decomposing: Vec<(ProjectedRule, usize)>,
    pub protocol: Vec<ProjectedRule>,
}

impl RuleSet {
    /// Checks id uniqueness and range restriction (every conclusion variable
    /// is bound by a premise).
    pub fn new(primitive: Vec<PrimitiveRule>, protocol: Vec<ProjectedRule>) -> Result<Self> {
        let mut set = RuleSet::default();
        for p in primitive {
            match p.kind {
                RuleKind::Composing => set.composing.push(p.rule),
                RuleKind::Decomposing { control } => set.decomposing.push((p.rule, control)),
            }
        }
        set.protocol = protocol;
        let mut seen = BTreeSet::new();
        for r in set.all() {
            if !seen.insert(r.id.clone()) {
                return Err(Error::Validation(format!("duplicate rule id `{}`", r.id)));
            }
            if let Some(v) = r.unbound_vars().into_iter().next() {
                return Err(Error::Validation(format!(
                    "rule `{}`: unbound variable {v} in conclusion",
                    r.id
                )));
            }
        }
        Ok(set)
    }

    pub fn all(&self) -> Vec<&ProjectedRule> {
        self.composing
            .iter()
            .chain(self.decomposing.iter().map(|(r, _)| r))
            .chain(&self.protocol)
            .collect()
    }

    /// All rules as plain projected rules, the oracle's view.
    pub fn flat(&self) -> Vec<ProjectedRule> {
        self.all().into_iter().cloned().collect()
    }

    pub fn find(&self, id: &str) -> Option<(&ProjectedRule, StepKind)> {
        if let Some(r) = self.composing.iter().find(|r| r.id == id) {
            return Some((r, StepKind::Compose));
        }
        if let Some((r, _)) = self.decomposing.iter().find(|(r, _)| r.id == id) {
            return Some((r, StepKind::Decompose));
        }
        self.protocol
            .iter()
            .find(|r| r.id == id)
            .map(|r| (r, StepKind::ProtocolRule))
    }

    /// Moves the primitive rule `id` to the other class. Fault injection for
    /// exercising the oracle comparison.
    pub fn misclassify(&self, id: &str) -> Result<RuleSet> {
        let mut out = self.clone();
        if let Some(i) = out.composing.iter().position(|r| r.id == id) {
            let r = out.composing.remove(i);
            out.decomposing.push((r, 0));
            return Ok(out);
        }
        if let Some(i) = out.decomposing.iter().position(|(r, _)| r.id == id) {
            let (r, _) = out.decomposing.remove(i);
            out.composing.push(r);
            return Ok(out);
        }
        Err(Error::Validation(format!("no primitive rule `{id}` to misclassify")))
    }

    pub fn composing_constructors(&self) -> BTreeSet<Tag> {
        self.composing
            .iter()
            .map(|r| r.conclusion.tag())
            .filter(|t| *t != Tag::Var)
            .collect()
    }

    /// Ground subterms of composing conclusions, e.g. the adversary identity
    /// inside the nonce rule.
    pub fn composing_blocks(&self) -> BTreeSet<Term> {
        self.composing
            .iter()
            .flat_map(|r| r.conclusion.subterms())
            .filter(Term::is_ground)
            .collect()
    }

    pub fn to_json(&self) -> Value {
        let show = |r: &ProjectedRule| {
            json!({
                "id": r.id,
                "origin": r.origin,
                "premises": r.premises.iter().map(Term::to_string).collect::<Vec<_>>(),
                "conclusion": r.conclusion.to_string(),
            })
        };
        json!({
            "composing": self.composing.iter().map(show).collect::<Vec<_>>(),
            "decomposing": self.decomposing.iter().map(|(r, _)| show(r)).collect::<Vec<_>>(),
            "protocol": self.protocol.iter().map(show).collect::<Vec<_>>(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    AttackFound,
    SecureAtBound,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::AttackFound => "attack-found",
            Status::SecureAtBound => "secure-at-bound",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub status: Status,
    pub target: Term,
    pub proof: Option<DerivationProof>,
    pub bounds: Bounds,
    pub statistics: Statistics,
    /// Whether protocol firing reached a fixpoint before the round bound.
    pub fixpoint_reached: bool,
}

impl Verdict {
    pub fn to_json(&self) -> Value {
        json!({
            "status": self.status.as_str(),
            "target": self.target.to_string(),
            "bounds": self.bounds.to_json(),
            "statistics": self.statistics.to_json(),
            "fixpoint_reached": self.fixpoint_reached,
            "proof": self.proof.as_ref().map(DerivationProof::to_json),
        })
    }
}

/// Terms grouped by constructor for join matching.
#[derive(Debug, Clone, Default)]
pub(crate) struct TagIndex {
    by_tag: BTreeMap<Tag, Vec<Term>>,
}

impl TagIndex {
    pub(crate) fn insert(&mut self, t: Term) {
        self.by_tag.entry(t.tag()).or_default().push(t);
    }

    pub(crate) fn with_tag(&self, tag: Tag) -> &[Term] {
        self.by_tag.get(&tag).map(Vec::as_slice).unwrap_or(&[])
    }

    pub(crate) fn iter(&self) -> impl Iterator<Item = &Term> {
        self.by_tag.values().flatten()
    }
}
