//! Derivation proofs and their independent replay.

use std::collections::BTreeSet;

use serde_json::{json, Map, Value};

use super::RuleSet;
use crate::error::{Error, Result};
use crate::rules::{instantiate, Substitution};
use crate::term::{parse_term, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StepKind {
    Initial,
    Compose,
    Decompose,
    ProtocolRule,
}

impl StepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StepKind::Initial => "initial",
            StepKind::Compose => "compose",
            StepKind::Decompose => "decompose",
            StepKind::ProtocolRule => "protocol-rule",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [StepKind::Initial, StepKind::Compose, StepKind::Decompose, StepKind::ProtocolRule]
            .into_iter()
            .find(|k| k.as_str() == s)
    }
}

/// A tree of rule applications whose root concludes the derived term.
/// `premises` are in the order of the rule's premise list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivationProof {
    pub kind: StepKind,
    pub rule: Option<String>,
    pub substitution: Substitution,
    pub premises: Vec<DerivationProof>,
    pub conclusion: Term,
}

impl DerivationProof {
    pub fn initial(t: Term) -> Self {
        DerivationProof {
            kind: StepKind::Initial,
            rule: None,
            substitution: Substitution::new(),
            premises: Vec::new(),
            conclusion: t,
        }
    }

    pub fn steps(&self) -> usize {
        1 + self.premises.iter().map(DerivationProof::steps).sum::<usize>()
    }

    /// Post-order walk visiting each distinct conclusion once.
    pub fn linearize(&self) -> Vec<&DerivationProof> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        self.collect(&mut seen, &mut out);
        out
    }

    fn collect<'a>(&'a self, seen: &mut BTreeSet<Term>, out: &mut Vec<&'a DerivationProof>) {
        if seen.contains(&self.conclusion) {
            return;
        }
        for p in &self.premises {
            p.collect(seen, out);
        }
        seen.insert(self.conclusion.clone());
        out.push(self);
    }

    /// Numbered narrative of the derivation.
    pub fn trace(&self) -> Vec<String> {
        self.linearize()
            .into_iter()
            .enumerate()
            .map(|(i, step)| match step.kind {
                StepKind::Initial => format!("{}. Oscar knows {} initially", i + 1, step.conclusion),
                _ => {
                    let premises: Vec<String> = step.premises.iter().map(|p| p.conclusion.to_string()).collect();
                    let from = if premises.is_empty() {
                        "nothing".to_string()
                    } else {
                        premises.join(", ")
                    };
                    format!(
                        "{}. Oscar learns {} via {} from {}",
                        i + 1,
                        step.conclusion,
                        step.rule.as_deref().unwrap_or("?"),
                        from
                    )
                }
            })
            .collect()
    }

    /// Rule ids of all non-initial steps, in trace order.
    pub fn rules_used(&self) -> Vec<&str> {
        self.linearize().into_iter().filter_map(|s| s.rule.as_deref()).collect()
    }

    pub fn to_json(&self) -> Value {
        let subst: Map<String, Value> = self
            .substitution
            .iter()
            .map(|(k, v)| (k.clone(), Value::String(v.to_string())))
            .collect();
        json!({
            "kind": self.kind.as_str(),
            "rule": self.rule,
            "substitution": subst,
            "conclusion": self.conclusion.to_string(),
            "premises": self.premises.iter().map(DerivationProof::to_json).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let bad = |m: &str| Error::Validation(format!("malformed proof: {m}"));
        let obj = v.as_object().ok_or_else(|| bad("step is not an object"))?;
        let kind = obj
            .get("kind")
            .and_then(Value::as_str)
            .and_then(StepKind::parse)
            .ok_or_else(|| bad("missing or unknown `kind`"))?;
        let rule = match obj.get("rule") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => return Err(bad("`rule` must be a string")),
        };
        let mut substitution = Substitution::new();
        if let Some(map) = obj.get("substitution") {
            let map = map.as_object().ok_or_else(|| bad("`substitution` must be an object"))?;
            for (k, t) in map {
                let text = t.as_str().ok_or_else(|| bad("substitution values must be strings"))?;
                substitution.insert(k.clone(), parse_term(text)?);
            }
        }
        let conclusion = obj
            .get("conclusion")
            .and_then(Value::as_str)
            .ok_or_else(|| bad("missing `conclusion`"))
            .and_then(parse_term)?;
        let premises = match obj.get("premises") {
            None => Vec::new(),
            Some(Value::Array(items)) => items.iter().map(DerivationProof::from_json).collect::<Result<_>>()?,
            Some(_) => return Err(bad("`premises` must be an array")),
        };
        Ok(DerivationProof {
            kind,
            rule,
            substitution,
            premises,
            conclusion,
        })
    }
}

/// Re-checks every step against the rule definitions: each step's
/// instantiated premises must equal its children's conclusions in order, and
/// every leaf must be initial knowledge. Structural defects (an initial step
/// with children, a rule step without a rule, an unknown rule id) are errors;
/// a well-formed but wrong proof yields `Ok(false)`.
pub fn replay(proof: &DerivationProof, rules: &RuleSet, initial: &BTreeSet<Term>) -> Result<bool> {
    match proof.kind {
        StepKind::Initial => {
            if !proof.premises.is_empty() {
                return Err(Error::Validation("initial step with premises".into()));
            }
            Ok(initial.contains(&proof.conclusion))
        }
        kind => {
            let id = proof
                .rule
                .as_deref()
                .ok_or_else(|| Error::Validation(format!("{} step without a rule id", kind.as_str())))?;
            let (rule, found_kind) = rules
                .find(id)
                .ok_or_else(|| Error::Validation(format!("unknown rule id `{id}`")))?;
            if found_kind != kind || rule.premises.len() != proof.premises.len() {
                return Ok(false);
            }
            if !rule.guards_hold(&proof.substitution) || rule.guards.iter().any(|g| g.check(&proof.substitution).is_none()) {
                return Ok(false);
            }
            let Ok(conclusion) = instantiate(&rule.conclusion, &proof.substitution) else {
                return Ok(false);
            };
            if conclusion != proof.conclusion {
                return Ok(false);
            }
            for (pattern, child) in rule.premises.iter().zip(&proof.premises) {
                match instantiate(pattern, &proof.substitution) {
                    Ok(p) if p == child.conclusion => {}
                    _ => return Ok(false),
                }
                if !replay(child, rules, initial)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
    }
}
