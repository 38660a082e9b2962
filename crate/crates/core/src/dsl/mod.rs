//! Protocol description language.
//!
//! ```text
//! (protocol ns
//!   (principal a honest) (principal o adversary)
//!   (use-primitive e)
//!   (define na (nonce eps (id a)))
//!   (knows o (pk (sk a)))
//!   (rule ns1 (forall (p in (a b)) (p2 in (a b o))) (from p)
//!     (conclude (enc (pk (sk p2)) (pair (id p) (nonce eps (id p))))))
//!   (query leak (nonce eps (id a))))
//! ```
//!
//! Every protocol rule teaches its conclusion to the adversary. Role
//! quantifiers range over principals and are expanded at load time; term
//! variables `(var v)` stay symbolic. Definitions are macros, expanded where
//! they are used, so roles inside them resolve in the using form's scope.

mod axioms;
mod builtin;
mod parse;
mod print;

use std::collections::BTreeSet;

use crate::engine::{derivable, replay, Bounds, DerivationProof, RuleSet, Verdict};
use crate::error::{Error, Result};
use crate::knowledge::{merge, KnowledgeState, Principal, PrincipalKind, OSCAR};
use crate::primitives::{builtin_spec, PrimitiveSpec};
use crate::rules::{expand_roles, project, PatternRule, ProjectedRule};
use crate::term::{Tag, Term};

pub use axioms::parse_primitives;
pub use builtin::{builtin_protocol, builtin_protocols};
pub use parse::parse;
pub use print::pretty;

/// Teller recorded for rules without a `(from ...)` clause.
pub const UNSPECIFIED_TELLER: &str = "honest";

pub type Roles = Vec<(String, Vec<String>)>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleDecl {
    pub name: String,
    pub roles: Roles,
    pub teller: Option<String>,
    pub premises: Vec<Term>,
    pub conclusion: Term,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryDecl {
    pub name: String,
    pub roles: Roles,
    pub target: Term,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolSpec {
    pub name: String,
    pub principals: Vec<Principal>,
    pub atoms: Vec<String>,
    pub primitives: Vec<String>,
    pub initial: Vec<(String, Term)>,
    pub rules: Vec<RuleDecl>,
    pub queries: Vec<QueryDecl>,
}

/// A protocol lowered to the adversary's view.
#[derive(Debug, Clone)]
pub struct Model {
    pub principals: Vec<Principal>,
    /// Initial knowledge after merging the adversaries.
    pub k0: KnowledgeState,
    /// Expanded and merged protocol rules.
    pub pattern_rules: Vec<PatternRule>,
    pub specs: Vec<PrimitiveSpec>,
    pub rules: RuleSet,
    pub x0: BTreeSet<Term>,
    /// `(query name, instance id, target)` after role expansion.
    pub targets: Vec<(String, String, Term)>,
}

impl ProtocolSpec {
    pub fn principal(&self, name: &str) -> Option<&Principal> {
        self.principals.iter().find(|p| p.name == name)
    }

    pub fn adversaries(&self) -> BTreeSet<String> {
        self.principals
            .iter()
            .filter(|p| p.kind == PrincipalKind::Adversary)
            .map(|p| p.name.clone())
            .collect()
    }

    pub fn rule(&self, name: &str) -> Option<&RuleDecl> {
        self.rules.iter().find(|r| r.name == name)
    }

    pub fn query(&self, name: &str) -> Option<&QueryDecl> {
        self.queries.iter().find(|q| q.name == name)
    }

    /// Checks the invariants every spec must satisfy, whether parsed or
    /// built in code.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Validation(format!("protocol `{}`: {m}", self.name)));
        let mut names = BTreeSet::new();
        for p in &self.principals {
            if !names.insert(p.name.as_str()) {
                return fail(format!("principal `{}` declared twice", p.name));
            }
        }
        if self.adversaries().is_empty() {
            return fail("at least one adversary is required".into());
        }
        let atoms: BTreeSet<&str> = self.atoms.iter().map(String::as_str).collect();
        if atoms.len() != self.atoms.len() {
            return fail("duplicate atom declaration".into());
        }
        for name in &self.primitives {
            if builtin_spec(name).is_none() {
                return fail(format!("unknown primitive `{name}`"));
            }
        }
        let check_term = |t: &Term, roles: &Roles, what: &str| -> Result<()> {
            for leaf in t.leaves() {
                let name = leaf.name().unwrap_or_default();
                let ok = match leaf.tag() {
                    Tag::Atom => atoms.contains(name),
                    Tag::Identity | Tag::SecretKey => {
                        names.contains(name) || roles.iter().any(|(r, _)| r == name)
                    }
                    _ => true,
                };
                if !ok {
                    return Err(Error::Validation(format!(
                        "protocol `{}`: {what} mentions undeclared `{name}`",
                        self.name
                    )));
                }
            }
            Ok(())
        };
        let check_roles = |roles: &Roles, what: &str| -> Result<()> {
            for (role, choices) in roles {
                if names.contains(role.as_str()) {
                    return Err(Error::Validation(format!("{what}: role `{role}` shadows a principal")));
                }
                if let Some(c) = choices.iter().find(|c| !names.contains(c.as_str())) {
                    return Err(Error::Validation(format!("{what}: role `{role}` ranges over undeclared `{c}`")));
                }
            }
            Ok(())
        };
        for (p, t) in &self.initial {
            if !names.contains(p.as_str()) {
                return fail(format!("knowledge of undeclared principal `{p}`"));
            }
            if !t.is_ground() {
                return fail(format!("initial knowledge `{t}` is not ground"));
            }
            check_term(t, &Vec::new(), "initial knowledge")?;
        }
        let mut rule_names = BTreeSet::new();
        for r in &self.rules {
            let what = format!("rule `{}`", r.name);
            if !rule_names.insert(r.name.as_str()) {
                return fail(format!("{what} declared twice"));
            }
            check_roles(&r.roles, &what)?;
            if let Some(t) = &r.teller {
                if !names.contains(t.as_str()) && !r.roles.iter().any(|(role, _)| role == t) {
                    return fail(format!("{what}: teller `{t}` is not declared"));
                }
            }
            for t in r.premises.iter().chain([&r.conclusion]) {
                check_term(t, &r.roles, &what)?;
            }
            let bound: BTreeSet<String> = r.premises.iter().flat_map(Term::vars).collect();
            if let Some(v) = r.conclusion.vars().into_iter().find(|v| !bound.contains(v)) {
                return fail(format!("{what}: unbound variable {v}"));
            }
        }
        let mut query_names = BTreeSet::new();
        for q in &self.queries {
            let what = format!("query `{}`", q.name);
            if !query_names.insert(q.name.as_str()) {
                return fail(format!("{what} declared twice"));
            }
            check_roles(&q.roles, &what)?;
            check_term(&q.target, &q.roles, &what)?;
            if !q.target.is_ground() {
                return fail(format!("{what}: target must be ground"));
            }
        }
        Ok(())
    }

    /// Expands roles, merges the adversaries into the single adversary and
    /// projects every rule onto it.
    pub fn compile(&self) -> Result<Model> {
        self.validate()?;
        let mut k = KnowledgeState::new();
        for (p, t) in &self.initial {
            k.insert(p.clone(), t.clone())?;
        }
        let mut expanded = Vec::new();
        for r in &self.rules {
            let rule = PatternRule {
                id: r.name.clone(),
                teller: r.teller.clone().unwrap_or_else(|| UNSPECIFIED_TELLER.to_string()),
                taught: r.conclusion.clone(),
                learner: OSCAR.to_string(),
                premises: r.premises.clone(),
                guards: Vec::new(),
            };
            expanded.extend(expand_roles(&rule, &r.roles));
        }
        let (k0, pattern_rules) = merge(&self.principals, &self.adversaries(), &k, &expanded)?;
        let protocol: Vec<ProjectedRule> = pattern_rules
            .iter()
            .filter_map(|r| project(r, OSCAR))
            .map(|mut r| {
                r.family = r.id.split('[').next().unwrap_or(&r.id).to_string();
                r
            })
            .collect();
        let specs: Vec<PrimitiveSpec> = self.primitives.iter().filter_map(|n| builtin_spec(n)).collect();
        let primitive = specs.iter().flat_map(|s| s.rules(&[OSCAR.to_string()])).collect();
        let rules = RuleSet::new(primitive, protocol)?;
        let x0 = k0.projection(OSCAR);
        let mut targets = Vec::new();
        for q in &self.queries {
            let stub = PatternRule {
                id: q.name.clone(),
                teller: UNSPECIFIED_TELLER.into(),
                taught: q.target.clone(),
                learner: OSCAR.into(),
                premises: Vec::new(),
                guards: Vec::new(),
            };
            for inst in expand_roles(&stub, &q.roles) {
                targets.push((q.name.clone(), inst.id, inst.taught));
            }
        }
        Ok(Model {
            principals: self.principals.clone(),
            k0,
            pattern_rules,
            specs,
            rules,
            x0,
            targets,
        })
    }
}

impl Model {
    /// Targets of the query named `name`, or of the single instance with
    /// that id.
    pub fn targets(&self, name: &str) -> Result<Vec<(String, Term)>> {
        let found: Vec<(String, Term)> = self
            .targets
            .iter()
            .filter(|(q, id, _)| q == name || id == name)
            .map(|(_, id, t)| (id.clone(), t.clone()))
            .collect();
        if found.is_empty() {
            return Err(Error::Validation(format!("no query named `{name}`")));
        }
        Ok(found)
    }

    /// One verdict per target of the query.
    pub fn check(&self, query: &str, bounds: Bounds) -> Result<Vec<(String, Verdict)>> {
        self.targets(query)?
            .into_iter()
            .map(|(id, t)| Ok((id, derivable(&self.rules, &self.x0, &t, bounds)?)))
            .collect()
    }

    pub fn replay(&self, proof: &DerivationProof) -> Result<bool> {
        replay(proof, &self.rules, &self.x0)
    }
}
