//! Cryptographic primitives as locally collision-free tuple sets.
//!
//! A [`PrimitiveSpec`] describes a relation `S ⊆ V^m` by a schema of `m`
//! pattern terms over shared variables. Positions in `C` are computed by the
//! primitive from the positions listed in `W_i` (composing); positions in
//! `D` are extracted from them (decomposing). Indices are 1-based throughout.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::rules::{instantiate, match_all, Guard, ProjectedRule, Substitution};
use crate::term::{Tag, Term};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimitiveSpec {
    pub name: String,
    pub principal: String,
    pub schema: Vec<Term>,
    pub composing: BTreeSet<usize>,
    pub decomposing: BTreeSet<usize>,
    pub premises: BTreeMap<usize, BTreeSet<usize>>,
    pub labels: BTreeMap<usize, String>,
    pub guards: Vec<Guard>,
    /// Schema variable standing for the learner's identity (nonces).
    pub learner_var: Option<String>,
    /// Values declared to lie in `Im(S)` without a constructor witness.
    pub declared_image: BTreeSet<Term>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RuleKind {
    Composing,
    /// `control` indexes the controlling premise within the rule's premises.
    Decomposing { control: usize },
}

/// A projected rule contributed by a primitive, tagged with its class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimitiveRule {
    pub rule: ProjectedRule,
    pub kind: RuleKind,
    pub spec: String,
    pub position: usize,
}

fn set(items: &[usize]) -> BTreeSet<usize> {
    items.iter().copied().collect()
}

fn v(name: &str) -> Term {
    Term::var(name)
}

impl PrimitiveSpec {
    pub fn arity(&self) -> usize {
        self.schema.len()
    }

    pub fn label(&self, i: usize) -> String {
        self.labels.get(&i).cloned().unwrap_or_else(|| format!("p{i}"))
    }

    pub fn rule_id(&self, i: usize) -> String {
        format!("{}.{}", self.name, self.label(i))
    }

    /// Structural well-formedness of the index sets.
    pub fn validate(&self) -> Result<()> {
        let m = self.arity();
        let bad = |msg: String| Err(Error::Validation(format!("primitive `{}`: {msg}", self.name)));
        if m == 0 {
            return bad("empty schema".into());
        }
        for i in self.composing.iter().chain(&self.decomposing) {
            if *i == 0 || *i > m {
                return bad(format!("position {i} is out of range 1..{m}"));
            }
        }
        if let Some(i) = self.composing.intersection(&self.decomposing).next() {
            return bad(format!("position {i} is both composing and decomposing"));
        }
        let active: BTreeSet<usize> = self.composing.union(&self.decomposing).copied().collect();
        let defined: BTreeSet<usize> = self.premises.keys().copied().collect();
        if active != defined {
            return bad(format!(
                "premise sets must be given exactly for positions {active:?}, got {defined:?}"
            ));
        }
        for (i, w) in &self.premises {
            if let Some(j) = w.iter().find(|j| **j == 0 || **j > m) {
                return bad(format!("W_{i} mentions position {j} outside 1..{m}"));
            }
            if w.contains(i) {
                return bad(format!("W_{i} contains its own position"));
            }
        }
        Ok(())
    }

    /// The composing partner `h ∈ C ∩ W_i` with `i ∈ W_h`, least first.
    pub fn controller(&self, i: usize) -> Option<usize> {
        let w = self.premises.get(&i)?;
        w.iter()
            .copied()
            .find(|h| self.composing.contains(h) && self.premises.get(h).is_some_and(|wh| wh.contains(&i)))
    }

    /// Constructors heading composing positions.
    pub fn constructors(&self) -> BTreeSet<Tag> {
        self.composing
            .iter()
            .map(|i| self.schema[i - 1].tag())
            .filter(|t| *t != Tag::Var)
            .collect()
    }

    /// Projected rules for every composing and decomposing position.
    /// `learners` are the identities substituted for the learner variable.
    pub fn rules(&self, learners: &[String]) -> Vec<PrimitiveRule> {
        let mut out = Vec::new();
        let learner_choices: Vec<Option<&String>> = match &self.learner_var {
            Some(_) if !learners.is_empty() => learners.iter().map(Some).collect(),
            _ => vec![None],
        };
        for i in self.composing.iter().chain(&self.decomposing) {
            let w: Vec<usize> = self.premises[i].iter().copied().collect();
            let kind = if self.composing.contains(i) {
                RuleKind::Composing
            } else {
                let h = self.controller(*i).unwrap_or(w[0]);
                RuleKind::Decomposing {
                    control: w.iter().position(|j| *j == h).unwrap_or(0),
                }
            };
            for learner in &learner_choices {
                let fix = |t: &Term| match (learner, &self.learner_var) {
                    (Some(l), Some(var)) => {
                        let s = Substitution::from([(var.clone(), Term::identity(l))]);
                        crate::rules::resolve(t, &s)
                    }
                    _ => t.clone(),
                };
                let mut id = self.rule_id(*i);
                if let (Some(l), true) = (learner, learner_choices.len() > 1) {
                    id = format!("{id}[{l}]");
                }
                let rule = ProjectedRule {
                    id,
                    family: self.rule_id(*i),
                    origin: self.principal.clone(),
                    premises: w.iter().map(|j| fix(&self.schema[j - 1])).collect(),
                    conclusion: fix(&self.schema[i - 1]),
                    guards: self.guards.clone(),
                };
                out.push(PrimitiveRule {
                    rule,
                    kind,
                    spec: self.name.clone(),
                    position: *i,
                });
            }
        }
        out
    }

    fn guards_allow(&self, s: &Substitution) -> bool {
        self.guards.iter().all(|g| g.check(s) != Some(false))
            && self.learner_var.as_ref().is_none_or(|l| {
                s.get(l).is_none_or(|t| t.tag() == Tag::Identity)
            })
    }

    /// Instantiations of the schema that place `value` at position `i`. Those
    /// of the `needed` positions' variables not fixed by `value` are drawn
    /// from `universe`.
    fn instances_at(&self, i: usize, value: &Term, needed: &[usize], universe: &[Term]) -> Vec<Substitution> {
        let mut out = Vec::new();
        for s in match_all(&self.schema[i - 1], value, &Substitution::new()) {
            let free: BTreeSet<String> = needed
                .iter()
                .flat_map(|j| self.schema[j - 1].vars())
                .filter(|x| !s.contains_key(x))
                .collect();
            let mut partial = vec![s];
            for x in &free {
                partial = partial
                    .into_iter()
                    .flat_map(|p| {
                        universe.iter().map(move |u| {
                            let mut q = p.clone();
                            q.insert(x.clone(), u.clone());
                            q
                        })
                    })
                    .collect();
            }
            out.extend(partial.into_iter().filter(|s| self.guards_allow(s)));
        }
        out
    }

    fn premise_values(&self, i: usize, s: &Substitution) -> Option<BTreeSet<Term>> {
        self.premises[&i]
            .iter()
            .map(|j| instantiate(&self.schema[j - 1], s).ok())
            .collect()
    }

    /// Premise sets of the composing instances producing `value`.
    fn composing_premises(&self, value: &Term, universe: &[Term]) -> Vec<(usize, BTreeSet<Term>)> {
        let mut out = Vec::new();
        for i in &self.composing {
            let needed: Vec<usize> = self.premises[i].iter().copied().collect();
            for s in self.instances_at(*i, value, &needed, universe) {
                if let Some(p) = self.premise_values(*i, &s) {
                    out.push((*i, p));
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }

    /// Ground instances of every rule whose whole tuple lies in `universe`,
    /// as `(position, premises, conclusion)`.
    pub fn ground_instances(&self, universe: &BTreeSet<Term>) -> Vec<(usize, BTreeSet<Term>, Term)> {
        let vars: Vec<String> = self.schema.iter().flat_map(Term::vars).collect::<BTreeSet<_>>().into_iter().collect();
        let values: Vec<&Term> = universe.iter().collect();
        let mut substs = vec![Substitution::new()];
        for x in &vars {
            substs = substs
                .into_iter()
                .flat_map(|s| {
                    values.iter().map(move |u| {
                        let mut q = s.clone();
                        q.insert(x.clone(), (*u).clone());
                        q
                    })
                })
                .collect();
        }
        let mut out = Vec::new();
        for s in substs.iter().filter(|s| self.guards_allow(s)) {
            let Some(tuple) = self
                .schema
                .iter()
                .map(|t| instantiate(t, s).ok().filter(|v| universe.contains(v)))
                .collect::<Option<Vec<Term>>>()
            else {
                continue;
            };
            for i in self.composing.iter().chain(&self.decomposing) {
                let premises = self.premises[i].iter().map(|j| tuple[j - 1].clone()).collect();
                out.push((*i, premises, tuple[i - 1].clone()));
            }
        }
        out.sort();
        out.dedup();
        out
    }

    /// Whether `value` is in `Im(S)`.
    pub fn in_image(&self, value: &Term) -> bool {
        self.declared_image.contains(value) || self.composing.iter().any(|i| self.matches_open(*i, value))
    }

    // A composing pattern matches `value` when some instantiation of the
    // remaining variables exists; those variables range over all of V, so a
    // structural match with satisfiable guards suffices.
    fn matches_open(&self, i: usize, value: &Term) -> bool {
        match_all(&self.schema[i - 1], value, &Substitution::new())
            .iter()
            .any(|s| self.guards_allow(s))
    }
}

/// Library of built-in primitives.
pub fn builtin_specs() -> Vec<PrimitiveSpec> {
    let labels = |pairs: &[(usize, &str)]| -> BTreeMap<usize, String> {
        pairs.iter().map(|(i, l)| (*i, l.to_string())).collect()
    };
    let premises = |pairs: &[(usize, &[usize])]| -> BTreeMap<usize, BTreeSet<usize>> {
        pairs.iter().map(|(i, w)| (*i, set(w))).collect()
    };
    let plain = |name: &str, schema: Vec<Term>| PrimitiveSpec {
        name: name.to_string(),
        principal: name.to_string(),
        schema,
        composing: BTreeSet::new(),
        decomposing: BTreeSet::new(),
        premises: BTreeMap::new(),
        labels: BTreeMap::new(),
        guards: Vec::new(),
        learner_var: None,
        declared_image: BTreeSet::new(),
    };
    let pair_like = |name: &str, build: fn(Term, Term) -> Term, names: [&str; 3]| PrimitiveSpec {
        composing: set(&[3]),
        decomposing: set(&[1, 2]),
        premises: premises(&[(1, &[3]), (2, &[3]), (3, &[1, 2])]),
        labels: labels(&[(3, names[0]), (1, names[1]), (2, names[2])]),
        ..plain(name, vec![v("x"), v("y"), build(v("x"), v("y"))])
    };
    vec![
        PrimitiveSpec {
            composing: set(&[2, 4, 5]),
            decomposing: set(&[3]),
            premises: premises(&[(2, &[1]), (3, &[1, 4]), (4, &[2, 3]), (5, &[1, 3])]),
            labels: labels(&[(2, "keygen"), (3, "decrypt"), (4, "encrypt"), (5, "sign")]),
            ..plain(
                "e",
                vec![
                    v("s"),
                    Term::pk(v("s")),
                    v("x"),
                    Term::enc(Term::pk(v("s")), v("x")),
                    Term::sig(v("s"), v("x")),
                ],
            )
        },
        PrimitiveSpec {
            composing: set(&[3]),
            decomposing: set(&[2]),
            premises: premises(&[(2, &[1, 3]), (3, &[1, 2])]),
            labels: labels(&[(3, "encrypt"), (2, "decrypt")]),
            guards: vec![Guard {
                var: "k".into(),
                not_head: Tag::PubKey,
            }],
            ..plain("sym", vec![v("k"), v("x"), Term::enc(v("k"), v("x"))])
        },
        pair_like("t", Term::pair, ["pair", "first", "second"]),
        pair_like("set2", Term::set2, ["set", "left", "right"]),
        PrimitiveSpec {
            composing: set(&[2]),
            premises: premises(&[(2, &[1])]),
            labels: labels(&[(2, "nonce")]),
            learner_var: Some("p".into()),
            ..plain("n", vec![v("v"), Term::nonce(v("v"), v("p"))])
        },
        PrimitiveSpec {
            composing: set(&[2]),
            premises: premises(&[(2, &[1])]),
            labels: labels(&[(2, "hash")]),
            ..plain("h", vec![v("x"), Term::hash(v("x"))])
        },
        PrimitiveSpec {
            composing: set(&[3]),
            decomposing: set(&[2]),
            premises: premises(&[(2, &[1, 3]), (3, &[1, 2])]),
            labels: labels(&[(3, "ruleval"), (2, "apply")]),
            ..plain("r", vec![v("x"), v("y"), Term::rule_val(v("x"), v("y"))])
        },
    ]
}

pub fn builtin_spec(name: &str) -> Option<PrimitiveSpec> {
    builtin_specs().into_iter().find(|s| s.name == name)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// A decomposing position without a composing controller.
    S1 { position: usize },
    /// Two composing instances produce `value` from different premise sets.
    S2 {
        value: Term,
        first: (usize, BTreeSet<Term>),
        second: (usize, BTreeSet<Term>),
    },
}

impl Violation {
    pub fn condition(&self) -> &'static str {
        match self {
            Violation::S1 { .. } => "s1",
            Violation::S2 { .. } => "s2",
        }
    }

    pub fn message(&self) -> String {
        let show = |s: &BTreeSet<Term>| {
            let items: Vec<String> = s.iter().map(Term::to_string).collect();
            format!("{{{}}}", items.join(", "))
        };
        match self {
            Violation::S1 { position } => format!(
                "decomposing position {position} has no composing position h with h in W_{position} and {position} in W_h"
            ),
            Violation::S2 { value, first, second } => format!(
                "{value} is produced at position {} from {} and at position {} from {}",
                first.0,
                show(&first.1),
                second.0,
                show(&second.1)
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CfReport {
    pub spec: String,
    pub violations: Vec<Violation>,
}

impl CfReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn to_json(&self) -> Value {
        let violations: Vec<Value> = self
            .violations
            .iter()
            .map(|v| json!({ "condition": v.condition(), "message": v.message() }))
            .collect();
        json!({ "spec": self.spec, "pass": self.pass(), "violations": violations })
    }
}

/// Checks (s1) structurally and (s2) exhaustively over `sample`. Only the
/// first (s2) collision is reported.
pub fn check_local_cf(spec: &PrimitiveSpec, sample: &BTreeSet<Term>) -> Result<CfReport> {
    spec.validate()?;
    let mut violations: Vec<Violation> = spec
        .decomposing
        .iter()
        .filter(|i| spec.controller(**i).is_none())
        .map(|i| Violation::S1 { position: *i })
        .collect();
    let universe: Vec<Term> = sample.iter().cloned().collect();
    'values: for value in &universe {
        let producers = spec.composing_premises(value, &universe);
        for (k, first) in producers.iter().enumerate() {
            if let Some(second) = producers[k + 1..].iter().find(|p| p.1 != first.1) {
                violations.push(Violation::S2 {
                    value: value.clone(),
                    first: first.clone(),
                    second: second.clone(),
                });
                break 'values;
            }
        }
    }
    Ok(CfReport {
        spec: spec.name.clone(),
        violations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Class {
    Composing,
    Decomposing { controlled_by: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Classification {
    pub position: usize,
    pub label: String,
    pub class: Class,
}

/// Composing for `i ∈ C`; decomposing for `i ∈ D`, with the controlling
/// position from (s1). Positions without a controller are omitted.
pub fn classify(spec: &PrimitiveSpec) -> Vec<Classification> {
    let mut out: Vec<Classification> = spec
        .composing
        .iter()
        .map(|i| Classification {
            position: *i,
            label: spec.label(*i),
            class: Class::Composing,
        })
        .collect();
    for i in &spec.decomposing {
        if let Some(h) = spec.controller(*i) {
            out.push(Classification {
                position: *i,
                label: spec.label(*i),
                class: Class::Decomposing { controlled_by: h },
            });
        }
    }
    out.sort_by_key(|c| c.position);
    out
}

/// Stratum of every universe term; `None` marks terms outside `S_∞`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrataMap {
    pub stratum: BTreeMap<Term, Option<usize>>,
}

impl StrataMap {
    pub fn get(&self, t: &Term) -> Option<usize> {
        self.stratum.get(t).copied().flatten()
    }

    pub fn in_s_infinity(&self, t: &Term) -> bool {
        self.get(t).is_some()
    }

    /// `v ≺ w`: both reached and `v` strictly earlier.
    pub fn precedes(&self, v: &Term, w: &Term) -> bool {
        matches!((self.get(v), self.get(w)), (Some(a), Some(b)) if a < b)
    }
}

/// Least-fixpoint strata over `universe` for the union of `specs`.
pub fn strata(universe: &BTreeSet<Term>, specs: &[PrimitiveSpec]) -> StrataMap {
    let terms: Vec<Term> = universe.iter().cloned().collect();
    let in_image = |t: &Term| specs.iter().any(|s| s.in_image(t));
    let producers: BTreeMap<Term, Vec<BTreeSet<Term>>> = terms
        .iter()
        .map(|t| {
            let sets = specs
                .iter()
                .flat_map(|s| s.composing_premises(t, &terms))
                .map(|(_, p)| p)
                .collect();
            (t.clone(), sets)
        })
        .collect();
    let mut stratum: BTreeMap<Term, Option<usize>> = terms
        .iter()
        .map(|t| (t.clone(), (!in_image(t)).then_some(0)))
        .collect();
    let mut n = 0;
    loop {
        let reached = |t: &Term, st: &BTreeMap<Term, Option<usize>>| {
            st.get(t).copied().flatten().is_some_and(|k| k <= n)
        };
        let next: Vec<Term> = terms
            .iter()
            .filter(|t| stratum[*t].is_none())
            .filter(|t| {
                producers[*t]
                    .iter()
                    .any(|ps| ps.iter().all(|p| reached(p, &stratum)))
            })
            .cloned()
            .collect();
        if next.is_empty() {
            return StrataMap { stratum };
        }
        n += 1;
        for t in next {
            stratum.insert(t, Some(n));
        }
    }
}

/// Members of `Im(S)` that no stratum reaches.
pub fn fixed_set(universe: &BTreeSet<Term>, spec: &PrimitiveSpec) -> crate::knowledge::FixedSet {
    let map = strata(universe, std::slice::from_ref(spec));
    crate::knowledge::FixedSet {
        owner: spec.principal.clone(),
        members: universe
            .iter()
            .filter(|t| spec.in_image(t) && !map.in_s_infinity(t))
            .cloned()
            .collect(),
    }
}

/// A decomposition of a composed value that yields something outside the
/// composition's premises.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PruningViolation {
    pub value: Term,
    pub composed_by: String,
    pub decomposed_by: String,
    pub extracted: Term,
}

/// For every universe value built by a composing instance with premises
/// `X'`, every decomposing instance controlled by it must extract a member
/// of `X'`.
pub fn self_composition_violations(universe: &BTreeSet<Term>, specs: &[PrimitiveSpec]) -> Vec<PruningViolation> {
    let terms: Vec<Term> = universe.iter().cloned().collect();
    let mut out = Vec::new();
    for value in &terms {
        for cs in specs {
            for (ci, premises) in cs.composing_premises(value, &terms) {
                for ds in specs {
                    for di in &ds.decomposing {
                        let Some(h) = ds.controller(*di) else { continue };
                        for s in ds.instances_at(h, value, &[*di], &terms) {
                            let Ok(x) = instantiate(&ds.schema[di - 1], &s) else { continue };
                            if !premises.contains(&x) {
                                out.push(PruningViolation {
                                    value: value.clone(),
                                    composed_by: cs.rule_id(ci),
                                    decomposed_by: ds.rule_id(*di),
                                    extracted: x,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Universe values lying in the composing images of two different specs.
pub fn image_collisions(universe: &BTreeSet<Term>, specs: &[PrimitiveSpec]) -> Vec<(Term, String, String)> {
    let mut out = Vec::new();
    for t in universe {
        let owners: Vec<&str> = specs
            .iter()
            .filter(|s| s.in_image(t))
            .map(|s| s.name.as_str())
            .collect();
        for (k, a) in owners.iter().enumerate() {
            for b in &owners[k + 1..] {
                out.push((t.clone(), a.to_string(), b.to_string()));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::enumerate_universe;

    fn e() -> PrimitiveSpec {
        builtin_spec("e").unwrap()
    }

    fn atoms(names: &[&str]) -> BTreeSet<Term> {
        names.iter().map(|n| Term::atom(n)).collect()
    }

    #[test]
    fn builtins_are_well_formed() {
        for s in builtin_specs() {
            s.validate().unwrap();
        }
    }

    #[test]
    fn e_spec_shape() {
        let s = e();
        assert_eq!(s.composing, set(&[2, 4, 5]));
        assert_eq!(s.decomposing, set(&[3]));
        assert_eq!(s.premises[&3], set(&[1, 4]));
        assert_eq!(s.controller(3), Some(4));
    }

    #[test]
    fn pair_and_rule_value_rules() {
        let t = builtin_spec("t").unwrap().rules(&[]);
        let (x, y) = (v("x"), v("y"));
        let pair = t.iter().find(|r| r.rule.id == "t.pair").unwrap();
        assert_eq!(pair.rule.premises, vec![x.clone(), y.clone()]);
        assert_eq!(pair.rule.conclusion, Term::pair(x.clone(), y.clone()));
        let first = t.iter().find(|r| r.rule.id == "t.first").unwrap();
        assert_eq!(first.rule.premises, vec![Term::pair(x.clone(), y.clone())]);
        assert_eq!(first.rule.conclusion, x.clone());
        let r = builtin_spec("r").unwrap().rules(&[]);
        let apply = r.iter().find(|r| r.rule.id == "r.apply").unwrap();
        assert_eq!(apply.rule.premises, vec![x.clone(), Term::rule_val(x, y.clone())]);
        assert_eq!(apply.rule.conclusion, y);
        assert_eq!(apply.kind, RuleKind::Decomposing { control: 1 });
    }

    #[test]
    fn nonce_rules_expand_per_learner() {
        let n = builtin_spec("n").unwrap();
        let one = n.rules(&["o".into()]);
        assert_eq!(one[0].rule.id, "n.nonce");
        assert_eq!(one[0].rule.conclusion, Term::nonce(v("v"), Term::identity("o")));
        let two = n.rules(&["o1".into(), "o2".into()]);
        assert_eq!(two.len(), 2);
        assert_eq!(two[1].rule.id, "n.nonce[o2]");
    }

    #[test]
    fn e_spec_is_locally_collision_free() {
        let u = enumerate_universe(&atoms(&["a", "b"]), &BTreeSet::from([Tag::PubKey]), 1, 100).unwrap();
        assert!(check_local_cf(&e(), &u).unwrap().pass());
    }

    #[test]
    fn classification_of_e() {
        let c = classify(&e());
        let by_pos: BTreeMap<usize, Class> = c.iter().map(|c| (c.position, c.class)).collect();
        assert_eq!(by_pos[&2], Class::Composing);
        assert_eq!(by_pos[&3], Class::Decomposing { controlled_by: 4 });
        let r = classify(&builtin_spec("r").unwrap());
        assert_eq!(r[0].class, Class::Decomposing { controlled_by: 3 });
    }

    #[test]
    fn strata_examples() {
        let h = builtin_spec("h").unwrap();
        let a = Term::atom("a");
        let u = BTreeSet::from([a.clone(), Term::hash(a.clone())]);
        let m = strata(&u, std::slice::from_ref(&h));
        assert_eq!(m.get(&a), Some(0));
        assert_eq!(m.get(&Term::hash(a.clone())), Some(1));
        assert!(fixed_set(&u, &h).members.is_empty());

        let (s, x) = (Term::atom("s"), Term::atom("x"));
        let c = Term::enc(Term::pk(s.clone()), x.clone());
        let u = BTreeSet::from([s.clone(), x, Term::pk(s), c.clone()]);
        assert_eq!(strata(&u, &[e()]).get(&c), Some(2));
    }

    #[test]
    fn declared_tokens_are_fixed() {
        let mut h = builtin_spec("h").unwrap();
        let tok = Term::atom("tok");
        h.declared_image.insert(tok.clone());
        let u = BTreeSet::from([Term::atom("a"), tok.clone()]);
        assert_eq!(fixed_set(&u, &h).members, BTreeSet::from([tok]));
    }

    #[test]
    fn malformed_index_sets_are_rejected() {
        let mut s = e();
        s.premises.insert(3, set(&[1, 9]));
        assert!(matches!(check_local_cf(&s, &BTreeSet::new()), Err(Error::Validation(_))));
    }
}
