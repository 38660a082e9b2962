//! Two-phase derivation engine.
//!
//! The analyzed set `A` starts as the initial knowledge and grows by
//! decomposition (side premises discharged by synthesis) and by protocol
//! rules whose triggers are synthesizable. A term is derivable when it can
//! be composed from `A`. Conclusions that are already derivable are never
//! added: decomposing a composed value only returns its own premises, so
//! they could not contribute anything new.
//!
//! Protocol triggers are solved symbolically. A compound trigger pattern is
//! either an analyzed term or the conclusion of a composing rule; the second
//! case is found by unification and splits the goal into the composing
//! rule's premises. Variables left open this way can be any derivable term.
//! If the conclusion is derivable for a generic value (a fresh witness atom
//! standing in for it) the firing cannot add anything and is skipped;
//! otherwise all derivable terms within the remaining depth budget are
//! enumerated.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::rc::Rc;

use super::proof::{DerivationProof, StepKind};
use super::{Bounds, RuleSet, Statistics, Status, TagIndex, Verdict};
use crate::error::{Error, Result};
use crate::rules::{instantiate, match_all, rename_vars, resolve, unify, Guard, ProjectedRule, Substitution};
use crate::term::enumerate_from_blocks;
use crate::term::{Tag, Term};

const WITNESS_PREFIX: char = '?';

fn is_witness(t: &Term) -> bool {
    t.tag() == Tag::Atom && t.name().is_some_and(|n| n.starts_with(WITNESS_PREFIX))
}

/// How a derivable term is composed from analyzed ones.
#[derive(Debug)]
enum Plan {
    Known(Term),
    Compose {
        rule: String,
        subst: Substitution,
        premises: Vec<Rc<Plan>>,
        conclusion: Term,
        height: usize,
    },
}

impl Plan {
    fn height(&self) -> usize {
        match self {
            Plan::Known(_) => 0,
            Plan::Compose { height, .. } => *height,
        }
    }

    fn term(&self) -> &Term {
        match self {
            Plan::Known(t) => t,
            Plan::Compose { conclusion, .. } => conclusion,
        }
    }
}

#[derive(Debug)]
enum Justification {
    Initial,
    Derived {
        kind: StepKind,
        rule: String,
        subst: Substitution,
        premises: Vec<Rc<Plan>>,
    },
}

/// Guard outcome where a witness counts as violating every guard, since a
/// concrete value in its place might.
fn guard_verdict(g: &Guard, s: &Substitution) -> Option<bool> {
    let value = resolve(&Term::var(&g.var), s);
    if is_witness(&value) {
        return Some(false);
    }
    g.check(s)
}

fn guards_pass(guards: &[Guard], s: &Substitution) -> bool {
    guards.iter().all(|g| guard_verdict(g, s) != Some(false))
}

pub struct Analyzer<'r> {
    rules: &'r RuleSet,
    bounds: Bounds,
    audit: bool,
    known: BTreeMap<Term, Justification>,
    index: TagIndex,
    memo: HashMap<Term, Option<Rc<Plan>>>,
    candidates: BTreeMap<usize, Rc<Vec<Term>>>,
    constructors: BTreeSet<Tag>,
    blocks: BTreeSet<Term>,
    fresh: usize,
    stats: Statistics,
}

/// An open trigger solution: bindings (possibly to patterns over fresh
/// variables) and the guards still to respect.
type Solution = (Substitution, Vec<Guard>);

impl<'r> Analyzer<'r> {
    pub fn new(rules: &'r RuleSet, initial: &BTreeSet<Term>, bounds: Bounds) -> Result<Self> {
        if let Some(t) = initial.iter().find(|t| !t.is_ground()) {
            return Err(Error::Validation(format!("initial knowledge `{t}` is not ground")));
        }
        let mut a = Analyzer {
            rules,
            bounds,
            audit: false,
            known: BTreeMap::new(),
            index: TagIndex::default(),
            memo: HashMap::new(),
            candidates: BTreeMap::new(),
            constructors: rules.composing_constructors(),
            blocks: rules.composing_blocks(),
            fresh: 0,
            stats: Statistics::default(),
        };
        for t in initial {
            a.insert(t.clone(), Justification::Initial);
        }
        Ok(a)
    }

    /// Checks every composition performed during synthesis against every
    /// decomposition it controls, counting extractions that are neither
    /// premises of the composition nor derivable.
    pub fn with_audit(mut self, on: bool) -> Self {
        self.audit = on;
        self
    }

    pub fn statistics(&self) -> &Statistics {
        &self.stats
    }

    pub fn analyzed(&self) -> impl Iterator<Item = &Term> {
        self.known.keys()
    }

    fn insert(&mut self, t: Term, j: Justification) {
        self.index.insert(t.clone());
        self.known.insert(t, j);
        self.memo.clear();
        self.candidates.clear();
        self.stats.terms_explored = self.known.len();
    }

    pub fn derivable_now(&mut self, t: &Term) -> bool {
        self.synth(t).is_some()
    }

    fn synth(&mut self, t: &Term) -> Option<Rc<Plan>> {
        self.stats.synth_calls += 1;
        if self.known.contains_key(t) || is_witness(t) {
            return Some(Rc::new(Plan::Known(t.clone())));
        }
        if t.depth() > self.bounds.max_term_depth || !t.is_ground() {
            return None;
        }
        if let Some(hit) = self.memo.get(t) {
            return hit.clone();
        }
        let rules = self.rules;
        let mut best: Option<Rc<Plan>> = None;
        for rule in rules.composing.iter().filter(|r| r.conclusion.is_var() || r.conclusion.tag() == t.tag()) {
            for s in match_all(&rule.conclusion, t, &Substitution::new()) {
                if !guards_pass(&rule.guards, &s) {
                    continue;
                }
                let Ok(premises) = rule.premises.iter().map(|p| instantiate(p, &s)).collect::<Result<Vec<_>>>() else {
                    continue;
                };
                if premises.iter().any(|p| p.depth() >= t.depth()) {
                    continue;
                }
                let mut plans = Vec::with_capacity(premises.len());
                for p in &premises {
                    match self.synth(p) {
                        Some(plan) => plans.push(plan),
                        None => break,
                    }
                }
                if plans.len() != premises.len() {
                    continue;
                }
                let height = 1 + plans.iter().map(|p| p.height()).max().unwrap_or(0);
                if height > self.bounds.max_synthesis_depth || best.as_ref().is_some_and(|b| b.height() <= height) {
                    continue;
                }
                best = Some(Rc::new(Plan::Compose {
                    rule: rule.id.clone(),
                    subst: s,
                    premises: plans,
                    conclusion: t.clone(),
                    height,
                }));
            }
        }
        self.memo.insert(t.clone(), best.clone());
        if self.audit {
            if let Some(Plan::Compose { premises, .. }) = best.as_deref() {
                let made_from: BTreeSet<Term> = premises.iter().map(|p| p.term().clone()).collect();
                self.audit_composed(t, &made_from);
            }
        }
        best
    }

    fn audit_composed(&mut self, value: &Term, made_from: &BTreeSet<Term>) {
        let rules = self.rules;
        for (rule, control) in &rules.decomposing {
            for s in match_all(&rule.premises[*control], value, &Substitution::new()) {
                if !guards_pass(&rule.guards, &s) {
                    continue;
                }
                let Ok(x) = instantiate(&rule.conclusion, &s) else { continue };
                self.stats.audit_checks += 1;
                if !made_from.contains(&x) && self.synth(&x).is_none() {
                    self.stats.audit_violations += 1;
                }
            }
        }
    }

    /// Decomposition closure of `A`.
    pub fn close(&mut self) {
        let rules = self.rules;
        let depth = self.bounds.max_term_depth;
        loop {
            let members: Vec<Term> = self.known.keys().cloned().collect();
            let mut added = false;
            for m in &members {
                for (rule, control) in &rules.decomposing {
                    let ctrl = &rule.premises[*control];
                    if !ctrl.is_var() && ctrl.tag() != m.tag() {
                        continue;
                    }
                    for s in match_all(ctrl, m, &Substitution::new()) {
                        if !guards_pass(&rule.guards, &s) {
                            continue;
                        }
                        let Ok(x) = instantiate(&rule.conclusion, &s) else { continue };
                        if x.depth() > depth || self.known.contains_key(&x) {
                            continue;
                        }
                        let Ok(premises) = rule.premises.iter().map(|p| instantiate(p, &s)).collect::<Result<Vec<_>>>() else {
                            continue;
                        };
                        let mut plans = Vec::with_capacity(premises.len());
                        for (i, p) in premises.iter().enumerate() {
                            let plan = if i == *control {
                                Some(Rc::new(Plan::Known(p.clone())))
                            } else if p.depth() > depth && !self.known.contains_key(p) {
                                None
                            } else {
                                self.synth(p)
                            };
                            match plan {
                                Some(plan) => plans.push(plan),
                                None => break,
                            }
                        }
                        if plans.len() != premises.len() || self.synth(&x).is_some() {
                            continue;
                        }
                        self.stats.decompositions += 1;
                        self.insert(
                            x,
                            Justification::Derived {
                                kind: StepKind::Decompose,
                                rule: rule.id.clone(),
                                subst: s,
                                premises: plans,
                            },
                        );
                        added = true;
                    }
                }
            }
            if !added {
                return;
            }
        }
    }

    /// Fires every protocol rule once against the current `A`, then closes
    /// under decomposition. Returns the number of terms the firings added.
    pub fn round(&mut self) -> Result<usize> {
        self.stats.rounds += 1;
        let rules = self.rules;
        let mut batch: BTreeMap<Term, Justification> = BTreeMap::new();
        for rule in &rules.protocol {
            let mut solutions = Vec::new();
            let goals = rule.premises.clone();
            self.solve(goals, Substitution::new(), rule.guards.clone(), &mut solutions);
            for sol in solutions {
                self.fire(rule, sol, &mut batch)?;
            }
        }
        let added = batch.len();
        self.stats.rules_fired += added;
        for (t, j) in batch {
            self.insert(t, j);
        }
        self.close();
        Ok(added)
    }

    fn solve(&mut self, goals: Vec<Term>, subst: Substitution, guards: Vec<Guard>, out: &mut Vec<Solution>) {
        if guards.iter().any(|g| g.check(&subst) == Some(false)) {
            return;
        }
        let mut pending: Vec<Term> = goals.iter().map(|g| resolve(g, &subst)).collect();
        let Some(i) = pending.iter().position(|g| !g.is_var()) else {
            out.push((subst, guards));
            return;
        };
        let goal = pending.remove(i);
        let depth = self.bounds.max_term_depth;
        if goal.depth() > depth {
            return;
        }
        if goal.is_ground() {
            if self.synth(&goal).is_some() {
                self.solve(pending, subst, guards, out);
            }
            return;
        }
        let members: Vec<Term> = self
            .index
            .with_tag(goal.tag())
            .iter()
            .filter(|m| m.depth() <= depth && m.depth() >= goal.depth())
            .cloned()
            .collect();
        for m in members {
            for s in match_all(&goal, &m, &Substitution::new()) {
                let mut next = subst.clone();
                next.extend(s);
                self.solve(pending.clone(), next, guards.clone(), out);
            }
        }
        let rules = self.rules;
        for c in rules.composing.iter().filter(|c| !c.conclusion.is_var() && c.conclusion.tag() == goal.tag()) {
            self.fresh += 1;
            let suffix = format!("#{}", self.fresh);
            let rename = |v: &str| format!("{v}{suffix}");
            let conclusion = rename_vars(&c.conclusion, &rename);
            for s in unify(&goal, &conclusion, &subst) {
                let mut next_goals = pending.clone();
                next_goals.extend(c.premises.iter().map(|p| rename_vars(p, &rename)));
                let mut next_guards = guards.clone();
                next_guards.extend(c.guards.iter().map(|g| Guard {
                    var: rename(&g.var),
                    not_head: g.not_head,
                }));
                self.solve(next_goals, s, next_guards, out);
            }
        }
    }

    /// Derivable terms of depth at most `budget`.
    fn candidates(&mut self, budget: usize) -> Result<Rc<Vec<Term>>> {
        if let Some(c) = self.candidates.get(&budget) {
            return Ok(c.clone());
        }
        let blocks: BTreeSet<Term> = self
            .known
            .keys()
            .chain(&self.blocks)
            .filter(|t| t.depth() <= budget)
            .cloned()
            .collect();
        let all = enumerate_from_blocks(&blocks, &self.constructors, budget, self.bounds.universe_cap)?;
        let mut out = Vec::new();
        for t in all {
            if self.synth(&t).is_some() {
                out.push(t);
            }
        }
        self.stats.candidates += out.len();
        let out = Rc::new(out);
        self.candidates.insert(budget, out.clone());
        Ok(out)
    }

    fn fire(&mut self, rule: &ProjectedRule, (subst, guards): Solution, batch: &mut BTreeMap<Term, Justification>) -> Result<()> {
        let depth = self.bounds.max_term_depth;
        let premises: Vec<Term> = rule.premises.iter().map(|p| resolve(p, &subst)).collect();
        let conclusion = resolve(&rule.conclusion, &subst);
        if conclusion.depth() > depth || premises.iter().any(|p| p.depth() > depth) {
            return Ok(());
        }
        let free: BTreeSet<String> = premises.iter().chain([&conclusion]).flat_map(Term::vars).collect();
        let mut budgets = BTreeMap::new();
        for f in &free {
            let deepest = premises
                .iter()
                .chain([&conclusion])
                .filter_map(|t| t.var_position_depth(f))
                .max()
                .unwrap_or(0);
            if deepest > depth {
                return Ok(());
            }
            budgets.insert(f.clone(), depth - deepest);
        }
        let relevant: Vec<String> = conclusion.vars().into_iter().collect();
        if !relevant.is_empty() && self.bounds.max_synthesis_depth >= depth {
            let witnesses: Substitution = relevant
                .iter()
                .enumerate()
                .map(|(i, v)| (v.clone(), Term::atom(&format!("{WITNESS_PREFIX}{i}"))))
                .collect();
            if self.synth(&resolve(&conclusion, &witnesses)).is_some() {
                self.stats.generic_skips += 1;
                return Ok(());
            }
        }
        let mut assignments = vec![Substitution::new()];
        for f in &free {
            let pool = self.candidates(budgets[f])?;
            if relevant.contains(f) {
                let size = assignments.len().saturating_mul(pool.len());
                if size > self.bounds.universe_cap {
                    return Err(Error::Resource {
                        what: format!("trigger instances of rule `{}`", rule.id),
                        size,
                        cap: self.bounds.universe_cap,
                    });
                }
                assignments = assignments
                    .into_iter()
                    .flat_map(|a| {
                        pool.iter().map(move |t| {
                            let mut a = a.clone();
                            a.insert(f.clone(), t.clone());
                            a
                        })
                    })
                    .collect();
            } else {
                // Only existence matters for variables the conclusion ignores.
                let mut kept = Vec::new();
                for a in assignments {
                    let witness = pool.iter().find(|t| {
                        let mut s = a.clone();
                        s.insert(f.clone(), (*t).clone());
                        guards.iter().all(|g| guard_verdict(g, &compose(&subst, &s)) != Some(false))
                    });
                    if let Some(t) = witness {
                        let mut a = a;
                        a.insert(f.clone(), t.clone());
                        kept.push(a);
                    }
                }
                assignments = kept;
            }
        }
        for a in assignments {
            let full = compose(&subst, &a);
            if !guards.iter().all(|g| guard_verdict(g, &full) == Some(true)) {
                continue;
            }
            let Ok(c) = instantiate(&conclusion, &a) else { continue };
            if c.depth() > depth || batch.contains_key(&c) || self.known.contains_key(&c) || self.synth(&c).is_some() {
                continue;
            }
            let mut plans = Vec::with_capacity(premises.len());
            for p in &premises {
                let Ok(p) = instantiate(p, &a) else { break };
                match self.synth(&p) {
                    Some(plan) => plans.push(plan),
                    None => break,
                }
            }
            if plans.len() != premises.len() {
                continue;
            }
            let rule_vars: BTreeSet<String> = rule.premises.iter().flat_map(Term::vars).collect();
            let recorded: Substitution = rule_vars
                .into_iter()
                .filter_map(|v| {
                    let value = instantiate(&resolve(&Term::var(&v), &subst), &a).ok()?;
                    Some((v, value))
                })
                .collect();
            batch.insert(
                c,
                Justification::Derived {
                    kind: StepKind::ProtocolRule,
                    rule: rule.id.clone(),
                    subst: recorded,
                    premises: plans,
                },
            );
        }
        Ok(())
    }

    /// Runs rounds until a fixpoint, the round bound, or (when given) the
    /// target becomes derivable. Returns whether a fixpoint was reached.
    pub fn saturate(&mut self, target: Option<&Term>) -> Result<bool> {
        self.close();
        loop {
            if target.is_some_and(|t| self.synth(t).is_some()) {
                return Ok(false);
            }
            if self.stats.rounds >= self.bounds.max_rounds {
                return Ok(false);
            }
            if self.round()? == 0 {
                return Ok(true);
            }
        }
    }

    /// Proof that `t` is derivable from the current `A`.
    pub fn proof(&mut self, t: &Term) -> Option<DerivationProof> {
        let plan = self.synth(t)?;
        let mut memo = HashMap::new();
        Some(self.plan_proof(&plan, &mut memo))
    }

    fn plan_proof(&self, plan: &Plan, memo: &mut HashMap<Term, DerivationProof>) -> DerivationProof {
        match plan {
            Plan::Known(t) => self.member_proof(t, memo),
            Plan::Compose {
                rule,
                subst,
                premises,
                conclusion,
                ..
            } => DerivationProof {
                kind: StepKind::Compose,
                rule: Some(rule.clone()),
                substitution: subst.clone(),
                premises: premises.iter().map(|p| self.plan_proof(p, memo)).collect(),
                conclusion: conclusion.clone(),
            },
        }
    }

    fn member_proof(&self, t: &Term, memo: &mut HashMap<Term, DerivationProof>) -> DerivationProof {
        if let Some(p) = memo.get(t) {
            return p.clone();
        }
        let proof = match &self.known[t] {
            Justification::Initial => DerivationProof::initial(t.clone()),
            Justification::Derived {
                kind,
                rule,
                subst,
                premises,
            } => DerivationProof {
                kind: *kind,
                rule: Some(rule.clone()),
                substitution: subst.clone(),
                premises: premises.iter().map(|p| self.plan_proof(p, memo)).collect(),
                conclusion: t.clone(),
            },
        };
        memo.insert(t.clone(), proof.clone());
        proof
    }
}

/// `outer` with every binding resolved through `inner` as well.
fn compose(outer: &Substitution, inner: &Substitution) -> Substitution {
    let mut out: Substitution = outer.iter().map(|(k, v)| (k.clone(), resolve(&resolve(v, outer), inner))).collect();
    for (k, v) in inner {
        out.entry(k.clone()).or_insert_with(|| v.clone());
    }
    out
}

/// Bounded secrecy query: can the adversary derive `target` from `initial`?
pub fn derivable(rules: &RuleSet, initial: &BTreeSet<Term>, target: &Term, bounds: Bounds) -> Result<Verdict> {
    if !target.is_ground() {
        return Err(Error::Validation(format!("query target `{target}` is not ground")));
    }
    let mut a = Analyzer::new(rules, initial, bounds)?;
    let fixpoint_reached = a.saturate(Some(target))?;
    let proof = a.proof(target);
    Ok(Verdict {
        status: if proof.is_some() {
            Status::AttackFound
        } else {
            Status::SecureAtBound
        },
        target: target.clone(),
        proof,
        bounds,
        statistics: a.statistics().clone(),
        fixpoint_reached,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::replay;
    use crate::primitives::builtin_spec;

    fn rules(specs: &[&str], protocol: Vec<ProjectedRule>) -> RuleSet {
        let prims = specs
            .iter()
            .flat_map(|s| builtin_spec(s).unwrap().rules(&["o".into()]))
            .collect();
        RuleSet::new(prims, protocol).unwrap()
    }

    fn set(ts: &[Term]) -> BTreeSet<Term> {
        ts.iter().cloned().collect()
    }

    fn check(rs: &RuleSet, x0: &BTreeSet<Term>, target: &Term, bounds: Bounds) -> Verdict {
        let v = derivable(rs, x0, target, bounds).unwrap();
        if let Some(p) = &v.proof {
            assert_eq!(&p.conclusion, target);
            assert!(replay(p, rs, x0).unwrap());
        }
        v
    }

    #[test]
    fn target_in_initial_knowledge() {
        let a = Term::atom("a");
        let v = check(&rules(&["t"], vec![]), &set(std::slice::from_ref(&a)), &a, Bounds::default());
        assert_eq!(v.status, Status::AttackFound);
        assert_eq!(v.proof.unwrap().steps(), 1);
    }

    #[test]
    fn pair_projection() {
        let (a, b) = (Term::atom("a"), Term::atom("b"));
        let x0 = set(&[Term::pair(a.clone(), b.clone())]);
        let v = check(&rules(&["t"], vec![]), &x0, &b, Bounds::default());
        assert_eq!(v.status, Status::AttackFound);
        assert!(v.fixpoint_reached || v.statistics.rounds == 0);
    }

    #[test]
    fn decryption_needs_the_key() {
        let (s, x) = (Term::atom("s"), Term::atom("x"));
        let c = Term::enc(Term::pk(s.clone()), x.clone());
        let rs = rules(&["e", "t"], vec![]);
        let with = check(&rs, &set(&[s.clone(), c.clone()]), &x, Bounds::default());
        assert_eq!(with.status, Status::AttackFound);
        assert!(with.proof.unwrap().rules_used().contains(&"e.decrypt"));
        let without = check(&rs, &set(&[c]), &x, Bounds::default());
        assert_eq!(without.status, Status::SecureAtBound);
        assert!(without.fixpoint_reached);
    }

    #[test]
    fn synthesis_composes_layers() {
        let (a, s) = (Term::atom("a"), Term::atom("s"));
        let target = Term::pair(a.clone(), Term::enc(Term::pk(s.clone()), a.clone()));
        let rs = rules(&["e", "t"], vec![]);
        let v = check(&rs, &set(&[a.clone(), s]), &target, Bounds::default());
        assert_eq!(v.status, Status::AttackFound);
        assert_eq!(v.statistics.decompositions, 0);
        let shallow = Bounds::new(6, 4, 2);
        assert_eq!(check(&rs, &set(&[a, Term::atom("s")]), &target, shallow).status, Status::SecureAtBound);
    }

    #[test]
    fn protocol_rule_with_open_trigger() {
        let (a, k) = (Term::atom("a"), Term::atom("k"));
        let v = Term::var("v");
        let leak = ProjectedRule::new("leak", "p", vec![Term::hash(v.clone())], Term::pair(v, k.clone()));
        let rs = rules(&["t", "h"], vec![leak]);
        let verdict = check(&rs, &set(&[a]), &k, Bounds::new(3, 4, 3));
        assert_eq!(verdict.status, Status::AttackFound);
        assert!(verdict.proof.unwrap().rules_used().contains(&"leak"));
    }

    #[test]
    fn generic_firings_are_skipped() {
        let a = Term::atom("a");
        let v = Term::var("v");
        let echo = ProjectedRule::new("echo", "p", vec![v.clone()], Term::hash(v));
        let rs = rules(&["h"], vec![echo]);
        let verdict = check(&rs, &set(&[a]), &Term::atom("z"), Bounds::new(3, 4, 3));
        assert_eq!(verdict.status, Status::SecureAtBound);
        assert!(verdict.fixpoint_reached);
        assert_eq!(verdict.statistics.rules_fired, 0);
        assert!(verdict.statistics.generic_skips > 0);
    }

    #[test]
    fn audit_finds_no_leaks_in_builtins() {
        let (a, s) = (Term::atom("a"), Term::atom("s"));
        let rs = rules(&["e", "t", "set2", "h"], vec![]);
        let mut an = Analyzer::new(&rs, &set(&[a.clone(), s.clone()]), Bounds::default()).unwrap().with_audit(true);
        let t = Term::set2(Term::pair(a.clone(), Term::hash(s.clone())), Term::sig(s.clone(), a.clone()));
        assert!(an.derivable_now(&t));
        assert!(an.statistics().audit_checks > 0);
        assert_eq!(an.statistics().audit_violations, 0);
    }
}
