//! Communication rules over pattern terms.
//!
//! A [`PatternRule`] `(teller, taught, learner, premises)` lets `learner`
//! learn `taught` from `teller` once it knows every premise. Rules whose
//! learner is the adversary project to [`ProjectedRule`]s `X -> x`, which is
//! all the saturation engines look at.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::knowledge::FixedSet;
use crate::term::{Tag, Term};

/// Variable name to term. Bindings produced by matching are ground.
pub type Substitution = BTreeMap<String, Term>;

/// Side condition on a rule variable: the bound value must not be built by
/// `not_head`. Used to keep symmetric decryption from firing on public keys.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Guard {
    pub var: String,
    pub not_head: Tag,
}

impl Guard {
    /// `None` while the variable is unbound or bound to a bare variable.
    pub fn check(&self, subst: &Substitution) -> Option<bool> {
        let value = resolve(&Term::var(&self.var), subst);
        if value.is_var() {
            None
        } else {
            Some(value.tag() != self.not_head)
        }
    }
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(not ({} {}))", self.not_head, self.var)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PatternRule {
    pub id: String,
    pub teller: String,
    pub taught: Term,
    pub learner: String,
    /// Terms the learner must already know.
    pub premises: Vec<Term>,
    pub guards: Vec<Guard>,
}

impl PatternRule {
    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = self.taught.vars();
        for p in &self.premises {
            out.extend(p.vars());
        }
        out
    }

    /// Variables of `taught` that no premise binds.
    pub fn unbound_vars(&self) -> BTreeSet<String> {
        let bound: BTreeSet<String> = self.premises.iter().flat_map(Term::vars).collect();
        self.taught.vars().difference(&bound).cloned().collect()
    }

    pub fn is_self_rule(&self) -> bool {
        self.teller == self.learner
    }
}

/// `premises -> conclusion` as seen by the adversary.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProjectedRule {
    pub id: String,
    /// Rule family the id was expanded from (equal to `id` when unexpanded).
    pub family: String,
    pub origin: String,
    pub premises: Vec<Term>,
    pub conclusion: Term,
    pub guards: Vec<Guard>,
}

impl ProjectedRule {
    pub fn new(id: &str, origin: &str, premises: Vec<Term>, conclusion: Term) -> Self {
        ProjectedRule {
            id: id.to_string(),
            family: id.to_string(),
            origin: origin.to_string(),
            premises,
            conclusion,
            guards: Vec::new(),
        }
    }

    pub fn with_guards(mut self, guards: Vec<Guard>) -> Self {
        self.guards = guards;
        self
    }

    pub fn is_ground(&self) -> bool {
        self.conclusion.is_ground() && self.premises.iter().all(Term::is_ground)
    }

    /// Conclusion variables not bound by any premise.
    pub fn unbound_vars(&self) -> BTreeSet<String> {
        let bound: BTreeSet<String> = self.premises.iter().flat_map(Term::vars).collect();
        self.conclusion.vars().difference(&bound).cloned().collect()
    }

    pub fn guards_hold(&self, subst: &Substitution) -> bool {
        self.guards.iter().all(|g| g.check(subst) != Some(false))
    }
}

impl fmt::Display for ProjectedRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let premises: Vec<String> = self.premises.iter().map(Term::to_string).collect();
        write!(f, "{}: {{{}}} -> {}", self.id, premises.join(", "), self.conclusion)
    }
}

/// First extension of `partial` that makes `pattern` equal `ground`.
pub fn match_term(pattern: &Term, ground: &Term, partial: &Substitution) -> Option<Substitution> {
    match_all(pattern, ground, partial).into_iter().next()
}

/// Every extension of `partial` that makes `pattern` equal `ground`. More
/// than one only when a Set2 pattern can be aligned both ways.
pub fn match_all(pattern: &Term, ground: &Term, partial: &Substitution) -> Vec<Substitution> {
    let mut out = Vec::new();
    match_into(pattern, ground, partial.clone(), &mut out);
    out.sort();
    out.dedup();
    out
}

fn match_into(pattern: &Term, ground: &Term, subst: Substitution, out: &mut Vec<Substitution>) {
    if pattern.is_ground() {
        if pattern == ground {
            out.push(subst);
        }
        return;
    }
    if pattern.is_var() {
        let name = pattern.name().unwrap_or_default();
        match subst.get(name) {
            Some(bound) if bound == ground => out.push(subst),
            Some(_) => {}
            None => {
                let mut subst = subst;
                subst.insert(name.to_string(), ground.clone());
                out.push(subst);
            }
        }
        return;
    }
    if pattern.tag() != ground.tag() {
        return;
    }
    let (p, g) = (pattern.children(), ground.children());
    match_seq(p, g, subst.clone(), out);
    if pattern.tag() == Tag::Set2 && g[0] != g[1] {
        match_seq(p, &[g[1].clone(), g[0].clone()], subst, out);
    }
}

fn match_seq(patterns: &[Term], grounds: &[Term], subst: Substitution, out: &mut Vec<Substitution>) {
    let Some((p, rest)) = patterns.split_first() else {
        out.push(subst);
        return;
    };
    let mut partial = Vec::new();
    match_into(p, &grounds[0], subst, &mut partial);
    for s in partial {
        match_seq(rest, &grounds[1..], s, out);
    }
}

/// Replaces every variable of `pattern`; all must be bound to ground terms.
pub fn instantiate(pattern: &Term, subst: &Substitution) -> Result<Term> {
    let t = resolve(pattern, subst);
    if let Some(v) = t.vars().into_iter().next() {
        return Err(Error::Instantiation(v));
    }
    Ok(t)
}

/// Applies `subst` as far as it goes, following chains of variable bindings.
/// Unbound variables are left in place.
pub fn resolve(pattern: &Term, subst: &Substitution) -> Term {
    if pattern.is_ground() || subst.is_empty() {
        return pattern.clone();
    }
    if pattern.is_var() {
        return match subst.get(pattern.name().unwrap_or_default()) {
            Some(t) if t == pattern => t.clone(),
            Some(t) => resolve(t, subst),
            None => pattern.clone(),
        };
    }
    pattern.with_children(pattern.children().iter().map(|c| resolve(c, subst)).collect())
}

/// Renames every variable of `t` through `f`.
pub fn rename_vars(t: &Term, f: &dyn Fn(&str) -> String) -> Term {
    if t.is_ground() {
        return t.clone();
    }
    if t.is_var() {
        return Term::var(&f(t.name().unwrap_or_default()));
    }
    t.with_children(t.children().iter().map(|c| rename_vars(c, f)).collect())
}

/// Most general unifiers of `a` and `b` extending `subst` (with occurs
/// check). A Set2 node yields up to two unifiers, one per alignment.
pub fn unify(a: &Term, b: &Term, subst: &Substitution) -> Vec<Substitution> {
    let mut out = Vec::new();
    unify_into(a, b, subst.clone(), &mut out);
    out
}

fn unify_into(a: &Term, b: &Term, subst: Substitution, out: &mut Vec<Substitution>) {
    let a = walk(a, &subst);
    let b = walk(b, &subst);
    if a == b {
        out.push(subst);
        return;
    }
    if a.is_var() || b.is_var() {
        let (var, other) = if a.is_var() { (a, b) } else { (b, a) };
        let name = var.name().unwrap_or_default().to_string();
        if occurs(&name, &other, &subst) {
            return;
        }
        let mut subst = subst;
        subst.insert(name, other);
        out.push(subst);
        return;
    }
    if a.tag() != b.tag() || a.name() != b.name() || (a.is_ground() && b.is_ground()) {
        return;
    }
    unify_seq(a.children(), b.children(), subst.clone(), out);
    if a.tag() == Tag::Set2 {
        let swapped = [b.children()[1].clone(), b.children()[0].clone()];
        unify_seq(a.children(), &swapped, subst, out);
    }
}

fn unify_seq(xs: &[Term], ys: &[Term], subst: Substitution, out: &mut Vec<Substitution>) {
    let Some((x, rest)) = xs.split_first() else {
        out.push(subst);
        return;
    };
    let mut partial = Vec::new();
    unify_into(x, &ys[0], subst, &mut partial);
    for s in partial {
        unify_seq(rest, &ys[1..], s, out);
    }
}

fn walk(t: &Term, subst: &Substitution) -> Term {
    let mut t = t.clone();
    while t.is_var() {
        match subst.get(t.name().unwrap_or_default()) {
            Some(next) if *next != t => t = next.clone(),
            _ => break,
        }
    }
    t
}

fn occurs(var: &str, t: &Term, subst: &Substitution) -> bool {
    let t = walk(t, subst);
    if t.is_ground() {
        return false;
    }
    if t.is_var() {
        return t.name() == Some(var);
    }
    t.children().iter().any(|c| occurs(var, c, subst))
}

/// The adversary's view of `rule`: `None` unless `oscar` is the learner and
/// some other principal the teller.
pub fn project(rule: &PatternRule, oscar: &str) -> Option<ProjectedRule> {
    if rule.learner != oscar || rule.teller == oscar {
        return None;
    }
    Some(ProjectedRule {
        id: rule.id.clone(),
        family: rule.id.clone(),
        origin: rule.teller.clone(),
        premises: rule.premises.clone(),
        conclusion: rule.taught.clone(),
        guards: rule.guards.clone(),
    })
}

/// Keeps the ground instances that only involve learnable values (members of
/// `universe`) and never hand a fixed-set value to anyone but its owner. The
/// learner of every projected rule is `oscar`.
pub fn restrict_rf(
    rules: &[ProjectedRule],
    fixed: &[FixedSet],
    universe: &BTreeSet<Term>,
    oscar: &str,
) -> Vec<ProjectedRule> {
    let owner_of = |t: &Term| fixed.iter().find(|f| f.members.contains(t)).map(|f| f.owner.as_str());
    rules
        .iter()
        .filter(|r| {
            let conclusion_ok = universe.contains(&r.conclusion)
                && owner_of(&r.conclusion).is_none_or(|o| o == r.origin);
            let premises_ok = r
                .premises
                .iter()
                .all(|p| universe.contains(p) && owner_of(p).is_none_or(|o| o == oscar));
            conclusion_ok && premises_ok
        })
        .cloned()
        .collect()
}

/// Expands role quantifiers: one copy of `rule` per assignment of principals
/// to the role names, renamed inside Identity / SecretKey leaves and in the
/// teller / learner slots. Ids get a `[role=principal,...]` suffix.
pub fn expand_roles(rule: &PatternRule, roles: &[(String, Vec<String>)]) -> Vec<PatternRule> {
    let mut assignments: Vec<Vec<(String, String)>> = vec![vec![]];
    for (role, choices) in roles {
        assignments = assignments
            .into_iter()
            .flat_map(|prefix| {
                choices.iter().map(move |c| {
                    let mut next = prefix.clone();
                    next.push((role.clone(), c.clone()));
                    next
                })
            })
            .collect();
    }
    assignments
        .into_iter()
        .map(|assignment| {
            let lookup = |name: &str| {
                assignment
                    .iter()
                    .find(|(r, _)| r == name)
                    .map(|(_, p)| p.clone())
            };
            let slot = |name: &str| lookup(name).unwrap_or_else(|| name.to_string());
            let id = if assignment.is_empty() {
                rule.id.clone()
            } else {
                let parts: Vec<String> = assignment.iter().map(|(r, p)| format!("{r}={p}")).collect();
                format!("{}[{}]", rule.id, parts.join(","))
            };
            PatternRule {
                id,
                teller: slot(&rule.teller),
                taught: rule.taught.rename_principals(&lookup),
                learner: slot(&rule.learner),
                premises: rule.premises.iter().map(|p| p.rename_principals(&lookup)).collect(),
                guards: rule.guards.clone(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: &str) -> Term {
        Term::var(n)
    }

    fn a(n: &str) -> Term {
        Term::atom(n)
    }

    #[test]
    fn match_binds_a_variable() {
        let s = match_term(&v("v"), &a("na"), &Substitution::new()).unwrap();
        assert_eq!(s, Substitution::from([("v".into(), a("na"))]));
    }

    #[test]
    fn match_descends_structurally() {
        let pat = Term::enc(Term::pk(v("s")), v("x"));
        let g = Term::enc(Term::pk(a("skB")), a("na"));
        let s = match_term(&pat, &g, &Substitution::new()).unwrap();
        assert_eq!(s["s"], a("skB"));
        assert_eq!(s["x"], a("na"));
    }

    #[test]
    fn nonlinear_conflict_does_not_match() {
        let pat = Term::enc(v("k"), v("k"));
        assert!(match_term(&pat, &Term::enc(a("a"), a("b")), &Substitution::new()).is_none());
        assert!(match_term(&pat, &Term::enc(a("a"), a("a")), &Substitution::new()).is_some());
    }

    #[test]
    fn set_patterns_match_both_alignments() {
        let pat = Term::set2(v("x"), v("y"));
        let all = match_all(&pat, &Term::set2(a("p"), a("q")), &Substitution::new());
        assert_eq!(all.len(), 2);
        let pinned = Term::set2(a("q"), v("y"));
        let one = match_all(&pinned, &Term::set2(a("p"), a("q")), &Substitution::new());
        assert_eq!(one.len(), 1);
        assert_eq!(one[0]["y"], a("p"));
    }

    #[test]
    fn instantiate_examples() {
        let s = Substitution::from([("v".into(), a("x"))]);
        assert_eq!(instantiate(&v("v"), &s).unwrap(), a("x"));
        let s = Substitution::from([("a".into(), a("n"))]);
        assert_eq!(instantiate(&Term::pair(v("a"), v("a")), &s).unwrap(), Term::pair(a("n"), a("n")));
        assert!(matches!(instantiate(&v("w"), &s), Err(Error::Instantiation(w)) if w == "w"));
    }

    #[test]
    fn unify_with_occurs_check() {
        let x = v("x");
        assert!(unify(&x, &Term::hash(x.clone()), &Substitution::new()).is_empty());
        let s = unify(
            &Term::pair(x.clone(), a("b")),
            &Term::pair(a("a"), v("y")),
            &Substitution::new(),
        );
        assert_eq!(s.len(), 1);
        assert_eq!(resolve(&Term::pair(x, v("y")), &s[0]), Term::pair(a("a"), a("b")));
    }

    #[test]
    fn unify_chains_variables() {
        let s = unify(&Term::pair(v("x"), v("x")), &Term::pair(v("y"), a("c")), &Substitution::new());
        assert_eq!(s.len(), 1);
        assert_eq!(resolve(&v("y"), &s[0]), a("c"));
    }

    #[test]
    fn projection_keeps_only_oscar_rules() {
        let keygen = PatternRule {
            id: "e.keygen".into(),
            teller: "e".into(),
            taught: Term::pk(v("s")),
            learner: "o".into(),
            premises: vec![v("s")],
            guards: vec![],
        };
        let p = project(&keygen, "o").unwrap();
        assert_eq!(p.premises, vec![v("s")]);
        assert_eq!(p.conclusion, Term::pk(v("s")));
        let to_alice = PatternRule {
            learner: "alice".into(),
            ..keygen
        };
        assert!(project(&to_alice, "o").is_none());
    }

    #[test]
    fn role_expansion_renames_identities() {
        let rule = PatternRule {
            id: "ns1".into(),
            teller: "p".into(),
            taught: Term::enc(Term::pk(Term::secret_key("q")), Term::identity("p")),
            learner: "o".into(),
            premises: vec![],
            guards: vec![],
        };
        let roles = vec![
            ("p".to_string(), vec!["a".to_string(), "b".to_string()]),
            ("q".to_string(), vec!["a".to_string(), "b".to_string(), "o".to_string()]),
        ];
        let out = expand_roles(&rule, &roles);
        assert_eq!(out.len(), 6);
        assert_eq!(out[0].id, "ns1[p=a,q=a]");
        assert_eq!(out[5].teller, "b");
        assert_eq!(
            out[5].taught,
            Term::enc(Term::pk(Term::secret_key("o")), Term::identity("b"))
        );
    }

    #[test]
    fn guards_block_public_keys() {
        let g = Guard {
            var: "k".into(),
            not_head: Tag::PubKey,
        };
        assert_eq!(g.check(&Substitution::new()), None);
        assert_eq!(g.check(&Substitution::from([("k".into(), a("k"))])), Some(true));
        assert_eq!(
            g.check(&Substitution::from([("k".into(), Term::pk(a("s")))])),
            Some(false)
        );
    }
}
