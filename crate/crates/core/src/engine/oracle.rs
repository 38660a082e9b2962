//! Literal iteration of `f_R` and `g` over a bounded universe.

use std::collections::BTreeSet;
use std::ops::ControlFlow;

use super::{Bounds, TagIndex};
use crate::error::{Error, Result};
use crate::knowledge::KnowledgeState;
use crate::rules::{instantiate, match_all, Guard, PatternRule, ProjectedRule, Substitution};
use crate::term::{Term, Universe};

struct Pool<'a> {
    set: &'a BTreeSet<Term>,
    index: TagIndex,
}

impl<'a> Pool<'a> {
    fn new(set: &'a BTreeSet<Term>) -> Self {
        let mut index = TagIndex::default();
        for t in set {
            index.insert(t.clone());
        }
        Pool { set, index }
    }
}

/// Calls `visit` with every substitution making all `premises` members of
/// the pool, stopping early when it breaks. A bare variable premise only
/// ranges over terms no deeper than `var_limit` allows.
fn join(
    premises: &[Term],
    pool: &Pool<'_>,
    var_limit: &dyn Fn(&str) -> Option<usize>,
    visit: &mut dyn FnMut(&Substitution) -> ControlFlow<()>,
) -> ControlFlow<()> {
    let mut order: Vec<&Term> = premises.iter().collect();
    order.sort_by_key(|p| (p.is_var(), p.is_ground()));
    join_from(&order, &Substitution::new(), pool, var_limit, visit)
}

fn join_from(
    order: &[&Term],
    s: &Substitution,
    pool: &Pool<'_>,
    var_limit: &dyn Fn(&str) -> Option<usize>,
    visit: &mut dyn FnMut(&Substitution) -> ControlFlow<()>,
) -> ControlFlow<()> {
    let Some((p, rest)) = order.split_first() else {
        return visit(s);
    };
    if p.is_ground() {
        if pool.set.contains(*p) {
            return join_from(rest, s, pool, var_limit, visit);
        }
        return ControlFlow::Continue(());
    }
    if p.is_var() {
        let name = p.name().unwrap_or_default();
        if let Some(bound) = s.get(name) {
            if pool.set.contains(bound) {
                return join_from(rest, s, pool, var_limit, visit);
            }
            return ControlFlow::Continue(());
        }
        let limit = var_limit(name);
        for t in pool.index.iter() {
            if limit.is_none_or(|d| t.depth() <= d) {
                let mut next = s.clone();
                next.insert(name.to_string(), t.clone());
                join_from(rest, &next, pool, var_limit, visit)?;
            }
        }
        return ControlFlow::Continue(());
    }
    for t in pool.index.with_tag(p.tag()) {
        for next in match_all(p, t, s) {
            join_from(rest, &next, pool, var_limit, visit)?;
        }
    }
    ControlFlow::Continue(())
}

fn guards_hold(guards: &[Guard], s: &Substitution) -> bool {
    guards.iter().all(|g| g.check(s) != Some(false))
}

/// Calls `visit` with each extension of `s` over `vars` drawn from `values`.
fn spread(
    s: &Substitution,
    vars: &[String],
    values: &[Term],
    visit: &mut dyn FnMut(&Substitution) -> ControlFlow<()>,
) -> ControlFlow<()> {
    let Some((v, rest)) = vars.split_first() else {
        return visit(s);
    };
    for t in values {
        let mut next = s.clone();
        next.insert(v.clone(), t.clone());
        spread(&next, rest, values, visit)?;
    }
    ControlFlow::Continue(())
}

/// One application of every rule: adds `(learner, v)` whenever the teller
/// knows `v` and the learner knows every premise. Variables the premises
/// leave open range over `universe`, as do taught values.
pub fn f_step(k: &KnowledgeState, rules: &[PatternRule], universe: &BTreeSet<Term>) -> KnowledgeState {
    let values: Vec<Term> = universe.iter().cloned().collect();
    let mut out = k.clone();
    for r in rules {
        let held = k.projection(&r.learner);
        let pool = Pool::new(&held);
        let open: Vec<String> = r.unbound_vars().into_iter().collect();
        let _ = join(&r.premises, &pool, &|_| None, &mut |s| {
            spread(s, &open, &values, &mut |s| {
                if guards_hold(&r.guards, s) {
                    if let Ok(v) = instantiate(&r.taught, s) {
                        if universe.contains(&v) && k.knows(&r.teller, &v) {
                            out.insert(r.learner.clone(), v).expect("instantiated terms are ground");
                        }
                    }
                }
                ControlFlow::Continue(())
            })
        });
    }
    out
}

/// `X ∪ {x : X_σ → x, X_σ ⊆ X}` restricted to `universe`. Conclusion
/// variables no premise binds range over an explicit universe and are
/// skipped for a depth-bounded one.
pub fn g_step(x: &BTreeSet<Term>, rules: &[ProjectedRule], universe: &Universe) -> BTreeSet<Term> {
    g_step_capped(x, rules, universe, usize::MAX).expect("uncapped step cannot overflow")
}

/// [`g_step`] that gives up with `None` once the result outgrows `cap`.
fn g_step_capped(x: &BTreeSet<Term>, rules: &[ProjectedRule], universe: &Universe, cap: usize) -> Option<BTreeSet<Term>> {
    let pool = Pool::new(x);
    let max_depth = universe.max_depth();
    let explicit: Vec<Term> = match universe {
        Universe::Explicit(set) => set.iter().cloned().collect(),
        Universe::Depth(_) => Vec::new(),
    };
    let mut out = x.clone();
    for r in rules {
        let limit = |var: &str| {
            let d = r.conclusion.var_position_depth(var)?;
            max_depth.map(|m| m.saturating_sub(d))
        };
        let open: Vec<String> = r.unbound_vars().into_iter().collect();
        if !open.is_empty() && explicit.is_empty() {
            continue;
        }
        let flow = join(&r.premises, &pool, &limit, &mut |s| {
            spread(s, &open, &explicit, &mut |s| {
                if guards_hold(&r.guards, s) {
                    if let Ok(c) = instantiate(&r.conclusion, s) {
                        if universe.contains(&c) {
                            out.insert(c);
                            if out.len() > cap {
                                return ControlFlow::Break(());
                            }
                        }
                    }
                }
                ControlFlow::Continue(())
            })
        });
        if flow.is_break() {
            return None;
        }
    }
    Some(out)
}

/// `k0, f(k0), f²(k0), ...` up to and including the first fixpoint.
pub fn f_iterates(k0: &KnowledgeState, rules: &[PatternRule], universe: &BTreeSet<Term>) -> Vec<KnowledgeState> {
    let mut out = vec![k0.clone()];
    loop {
        let next = f_step(out.last().expect("nonempty"), rules, universe);
        if &next == out.last().expect("nonempty") {
            return out;
        }
        out.push(next);
    }
}

/// `X0, g(X0), g²(X0), ...` up to and including the first fixpoint.
pub fn g_iterates(x0: &BTreeSet<Term>, rules: &[ProjectedRule], universe: &Universe) -> Vec<BTreeSet<Term>> {
    let mut out = vec![x0.clone()];
    loop {
        let next = g_step(out.last().expect("nonempty"), rules, universe);
        if &next == out.last().expect("nonempty") {
            return out;
        }
        out.push(next);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Saturation {
    pub terms: BTreeSet<Term>,
    /// Number of `g` applications that added something.
    pub iterations: usize,
}

/// Least fixpoint of `g_step` above `x0` over all ground terms of depth at
/// most `bounds.max_term_depth`.
pub fn saturate_naive(x0: &BTreeSet<Term>, rules: &[ProjectedRule], bounds: &Bounds) -> Result<Saturation> {
    let universe = Universe::Depth(bounds.max_term_depth);
    let mut x = x0.clone();
    let mut iterations = 0;
    loop {
        let Some(next) = g_step_capped(&x, rules, &universe, bounds.universe_cap) else {
            return Err(Error::Resource {
                what: format!("naive saturation in iteration {}", iterations + 1),
                size: bounds.universe_cap + 1,
                cap: bounds.universe_cap,
            });
        };
        if next.len() == x.len() {
            return Ok(Saturation { terms: x, iterations });
        }
        iterations += 1;
        x = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::builtin_spec;

    fn rules_of(spec: &str) -> Vec<ProjectedRule> {
        builtin_spec(spec)
            .unwrap()
            .rules(&["o".into()])
            .into_iter()
            .map(|p| p.rule)
            .collect()
    }

    #[test]
    fn no_rules_is_a_fixpoint() {
        let x = BTreeSet::from([Term::atom("x")]);
        assert_eq!(g_step(&x, &[], &Universe::Depth(3)), x);
        let k = KnowledgeState::from_facts([("o", Term::atom("x"))]).unwrap();
        assert_eq!(f_step(&k, &[], &BTreeSet::new()), k);
    }

    #[test]
    fn decryption_with_known_key() {
        let (s, x) = (Term::atom("s"), Term::atom("x"));
        let c = Term::enc(Term::pk(s.clone()), x.clone());
        let next = g_step(&BTreeSet::from([s, c]), &rules_of("e"), &Universe::Depth(2));
        assert!(next.contains(&x));
    }

    #[test]
    fn keygen_flows_from_the_primitive() {
        let s = Term::atom("s");
        let keygen = PatternRule {
            id: "e.keygen".into(),
            teller: "e".into(),
            taught: Term::pk(Term::var("s")),
            learner: "o".into(),
            premises: vec![Term::var("s")],
            guards: vec![],
        };
        let k = KnowledgeState::from_facts([("o", s.clone()), ("e", Term::pk(s.clone()))]).unwrap();
        let u = BTreeSet::from([s.clone(), Term::pk(s.clone())]);
        assert!(f_step(&k, &[keygen], &u).knows("o", &Term::pk(s)));
    }

    #[test]
    fn pair_closure_shape() {
        let (x, y) = (Term::atom("x"), Term::atom("y"));
        let sat = saturate_naive(&BTreeSet::from([x.clone(), y.clone()]), &rules_of("t"), &Bounds::new(2, 0, 2)).unwrap();
        assert!(sat.terms.contains(&Term::pair(x.clone(), y.clone())));
        assert!(sat.terms.contains(&Term::pair(y.clone(), x.clone())));
        assert!(sat.terms.contains(&Term::pair(Term::pair(x.clone(), y.clone()), x.clone())));
        // 2 atoms, 4 pairs of atoms, 6 * 6 - 2 * 2 pairs with a pair inside.
        assert_eq!(sat.terms.len(), 2 + 4 + 32);
    }

    #[test]
    fn cap_raises_a_resource_error() {
        let atoms: BTreeSet<Term> = ["a", "b", "c"].iter().map(|n| Term::atom(n)).collect();
        let bounds = Bounds {
            universe_cap: 50,
            ..Bounds::new(3, 0, 3)
        };
        assert!(matches!(
            saturate_naive(&atoms, &rules_of("t"), &bounds),
            Err(Error::Resource { .. })
        ));
    }
}
