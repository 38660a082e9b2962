//! Agreement between the two-phase engine and naive saturation.

use std::collections::BTreeSet;

use serde_json::{json, Value};

use super::{saturate_naive, Analyzer, Bounds, RuleSet};
use crate::error::Result;
use crate::term::Term;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mismatch {
    /// In the naive fixpoint but not derivable by the engine.
    Missed(Term),
    /// Derivable by the engine but outside the naive fixpoint.
    Spurious(Term),
}

impl Mismatch {
    pub fn to_json(&self) -> Value {
        match self {
            Mismatch::Missed(t) => json!({"kind": "missed", "term": t.to_string()}),
            Mismatch::Spurious(t) => json!({"kind": "spurious", "term": t.to_string()}),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Comparison {
    pub oracle_size: usize,
    pub analyzed_size: usize,
    /// Terms whose membership both engines were asked about.
    pub checked: usize,
    pub mismatches: Vec<Mismatch>,
    pub audit_checks: usize,
    pub audit_violations: usize,
    /// Protocol-rule conclusions the engine added.
    pub rules_fired: usize,
    /// `(probe, naive membership, engine membership)` in probe order.
    pub probes: Vec<(Term, bool, bool)>,
}

impl Comparison {
    pub fn agrees(&self) -> bool {
        self.mismatches.is_empty()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "oracle_size": self.oracle_size,
            "analyzed_size": self.analyzed_size,
            "checked": self.checked,
            "mismatches": self.mismatches.iter().map(Mismatch::to_json).collect::<Vec<_>>(),
            "audit_checks": self.audit_checks,
            "audit_violations": self.audit_violations,
            "rules_fired": self.rules_fired,
        })
    }
}

/// Saturates both ways at `bounds.max_term_depth` and compares membership
/// of every naive-fixpoint member, every analyzed term and every probe.
/// Protocol rules fire until a fixpoint regardless of `bounds.max_rounds`.
pub fn compare(rules: &RuleSet, x0: &BTreeSet<Term>, bounds: Bounds, probes: &[Term]) -> Result<Comparison> {
    let oracle = saturate_naive(x0, &rules.flat(), &bounds)?.terms;
    let engine_bounds = Bounds {
        max_rounds: usize::MAX,
        max_synthesis_depth: bounds.max_synthesis_depth.max(bounds.max_term_depth),
        ..bounds
    };
    let mut analyzer = Analyzer::new(rules, x0, engine_bounds)?.with_audit(true);
    analyzer.saturate(None)?;
    let analyzed: Vec<Term> = analyzer.analyzed().cloned().collect();
    let mut out = Comparison {
        oracle_size: oracle.len(),
        analyzed_size: analyzed.len(),
        ..Comparison::default()
    };
    for t in probes {
        let naive = oracle.contains(t);
        out.probes.push((t.clone(), naive, analyzer.derivable_now(t)));
    }
    let mut seen = BTreeSet::new();
    for t in oracle.iter().chain(&analyzed).chain(probes) {
        if !seen.insert(t.clone()) {
            continue;
        }
        let naive = oracle.contains(t);
        let engine = analyzer.derivable_now(t);
        match (naive, engine) {
            (true, false) => out.mismatches.push(Mismatch::Missed(t.clone())),
            (false, true) => out.mismatches.push(Mismatch::Spurious(t.clone())),
            _ => {}
        }
    }
    out.checked = seen.len();
    out.audit_checks = analyzer.statistics().audit_checks;
    out.audit_violations = analyzer.statistics().audit_violations;
    out.rules_fired = analyzer.statistics().rules_fired;
    Ok(out)
}
