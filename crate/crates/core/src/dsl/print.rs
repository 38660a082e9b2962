use std::fmt::Write;

use super::{ProtocolSpec, Roles};

fn roles(out: &mut String, roles: &Roles) {
    if roles.is_empty() {
        return;
    }
    out.push_str(" (forall");
    for (role, choices) in roles {
        let _ = write!(out, " ({role} in ({}))", choices.join(" "));
    }
    out.push(')');
}

/// Canonical text of a spec; parsing it yields an equal spec.
pub fn pretty(spec: &ProtocolSpec) -> String {
    let mut out = format!("(protocol {}\n", spec.name);
    for p in &spec.principals {
        let _ = writeln!(out, "  (principal {} {})", p.name, p.kind.keyword());
    }
    if !spec.atoms.is_empty() {
        let _ = writeln!(out, "  (atom {})", spec.atoms.join(" "));
    }
    if !spec.primitives.is_empty() {
        let _ = writeln!(out, "  (use-primitive {})", spec.primitives.join(" "));
    }
    for (p, t) in &spec.initial {
        let _ = writeln!(out, "  (knows {p} {t})");
    }
    for r in &spec.rules {
        let _ = write!(out, "  (rule {}", r.name);
        roles(&mut out, &r.roles);
        if let Some(t) = &r.teller {
            let _ = write!(out, " (from {t})");
        }
        for p in &r.premises {
            let _ = write!(out, "\n    (premise {p})");
        }
        let _ = writeln!(out, "\n    (conclude {}))", r.conclusion);
    }
    for q in &spec.queries {
        let _ = write!(out, "  (query {}", q.name);
        roles(&mut out, &q.roles);
        let _ = writeln!(out, "\n    {})", q.target);
    }
    out.push_str(")\n");
    out
}
