use std::collections::{BTreeMap, BTreeSet};

use super::{ProtocolSpec, QueryDecl, Roles, RuleDecl};
use crate::error::{Error, ParseError, Pos, Result};
use crate::knowledge::{Principal, PrincipalKind};
use crate::primitives::builtin_spec;
use crate::sexpr::{read_all, SExpr};
use crate::term::term_from_sexpr;
use crate::term::{Tag, Term};

fn err(pos: Pos, message: impl Into<String>) -> ParseError {
    ParseError {
        pos,
        message: message.into(),
    }
}

/// Parses a protocol file. All errors found are reported together, each
/// with its position.
pub fn parse(text: &str) -> Result<ProtocolSpec> {
    let forms = read_all(text)?;
    let top = match forms.as_slice() {
        [] => return Err(Error::parse_at(Pos { line: 1, column: 1 }, "missing protocol form")),
        [one] if one.head() == Some("protocol") => one,
        [one] => return Err(Error::parse_at(one.pos(), "expected `(protocol NAME ...)`")),
        [_, second, ..] => return Err(Error::parse_at(second.pos(), "only one protocol form is allowed")),
    };
    let mut p = Parser::default();
    let spec = p.protocol(top);
    if !p.errors.is_empty() {
        p.errors.sort_by_key(|e| e.pos);
        return Err(Error::Parse(p.errors));
    }
    spec.validate()?;
    Ok(spec)
}

#[derive(Default)]
struct Parser {
    errors: Vec<ParseError>,
    principals: BTreeMap<String, PrincipalKind>,
    atoms: BTreeSet<String>,
    defines: BTreeMap<String, SExpr>,
}

/// Reads `(head NAME ...)` returning the name symbol.
fn name_of<'a>(items: &'a [SExpr], what: &str) -> Result<(&'a str, Pos), ParseError> {
    match items.get(1) {
        Some(SExpr::Symbol(s, pos)) => Ok((s, *pos)),
        Some(other) => Err(err(other.pos(), format!("`{what}` expects a name"))),
        None => Err(err(items[0].pos(), format!("`{what}` expects a name"))),
    }
}

impl Parser {
    fn protocol(&mut self, top: &SExpr) -> ProtocolSpec {
        let items = top.as_list().unwrap_or_default();
        let name = match name_of(items, "protocol") {
            Ok((n, _)) => n.to_string(),
            Err(e) => {
                self.errors.push(e);
                String::new()
            }
        };
        let mut spec = ProtocolSpec {
            name,
            principals: Vec::new(),
            atoms: Vec::new(),
            primitives: Vec::new(),
            initial: Vec::new(),
            rules: Vec::new(),
            queries: Vec::new(),
        };
        let decls = items.get(2..).unwrap_or_default();
        // Declarations first, so later forms may refer to them in any order.
        for d in decls {
            if let Err(e) = self.declaration(d, &mut spec) {
                self.errors.push(e);
            }
        }
        let before = self.errors.len();
        self.check_define_cycles();
        if self.errors.len() > before {
            // Expanding a cyclic definition would not terminate.
            return spec;
        }
        let mut adversary = false;
        for p in &spec.principals {
            adversary |= p.kind == PrincipalKind::Adversary;
        }
        if !adversary && self.errors.is_empty() {
            self.errors.push(err(top.pos(), "at least one adversary is required"));
        }
        for d in decls {
            let r = match d.head() {
                Some("knows") => self.knows(d).map(|k| spec.initial.push(k)),
                Some("rule") => {
                    let index = spec.rules.len() + 1;
                    self.rule(d, index).map(|r| spec.rules.push(r))
                }
                Some("query") => self.query(d).map(|q| spec.queries.push(q)),
                _ => Ok(()),
            };
            if let Err(e) = r {
                self.errors.push(e);
            }
        }
        spec
    }

    fn declaration(&mut self, d: &SExpr, spec: &mut ProtocolSpec) -> Result<(), ParseError> {
        let Some(items) = d.as_list() else {
            return Err(err(d.pos(), "expected a declaration form"));
        };
        let Some(head) = d.head() else {
            return Err(err(d.pos(), "expected a declaration keyword"));
        };
        match head {
            "principal" => {
                let (name, pos) = name_of(items, head)?;
                let kind = match items.get(2) {
                    Some(SExpr::Symbol(k, kpos)) => PrincipalKind::from_keyword(k)
                        .ok_or_else(|| err(*kpos, format!("unknown principal kind `{k}`")))?,
                    _ => return Err(err(d.pos(), "`principal` expects a name and a kind")),
                };
                if items.len() > 3 {
                    return Err(err(items[3].pos(), "unexpected argument"));
                }
                if self.principals.insert(name.to_string(), kind).is_some() {
                    return Err(err(pos, format!("principal `{name}` declared twice")));
                }
                spec.principals.push(Principal::new(name, kind));
            }
            "atom" => {
                if items.len() < 2 {
                    return Err(err(d.pos(), "`atom` expects at least one name"));
                }
                for item in &items[1..] {
                    let SExpr::Symbol(name, pos) = item else {
                        return Err(err(item.pos(), "`atom` expects names"));
                    };
                    if name == "eps" || name.starts_with('?') {
                        return Err(err(*pos, format!("`{name}` is not a valid atom name")));
                    }
                    if self.defines.contains_key(name) || !self.atoms.insert(name.clone()) {
                        return Err(err(*pos, format!("`{name}` declared twice")));
                    }
                    spec.atoms.push(name.clone());
                }
            }
            "define" => {
                let (name, pos) = name_of(items, head)?;
                let [_, _, body] = items else {
                    return Err(err(d.pos(), "`define` expects a name and a term"));
                };
                if self.atoms.contains(name) || self.defines.insert(name.to_string(), body.clone()).is_some() {
                    return Err(err(pos, format!("`{name}` declared twice")));
                }
            }
            "use-primitive" => {
                for item in &items[1..] {
                    let SExpr::Symbol(name, pos) = item else {
                        return Err(err(item.pos(), "`use-primitive` expects primitive names"));
                    };
                    if builtin_spec(name).is_none() {
                        return Err(err(*pos, format!("unknown primitive `{name}`")));
                    }
                    if !spec.primitives.contains(name) {
                        spec.primitives.push(name.clone());
                    }
                }
            }
            "knows" | "rule" | "query" => {}
            other => return Err(err(d.pos(), format!("unknown declaration `{other}`"))),
        }
        Ok(())
    }

    fn check_define_cycles(&mut self) {
        fn refs(e: &SExpr, out: &mut Vec<(String, Pos)>) {
            match e {
                SExpr::Symbol(s, p) => out.push((s.clone(), *p)),
                SExpr::List(items, _) => items.iter().skip(1).for_each(|i| refs(i, out)),
            }
        }
        // Depth-first search; `on_path` holds the current chain.
        fn visit(
            name: &str,
            defines: &BTreeMap<String, SExpr>,
            on_path: &mut Vec<String>,
            done: &mut BTreeSet<String>,
            errors: &mut Vec<ParseError>,
        ) {
            if done.contains(name) {
                return;
            }
            on_path.push(name.to_string());
            let mut out = Vec::new();
            refs(&defines[name], &mut out);
            for (r, pos) in out {
                if !defines.contains_key(&r) {
                    continue;
                }
                if let Some(start) = on_path.iter().position(|n| *n == r) {
                    let mut chain = on_path[start..].to_vec();
                    chain.push(r.clone());
                    errors.push(err(pos, format!("cyclic definition: {}", chain.join(" -> "))));
                    continue;
                }
                visit(&r, defines, on_path, done, errors);
            }
            on_path.pop();
            done.insert(name.to_string());
        }
        let mut done = BTreeSet::new();
        let names: Vec<String> = self.defines.keys().cloned().collect();
        for n in names {
            visit(&n, &self.defines, &mut Vec::new(), &mut done, &mut self.errors);
        }
    }

    fn term(&self, e: &SExpr, roles: &Roles) -> Result<Term, ParseError> {
        let mut symbol = |name: &str, pos: Pos| -> Result<Term, ParseError> {
            if let Some(body) = self.defines.get(name) {
                return self.term(body, roles);
            }
            if self.atoms.contains(name) {
                return Ok(Term::atom(name));
            }
            Err(err(pos, format!("undeclared identifier `{name}`")))
        };
        let mut principal = |name: &str, pos: Pos| -> Result<(), ParseError> {
            if self.principals.contains_key(name) || roles.iter().any(|(r, _)| r == name) {
                Ok(())
            } else {
                Err(err(pos, format!("undeclared principal `{name}`")))
            }
        };
        term_from_sexpr(e, &mut symbol, &mut principal)
    }

    fn roles(&self, e: &SExpr) -> Result<Roles, ParseError> {
        let items = e.as_list().unwrap_or_default();
        let mut out: Roles = Vec::new();
        for b in &items[1..] {
            let parts = b.as_list().unwrap_or_default();
            let [SExpr::Symbol(role, rpos), SExpr::Symbol(kw, _), SExpr::List(choices, _)] = parts else {
                return Err(err(b.pos(), "expected `(ROLE in (PRINCIPAL ...))`"));
            };
            if kw != "in" {
                return Err(err(b.pos(), "expected `(ROLE in (PRINCIPAL ...))`"));
            }
            if self.principals.contains_key(role) {
                return Err(err(*rpos, format!("role `{role}` shadows a principal")));
            }
            if out.iter().any(|(r, _)| r == role) {
                return Err(err(*rpos, format!("role `{role}` bound twice")));
            }
            let mut names = Vec::new();
            for c in choices {
                let SExpr::Symbol(name, cpos) = c else {
                    return Err(err(c.pos(), "role choices must be principal names"));
                };
                if !self.principals.contains_key(name) {
                    return Err(err(*cpos, format!("undeclared principal `{name}`")));
                }
                names.push(name.clone());
            }
            if names.is_empty() {
                return Err(err(b.pos(), format!("role `{role}` has no choices")));
            }
            out.push((role.clone(), names));
        }
        Ok(out)
    }

    fn knows(&self, d: &SExpr) -> Result<(String, Term), ParseError> {
        let items = d.as_list().unwrap_or_default();
        let [_, SExpr::Symbol(p, ppos), body] = items else {
            return Err(err(d.pos(), "`knows` expects a principal and a term"));
        };
        if !self.principals.contains_key(p) {
            return Err(err(*ppos, format!("undeclared principal `{p}`")));
        }
        let t = self.term(body, &Vec::new())?;
        if !t.is_ground() {
            return Err(err(body.pos(), "initial knowledge must be ground"));
        }
        Ok((p.clone(), t))
    }

    fn rule(&self, d: &SExpr, index: usize) -> Result<RuleDecl, ParseError> {
        let items = d.as_list().unwrap_or_default();
        let (name, clauses) = match items.get(1) {
            Some(SExpr::Symbol(n, _)) => (n.clone(), &items[2..]),
            _ => (format!("rule{index}"), &items[1..]),
        };
        let mut roles = Vec::new();
        if let Some(f) = clauses.iter().find(|c| c.head() == Some("forall")) {
            roles = self.roles(f)?;
        }
        let mut teller = None;
        let mut premises = Vec::new();
        let mut conclusion: Option<(Term, Pos)> = None;
        for c in clauses {
            let parts = c.as_list().unwrap_or_default();
            match c.head() {
                Some("forall") => {}
                Some("from") => {
                    let [_, SExpr::Symbol(t, tpos)] = parts else {
                        return Err(err(c.pos(), "`from` expects a principal or role"));
                    };
                    if !self.principals.contains_key(t) && !roles.iter().any(|(r, _)| r == t) {
                        return Err(err(*tpos, format!("undeclared principal `{t}`")));
                    }
                    teller = Some(t.clone());
                }
                Some("premise") => {
                    let [_, body] = parts else {
                        return Err(err(c.pos(), "`premise` expects one term"));
                    };
                    premises.push(self.term(body, &roles)?);
                }
                Some("conclude") => {
                    let [_, body] = parts else {
                        return Err(err(c.pos(), "`conclude` expects one term"));
                    };
                    if conclusion.is_some() {
                        return Err(err(c.pos(), "a rule has exactly one conclusion"));
                    }
                    conclusion = Some((self.term(body, &roles)?, body.pos()));
                }
                _ => return Err(err(c.pos(), format!("unknown rule clause in `{name}`"))),
            }
        }
        let Some((conclusion, cpos)) = conclusion else {
            return Err(err(d.pos(), format!("rule `{name}` has no conclusion")));
        };
        let bound: BTreeSet<String> = premises.iter().flat_map(Term::vars).collect();
        if let Some(v) = conclusion.vars().into_iter().find(|v| !bound.contains(v)) {
            return Err(err(cpos, format!("unbound variable {v}")));
        }
        Ok(RuleDecl {
            name,
            roles,
            teller,
            premises,
            conclusion,
        })
    }

    fn query(&self, d: &SExpr) -> Result<QueryDecl, ParseError> {
        let items = d.as_list().unwrap_or_default();
        let (name, _) = name_of(items, "query")?;
        let (roles, body) = match &items[2..] {
            [f, body] if f.head() == Some("forall") => (self.roles(f)?, body),
            [body] => (Vec::new(), body),
            _ => return Err(err(d.pos(), "`query` expects a name, optional roles and a term")),
        };
        let target = self.term(body, &roles)?;
        if !target.is_ground() {
            return Err(err(body.pos(), "query target must be ground"));
        }
        if target.tag() == Tag::Var {
            return Err(err(body.pos(), "query target must be ground"));
        }
        Ok(QueryDecl {
            name: name.to_string(),
            roles,
            target,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn messages(text: &str) -> Vec<String> {
        match parse(text) {
            Err(Error::Parse(errors)) => errors.into_iter().map(|e| e.message).collect(),
            other => panic!("expected parse errors, got {other:?}"),
        }
    }

    const HEADER: &str = "(protocol t (principal a honest) (principal o adversary) (atom x)";

    #[test]
    fn empty_input() {
        assert_eq!(messages(""), ["missing protocol form"]);
        assert_eq!(messages("; only a comment\n"), ["missing protocol form"]);
    }

    #[test]
    fn unbound_conclusion_variable() {
        let text = format!("{HEADER} (rule (premise (var v)) (conclude (var w))))");
        assert_eq!(messages(&text), ["unbound variable w"]);
    }

    #[test]
    fn errors_carry_positions() {
        let text = "(protocol t\n  (principal o adversary)\n  (knows o y))";
        match parse(text) {
            Err(Error::Parse(errors)) => {
                assert_eq!(errors[0].pos, Pos { line: 3, column: 12 });
                assert_eq!(errors[0].message, "undeclared identifier `y`");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn several_errors_are_reported_together() {
        let text = format!("{HEADER} (knows a y) (knows b x) (rule r (conclude (id q))))");
        assert_eq!(messages(&text).len(), 3);
    }

    #[test]
    fn cyclic_definitions_are_rejected() {
        let text = format!("{HEADER} (define c (enc x c)) (knows o c))");
        assert!(messages(&text)[0].starts_with("cyclic definition: c -> c"));
        let text = format!("{HEADER} (define c (pair d x)) (define d (hash c)))");
        assert!(messages(&text).iter().any(|m| m.contains("cyclic definition")));
    }

    #[test]
    fn an_adversary_is_required() {
        let text = "(protocol t (principal a honest))";
        assert_eq!(messages(text), ["at least one adversary is required"]);
    }

    #[test]
    fn defines_resolve_roles_at_the_use_site() {
        let text = format!(
            "{HEADER} (use-primitive e) (define n (nonce eps (id p))) \
             (rule r (forall (p in (a o))) (from p) (conclude n)))"
        );
        let spec = parse(&text).unwrap();
        assert_eq!(spec.rules[0].conclusion.to_string(), "(nonce eps (id p))");
        let model = spec.compile().unwrap();
        // The instance taught by the adversary itself is a self-rule.
        assert_eq!(model.rules.protocol.len(), 1);
        assert_eq!(model.rules.protocol[0].id, "r[p=a]");
    }
}
