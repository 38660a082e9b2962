//! Canonical s-expression and JSON forms of terms.

use serde_json::{json, Map, Value};

use super::{Tag, Term};
use crate::error::{Error, ParseError, Pos, Result};
use crate::sexpr::{read_all, SExpr};

/// Parses one term in canonical s-expression form. Bare symbols are atoms,
/// except `eps`.
pub fn parse_term(text: &str) -> Result<Term> {
    let forms = read_all(text)?;
    match forms.as_slice() {
        [one] => term_from_sexpr(one, &mut |name, _| Ok(Term::atom(name)), &mut |_, _| Ok(()))
            .map_err(|e| Error::Parse(vec![e])),
        [] => Err(Error::parse_at(Pos { line: 1, column: 1 }, "expected a term")),
        [_, second, ..] => Err(Error::parse_at(second.pos(), "trailing input after term")),
    }
}

pub(crate) type SymbolResolver<'a> = dyn FnMut(&str, Pos) -> Result<Term, ParseError> + 'a;
pub(crate) type PrincipalCheck<'a> = dyn FnMut(&str, Pos) -> Result<(), ParseError> + 'a;

/// Converts an s-expression into a term. `symbol` resolves bare symbols other
/// than `eps`; `principal` vets names used under `id` / `sk`.
pub(crate) fn term_from_sexpr(
    expr: &SExpr,
    symbol: &mut SymbolResolver<'_>,
    principal: &mut PrincipalCheck<'_>,
) -> Result<Term, ParseError> {
    let err = |pos: Pos, message: String| ParseError { pos, message };
    match expr {
        SExpr::Symbol(s, pos) if s == "eps" => {
            let _ = pos;
            Ok(Term::eps())
        }
        SExpr::Symbol(s, pos) => symbol(s, *pos),
        SExpr::List(items, pos) => {
            let Some(head) = items.first().and_then(SExpr::as_symbol) else {
                return Err(err(*pos, "expected a term constructor".into()));
            };
            let tag = match Tag::from_keyword(head) {
                Some(Tag::Epsilon) | None => {
                    return Err(err(*pos, format!("unknown term constructor `{head}`")))
                }
                Some(t) => t,
            };
            let args = &items[1..];
            if tag.is_named() {
                let [SExpr::Symbol(name, npos)] = args else {
                    return Err(err(*pos, format!("`{head}` takes exactly one name")));
                };
                if matches!(tag, Tag::Identity | Tag::SecretKey) {
                    principal(name, *npos)?;
                }
                return Ok(Term::intern_unchecked(tag, Some(name), vec![]));
            }
            if args.len() != tag.arity() {
                return Err(err(
                    *pos,
                    format!("`{head}` takes {} arguments, got {}", tag.arity(), args.len()),
                ));
            }
            let children = args
                .iter()
                .map(|a| term_from_sexpr(a, symbol, principal))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Term::intern_unchecked(tag, None, children))
        }
    }
}

pub fn term_to_json(t: &Term) -> Value {
    match t.tag() {
        Tag::Epsilon => json!({ "op": "eps" }),
        tag if tag.is_named() => json!({ "op": tag.keyword(), "name": t.name() }),
        tag => json!({
            "op": tag.keyword(),
            "args": t.children().iter().map(term_to_json).collect::<Vec<_>>(),
        }),
    }
}

pub fn term_from_json(v: &Value) -> Result<Term> {
    let obj: &Map<String, Value> = v
        .as_object()
        .ok_or_else(|| Error::Validation(format!("term must be a JSON object, got {v}")))?;
    let op = obj
        .get("op")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Validation("term object lacks a string `op`".into()))?;
    let tag = Tag::from_keyword(op)
        .ok_or_else(|| Error::Validation(format!("unknown term op `{op}`")))?;
    let name = match obj.get("name") {
        Some(Value::String(s)) => Some(s.as_str()),
        Some(other) => return Err(Error::Validation(format!("`name` must be a string, got {other}"))),
        None => None,
    };
    let children = match obj.get("args") {
        Some(Value::Array(items)) => items.iter().map(term_from_json).collect::<Result<Vec<_>>>()?,
        Some(other) => return Err(Error::Validation(format!("`args` must be an array, got {other}"))),
        None => vec![],
    };
    Term::intern(tag, name, children)
}
