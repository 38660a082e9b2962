//! Primitive spec files.
//!
//! ```text
//! (primitive e
//!   (schema (var s) (pk (var s)) (var x) (enc (pk (var s)) (var x)) (sig (var s) (var x)))
//!   (composing 2 4 5)
//!   (decomposing 3)
//!   (premises (2 1) (3 1 4) (4 2 3) (5 1 3))
//!   (labels (2 keygen) (3 decrypt) (4 encrypt) (5 sign)))
//! ```
//!
//! Optional clauses: `(principal NAME)` (defaults to the spec name),
//! `(guard VAR not KEYWORD)`, `(learner VAR)` and `(image TERM ...)` for
//! values declared to be in the image without a constructor witness.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, ParseError, Pos, Result};
use crate::primitives::PrimitiveSpec;
use crate::rules::Guard;
use crate::sexpr::{read_all, SExpr};
use crate::term::{term_from_sexpr, Tag, Term};

fn err(pos: Pos, message: impl Into<String>) -> ParseError {
    ParseError {
        pos,
        message: message.into(),
    }
}

fn index(e: &SExpr) -> Result<usize, ParseError> {
    e.as_symbol()
        .and_then(|s| s.parse::<usize>().ok())
        .ok_or_else(|| err(e.pos(), "expected a position number"))
}

fn symbol(e: &SExpr) -> Result<&str, ParseError> {
    e.as_symbol().ok_or_else(|| err(e.pos(), "expected a name"))
}

fn term(e: &SExpr) -> Result<Term, ParseError> {
    term_from_sexpr(e, &mut |name, _| Ok(Term::atom(name)), &mut |_, _| Ok(()))
}

fn spec(form: &SExpr) -> Result<PrimitiveSpec, ParseError> {
    let items = form.as_list().unwrap_or_default();
    let name = symbol(items.get(1).ok_or_else(|| err(form.pos(), "`primitive` expects a name"))?)?;
    let mut out = PrimitiveSpec {
        name: name.to_string(),
        principal: name.to_string(),
        schema: Vec::new(),
        composing: BTreeSet::new(),
        decomposing: BTreeSet::new(),
        premises: BTreeMap::new(),
        labels: BTreeMap::new(),
        guards: Vec::new(),
        learner_var: None,
        declared_image: BTreeSet::new(),
    };
    for clause in &items[2..] {
        let parts = clause
            .as_list()
            .ok_or_else(|| err(clause.pos(), "expected a clause"))?;
        let args = &parts[1..];
        match clause.head() {
            Some("principal") => match args {
                [p] => out.principal = symbol(p)?.to_string(),
                _ => return Err(err(clause.pos(), "`principal` expects one name")),
            },
            Some("schema") => out.schema = args.iter().map(term).collect::<Result<_, _>>()?,
            Some("composing") => out.composing = args.iter().map(index).collect::<Result<_, _>>()?,
            Some("decomposing") => out.decomposing = args.iter().map(index).collect::<Result<_, _>>()?,
            Some("premises") => {
                for entry in args {
                    let nums = entry
                        .as_list()
                        .ok_or_else(|| err(entry.pos(), "expected `(POSITION PREMISE ...)`"))?;
                    let Some((i, w)) = nums.split_first() else {
                        return Err(err(entry.pos(), "expected `(POSITION PREMISE ...)`"));
                    };
                    let i = index(i)?;
                    let w = w.iter().map(index).collect::<Result<_, _>>()?;
                    if out.premises.insert(i, w).is_some() {
                        return Err(err(entry.pos(), format!("premises of position {i} given twice")));
                    }
                }
            }
            Some("labels") => {
                for entry in args {
                    match entry.as_list() {
                        Some([i, l]) => {
                            out.labels.insert(index(i)?, symbol(l)?.to_string());
                        }
                        _ => return Err(err(entry.pos(), "expected `(POSITION LABEL)`")),
                    }
                }
            }
            Some("guard") => match args {
                [var, not, head] if not.as_symbol() == Some("not") => {
                    let kw = symbol(head)?;
                    let tag = Tag::from_keyword(kw).ok_or_else(|| err(head.pos(), format!("unknown constructor `{kw}`")))?;
                    out.guards.push(Guard {
                        var: symbol(var)?.to_string(),
                        not_head: tag,
                    });
                }
                _ => return Err(err(clause.pos(), "expected `(guard VAR not CONSTRUCTOR)`")),
            },
            Some("learner") => match args {
                [var] => out.learner_var = Some(symbol(var)?.to_string()),
                _ => return Err(err(clause.pos(), "`learner` expects one variable name")),
            },
            Some("image") => {
                for t in args {
                    out.declared_image.insert(term(t)?);
                }
            }
            _ => return Err(err(clause.pos(), "unknown primitive clause")),
        }
    }
    Ok(out)
}

/// Parses every `(primitive ...)` form in `text` and checks each spec's
/// index sets.
pub fn parse_primitives(text: &str) -> Result<Vec<PrimitiveSpec>> {
    let forms = read_all(text)?;
    if forms.is_empty() {
        return Err(Error::parse_at(Pos { line: 1, column: 1 }, "missing primitive form"));
    }
    let mut specs = Vec::new();
    let mut errors = Vec::new();
    for f in &forms {
        if f.head() != Some("primitive") {
            errors.push(err(f.pos(), "expected `(primitive NAME ...)`"));
            continue;
        }
        match spec(f) {
            Ok(s) => specs.push(s),
            Err(e) => errors.push(e),
        }
    }
    if !errors.is_empty() {
        return Err(Error::Parse(errors));
    }
    for s in &specs {
        s.validate()?;
    }
    Ok(specs)
}
