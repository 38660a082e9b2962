use std::fmt;

use thiserror::Error;

/// Line/column position in DSL source text (both 1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub pos: Pos,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.pos, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("construction error: {0}")]
    Construction(String),

    #[error("instantiation error: variable `{0}` is not covered by the substitution")]
    Instantiation(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("{}", format_parse_errors(.0))]
    Parse(Vec<ParseError>),

    #[error("resource limit exceeded: {what} ({size} > cap {cap})")]
    Resource {
        what: String,
        size: usize,
        cap: usize,
    },
}

fn format_parse_errors(errors: &[ParseError]) -> String {
    let lines: Vec<String> = errors.iter().map(|e| e.to_string()).collect();
    lines.join("\n")
}

impl Error {
    pub(crate) fn parse_at(pos: Pos, message: impl Into<String>) -> Self {
        Error::Parse(vec![ParseError {
            pos,
            message: message.into(),
        }])
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
