//! Knowledge-flow analysis of security protocols.
//!
//! Protocols are described by who can learn which value. The merged
//! adversary's knowledge is saturated under primitive and protocol rules, and
//! bounded secrecy queries are decided by a two-phase engine (decompose what
//! is known, then compose the target) that is cross-checked against a naive
//! saturation oracle.

pub mod dsl;
pub mod engine;
pub mod error;
pub mod gen;
pub mod knowledge;
pub mod primitives;
pub mod rules;
pub mod sexpr;
pub mod term;

pub use error::{Error, Result};
pub use term::{Tag, Term};
