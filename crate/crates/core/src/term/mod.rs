//! Free, acyclic, hash-consed term algebra.
//!
//! Every [`Term`] is a handle into a process-wide append-only intern table.
//! Two handles are equal exactly when the terms are structurally equal, so
//! equality and hashing are pointer operations. Ordering is structural and
//! independent of allocation addresses, which keeps every set of terms
//! iterated in the same canonical order across runs.
//!
//! Children must be interned before their parent, so a term can never occur
//! inside itself: equations such as `x = enc(s, x)` have no solution here.

mod enumerate;
mod text;

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

pub use enumerate::{enumerate_universe, Universe, DEFAULT_UNIVERSE_CAP};
pub use text::{parse_term, term_from_json, term_to_json};
pub(crate) use enumerate::enumerate_from_blocks;
pub(crate) use text::term_from_sexpr;

/// Constructor tags, listed in canonical rank order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    Epsilon,
    Atom,
    Identity,
    SecretKey,
    Var,
    PubKey,
    Hash,
    Nonce,
    Enc,
    Sig,
    Pair,
    Set2,
    RuleVal,
}

impl Tag {
    pub const ALL: [Tag; 13] = [
        Tag::Epsilon,
        Tag::Atom,
        Tag::Identity,
        Tag::SecretKey,
        Tag::Var,
        Tag::PubKey,
        Tag::Hash,
        Tag::Nonce,
        Tag::Enc,
        Tag::Sig,
        Tag::Pair,
        Tag::Set2,
        Tag::RuleVal,
    ];

    pub fn arity(self) -> usize {
        match self {
            Tag::Epsilon | Tag::Atom | Tag::Identity | Tag::SecretKey | Tag::Var => 0,
            Tag::PubKey | Tag::Hash => 1,
            Tag::Nonce | Tag::Enc | Tag::Sig | Tag::Pair | Tag::Set2 | Tag::RuleVal => 2,
        }
    }

    /// Leaves that carry a name (atoms, identities, secret keys, variables).
    pub fn is_named(self) -> bool {
        matches!(self, Tag::Atom | Tag::Identity | Tag::SecretKey | Tag::Var)
    }

    /// The keyword used by the s-expression form.
    pub fn keyword(self) -> &'static str {
        match self {
            Tag::Epsilon => "eps",
            Tag::Atom => "atom",
            Tag::Identity => "id",
            Tag::SecretKey => "sk",
            Tag::Var => "var",
            Tag::PubKey => "pk",
            Tag::Hash => "hash",
            Tag::Nonce => "nonce",
            Tag::Enc => "enc",
            Tag::Sig => "sig",
            Tag::Pair => "pair",
            Tag::Set2 => "set",
            Tag::RuleVal => "ruleval",
        }
    }

    pub fn from_keyword(word: &str) -> Option<Tag> {
        Tag::ALL.iter().copied().find(|t| t.keyword() == word)
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

struct Node {
    tag: Tag,
    name: Option<Arc<str>>,
    children: Box<[Term]>,
    depth: u32,
    size: u32,
    ground: bool,
}

/// Interned handle to a term node.
#[derive(Clone)]
pub struct Term(Arc<Node>);

#[derive(PartialEq, Eq, Hash)]
struct Shape {
    tag: Tag,
    name: Option<Arc<str>>,
    children: Vec<Term>,
}

fn table() -> &'static Mutex<HashMap<Shape, Term>> {
    static TABLE: OnceLock<Mutex<HashMap<Shape, Term>>> = OnceLock::new();
    TABLE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Number of distinct nodes interned so far in this process.
pub fn interned_count() -> usize {
    table().lock().expect("intern table poisoned").len()
}

impl Term {
    /// Interns a node. Set2 children are stored in canonical order.
    pub fn intern(tag: Tag, name: Option<&str>, children: Vec<Term>) -> Result<Term> {
        if children.len() != tag.arity() {
            return Err(Error::Construction(format!(
                "`{tag}` takes {} children, got {}",
                tag.arity(),
                children.len()
            )));
        }
        match (tag.is_named(), name) {
            (true, None) => {
                return Err(Error::Construction(format!("`{tag}` requires a name")));
            }
            (true, Some("")) => {
                return Err(Error::Construction(format!("`{tag}` name is empty")));
            }
            (false, Some(_)) => {
                return Err(Error::Construction(format!("`{tag}` does not take a name")));
            }
            _ => {}
        }
        Ok(Self::intern_unchecked(tag, name, children))
    }

    fn intern_unchecked(tag: Tag, name: Option<&str>, mut children: Vec<Term>) -> Term {
        if tag == Tag::Set2 && children[0] > children[1] {
            children.swap(0, 1);
        }
        let shape = Shape {
            tag,
            name: name.map(Arc::from),
            children,
        };
        let mut table = table().lock().expect("intern table poisoned");
        if let Some(existing) = table.get(&shape) {
            return existing.clone();
        }
        let depth = shape.children.iter().map(|c| c.depth() + 1).max().unwrap_or(0) as u32;
        let size = 1 + shape.children.iter().map(|c| c.size()).sum::<usize>() as u32;
        let ground = tag != Tag::Var && shape.children.iter().all(Term::is_ground);
        let term = Term(Arc::new(Node {
            tag,
            name: shape.name.clone(),
            children: shape.children.clone().into_boxed_slice(),
            depth,
            size,
            ground,
        }));
        table.insert(shape, term.clone());
        term
    }

    pub fn eps() -> Term {
        Self::intern_unchecked(Tag::Epsilon, None, vec![])
    }

    pub fn atom(name: &str) -> Term {
        assert!(!name.is_empty(), "atom name must be non-empty");
        Self::intern_unchecked(Tag::Atom, Some(name), vec![])
    }

    pub fn identity(principal: &str) -> Term {
        assert!(!principal.is_empty(), "identity name must be non-empty");
        Self::intern_unchecked(Tag::Identity, Some(principal), vec![])
    }

    pub fn secret_key(principal: &str) -> Term {
        assert!(!principal.is_empty(), "secret key owner must be non-empty");
        Self::intern_unchecked(Tag::SecretKey, Some(principal), vec![])
    }

    pub fn var(name: &str) -> Term {
        assert!(!name.is_empty(), "variable name must be non-empty");
        Self::intern_unchecked(Tag::Var, Some(name), vec![])
    }

    pub fn pk(secret: Term) -> Term {
        Self::intern_unchecked(Tag::PubKey, None, vec![secret])
    }

    pub fn hash(x: Term) -> Term {
        Self::intern_unchecked(Tag::Hash, None, vec![x])
    }

    pub fn enc(key: Term, payload: Term) -> Term {
        Self::intern_unchecked(Tag::Enc, None, vec![key, payload])
    }

    pub fn sig(key: Term, payload: Term) -> Term {
        Self::intern_unchecked(Tag::Sig, None, vec![key, payload])
    }

    pub fn nonce(seed: Term, identity: Term) -> Term {
        Self::intern_unchecked(Tag::Nonce, None, vec![seed, identity])
    }

    pub fn pair(left: Term, right: Term) -> Term {
        Self::intern_unchecked(Tag::Pair, None, vec![left, right])
    }

    pub fn set2(a: Term, b: Term) -> Term {
        Self::intern_unchecked(Tag::Set2, None, vec![a, b])
    }

    pub fn rule_val(premise: Term, conclusion: Term) -> Term {
        Self::intern_unchecked(Tag::RuleVal, None, vec![premise, conclusion])
    }

    /// Rebuilds a node with the same constructor (and name) over new children.
    pub fn with_children(&self, children: Vec<Term>) -> Term {
        debug_assert_eq!(children.len(), self.0.children.len());
        Self::intern_unchecked(self.tag(), self.name(), children)
    }

    pub fn tag(&self) -> Tag {
        self.0.tag
    }

    pub fn name(&self) -> Option<&str> {
        self.0.name.as_deref()
    }

    pub fn children(&self) -> &[Term] {
        &self.0.children
    }

    /// Nesting depth; leaves have depth 0.
    pub fn depth(&self) -> usize {
        self.0.depth as usize
    }

    pub fn size(&self) -> usize {
        self.0.size as usize
    }

    pub fn is_ground(&self) -> bool {
        self.0.ground
    }

    pub fn is_var(&self) -> bool {
        self.0.tag == Tag::Var
    }

    pub fn is_leaf(&self) -> bool {
        self.0.children.is_empty()
    }

    /// Reflexive-transitive child closure.
    pub fn subterms(&self) -> BTreeSet<Term> {
        let mut out = BTreeSet::new();
        self.collect_subterms(&mut out);
        out
    }

    fn collect_subterms(&self, out: &mut BTreeSet<Term>) {
        if out.insert(self.clone()) {
            for c in self.children() {
                c.collect_subterms(out);
            }
        }
    }

    pub fn contains(&self, needle: &Term) -> bool {
        self == needle
            || (self.depth() > needle.depth() && self.children().iter().any(|c| c.contains(needle)))
    }

    /// Names of all variables occurring in the term.
    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        if self.is_ground() {
            return;
        }
        if self.is_var() {
            out.insert(self.name().unwrap_or_default().to_string());
        }
        for c in self.children() {
            c.collect_vars(out);
        }
    }

    /// Largest depth at which variable `name` occurs, if it occurs.
    pub fn var_position_depth(&self, name: &str) -> Option<usize> {
        if self.is_ground() {
            return None;
        }
        if self.is_var() {
            return (self.name() == Some(name)).then_some(0);
        }
        self.children()
            .iter()
            .filter_map(|c| c.var_position_depth(name))
            .max()
            .map(|d| d + 1)
    }

    /// Leaves (depth-0 subterms).
    pub fn leaves(&self) -> BTreeSet<Term> {
        self.subterms().into_iter().filter(Term::is_leaf).collect()
    }

    /// Applies `f` to every Identity / SecretKey leaf name, rebuilding the term.
    pub fn rename_principals(&self, f: &dyn Fn(&str) -> Option<String>) -> Term {
        match self.tag() {
            Tag::Identity | Tag::SecretKey => match f(self.name().unwrap_or_default()) {
                Some(new) => Self::intern_unchecked(self.tag(), Some(&new), vec![]),
                None => self.clone(),
            },
            _ if self.is_leaf() => self.clone(),
            _ => self.with_children(
                self.children()
                    .iter()
                    .map(|c| c.rename_principals(f))
                    .collect(),
            ),
        }
    }

    /// Principal names mentioned through Identity / SecretKey leaves.
    pub fn principal_refs(&self) -> BTreeSet<String> {
        self.leaves()
            .into_iter()
            .filter(|l| matches!(l.tag(), Tag::Identity | Tag::SecretKey))
            .filter_map(|l| l.name().map(str::to_string))
            .collect()
    }

    fn ptr(&self) -> *const Node {
        Arc::as_ptr(&self.0)
    }
}

impl PartialEq for Term {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

impl Eq for Term {}

impl Hash for Term {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.ptr().hash(state);
    }
}

impl Ord for Term {
    fn cmp(&self, other: &Self) -> Ordering {
        if self == other {
            return Ordering::Equal;
        }
        self.tag()
            .cmp(&other.tag())
            .then_with(|| self.name().cmp(&other.name()))
            .then_with(|| self.children().cmp(other.children()))
    }
}

impl PartialOrd for Term {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.tag() {
            Tag::Epsilon => f.write_str("eps"),
            Tag::Atom => f.write_str(self.name().unwrap_or_default()),
            tag if tag.is_named() => write!(f, "({} {})", tag, self.name().unwrap_or_default()),
            tag => {
                write!(f, "({tag}")?;
                for c in self.children() {
                    write!(f, " {c}")?;
                }
                f.write_str(")")
            }
        }
    }
}
