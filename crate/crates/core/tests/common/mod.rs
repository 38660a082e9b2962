//! Strategies shared by the property suites.

#![allow(dead_code)]

use proptest::prelude::*;

use kflow::{Tag, Term};

/// A term tree kept apart from the intern table, so equality of shapes is
/// an oracle independent of hash-consing.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Shape {
    Leaf(Tag, Option<String>),
    Node(Tag, Vec<Shape>),
}

impl Shape {
    pub fn build(&self) -> Term {
        match self {
            Shape::Leaf(tag, name) => Term::intern(*tag, name.as_deref(), vec![]).expect("valid leaf"),
            Shape::Node(tag, kids) => Term::intern(*tag, None, kids.iter().map(Shape::build).collect()).expect("valid node"),
        }
    }

    /// Set2 children sorted, recursively.
    pub fn normalize(&self) -> Shape {
        match self {
            Shape::Leaf(..) => self.clone(),
            Shape::Node(tag, kids) => {
                let mut kids: Vec<Shape> = kids.iter().map(Shape::normalize).collect();
                if *tag == Tag::Set2 {
                    kids.sort();
                }
                Shape::Node(*tag, kids)
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Shape::Leaf(..) => 0,
            Shape::Node(_, kids) => 1 + kids.iter().map(Shape::depth).max().unwrap_or(0),
        }
    }
}

const COMPOUND: [Tag; 8] = [
    Tag::PubKey,
    Tag::Hash,
    Tag::Nonce,
    Tag::Enc,
    Tag::Sig,
    Tag::Pair,
    Tag::Set2,
    Tag::RuleVal,
];

fn leaf(vars: bool) -> BoxedStrategy<Shape> {
    let mut options: Vec<BoxedStrategy<Shape>> = vec![
        Just(Shape::Leaf(Tag::Epsilon, None)).boxed(),
        prop::sample::select(vec!["a", "b", "c"])
            .prop_map(|n| Shape::Leaf(Tag::Atom, Some(n.to_string())))
            .boxed(),
        prop::sample::select(vec!["a", "b"])
            .prop_map(|n| Shape::Leaf(Tag::Identity, Some(n.to_string())))
            .boxed(),
        Just(Shape::Leaf(Tag::SecretKey, Some("a".into()))).boxed(),
    ];
    if vars {
        options.push(
            prop::sample::select(vec!["x", "y", "z"])
                .prop_map(|n| Shape::Leaf(Tag::Var, Some(n.to_string())))
                .boxed(),
        );
    }
    prop::strategy::Union::new(options).boxed()
}

fn shape(vars: bool, depth: u32) -> BoxedStrategy<Shape> {
    leaf(vars)
        .prop_recursive(depth, 24, 2, |inner| {
            (prop::sample::select(COMPOUND.to_vec()), inner.clone(), inner).prop_map(|(tag, a, b)| {
                let kids = if tag.arity() == 1 { vec![a] } else { vec![a, b] };
                Shape::Node(tag, kids)
            })
        })
        .boxed()
}

pub fn ground_shape() -> BoxedStrategy<Shape> {
    shape(false, 4)
}

pub fn pattern_shape() -> BoxedStrategy<Shape> {
    shape(true, 3)
}

pub fn ground_term() -> BoxedStrategy<Term> {
    ground_shape().prop_map(|s| s.build()).boxed()
}

pub fn pattern_term() -> BoxedStrategy<Term> {
    pattern_shape().prop_map(|s| s.build()).boxed()
}
