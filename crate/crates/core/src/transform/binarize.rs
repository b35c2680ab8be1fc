//! Left and right binarization.
//!
//! Right binarization rebuilds `A -> X1 .. Xn` as a chain of composite
//! categories `A -> X1 A-X1`, `A-X1 -> X2 A-X1-X2`, ... so the rule choice
//! is delayed until later children are in the look-ahead. The chain ends in
//! a binary composite (RB2), a unary one (RB1), or a fully saturated one
//! with an empty child (RB0). Left binarization groups the leftmost
//! children into `+`-bundles instead.

use crate::symbol::{Mark, Symbol};
use crate::treebank::Tree;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RightMode {
    /// Final composite rewrites as a binary rule.
    Binary,
    /// Final composite rewrites as a unary rule.
    Unary,
    /// Final composite rewrites as a nullary (empty) rule.
    Nullary,
}

pub fn left_binarize(t: &Tree) -> Tree {
    match t {
        Tree::Node { label, children } => {
            let children: Vec<Tree> = children.iter().map(left_binarize).collect();
            if children.len() <= 2 || has_epsilon_child(&children) {
                return Tree::Node { label: label.clone(), children };
            }
            let n = children.len();
            let mut iter = children.into_iter();
            let mut syms: Vec<Symbol> = Vec::with_capacity(n);
            let mut items: Vec<Tree> = Vec::with_capacity(n);
            for c in iter.by_ref() {
                syms.push(child_symbol(&c));
                items.push(c);
            }
            let last = items.pop().unwrap();
            syms.pop();
            // bundle children 1..n-1, recursively grouping on the left
            let bundle = build_bundle(items, &syms);
            Tree::Node { label: label.clone(), children: vec![bundle, last] }
        }
        _ => t.clone(),
    }
}

fn build_bundle(mut items: Vec<Tree>, syms: &[Symbol]) -> Tree {
    debug_assert!(items.len() >= 2);
    let label = bundle_symbol(syms);
    if items.len() == 2 {
        return Tree::Node { label, children: items };
    }
    let last = items.pop().unwrap();
    let inner = build_bundle(items, &syms[..syms.len() - 1]);
    Tree::Node { label, children: vec![inner, last] }
}

fn bundle_symbol(syms: &[Symbol]) -> Symbol {
    syms[0].pushed(Mark::LeftBundle(syms[1..].to_vec()))
}

pub fn right_binarize(t: &Tree, mode: RightMode) -> Tree {
    match t {
        Tree::Node { label, children } => {
            let children: Vec<Tree> = children.iter().map(|c| right_binarize(c, mode)).collect();
            let n = children.len();
            let rebuild = match mode {
                RightMode::Binary => n > 2,
                RightMode::Unary => n > 1,
                RightMode::Nullary => n >= 1,
            };
            if !rebuild || has_epsilon_child(&children) {
                return Tree::Node { label: label.clone(), children };
            }
            let syms: Vec<Symbol> = children.iter().map(child_symbol).collect();
            build_chain(label, children, &syms, mode)
        }
        _ => t.clone(),
    }
}

fn composite(parent: &Symbol, seen: &[Symbol]) -> Symbol {
    parent.pushed(Mark::DelayedSiblings(seen.to_vec()))
}

fn build_chain(parent: &Symbol, children: Vec<Tree>, syms: &[Symbol], mode: RightMode) -> Tree {
    let n = children.len();
    // composite i covers children i+1.. and has seen children ..=i
    let mut rev = children.into_iter().rev();
    let tail: Tree = match mode {
        RightMode::Binary => {
            let last = rev.next().unwrap();
            let second = rev.next().unwrap();
            let mut acc = if n == 2 {
                // only reachable for n > 2 by the rebuild test, kept for form
                Tree::Node { label: parent.clone(), children: vec![second, last] }
            } else {
                Tree::Node {
                    label: composite(parent, &syms[..n - 2]),
                    children: vec![second, last],
                }
            };
            for i in (1..n - 2).rev() {
                let child = rev.next().unwrap();
                acc = Tree::Node { label: composite(parent, &syms[..i]), children: vec![child, acc] };
            }
            acc
        }
        RightMode::Unary => {
            let last = rev.next().unwrap();
            let mut acc = Tree::Node { label: composite(parent, &syms[..n - 1]), children: vec![last] };
            for i in (1..n - 1).rev() {
                let child = rev.next().unwrap();
                acc = Tree::Node { label: composite(parent, &syms[..i]), children: vec![child, acc] };
            }
            acc
        }
        RightMode::Nullary => {
            let mut acc = Tree::Node {
                label: composite(parent, syms),
                children: vec![Tree::Epsilon],
            };
            for i in (1..n).rev() {
                let child = rev.next().unwrap();
                acc = Tree::Node { label: composite(parent, &syms[..i]), children: vec![child, acc] };
            }
            acc
        }
    };
    let first = rev.next().unwrap();
    debug_assert!(rev.next().is_none());
    Tree::Node { label: parent.clone(), children: vec![first, tail] }
}

fn child_symbol(t: &Tree) -> Symbol {
    t.symbol().cloned().expect("binarization over an empty leaf")
}

fn has_epsilon_child(children: &[Tree]) -> bool {
    children.iter().any(|c| matches!(c, Tree::Epsilon))
}
