//! Non-local annotations: parent, left-corner ancestor, and announce nodes.

use crate::error::{Error, Result};
use crate::symbol::{Mark, Symbol};
use crate::treebank::Tree;

/// Root label used as the parent annotation of the tree root.
pub const ROOT_PARENT: &str = "TOP";

/// Copies the parent's base label onto every nonterminal; the root is
/// annotated with `TOP`. Terminals and structure are untouched.
pub fn parent_annotate(t: &Tree) -> Tree {
    pa(t, ROOT_PARENT)
}

fn pa(t: &Tree, parent: &str) -> Tree {
    match t {
        Tree::Node { label, children } => {
            let children = children.iter().map(|c| pa(c, label.base())).collect();
            Tree::Node {
                label: label.pushed(Mark::Parent(parent.to_string())),
                children,
            }
        }
        _ => t.clone(),
    }
}

/// Annotates every nonterminal that is the leftmost child of its parent
/// with the base label of its left-corner ancestor: the top of the maximal
/// chain of leftmost-child links containing the node.
pub fn lc_ancestor_annotate(t: &Tree) -> Tree {
    lca(t, None)
}

fn lca(t: &Tree, chain_top: Option<&str>) -> Tree {
    match t {
        Tree::Node { label, children } => {
            let label_out = match chain_top {
                Some(top) => label.pushed(Mark::LeftCornerAncestor(top.to_string())),
                None => label.clone(),
            };
            // the chain through our leftmost child tops out either where
            // ours does, or at this node
            let first_top = chain_top.unwrap_or_else(|| label.base());
            let children = children
                .iter()
                .enumerate()
                .map(|(i, c)| if i == 0 { lca(c, Some(first_top)) } else { lca(c, None) })
                .collect();
            Tree::Node { label: label_out, children }
        }
        _ => t.clone(),
    }
}

/// Moves the parent announce point back to the left corner: above the
/// leftmost child of every slash node announcing an original rule
/// `C -> X β`, a unary node labeled `C` with an announce mark is inserted.
/// Chain terminators announce nothing and are skipped. Errors unless the
/// tree contains slash categories (the transform only composes after a
/// left-corner pipeline).
pub fn announce_annotate(t: &Tree) -> Result<Tree> {
    if !contains_slash(t) {
        return Err(Error::Transform {
            step: "ann".into(),
            msg: "input has no left-corner categories; apply lc (and a binarization) first".into(),
        });
    }
    Ok(ann(t))
}

fn contains_slash(t: &Tree) -> bool {
    match t {
        Tree::Node { label, children } => {
            label.marks().iter().any(|m| matches!(m, Mark::Slash(_)))
                || children.iter().any(contains_slash)
        }
        _ => false,
    }
}

fn ann(t: &Tree) -> Tree {
    match t {
        Tree::Node { label, children } => {
            let mut children: Vec<Tree> = children.iter().map(ann).collect();
            if matches!(label.top_mark(), Some(Mark::Slash(_))) {
                if let Some(announced) = announced_category(label, &children) {
                    let first = children.remove(0);
                    children.insert(
                        0,
                        Tree::Node {
                            label: announced.pushed(Mark::Announce),
                            children: vec![first],
                        },
                    );
                }
            }
            Tree::Node { label: label.clone(), children }
        }
        _ => t.clone(),
    }
}

/// The original rule's left-hand side `C` for the expansion of a slash
/// node: the seen category of the chain continuation, found as the last
/// child through any binarization composites. Terminators return `None`.
fn announced_category(label: &Symbol, children: &[Tree]) -> Option<Symbol> {
    // terminator: single empty child
    if matches!(children, [Tree::Epsilon]) {
        return None;
    }
    let host = label.popped();
    let mut cur = children.last()?;
    loop {
        let sym = cur.symbol()?;
        if label.delayed_extension_of(sym).is_some() {
            // a composite introduced by binarizing after the left-corner
            // transform; the chain continuation sits at its end
            cur = cur.children().last()?;
            continue;
        }
        // the continuation is a slash node over the same host
        return match sym.top_mark() {
            Some(Mark::Slash(seen)) if sym.popped() == host => Some((**seen).clone()),
            _ => None,
        };
    }
}
