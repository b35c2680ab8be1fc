//! The left-corner transform, realized on trees.
//!
//! For a subtree rooted at `A` whose leftmost-child chain is
//! `A = B0, B1, ..., Bk` with `Bk`'s first child the terminal `a`, the
//! rewritten subtree announces each chain rule bottom-up after its left
//! corner: the root keeps label `A` with children `[a, A/a]`; the `A/X`
//! node announcing original rule `C -> X β` has children `[lc(β) ..., A/C]`;
//! the chain bottoms out at `A/A` with a single empty child. Grammars
//! induced from the output contain exactly the three rule shapes
//! `A -> a A/a`, `A/X -> β A/C`, and `A/A -> ε`.

use crate::error::{Error, Result};
use crate::symbol::{Mark, Symbol};
use crate::treebank::Tree;

pub fn left_corner(t: &Tree) -> Result<Tree> {
    match t {
        Tree::Leaf(_) | Tree::Epsilon => Ok(t.clone()),
        Tree::Node { .. } => lc_scope(t),
    }
}

fn slash(host: &Symbol, seen: Symbol) -> Symbol {
    host.pushed(Mark::Slash(Box::new(seen)))
}

/// Transforms one left-corner scope: the given internal node.
fn lc_scope(t: &Tree) -> Result<Tree> {
    let host = t.symbol().cloned().expect("internal node");

    // walk the leftmost-child chain down to the terminal left corner
    let mut chain: Vec<&Tree> = vec![t];
    let corner: Symbol = loop {
        let cur = chain.last().unwrap();
        match &cur.children()[0] {
            Tree::Node { .. } => chain.push(&cur.children()[0]),
            Tree::Leaf(s) => break s.clone(),
            Tree::Epsilon => {
                return Err(Error::Transform {
                    step: "lc".into(),
                    msg: format!(
                        "leftmost path of '{}' ends in an empty leaf, not a terminal",
                        host
                    ),
                })
            }
        }
    };

    // terminator: A/A with a single empty child
    let mut acc = Tree::Node {
        label: slash(&host, host.clone()),
        children: vec![Tree::Epsilon],
    };
    // chain[j] for j = 0..k; the node A/B_j announces chain[j-1]'s rule
    for j in 1..chain.len() {
        let seen = chain[j].symbol().cloned().unwrap();
        let mut children = lc_rest(chain[j - 1])?;
        children.push(acc);
        acc = Tree::Node { label: slash(&host, seen), children };
    }
    // A/a announces the bottom rule B_k -> a β
    let mut children = lc_rest(chain[chain.len() - 1])?;
    children.push(acc);
    let corner_node = Tree::Node { label: slash(&host, corner.clone()), children };

    Ok(Tree::Node {
        label: host,
        children: vec![Tree::Leaf(corner), corner_node],
    })
}

/// Left-corner transforms of a node's non-first children.
fn lc_rest(t: &Tree) -> Result<Vec<Tree>> {
    t.children()[1..].iter().map(left_corner).collect()
}
