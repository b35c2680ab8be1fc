//! Exact inversion of transform pipelines.
//!
//! The inverse works by local pattern undoing, iterated to a fixed point,
//! so it does not need to know the pipeline that produced the tree:
//!
//! 1. announce nodes are spliced out;
//! 2. binarization composites (right chains and left bundles) are spliced,
//!    verifying that the recorded sibling lists agree with the realized
//!    siblings;
//! 3. left-corner chains are folded back into their constituents;
//! 4. once no structural marks remain, parent and ancestor annotations are
//!    dropped.
//!
//! A pattern that is not yet undoable (its parts still carry later-applied
//! marks) is skipped and picked up on a later pass; marks that survive the
//! fixed point are reported as structural errors.

use crate::error::{Error, Result};
use crate::symbol::{Mark, Symbol};
use crate::treebank::Tree;

pub fn detransform(t: &Tree) -> Result<Tree> {
    let mut cur = t.clone();
    loop {
        let mut changed = false;
        cur = undo_announce(cur, &mut changed);
        cur = undo_binarize(cur, &mut changed, false)?;
        cur = undo_left_corner(cur, &mut changed);
        if !changed {
            break;
        }
    }
    // a final strict pass turns any leftover binarization structure into a
    // precise error instead of the generic one below
    let mut ignored = false;
    cur = undo_binarize(cur, &mut ignored, true)?;
    let cur = strip_annotations(&cur);
    verify_plain(&cur)?;
    Ok(cur)
}

fn undo_announce(t: Tree, changed: &mut bool) -> Tree {
    match t {
        Tree::Node { label, children } => {
            let mut children: Vec<Tree> =
                children.into_iter().map(|c| undo_announce(c, changed)).collect();
            if matches!(label.top_mark(), Some(Mark::Announce)) && children.len() == 1 {
                *changed = true;
                return children.pop().unwrap();
            }
            Tree::Node { label, children }
        }
        other => other,
    }
}

fn undo_binarize(t: Tree, changed: &mut bool, strict: bool) -> Result<Tree> {
    match t {
        Tree::Node { label, children } => {
            let mut children: Vec<Tree> = children
                .into_iter()
                .map(|c| undo_binarize(c, changed, strict))
                .collect::<Result<_>>()?;
            splice_right_chain(&label, &mut children, changed, strict)?;
            splice_left_bundle(&mut children, changed, strict)?;
            Ok(Tree::Node { label, children })
        }
        other => Ok(other),
    }
}

/// Merges a trailing right-binarization composite chain back into the
/// node's child list. Each composite must extend the node's symbol by one
/// `DelayedSiblings` mark whose list equals the realized earlier siblings.
fn splice_right_chain(
    label: &Symbol,
    children: &mut Vec<Tree>,
    changed: &mut bool,
    strict: bool,
) -> Result<()> {
    loop {
        let saturated = {
            let Some(Tree::Node { label: last, children: tail }) = children.last() else {
                return Ok(());
            };
            let Some(seen) = label.delayed_extension_of(last) else {
                return Ok(());
            };
            let realized: Vec<Symbol> = children[..children.len() - 1]
                .iter()
                .map(|c| c.symbol().cloned())
                .collect::<Option<_>>()
                .unwrap_or_default();
            if seen != realized.as_slice() {
                if strict {
                    return Err(Error::Detransform(format!(
                        "composite '{}' under '{}' recorded siblings [{}] but found [{}]",
                        last,
                        label,
                        seen.iter().map(Symbol::text).collect::<Vec<_>>().join(", "),
                        realized.iter().map(Symbol::text).collect::<Vec<_>>().join(", ")
                    )));
                }
                return Ok(());
            }
            matches!(tail.as_slice(), [Tree::Epsilon])
        };
        *changed = true;
        if saturated {
            // saturated nullary composite: the chain ends here
            children.pop();
        } else {
            let Some(Tree::Node { children: tail, .. }) = children.pop() else {
                unreachable!()
            };
            children.extend(tail);
        }
    }
}

/// Replaces a leading left-binarization bundle with the children it groups.
fn splice_left_bundle(children: &mut Vec<Tree>, changed: &mut bool, strict: bool) -> Result<()> {
    let Some(Tree::Node { label: first, .. }) = children.first() else {
        return Ok(());
    };
    if !matches!(first.top_mark(), Some(Mark::LeftBundle(_))) {
        return Ok(());
    }
    let bundle = children.remove(0);
    match flatten_bundle(bundle, strict)? {
        Ok(mut items) => {
            *changed = true;
            items.append(children);
            *children = items;
            Ok(())
        }
        Err(bundle) => {
            // not undoable yet; put it back
            children.insert(0, bundle);
            Ok(())
        }
    }
}

/// Unfolds a bundle node into the children it covers, verifying the
/// recorded symbol list. Returns the node untouched when the structure
/// underneath is not bundle-shaped yet.
fn flatten_bundle(bundle: Tree, strict: bool) -> Result<std::result::Result<Vec<Tree>, Tree>> {
    let Tree::Node { label, children } = &bundle else { unreachable!() };
    let Some(Mark::LeftBundle(list)) = label.top_mark() else { unreachable!() };
    let expected: Vec<Symbol> = std::iter::once(label.popped())
        .chain(list.iter().cloned())
        .collect();

    let mut flat: Vec<Tree> = Vec::with_capacity(expected.len());
    let mut stack = vec![bundle.clone()];
    while let Some(cur) = stack.pop() {
        match &cur {
            Tree::Node { label, children: kids }
                if matches!(label.top_mark(), Some(Mark::LeftBundle(_))) && flat.is_empty() =>
            {
                // nested bundles sit leftmost; descend
                if kids.len() == 2 {
                    stack.push(kids[1].clone());
                    stack.push(kids[0].clone());
                } else {
                    // a bundle node over its full, already flattened list
                    for k in kids.iter().rev() {
                        stack.push(k.clone());
                    }
                }
            }
            _ => flat.push(cur),
        }
    }
    let realized: Vec<Symbol> = flat
        .iter()
        .map(|c| c.symbol().cloned())
        .collect::<Option<_>>()
        .unwrap_or_default();
    if realized != expected {
        if strict {
            return Err(Error::Detransform(format!(
                "left bundle '{}' groups [{}] but found [{}]",
                label,
                expected.iter().map(Symbol::text).collect::<Vec<_>>().join(", "),
                realized.iter().map(Symbol::text).collect::<Vec<_>>().join(", ")
            )));
        }
        let _ = children;
        return Ok(Err(bundle));
    }
    Ok(Ok(flat))
}

fn undo_left_corner(t: Tree, changed: &mut bool) -> Tree {
    match t {
        Tree::Node { label, children } => {
            let children: Vec<Tree> =
                children.into_iter().map(|c| undo_left_corner(c, changed)).collect();
            if let Some(folded) = try_fold_chain(&label, &children) {
                *changed = true;
                return Tree::Node { label, children: folded };
            }
            Tree::Node { label, children }
        }
        other => other,
    }
}

/// Recognizes the output shape of the left-corner transform at this node —
/// `[terminal a, A/a chain...]` — and folds the chain back into the
/// original constituent, returning its children. The fold only fires when
/// the whole chain is clean (no composites left inside), so it composes
/// with binarization undoing across passes.
fn try_fold_chain(label: &Symbol, children: &[Tree]) -> Option<Vec<Tree>> {
    let [Tree::Leaf(corner), chain0 @ Tree::Node { label: l0, .. }] = children else {
        return None;
    };
    match l0.top_mark() {
        Some(Mark::Slash(seen)) if l0.popped() == *label && **seen == *corner => {}
        _ => return None,
    }

    let mut built = Tree::Leaf(corner.clone());
    let mut cur = chain0;
    loop {
        let kids = cur.children();
        let (rest, next) = kids.split_at(kids.len().checked_sub(1)?);
        let next = &next[0];
        let Tree::Node { label: next_label, children: next_kids } = next else {
            return None;
        };
        let Some(Mark::Slash(next_seen)) = next_label.top_mark() else {
            return None;
        };
        if next_label.popped() != *label {
            return None;
        }
        // this node announces rule C -> X β with C the next seen category;
        // the terminator is recognized by its shape, not by C alone, since
        // with left recursion an announcing node can also be seen-A
        let terminator = matches!(next_kids.as_slice(), [Tree::Epsilon]);
        if terminator && **next_seen != *label {
            return None;
        }
        let announced = (**next_seen).clone();
        let mut folded_children = vec![built];
        folded_children.extend(rest.iter().cloned());
        built = Tree::Node { label: announced, children: folded_children };
        if terminator {
            let Tree::Node { children, .. } = built else { unreachable!() };
            return Some(children);
        }
        cur = next;
    }
}

fn strip_annotations(t: &Tree) -> Tree {
    match t {
        Tree::Node { label, children } => Tree::Node {
            label: label.without_annotations(),
            children: children.iter().map(strip_annotations).collect(),
        },
        other => other.clone(),
    }
}

fn verify_plain(t: &Tree) -> Result<()> {
    match t {
        Tree::Node { label, children } => {
            if !label.is_plain() {
                return Err(Error::Detransform(format!(
                    "unresolved transform marks at node '{}'",
                    label
                )));
            }
            children.iter().try_for_each(verify_plain)
        }
        _ => Ok(()),
    }
}
