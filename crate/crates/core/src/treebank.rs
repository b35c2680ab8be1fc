//! Bracketed parse trees: reading, writing, normalization, yields.

use crate::error::{Error, Result};
use crate::symbol::{Symbol, EPSILON_TOKEN};

/// An ordered labeled tree. Leaves carry terminal symbols, internal nodes
/// nonterminals; `Epsilon` is the designated empty leaf, which contributes
/// nothing to the yield.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Tree {
    Node { label: Symbol, children: Vec<Tree> },
    Leaf(Symbol),
    Epsilon,
}

impl Tree {
    pub fn node(label: Symbol, children: Vec<Tree>) -> Tree {
        debug_assert!(!children.is_empty());
        Tree::Node { label, children }
    }

    pub fn leaf(label: Symbol) -> Tree {
        Tree::Leaf(label)
    }

    /// The node or leaf symbol; `None` for the empty leaf.
    pub fn symbol(&self) -> Option<&Symbol> {
        match self {
            Tree::Node { label, .. } => Some(label),
            Tree::Leaf(s) => Some(s),
            Tree::Epsilon => None,
        }
    }

    pub fn children(&self) -> &[Tree] {
        match self {
            Tree::Node { children, .. } => children,
            _ => &[],
        }
    }

    pub fn is_internal(&self) -> bool {
        matches!(self, Tree::Node { .. })
    }

    /// Left-to-right terminal leaves, empty leaves excluded.
    pub fn terminal_yield(&self) -> Vec<Symbol> {
        let mut out = Vec::new();
        self.collect_yield(&mut out);
        out
    }

    fn collect_yield(&self, out: &mut Vec<Symbol>) {
        match self {
            Tree::Leaf(s) => out.push(s.clone()),
            Tree::Epsilon => {}
            Tree::Node { children, .. } => {
                for c in children {
                    c.collect_yield(out);
                }
            }
        }
    }

    /// Canonical single-line bracketing. `read_trees` on the output yields
    /// the identical tree.
    pub fn bracketed(&self) -> String {
        let mut out = String::new();
        self.write_into(&mut out);
        out
    }

    fn write_into(&self, out: &mut String) {
        match self {
            Tree::Leaf(s) => out.push_str(&s.text()),
            Tree::Epsilon => out.push_str(EPSILON_TOKEN),
            Tree::Node { label, children } => {
                out.push('(');
                out.push_str(&label.text());
                for c in children {
                    out.push(' ');
                    c.write_into(out);
                }
                out.push(')');
            }
        }
    }

    /// True if some symbol in the tree carries marks.
    pub fn has_marks(&self) -> bool {
        match self {
            Tree::Leaf(s) => !s.is_plain(),
            Tree::Epsilon => false,
            Tree::Node { label, children } => {
                !label.is_plain() || children.iter().any(Tree::has_marks)
            }
        }
    }
}

/// Serializes a tree to its canonical single-line form.
pub fn write_tree(t: &Tree) -> String {
    t.bracketed()
}

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub trees: Vec<Tree>,
    pub source: Option<String>,
}

impl Corpus {
    pub fn new(trees: Vec<Tree>) -> Corpus {
        Corpus { trees, source: None }
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
enum Token<'a> {
    Open(usize),
    Close(usize),
    Atom(&'a str),
}

fn tokenize(text: &str) -> Vec<Token<'_>> {
    let mut tokens = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'(' => {
                tokens.push(Token::Open(i));
                i += 1;
            }
            b')' => {
                tokens.push(Token::Close(i));
                i += 1;
            }
            c if c.is_ascii_whitespace() => i += 1,
            _ => {
                let start = i;
                while i < bytes.len()
                    && !bytes[i].is_ascii_whitespace()
                    && bytes[i] != b'('
                    && bytes[i] != b')'
                {
                    i += 1;
                }
                tokens.push(Token::Atom(&text[start..i]));
            }
        }
    }
    tokens
}

/// Reads whitespace-separated bracketed trees. An outer wrapper with an
/// empty label — the `( (S ...) )` convention — is stripped. Bare atoms at
/// the top level read as single-leaf trees. Empty input is an empty corpus.
pub fn read_trees(text: &str) -> Result<Corpus> {
    let tokens = tokenize(text);
    let mut pos = 0;
    let mut trees = Vec::new();
    while pos < tokens.len() {
        let (tree, next) = parse_tree(&tokens, pos, text.len())?;
        trees.push(tree);
        pos = next;
    }
    Ok(Corpus::new(trees))
}

fn parse_tree<'a>(tokens: &[Token<'a>], pos: usize, end: usize) -> Result<(Tree, usize)> {
    match tokens.get(pos) {
        None => Err(Error::TreeSyntax { offset: end, msg: "unexpected end of input".into() }),
        Some(Token::Close(off)) => {
            Err(Error::TreeSyntax { offset: *off, msg: "unexpected ')'".into() })
        }
        Some(Token::Atom(text)) => Ok((atom_leaf(text), pos + 1)),
        Some(Token::Open(open_off)) => {
            let mut pos = pos + 1;
            // a '(' immediately followed by another '(' is a label-less
            // wrapper node
            let label = match tokens.get(pos) {
                Some(Token::Atom(text)) => {
                    pos += 1;
                    Some(Symbol::parse(text))
                }
                _ => None,
            };
            let mut children = Vec::new();
            loop {
                match tokens.get(pos) {
                    None => {
                        return Err(Error::TreeSyntax {
                            offset: end,
                            msg: "unbalanced '(': reached end of input".into(),
                        })
                    }
                    Some(Token::Close(_)) => {
                        pos += 1;
                        break;
                    }
                    _ => {
                        let (child, next) = parse_tree(tokens, pos, end)?;
                        children.push(child);
                        pos = next;
                    }
                }
            }
            match label {
                Some(label) => {
                    if children.is_empty() {
                        return Err(Error::TreeSyntax {
                            offset: *open_off,
                            msg: format!("node '{}' has no children", label),
                        });
                    }
                    Ok((Tree::Node { label, children }, pos))
                }
                None => {
                    // wrapper: strip it
                    if children.len() == 1 {
                        Ok((children.pop().unwrap(), pos))
                    } else {
                        Err(Error::TreeSyntax {
                            offset: *open_off,
                            msg: format!(
                                "label-less wrapper must hold exactly one tree, found {}",
                                children.len()
                            ),
                        })
                    }
                }
            }
        }
    }
}

fn atom_leaf(text: &str) -> Tree {
    if text == EPSILON_TOKEN {
        Tree::Epsilon
    } else {
        Tree::Leaf(Symbol::parse(text))
    }
}

/// Options for [`normalize`]. Empty-element pruning always runs; word
/// dropping and functional-tag stripping are only meaningful on raw
/// treebank trees and are gated by these flags.
#[derive(Debug, Clone, Copy)]
pub struct NormalizeOptions {
    /// Remove the word level so preterminal POS tags become the terminal
    /// leaves.
    pub drop_words: bool,
    /// Remove functional-tag annotations (everything after the first `-` or
    /// `=` in a label) from nonterminals. Never applied to POS tags.
    pub strip_tags: bool,
}

impl Default for NormalizeOptions {
    fn default() -> Self {
        NormalizeOptions { drop_words: true, strip_tags: true }
    }
}

/// Normalizes one raw treebank tree: prunes empty elements (`-NONE-`
/// preterminals and the internal nodes they vacate), optionally strips
/// functional tags from phrasal labels, and optionally drops the word
/// level so POS tags become the terminals.
pub fn normalize(t: &Tree, opts: NormalizeOptions) -> Result<Tree> {
    let pruned = prune_empty(t).ok_or_else(|| {
        Error::Normalize(format!("tree yield is empty after pruning: {}", t.bracketed()))
    })?;
    let stripped = if opts.strip_tags { strip_tags(&pruned) } else { pruned };
    let dropped = if opts.drop_words { drop_words(&stripped) } else { stripped };
    if dropped.terminal_yield().is_empty() {
        return Err(Error::Normalize(format!(
            "tree yield is empty after normalization: {}",
            t.bracketed()
        )));
    }
    Ok(dropped)
}

/// Normalizes a whole corpus, detecting whether it still carries the raw
/// word level. Word dropping and tag stripping only fire on raw corpora,
/// so re-normalizing already normalized or transformed trees is a no-op;
/// that keeps the experiment pipeline stable on pre-materialized inputs.
pub fn normalize_corpus(corpus: &Corpus, opts: NormalizeOptions) -> Result<Corpus> {
    let raw = corpus_is_raw(corpus);
    let effective = NormalizeOptions {
        drop_words: opts.drop_words && raw,
        strip_tags: opts.strip_tags && raw,
    };
    let mut trees = Vec::with_capacity(corpus.trees.len());
    for (i, t) in corpus.trees.iter().enumerate() {
        trees.push(normalize(t, effective).map_err(|e| e.in_stage(format!("tree {}", i)))?);
    }
    Ok(Corpus { trees, source: corpus.source.clone() })
}

/// A corpus is raw iff every leaf is the only child of its parent: words
/// always sit alone under their POS preterminal. Once words are dropped,
/// sibling terminals appear and the test fails.
pub fn corpus_is_raw(corpus: &Corpus) -> bool {
    fn tree_ok(t: &Tree) -> bool {
        match t {
            Tree::Leaf(_) | Tree::Epsilon => true,
            Tree::Node { children, .. } => {
                if children.len() > 1 && children.iter().any(|c| !c.is_internal()) {
                    return false;
                }
                children.iter().all(tree_ok)
            }
        }
    }
    !corpus.trees.is_empty() && corpus.trees.iter().all(tree_ok)
}

/// `None` when the whole subtree is an empty element.
fn prune_empty(t: &Tree) -> Option<Tree> {
    match t {
        Tree::Leaf(s) => Some(Tree::Leaf(s.clone())),
        // bare empty leaves (introduced by transforms) are structure, not
        // treebank empty elements; they stay
        Tree::Epsilon => Some(Tree::Epsilon),
        Tree::Node { label, children } => {
            if label.base() == EPSILON_TOKEN {
                return None;
            }
            let kept: Vec<Tree> = children.iter().filter_map(prune_empty).collect();
            if kept.is_empty() {
                None
            } else {
                Some(Tree::Node { label: label.clone(), children: kept })
            }
        }
    }
}

fn is_preterminal(t: &Tree) -> bool {
    match t {
        Tree::Node { children, .. } => {
            children.len() == 1 && matches!(children[0], Tree::Leaf(_))
        }
        _ => false,
    }
}

fn strip_tags(t: &Tree) -> Tree {
    match t {
        Tree::Node { label, children } if !is_preterminal(t) => {
            let base = strip_label(label.base());
            // marks on a freshly read raw nonterminal are mis-scanned
            // functional tags (PTB writes them with bare dashes); drop them
            Tree::Node {
                label: Symbol::new(base),
                children: children.iter().map(strip_tags).collect(),
            }
        }
        _ => t.clone(),
    }
}

fn strip_label(base: &str) -> String {
    match base.char_indices().find(|&(i, c)| i > 0 && (c == '-' || c == '=')) {
        Some((i, _)) => base[..i].to_string(),
        None => base.to_string(),
    }
}

fn drop_words(t: &Tree) -> Tree {
    match t {
        Tree::Node { label, .. } if is_preterminal(t) => Tree::Leaf(label.clone()),
        Tree::Node { label, children } => Tree::Node {
            label: label.clone(),
            children: children.iter().map(drop_words).collect(),
        },
        _ => t.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read_one(s: &str) -> Tree {
        let c = read_trees(s).unwrap();
        assert_eq!(c.trees.len(), 1, "expected one tree in {:?}", s);
        c.trees.into_iter().next().unwrap()
    }

    #[test]
    fn reads_simple_tree() {
        let t = read_one("(NP (DT the) (NN cat))");
        assert_eq!(t.symbol().unwrap().base(), "NP");
        assert_eq!(t.children().len(), 2);
        assert_eq!(t.bracketed(), "(NP (DT the) (NN cat))");
    }

    #[test]
    fn strips_outer_wrapper() {
        let t = read_one("( (S (NP (DT the) (NN cat)) (VP (VB sleeps))))");
        assert_eq!(t.symbol().unwrap().base(), "S");
    }

    #[test]
    fn unbalanced_input_reports_offset() {
        let text = "(NP (DT the";
        match read_trees(text) {
            Err(Error::TreeSyntax { offset, .. }) => assert_eq!(offset, text.len()),
            other => panic!("expected syntax error, got {:?}", other),
        }
    }

    #[test]
    fn empty_input_is_empty_corpus() {
        assert!(read_trees("  \n ").unwrap().is_empty());
    }

    #[test]
    fn epsilon_leaf_roundtrips_under_nullary_category() {
        let t = Tree::node(Symbol::parse("NP-DT-JJ-JJ-NN"), vec![Tree::Epsilon]);
        assert_eq!(t.bracketed(), "(NP-DT-JJ-JJ-NN -NONE-)");
        assert_eq!(read_one(&t.bracketed()), t);
    }

    #[test]
    fn write_then_read_is_identity() {
        let texts = [
            "(NP (DT the) (NN cat))",
            "(S (NP DT NN) (VP VB))",
            "(NP DT (NP-DT JJ (NP-DT-JJ JJ (NP-DT-JJ-JJ NN (NP-DT-JJ-JJ-NN -NONE-)))))",
        ];
        for text in texts {
            let t = read_one(text);
            assert_eq!(read_one(&t.bracketed()), t);
        }
    }

    #[test]
    fn raw_ptb_label_roundtrips_as_tree() {
        // -NONE- appears as an internal label in raw treebank text; its
        // canonical form escapes the dashes but reparses identically
        let t = read_one("(NP-SBJ (-NONE- *T*-1))");
        let again = read_one(&t.bracketed());
        assert_eq!(t, again);
    }

    #[test]
    fn yield_excludes_epsilon() {
        let t = read_one("(NP DT (NP-DT JJ (NP-DT-JJ JJ (NP-DT-JJ-JJ NN (NP-DT-JJ-JJ-NN -NONE-)))))");
        let y: Vec<String> = t.terminal_yield().iter().map(|s| s.text()).collect();
        assert_eq!(y, ["DT", "JJ", "JJ", "NN"]);

        let single = read_one("a");
        assert_eq!(single.terminal_yield().len(), 1);

        let only_eps = Tree::node(Symbol::new("X"), vec![Tree::Epsilon]);
        assert!(only_eps.terminal_yield().is_empty());
    }

    #[test]
    fn normalize_drops_words() {
        let t = read_one("(NP (DT the) (NN cat))");
        let n = normalize(&t, NormalizeOptions::default()).unwrap();
        assert_eq!(n.bracketed(), "(NP DT NN)");
    }

    #[test]
    fn normalize_strips_functional_tags_but_not_pos() {
        let t = read_one("(S (NP-SBJ (DT the) (NN cat)) (VP (VB sleeps)))");
        let n = normalize(&t, NormalizeOptions::default()).unwrap();
        assert_eq!(n.bracketed(), "(S (NP DT NN) (VP VB))");
    }

    #[test]
    fn normalize_prunes_empty_elements() {
        let t = read_one("(S (NP-SBJ (-NONE- *T*-1)) (VP (VB sleeps)))");
        let n = normalize(&t, NormalizeOptions::default()).unwrap();
        assert_eq!(n.bracketed(), "(S (VP VB))");
    }

    #[test]
    fn normalize_rejects_all_empty_tree() {
        let t = read_one("(S (NP (-NONE- *)))");
        assert!(normalize(&t, NormalizeOptions::default()).is_err());
    }

    #[test]
    fn corpus_normalize_is_idempotent() {
        let text = "(S (NP-SBJ (DT the) (NN cat)) (VP (VB sleeps)))\n(S (INTJ (UH yes)))";
        let raw = read_trees(text).unwrap();
        assert!(corpus_is_raw(&raw));
        let once = normalize_corpus(&raw, NormalizeOptions::default()).unwrap();
        assert!(!corpus_is_raw(&once));
        let twice = normalize_corpus(&once, NormalizeOptions::default()).unwrap();
        assert_eq!(once.trees, twice.trees);
    }
}
