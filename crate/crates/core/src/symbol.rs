//! Structured category labels.
//!
//! A [`Symbol`] is a base label plus an ordered stack of annotation marks.
//! Transforms communicate exclusively through marks, never through string
//! concatenation, so the canonical text form can be parsed back exactly.
//!
//! Canonical text form, rendered base-first then marks in stack order:
//!
//! * `NP-DT-JJ` — base `NP` with a [`Mark::DelayedSiblings`] list `[DT, JJ]`
//!   (right-binarization composite)
//! * `DT+JJ+JJ` — base `DT` with a [`Mark::LeftBundle`] list `[JJ, JJ]`
//!   (left-binarization bundle; the bundle covers base plus list)
//! * `S/a` — base `S` with a [`Mark::Slash`] on `a` (left-corner category
//!   "S having seen a")
//! * `NP^S`, `NP~S` — parent and left-corner-ancestor annotations
//! * `S@` — an announce node for `S`
//!
//! The separator characters `- + ^ ~ / @` and `\` are escaped with `\` when
//! they occur inside a raw label, and once more per nesting level when a
//! symbol is embedded in another symbol's mark payload.

use std::fmt;

/// Reserved leaf token for the empty terminal.
pub const EPSILON_TOKEN: &str = "-NONE-";

/// Reserved base label for the implicit start symbol of induced grammars.
pub const ROOT_BASE: &str = "TOP";

const SEPARATORS: [char; 6] = ['-', '+', '^', '~', '/', '@'];

fn is_reserved(c: char) -> bool {
    c == '\\' || SEPARATORS.contains(&c)
}

/// One annotation on a symbol. Marks stack in the order the transforms that
/// produced them were applied.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mark {
    /// Left siblings already seen by a right-binarization composite.
    DelayedSiblings(Vec<Symbol>),
    /// The extra children grouped into a left-binarization bundle; the
    /// bundle covers the host symbol followed by this list.
    LeftBundle(Vec<Symbol>),
    /// Left-corner category: the host constituent has recognized this much.
    Slash(Box<Symbol>),
    /// Parent annotation (base label of the parent; `TOP` at the root).
    Parent(String),
    /// Left-corner-ancestor annotation (base label of the chain top).
    LeftCornerAncestor(String),
    /// Announce node marker; the host symbol is the announced category.
    Announce,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol {
    base: String,
    marks: Vec<Mark>,
}

impl Symbol {
    pub fn new(base: impl Into<String>) -> Self {
        Symbol { base: base.into(), marks: Vec::new() }
    }

    pub fn with_marks(base: impl Into<String>, marks: Vec<Mark>) -> Self {
        Symbol { base: base.into(), marks }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    pub fn marks(&self) -> &[Mark] {
        &self.marks
    }

    pub fn is_plain(&self) -> bool {
        self.marks.is_empty()
    }

    pub fn top_mark(&self) -> Option<&Mark> {
        self.marks.last()
    }

    /// A copy with one more mark on top of the stack.
    pub fn pushed(&self, mark: Mark) -> Symbol {
        let mut s = self.clone();
        s.marks.push(mark);
        s
    }

    /// A copy with the top mark removed.
    pub fn popped(&self) -> Symbol {
        let mut s = self.clone();
        s.marks.pop();
        s
    }

    /// Strips every `Parent` and `LeftCornerAncestor` mark, keeping the rest.
    pub fn without_annotations(&self) -> Symbol {
        let marks = self
            .marks
            .iter()
            .filter(|m| !matches!(m, Mark::Parent(_) | Mark::LeftCornerAncestor(_)))
            .cloned()
            .collect();
        Symbol { base: self.base.clone(), marks }
    }

    /// `other` extends `self` by exactly one `DelayedSiblings` mark; returns
    /// the seen-sibling list if so. This is the shape every right-binarization
    /// composite has relative to the node it was split from.
    pub fn delayed_extension_of<'a>(&self, other: &'a Symbol) -> Option<&'a [Symbol]> {
        if other.base != self.base || other.marks.len() != self.marks.len() + 1 {
            return None;
        }
        if other.marks[..self.marks.len()] != self.marks[..] {
            return None;
        }
        match other.marks.last() {
            Some(Mark::DelayedSiblings(seen)) => Some(seen),
            _ => None,
        }
    }

    /// Canonical text form.
    pub fn text(&self) -> String {
        let mut out = escape(&self.base);
        for mark in &self.marks {
            match mark {
                Mark::DelayedSiblings(list) => {
                    for s in list {
                        out.push('-');
                        out.push_str(&escape(&s.text()));
                    }
                }
                Mark::LeftBundle(list) => {
                    for s in list {
                        out.push('+');
                        out.push_str(&escape(&s.text()));
                    }
                }
                Mark::Slash(seen) => {
                    out.push('/');
                    out.push_str(&escape(&seen.text()));
                }
                Mark::Parent(l) => {
                    out.push('^');
                    out.push_str(&escape(l));
                }
                Mark::LeftCornerAncestor(l) => {
                    out.push('~');
                    out.push_str(&escape(l));
                }
                Mark::Announce => out.push('@'),
            }
        }
        out
    }

    /// Parses the canonical text form. Total: tokens that do not scan as a
    /// marked symbol (empty head, empty payload segment) are taken verbatim
    /// as a raw base label, which is how unescaped treebank labels such as
    /// `-LRB-` or `NP-SBJ-1`-style gapping indices come in.
    pub fn parse(token: &str) -> Symbol {
        match parse_marked(token) {
            Some((base, marks)) => Symbol { base, marks },
            None => {
                if has_unescaped_separator(token) {
                    Symbol::new(token)
                } else {
                    Symbol::new(unescape(token))
                }
            }
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text())
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if is_reserved(c) {
            out.push('\\');
        }
        out.push(c);
    }
    out
}

/// Removes one escaping layer. A trailing lone backslash is kept as-is.
fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some(n) => out.push(n),
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

fn has_unescaped_separator(s: &str) -> bool {
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            chars.next();
        } else if SEPARATORS.contains(&c) {
            return true;
        }
    }
    false
}

/// Splits `token` into a head and (separator, payload) segments at unescaped
/// separators.
fn split_segments(token: &str) -> (String, Vec<(char, String)>) {
    let mut head = String::new();
    let mut segments: Vec<(char, String)> = Vec::new();
    let mut chars = token.chars();
    while let Some(c) = chars.next() {
        let target = match segments.last_mut() {
            Some((_, seg)) => seg,
            None => &mut head,
        };
        if c == '\\' {
            target.push(c);
            if let Some(n) = chars.next() {
                target.push(n);
            }
        } else if SEPARATORS.contains(&c) {
            segments.push((c, String::new()));
        } else {
            target.push(c);
        }
    }
    (head, segments)
}

fn parse_marked(token: &str) -> Option<(String, Vec<Mark>)> {
    let (head, segments) = split_segments(token);
    if head.is_empty() {
        return None;
    }
    let mut marks: Vec<Mark> = Vec::new();
    for (sep, seg) in segments {
        if sep == '@' {
            if !seg.is_empty() {
                return None;
            }
            marks.push(Mark::Announce);
            continue;
        }
        if seg.is_empty() {
            return None;
        }
        let payload = unescape(&seg);
        match sep {
            '-' => {
                let sym = Symbol::parse(&payload);
                // consecutive segments with the same separator belong to
                // the same mark application
                if let Some(Mark::DelayedSiblings(list)) = marks.last_mut() {
                    list.push(sym);
                } else {
                    marks.push(Mark::DelayedSiblings(vec![sym]));
                }
            }
            '+' => {
                let sym = Symbol::parse(&payload);
                if let Some(Mark::LeftBundle(list)) = marks.last_mut() {
                    list.push(sym);
                } else {
                    marks.push(Mark::LeftBundle(vec![sym]));
                }
            }
            '/' => marks.push(Mark::Slash(Box::new(Symbol::parse(&payload)))),
            '^' => marks.push(Mark::Parent(payload)),
            '~' => marks.push(Mark::LeftCornerAncestor(payload)),
            _ => unreachable!(),
        }
    }
    Some((unescape(&head), marks))
}
