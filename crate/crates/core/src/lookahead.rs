//! Look-ahead probabilities and the rule reachability filter.
//!
//! Two empirically observed conditional probabilities per nonterminal `C`:
//! the chance its yield starts with terminal `ω`, and the chance its yield
//! is empty. The look-ahead probability of a whole stack follows the
//! recursion
//!
//! ```text
//! lap([C, rest...], ω) = first(C, ω) + empty(C) * lap(rest, ω)
//! ```
//!
//! with `lap([], end) = 1` and `lap([], ω) = 0`: the end marker is reached
//! exactly when everything remaining can be empty. Alongside the empirical
//! probabilities the table carries structural FIRST sets and nullability,
//! computed from the grammar by fixed point; those drive the "could this
//! rule eventually reach the look-ahead" expansion filter, which is kept
//! separate from the probabilistic ranking.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grammar::{Pcfg, RuleId, SymId};
use crate::symbol::Symbol;
use crate::treebank::{Corpus, Tree};

/// The parser's look-ahead item: a terminal or the end of the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Lookahead {
    Term(SymId),
    End,
}

#[derive(Debug, Clone)]
pub struct LookaheadTable {
    first: HashMap<SymId, HashMap<SymId, f64>>,
    empty: HashMap<SymId, f64>,
    structural_first: HashMap<SymId, HashSet<SymId>>,
    nullable: HashSet<SymId>,
    terminals: HashSet<SymId>,
}

impl LookaheadTable {
    /// Empirical first-terminal probability P(C =>* ω...), zero when the
    /// pair was never observed.
    pub fn first_prob(&self, c: SymId, omega: SymId) -> f64 {
        self.first.get(&c).and_then(|m| m.get(&omega)).copied().unwrap_or(0.0)
    }

    /// Empirical empty-yield probability P(C =>* ε).
    pub fn empty_prob(&self, c: SymId) -> f64 {
        self.empty.get(&c).copied().unwrap_or(0.0)
    }

    pub fn is_terminal(&self, s: SymId) -> bool {
        self.terminals.contains(&s)
    }

    pub fn is_nullable(&self, s: SymId) -> bool {
        self.nullable.contains(&s)
    }

    pub fn structural_first(&self, s: SymId) -> Option<&HashSet<SymId>> {
        self.structural_first.get(&s)
    }

    fn first_with_floor(&self, c: SymId, omega: SymId, floor: f64) -> f64 {
        let p = self.first_prob(c, omega);
        // unseen pairs get the configured floor instead of a hard zero
        if p > 0.0 {
            p
        } else {
            floor
        }
    }

    /// The look-ahead probability of a stack, per the recursion above.
    /// `stack` iterates from the top down.
    pub fn lap<I>(&self, stack: I, omega: Lookahead, floor: f64) -> f64
    where
        I: IntoIterator<Item = SymId>,
    {
        let mut iter = stack.into_iter();
        self.lap_rec(&mut iter, omega, floor).clamp(0.0, 1.0)
    }

    fn lap_rec<I>(&self, stack: &mut I, omega: Lookahead, floor: f64) -> f64
    where
        I: Iterator<Item = SymId>,
    {
        match stack.next() {
            None => match omega {
                Lookahead::End => 1.0,
                Lookahead::Term(_) => 0.0,
            },
            Some(top) if self.is_terminal(top) => match omega {
                Lookahead::Term(w) if w == top => 1.0,
                _ => 0.0,
            },
            Some(top) => {
                let f = match omega {
                    Lookahead::Term(w) => self.first_with_floor(top, w, floor),
                    Lookahead::End => 0.0,
                };
                let e = self.empty_prob(top);
                if e == 0.0 {
                    f
                } else {
                    f + e * self.lap_rec(stack, omega, floor)
                }
            }
        }
    }

    /// Spec-level entry point over symbols; errors on symbols the table
    /// does not know.
    pub fn lap_symbols(
        &self,
        g: &Pcfg,
        stack: &[Symbol],
        omega: Option<&Symbol>,
        floor: f64,
    ) -> Result<f64> {
        let ids: Vec<SymId> = stack
            .iter()
            .map(|s| {
                g.symbols
                    .lookup(s)
                    .ok_or_else(|| Error::Lookahead(format!("unknown stack symbol '{}'", s)))
            })
            .collect::<Result<_>>()?;
        let omega = match omega {
            None => Lookahead::End,
            Some(s) => Lookahead::Term(
                g.symbols
                    .lookup(s)
                    .ok_or_else(|| Error::Lookahead(format!("unknown look-ahead '{}'", s)))?,
            ),
        };
        Ok(self.lap(ids, omega, floor))
    }

    /// True when the structural FIRST of the sequence (through nullable
    /// prefixes) contains the look-ahead; reaching the end of the sequence
    /// matches the end marker.
    pub fn seq_first_contains<I>(&self, seq: I, omega: Lookahead) -> bool
    where
        I: IntoIterator<Item = SymId>,
    {
        for s in seq {
            if self.is_terminal(s) {
                return omega == Lookahead::Term(s);
            }
            if let Lookahead::Term(w) = omega {
                if self.structural_first.get(&s).is_some_and(|set| set.contains(&w)) {
                    return true;
                }
            }
            if !self.nullable.contains(&s) {
                return false;
            }
        }
        omega == Lookahead::End
    }

    /// Text form: `F C ω p` lines for observed first-terminal entries and
    /// `E C p` lines for nonzero empty-yield entries.
    pub fn to_text(&self, g: &Pcfg) -> String {
        let mut lines: Vec<String> = Vec::new();
        for (&c, entries) in &self.first {
            for (&w, &p) in entries {
                if p > 0.0 {
                    lines.push(format!("F {} {} {}", g.symbols.text(c), g.symbols.text(w), p));
                }
            }
        }
        let f_end = lines.len();
        for (&c, &p) in &self.empty {
            if p > 0.0 {
                lines.push(format!("E {} {}", g.symbols.text(c), p));
            }
        }
        lines[..f_end].sort();
        lines[f_end..].sort();
        let mut out = String::new();
        for l in lines {
            let _ = writeln!(out, "{}", l);
        }
        out
    }

    pub fn from_text(text: &str, g: &Pcfg) -> Result<LookaheadTable> {
        let mut first: HashMap<SymId, HashMap<SymId, f64>> = HashMap::new();
        let mut empty: HashMap<SymId, f64> = HashMap::new();
        let resolve = |tok: &str, line: usize| {
            g.symbols.lookup(&Symbol::parse(tok)).ok_or_else(|| Error::GrammarFile {
                line,
                msg: format!("symbol '{}' is not in the grammar", tok),
            })
        };
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let err = |msg: &str| Error::GrammarFile { line: i + 1, msg: msg.into() };
            match parts.as_slice() {
                ["F", c, w, p] => {
                    let p: f64 = p.parse().map_err(|_| err("unreadable probability"))?;
                    first
                        .entry(resolve(c, i + 1)?)
                        .or_default()
                        .insert(resolve(w, i + 1)?, p);
                }
                ["E", c, p] => {
                    let p: f64 = p.parse().map_err(|_| err("unreadable probability"))?;
                    empty.insert(resolve(c, i + 1)?, p);
                }
                _ => return Err(err("expected 'F C ω p' or 'E C p'")),
            }
        }
        let table = LookaheadTable::assemble(first, empty, g);
        table.validate(g)?;
        Ok(table)
    }

    /// Builds a table from explicit probability maps; structural FIRST
    /// sets and nullability are derived from the grammar. No mass check is
    /// applied, so this also serves synthetic tables in tests.
    pub fn from_parts(
        first: HashMap<SymId, HashMap<SymId, f64>>,
        empty: HashMap<SymId, f64>,
        g: &Pcfg,
    ) -> LookaheadTable {
        LookaheadTable::assemble(first, empty, g)
    }

    fn assemble(
        first: HashMap<SymId, HashMap<SymId, f64>>,
        empty: HashMap<SymId, f64>,
        g: &Pcfg,
    ) -> LookaheadTable {
        let (structural_first, nullable) = structural_closure(g);
        LookaheadTable {
            first,
            empty,
            structural_first,
            nullable,
            terminals: g.terminal_ids().collect(),
        }
    }

    /// Per category, first-terminal mass plus empty mass accounts for
    /// everything.
    pub fn validate(&self, g: &Pcfg) -> Result<()> {
        for c in g.nonterminal_ids() {
            if c == g.top {
                continue;
            }
            let f_sum: f64 = self.first.get(&c).map(|m| m.values().sum()).unwrap_or(0.0);
            let total = f_sum + self.empty_prob(c);
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::Lookahead(format!(
                    "first+empty mass for '{}' is {}, not 1",
                    g.symbols.text(c),
                    total
                )));
            }
        }
        Ok(())
    }
}

/// Estimates the table from the same corpus the grammar was induced from:
/// per nonterminal node, count which terminal its yield starts with, or
/// that its yield is empty.
pub fn estimate_lookahead(corpus: &Corpus, g: &Pcfg) -> Result<LookaheadTable> {
    if corpus.trees.is_empty() {
        return Err(Error::Lookahead("empty corpus".into()));
    }
    let mut first: HashMap<SymId, HashMap<SymId, f64>> = HashMap::new();
    let mut empty: HashMap<SymId, f64> = HashMap::new();
    let mut totals: HashMap<SymId, u64> = HashMap::new();

    fn visit(
        t: &Tree,
        g: &Pcfg,
        first: &mut HashMap<SymId, HashMap<SymId, f64>>,
        empty: &mut HashMap<SymId, f64>,
        totals: &mut HashMap<SymId, u64>,
    ) -> Result<Option<SymId>> {
        match t {
            Tree::Leaf(s) => {
                let id = g.symbols.lookup(s).ok_or_else(|| {
                    Error::Lookahead(format!("corpus terminal '{}' missing from grammar", s))
                })?;
                Ok(Some(id))
            }
            Tree::Epsilon => Ok(None),
            Tree::Node { label, children } => {
                let c = g.symbols.lookup(label).ok_or_else(|| {
                    Error::Lookahead(format!("corpus symbol '{}' missing from grammar", label))
                })?;
                let mut leftmost: Option<SymId> = None;
                for child in children {
                    let f = visit(child, g, first, empty, totals)?;
                    if leftmost.is_none() {
                        leftmost = f;
                    }
                }
                *totals.entry(c).or_default() += 1;
                match leftmost {
                    Some(w) => *first.entry(c).or_default().entry(w).or_default() += 1.0,
                    None => *empty.entry(c).or_default() += 1.0,
                }
                Ok(leftmost)
            }
        }
    }

    for t in &corpus.trees {
        visit(t, g, &mut first, &mut empty, &mut totals)?;
    }
    for (c, entries) in &mut first {
        for p in entries.values_mut() {
            *p /= totals[c] as f64;
        }
    }
    for (c, p) in &mut empty {
        *p /= totals[c] as f64;
    }
    let table = LookaheadTable::assemble(first, empty, g);
    table.validate(g)?;
    Ok(table)
}

/// Structural FIRST sets and nullability by fixed-point closure over the
/// grammar.
fn structural_closure(g: &Pcfg) -> (HashMap<SymId, HashSet<SymId>>, HashSet<SymId>) {
    let mut nullable: HashSet<SymId> = HashSet::new();
    loop {
        let mut changed = false;
        for rule in &g.rules {
            if !nullable.contains(&rule.lhs) && rule.rhs.iter().all(|s| nullable.contains(s)) {
                nullable.insert(rule.lhs);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut first: HashMap<SymId, HashSet<SymId>> = HashMap::new();
    for c in g.nonterminal_ids() {
        first.entry(c).or_default();
    }
    loop {
        let mut changed = false;
        for rule in &g.rules {
            let mut add: Vec<SymId> = Vec::new();
            for &s in &rule.rhs {
                if g.is_terminal(s) {
                    add.push(s);
                    break;
                }
                if let Some(set) = first.get(&s) {
                    add.extend(set.iter().copied());
                }
                if !nullable.contains(&s) {
                    break;
                }
            }
            let set = first.entry(rule.lhs).or_default();
            for s in add {
                changed |= set.insert(s);
            }
        }
        if !changed {
            break;
        }
    }
    (first, nullable)
}

/// Exactly those rules `C -> γ` whose expansion could eventually reach the
/// look-ahead: the structural FIRST of `γ` followed by the rest of the
/// stack contains it. Order: descending probability, then rule id.
pub fn candidate_rules<R>(
    g: &Pcfg,
    table: &LookaheadTable,
    c: SymId,
    omega: Lookahead,
    rest: R,
) -> Vec<RuleId>
where
    R: Iterator<Item = SymId> + Clone,
{
    g.rules_for(c)
        .iter()
        .copied()
        .filter(|&rid| {
            table.seq_first_contains(
                g.rules[rid].rhs.iter().copied().chain(rest.clone()),
                omega,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::induce_pcfg;
    use crate::treebank::read_trees;

    fn setup(s: &str) -> (Pcfg, LookaheadTable) {
        let c = read_trees(s).unwrap();
        let g = induce_pcfg(&c).unwrap();
        let t = estimate_lookahead(&c, &g).unwrap();
        (g, t)
    }

    fn id(g: &Pcfg, s: &str) -> SymId {
        g.symbols.lookup(&Symbol::parse(s)).unwrap()
    }

    #[test]
    fn counts_first_terminals() {
        let (g, t) = setup("(S (A a) (A a)) (S (A a) (B b))");
        assert_eq!(t.first_prob(id(&g, "S"), id(&g, "a")), 1.0);
        assert_eq!(t.empty_prob(id(&g, "S")), 0.0);
        assert_eq!(t.first_prob(id(&g, "B"), id(&g, "b")), 1.0);
    }

    #[test]
    fn nullary_categories_are_always_empty() {
        let (g, t) = setup(
            "(NP DT (NP-DT JJ (NP-DT-JJ JJ (NP-DT-JJ-JJ NN (NP-DT-JJ-JJ-NN -NONE-)))))",
        );
        assert_eq!(t.empty_prob(id(&g, "NP-DT-JJ-JJ-NN")), 1.0);
        assert!(t.is_nullable(id(&g, "NP-DT-JJ-JJ-NN")));
        assert!(!t.is_nullable(id(&g, "NP-DT-JJ-JJ")));
    }

    #[test]
    fn lap_recursion_spec_case() {
        // stack [A, B] with first(A,ω)=0.2, empty(A)=0.5, first(B,ω)=0.4
        let (g, _) = setup("(S (A a) (B b))");
        let mut first = HashMap::new();
        let mut m = HashMap::new();
        m.insert(id(&g, "b"), 0.2);
        first.insert(id(&g, "A"), m);
        let mut m = HashMap::new();
        m.insert(id(&g, "b"), 0.4);
        first.insert(id(&g, "B"), m);
        let mut empty = HashMap::new();
        empty.insert(id(&g, "A"), 0.5);
        let table = LookaheadTable::assemble(first, empty, &g);
        let stack = vec![id(&g, "A"), id(&g, "B")];
        let lap = table.lap(stack, Lookahead::Term(id(&g, "b")), 0.0);
        assert_eq!(lap, 0.2 + 0.5 * 0.4);
    }

    #[test]
    fn lap_base_cases() {
        let (g, t) = setup("(S (A a) (B b))");
        assert_eq!(t.lap([], Lookahead::End, 0.0), 1.0);
        assert_eq!(t.lap([], Lookahead::Term(id(&g, "a")), 0.0), 0.0);
        let a = id(&g, "a");
        assert_eq!(t.lap([a], Lookahead::Term(a), 0.0), 1.0);
        assert_eq!(t.lap([a], Lookahead::Term(id(&g, "b")), 0.0), 0.0);
        assert_eq!(t.lap([a], Lookahead::End, 0.0), 0.0);
    }

    #[test]
    fn candidate_filter_uses_first_sets() {
        let (g, t) = setup("(NP (DT d) (NN n)) (NP (NN n))");
        let np = id(&g, "NP");
        let dt = id(&g, "DT");
        let cands = candidate_rules(&g, &t, np, Lookahead::Term(id(&g, "d")), std::iter::empty());
        assert_eq!(cands.len(), 1);
        assert_eq!(g.rules[cands[0]].rhs[0], dt);
        // nothing reaches 'x'
        let (g2, t2) = setup("(NP (DT d) (NN n)) (X (Y x))");
        let np2 = id(&g2, "NP");
        let cands =
            candidate_rules(&g2, &t2, np2, Lookahead::Term(id(&g2, "x")), std::iter::empty());
        assert!(cands.is_empty());
    }

    #[test]
    fn nullable_prefix_reaches_into_stack_rest() {
        // the saturated composite can be empty, so the look-ahead passes
        // through it to the rest of the stack
        let (g, t) = setup("(S (NP DT (NP-DT -NONE-)) (VP VB)) (NP DT (NP-DT -NONE-))");
        let comp = id(&g, "NP-DT");
        let vb = id(&g, "VB");
        let rest = [id(&g, "VP")];
        let cands =
            candidate_rules(&g, &t, comp, Lookahead::Term(vb), rest.iter().copied());
        assert_eq!(cands.len(), 1, "empty rule passes via rest-of-stack reachability");
        let none = candidate_rules(&g, &t, comp, Lookahead::Term(vb), std::iter::empty());
        assert!(none.is_empty());
    }

    #[test]
    fn floor_replaces_unseen_zeros_only() {
        let (g, t) = setup("(S (A a) (B b))");
        let s = id(&g, "S");
        let b = id(&g, "b");
        let a = id(&g, "a");
        // unseen pair: floor applies
        assert_eq!(t.lap([s], Lookahead::Term(b), 0.01), 0.01);
        // seen pair: the estimate stands
        assert_eq!(t.lap([s], Lookahead::Term(a), 0.01), 1.0);
        // no-empty category: lap([C], ω) is exactly first_prob(C, ω)
        assert_eq!(t.empty_prob(s), 0.0);
        assert_eq!(t.lap([s], Lookahead::Term(a), 0.0), t.first_prob(s, a));
    }

    #[test]
    fn table_text_roundtrips() {
        let (g, t) = setup("(S (A a) (A a)) (S (A a) (B b)) (S (B b) (A a))");
        let text = t.to_text(&g);
        let t2 = LookaheadTable::from_text(&text, &g).unwrap();
        assert_eq!(t2.to_text(&g), text);
    }
}
