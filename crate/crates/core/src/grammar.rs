//! PCFG induction by relative frequency, and the grammar file format.
//!
//! Induced grammars carry an implicit start nonterminal `TOP` whose rules
//! `TOP -> R` hold the observed root distribution; `TOP` never occurs
//! inside trees or on parser stacks, and parse trees never contain it.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::symbol::{Symbol, ROOT_BASE};
use crate::treebank::{Corpus, Tree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymId(pub u32);

pub type RuleId = usize;

#[derive(Debug, Clone, Default)]
pub struct SymbolTable {
    syms: Vec<Symbol>,
    texts: Vec<String>,
    index: HashMap<Symbol, SymId>,
}

impl SymbolTable {
    pub fn intern(&mut self, sym: &Symbol) -> SymId {
        if let Some(&id) = self.index.get(sym) {
            return id;
        }
        let id = SymId(self.syms.len() as u32);
        self.syms.push(sym.clone());
        self.texts.push(sym.text());
        self.index.insert(sym.clone(), id);
        id
    }

    pub fn lookup(&self, sym: &Symbol) -> Option<SymId> {
        self.index.get(sym).copied()
    }

    pub fn symbol(&self, id: SymId) -> &Symbol {
        &self.syms[id.0 as usize]
    }

    pub fn text(&self, id: SymId) -> &str {
        &self.texts[id.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.syms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.syms.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Rule {
    pub lhs: SymId,
    pub rhs: Vec<SymId>,
    pub prob: f64,
    pub log_prob: f64,
}

#[derive(Debug, Clone)]
pub struct Pcfg {
    pub symbols: SymbolTable,
    /// Rules in a stable order; a rule's index is its id. `TOP` rules are
    /// the root distribution.
    pub rules: Vec<Rule>,
    /// Per left-hand side, rule ids sorted by descending probability then
    /// id: the candidate order the parser uses.
    by_lhs: HashMap<SymId, Vec<RuleId>>,
    pub top: SymId,
    terminal: Vec<bool>,
}

impl Pcfg {
    pub fn rules_for(&self, lhs: SymId) -> &[RuleId] {
        self.by_lhs.get(&lhs).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn root_rules(&self) -> &[RuleId] {
        self.rules_for(self.top)
    }

    pub fn is_terminal(&self, id: SymId) -> bool {
        self.terminal.get(id.0 as usize).copied().unwrap_or(false)
    }

    pub fn is_nonterminal(&self, id: SymId) -> bool {
        !self.is_terminal(id) && self.by_lhs.contains_key(&id)
    }

    pub fn terminal_ids(&self) -> impl Iterator<Item = SymId> + '_ {
        self.terminal
            .iter()
            .enumerate()
            .filter(|(_, &t)| t)
            .map(|(i, _)| SymId(i as u32))
    }

    pub fn nonterminal_ids(&self) -> impl Iterator<Item = SymId> + '_ {
        self.by_lhs.keys().copied()
    }

    pub fn rule_count(&self) -> usize {
        self.rules.len()
    }

    /// Rule count excluding the implicit root distribution, which is what
    /// grammar-size comparisons between transforms should use.
    pub fn rule_count_without_root(&self) -> usize {
        self.rules.len() - self.root_rules().len()
    }

    /// Finds the rule id for an (lhs, rhs) pair.
    pub fn find_rule(&self, lhs: SymId, rhs: &[SymId]) -> Option<RuleId> {
        self.rules_for(lhs).iter().copied().find(|&r| self.rules[r].rhs == rhs)
    }

    /// Per-lhs probabilities must sum to one; every rhs symbol must be a
    /// known terminal or nonterminal.
    pub fn validate(&self) -> Result<()> {
        for (lhs, ids) in &self.by_lhs {
            let sum: f64 = ids.iter().map(|&r| self.rules[r].prob).sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Induce(format!(
                    "probabilities for '{}' sum to {}, not 1",
                    self.symbols.text(*lhs),
                    sum
                )));
            }
        }
        for rule in &self.rules {
            if !(rule.prob > 0.0 && rule.prob <= 1.0) {
                return Err(Error::Induce(format!(
                    "rule probability {} out of (0,1]",
                    rule.prob
                )));
            }
            for &s in &rule.rhs {
                if !self.is_terminal(s) && !self.by_lhs.contains_key(&s) {
                    return Err(Error::Induce(format!(
                        "rhs symbol '{}' is neither terminal nor expandable",
                        self.symbols.text(s)
                    )));
                }
            }
        }
        Ok(())
    }

    /// One rule per line, `prob lhs -> rhs...`; reading the output back
    /// reproduces the grammar exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for rule in &self.rules {
            let _ = write!(out, "{} {} ->", rule.prob, self.symbols.text(rule.lhs));
            for &s in &rule.rhs {
                let _ = write!(out, " {}", self.symbols.text(s));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Pcfg> {
        let mut symbols = SymbolTable::default();
        let mut raw: Vec<(SymId, Vec<SymId>, f64)> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let err = |msg: &str| Error::GrammarFile { line: i + 1, msg: msg.into() };
            let prob: f64 = parts
                .next()
                .ok_or_else(|| err("missing probability"))?
                .parse()
                .map_err(|_| err("unreadable probability"))?;
            let lhs = parts.next().ok_or_else(|| err("missing left-hand side"))?;
            if parts.next() != Some("->") {
                return Err(err("expected '->' after the left-hand side"));
            }
            let lhs = symbols.intern(&Symbol::parse(lhs));
            let rhs: Vec<SymId> =
                parts.map(|tok| symbols.intern(&Symbol::parse(tok))).collect();
            if !(prob > 0.0 && prob <= 1.0) {
                return Err(err("probability out of (0,1]"));
            }
            raw.push((lhs, rhs, prob));
        }
        let top_sym = Symbol::new(ROOT_BASE);
        let top = symbols
            .lookup(&top_sym)
            .ok_or_else(|| Error::Induce("grammar has no TOP start rules".into()))?;
        let lhs_set: std::collections::HashSet<SymId> =
            raw.iter().map(|(l, _, _)| *l).collect();
        let mut terminal = vec![false; symbols.len()];
        for (_, rhs, _) in &raw {
            for &s in rhs {
                if s == top {
                    return Err(Error::Induce("TOP may not occur on a right-hand side".into()));
                }
                if !lhs_set.contains(&s) {
                    terminal[s.0 as usize] = true;
                }
            }
        }
        let rules: Vec<Rule> = raw
            .into_iter()
            .map(|(lhs, rhs, prob)| Rule { lhs, rhs, prob, log_prob: prob.ln() })
            .collect();
        let by_lhs = index_by_lhs(&rules);
        let g = Pcfg { symbols, rules, by_lhs, top, terminal };
        g.validate()?;
        Ok(g)
    }
}

fn index_by_lhs(rules: &[Rule]) -> HashMap<SymId, Vec<RuleId>> {
    let mut by_lhs: HashMap<SymId, Vec<RuleId>> = HashMap::new();
    for (i, rule) in rules.iter().enumerate() {
        by_lhs.entry(rule.lhs).or_default().push(i);
    }
    for ids in by_lhs.values_mut() {
        ids.sort_by(|&a, &b| {
            rules[b]
                .prob
                .partial_cmp(&rules[a].prob)
                .unwrap()
                .then(a.cmp(&b))
        });
    }
    by_lhs
}

/// Observed rules keyed by canonical text (for a stable order), carrying
/// the symbols and the count.
type RuleCounts = BTreeMap<(String, Vec<String>), (Symbol, Vec<Symbol>, u64)>;

/// Relative-frequency estimation: P(C -> γ) = count(C -> γ) / count(C),
/// with the root distribution read off the observed tree roots.
pub fn induce_pcfg(corpus: &Corpus) -> Result<Pcfg> {
    if corpus.trees.is_empty() {
        return Err(Error::Induce("empty corpus".into()));
    }
    let mut rule_counts: RuleCounts = BTreeMap::new();
    let mut lhs_counts: HashMap<String, u64> = HashMap::new();
    let mut terminals: BTreeMap<String, Symbol> = BTreeMap::new();

    fn visit(
        t: &Tree,
        rule_counts: &mut RuleCounts,
        lhs_counts: &mut HashMap<String, u64>,
        terminals: &mut BTreeMap<String, Symbol>,
    ) {
        match t {
            Tree::Leaf(s) => {
                terminals.entry(s.text()).or_insert_with(|| s.clone());
            }
            Tree::Epsilon => {}
            Tree::Node { label, children } => {
                let rhs: Vec<Symbol> = children
                    .iter()
                    .filter_map(|c| c.symbol().cloned())
                    .collect();
                let key = (label.text(), rhs.iter().map(Symbol::text).collect());
                rule_counts
                    .entry(key)
                    .or_insert_with(|| (label.clone(), rhs, 0))
                    .2 += 1;
                *lhs_counts.entry(label.text()).or_default() += 1;
                for c in children {
                    visit(c, rule_counts, lhs_counts, terminals);
                }
            }
        }
    }

    let mut root_counts: BTreeMap<String, (Symbol, u64)> = BTreeMap::new();
    for t in &corpus.trees {
        let root = t
            .symbol()
            .ok_or_else(|| Error::Induce("corpus contains a bare empty-leaf tree".into()))?;
        root_counts.entry(root.text()).or_insert_with(|| (root.clone(), 0)).1 += 1;
        visit(t, &mut rule_counts, &mut lhs_counts, &mut terminals);
    }

    let top_sym = Symbol::new(ROOT_BASE);
    if lhs_counts.contains_key(ROOT_BASE) || terminals.contains_key(ROOT_BASE) {
        return Err(Error::Induce(
            "corpus uses the reserved label TOP; strip or rename it before induction".into(),
        ));
    }
    for text in terminals.keys() {
        if lhs_counts.contains_key(text) {
            return Err(Error::Induce(format!(
                "symbol '{}' occurs both as a terminal leaf and as a nonterminal node",
                text
            )));
        }
    }

    let mut symbols = SymbolTable::default();
    let top = symbols.intern(&top_sym);
    let mut rules: Vec<Rule> = Vec::with_capacity(root_counts.len() + rule_counts.len());
    let n_trees = corpus.trees.len() as u64;
    for (root, count) in root_counts.values() {
        let prob = *count as f64 / n_trees as f64;
        let rhs = vec![symbols.intern(root)];
        rules.push(Rule { lhs: top, rhs, prob, log_prob: prob.ln() });
    }
    for ((lhs_text, _), (lhs, rhs, count)) in &rule_counts {
        let prob = *count as f64 / lhs_counts[lhs_text] as f64;
        let lhs = symbols.intern(lhs);
        let rhs = rhs.iter().map(|s| symbols.intern(s)).collect();
        rules.push(Rule { lhs, rhs, prob, log_prob: prob.ln() });
    }
    for sym in terminals.values() {
        symbols.intern(sym);
    }
    let mut terminal = vec![false; symbols.len()];
    for sym in terminals.values() {
        terminal[symbols.lookup(sym).unwrap().0 as usize] = true;
    }

    let by_lhs = index_by_lhs(&rules);
    let g = Pcfg { symbols, rules, by_lhs, top, terminal };
    g.validate()?;
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::read_trees;

    fn corpus(s: &str) -> Corpus {
        read_trees(s).unwrap()
    }

    fn prob_of(g: &Pcfg, lhs: &str, rhs: &[&str]) -> f64 {
        let lhs = g.symbols.lookup(&Symbol::parse(lhs)).unwrap();
        let rhs: Vec<SymId> =
            rhs.iter().map(|t| g.symbols.lookup(&Symbol::parse(t)).unwrap()).collect();
        let id = g.find_rule(lhs, &rhs).unwrap();
        g.rules[id].prob
    }

    #[test]
    fn relative_frequencies() {
        let c = corpus("(S (A a) (A a)) (S (A a) (B b))");
        let g = induce_pcfg(&c).unwrap();
        assert_eq!(prob_of(&g, "S", &["A", "A"]), 0.5);
        assert_eq!(prob_of(&g, "S", &["A", "B"]), 0.5);
        assert_eq!(prob_of(&g, "A", &["a"]), 1.0);
        assert_eq!(prob_of(&g, "B", &["b"]), 1.0);
        assert_eq!(prob_of(&g, "TOP", &["S"]), 1.0);
    }

    #[test]
    fn single_tree_gives_unit_probabilities() {
        let g = induce_pcfg(&corpus("(S (A a) (B b))")).unwrap();
        for rule in &g.rules {
            assert_eq!(rule.prob, 1.0);
        }
    }

    #[test]
    fn per_lhs_sums_are_one() {
        let c = corpus(
            "(S (A a) (A a)) (S (A a) (B b)) (S (B b) (A (C c))) (A (C c) (C c))",
        );
        let g = induce_pcfg(&c).unwrap();
        g.validate().unwrap();
    }

    #[test]
    fn epsilon_children_become_empty_rules() {
        let c = corpus("(X (Y y) (X-Y -NONE-))");
        let g = induce_pcfg(&c).unwrap();
        let lhs = g.symbols.lookup(&Symbol::parse("X-Y")).unwrap();
        let id = g.find_rule(lhs, &[]).unwrap();
        assert_eq!(g.rules[id].prob, 1.0);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(induce_pcfg(&Corpus::default()).is_err());
    }

    #[test]
    fn grammar_text_roundtrips() {
        let c = corpus("(S (A a) (A a)) (S (A a) (B b)) (S (B b) (B b))");
        let g = induce_pcfg(&c).unwrap();
        let text = g.to_text();
        let g2 = Pcfg::from_text(&text).unwrap();
        assert_eq!(g2.to_text(), text);
        assert_eq!(g2.rule_count(), g.rule_count());
    }

    #[test]
    fn candidate_order_is_prob_then_id() {
        let c = corpus("(S (A a) (A a)) (S (A a) (B b)) (S (B b) (B b)) (S (B b) (B b))");
        let g = induce_pcfg(&c).unwrap();
        let s = g.symbols.lookup(&Symbol::parse("S")).unwrap();
        let probs: Vec<f64> = g.rules_for(s).iter().map(|&r| g.rules[r].prob).collect();
        let mut sorted = probs.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert_eq!(probs, sorted);
    }
}
