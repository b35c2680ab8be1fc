//! The incremental top-down parser: best-first expansion over fully
//! connected left-context analyses, with one terminal of look-ahead.
//!
//! Analyses live on a pending heap ranked by figure of merit (derivation
//! probability times look-ahead probability). The top analysis is popped
//! and its stack top expanded with every rule that could reach the
//! look-ahead; analyses whose top matches the look-ahead move to a success
//! heap ranked by plain derivation probability. A word ends when pending
//! drains or the best pending FOM falls below `α·β` times the best success
//! probability, `β` being the success count, so the beam narrows as
//! successes accumulate. The success heap then becomes the pending heap,
//! FOMs are recomputed against the next look-ahead, and the look-ahead
//! advances. A per-word bound on pending-heap pushes guards against
//! left-recursive non-termination.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::rc::Rc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grammar::{Pcfg, RuleId, SymId};
use crate::lookahead::{candidate_rules, Lookahead, LookaheadTable};
use crate::symbol::Symbol;
use crate::treebank::Tree;

#[derive(Debug, Clone, Copy)]
pub struct BeamConfig {
    /// Base beam factor α; the beam threshold is α·β times the best
    /// success probability.
    pub base_beam_factor: f64,
    /// Per-word bound on analyses pushed onto the pending heap; exceeding
    /// it with an empty success heap fails the parse.
    pub max_states_per_word: u64,
    /// Optional floor for unseen look-ahead pairs (default 0: hard zeros).
    pub lookahead_floor: f64,
}

impl Default for BeamConfig {
    fn default() -> Self {
        BeamConfig {
            base_beam_factor: 1e-4,
            max_states_per_word: 100_000,
            lookahead_floor: 0.0,
        }
    }
}

impl BeamConfig {
    pub fn with_beam_factor(alpha: f64) -> Self {
        BeamConfig { base_beam_factor: alpha, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_beam_factor > 0.0 && self.base_beam_factor <= 1.0) {
            return Err(Error::Parser(format!(
                "base beam factor {} out of (0,1]",
                self.base_beam_factor
            )));
        }
        if self.max_states_per_word < 1 {
            return Err(Error::Parser("max states per word must be at least 1".into()));
        }
        if !(self.lookahead_floor >= 0.0 && self.lookahead_floor <= 1.0) {
            return Err(Error::Parser("look-ahead floor out of [0,1]".into()));
        }
        Ok(())
    }
}

/// Persistent stack node; successor analyses share their parents' tails.
struct StackNode {
    sym: SymId,
    below: Stack,
}

type Stack = Option<Rc<StackNode>>;

fn push(stack: &Stack, sym: SymId) -> Stack {
    Some(Rc::new(StackNode { sym, below: stack.clone() }))
}

fn stack_iter(stack: &Stack) -> impl Iterator<Item = SymId> + Clone + '_ {
    std::iter::successors(stack.as_deref(), |n| n.below.as_deref()).map(|n| n.sym)
}

struct HistNode {
    rule: RuleId,
    prev: Hist,
}

type Hist = Option<Rc<HistNode>>;

/// One search hypothesis: nodes left to expand, the leftmost derivation so
/// far, its log probability, and the figure of merit against the current
/// look-ahead.
struct Analysis {
    stack: Stack,
    hist: Hist,
    log_prob: f64,
    fom: f64,
    seq: u64,
}

impl Analysis {
    fn history(&self) -> Vec<RuleId> {
        let mut out: Vec<RuleId> =
            std::iter::successors(self.hist.as_deref(), |n| n.prev.as_deref())
                .map(|n| n.rule)
                .collect();
        out.reverse();
        out
    }
}

/// Pending-heap order: highest FOM first; on ties the earlier insertion
/// wins, which makes runs reproducible state-for-state.
struct Pending(Analysis);

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Pending {}
impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .fom
            .total_cmp(&other.0.fom)
            .then_with(|| other.0.seq.cmp(&self.0.seq))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseFailure {
    /// No analysis reached the success heap at some word.
    NoParse(String),
    /// The per-word state bound tripped with an empty success heap: the
    /// left-recursion guard.
    StateBoundExceeded(String),
}

impl fmt::Display for ParseFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseFailure::NoParse(msg) => write!(f, "no-parse: {}", msg),
            ParseFailure::StateBoundExceeded(msg) => write!(f, "state-bound-exceeded: {}", msg),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParseOutput {
    /// The parse in the transformed grammar space; present iff no failure.
    pub tree: Option<Tree>,
    pub probability: f64,
    pub log_probability: f64,
    /// Number of analyses pushed onto the pending heap (rule expansions
    /// considered, including the root seeds).
    pub states_considered: u64,
    pub failure: Option<ParseFailure>,
}

impl ParseOutput {
    fn failed(failure: ParseFailure, states: u64) -> ParseOutput {
        ParseOutput {
            tree: None,
            probability: 0.0,
            log_probability: f64::NEG_INFINITY,
            states_considered: states,
            failure: Some(failure),
        }
    }

    pub fn is_parsed(&self) -> bool {
        self.failure.is_none()
    }
}

pub fn parse_sentence(
    g: &Pcfg,
    table: &LookaheadTable,
    input: &[Symbol],
    cfg: &BeamConfig,
) -> Result<ParseOutput> {
    cfg.validate()?;
    if input.is_empty() {
        return Err(Error::Parser("empty input sentence".into()));
    }
    let mut ids: Vec<SymId> = Vec::with_capacity(input.len());
    for s in input {
        match g.symbols.lookup(s) {
            Some(id) if g.is_terminal(id) => ids.push(id),
            _ => {
                return Ok(ParseOutput::failed(
                    ParseFailure::NoParse(format!("unknown terminal '{}'", s)),
                    0,
                ))
            }
        }
    }
    Ok(parse_ids(g, table, &ids, cfg))
}

fn parse_ids(g: &Pcfg, table: &LookaheadTable, input: &[SymId], cfg: &BeamConfig) -> ParseOutput {
    let n = input.len();
    let lookahead_at =
        |pos: usize| input.get(pos).map(|&w| Lookahead::Term(w)).unwrap_or(Lookahead::End);
    let alpha_ln = cfg.base_beam_factor.ln();

    let mut seq: u64 = 0;
    let mut states_total: u64 = 0;
    let mut pending: BinaryHeap<Pending> = BinaryHeap::new();
    let mut success: Vec<Analysis> = Vec::new();

    // seed with the root distribution; seeds count against word 0's budget
    let mut states_word: u64 = 0;
    let omega0 = lookahead_at(0);
    for &rid in g.root_rules() {
        let rule = &g.rules[rid];
        if !table.seq_first_contains(rule.rhs.iter().copied(), omega0) {
            continue;
        }
        let stack = push(&None, rule.rhs[0]);
        let fom = rule.log_prob
            + table.lap(stack_iter(&stack), omega0, cfg.lookahead_floor).ln();
        pending.push(Pending(Analysis {
            stack,
            hist: Some(Rc::new(HistNode { rule: rid, prev: None })),
            log_prob: rule.log_prob,
            fom,
            seq,
        }));
        seq += 1;
        states_word += 1;
        states_total += 1;
        if states_word > cfg.max_states_per_word {
            return ParseOutput::failed(
                ParseFailure::StateBoundExceeded(format!(
                    "{} root seeds exceed the per-word bound",
                    states_word
                )),
                states_total,
            );
        }
    }

    // positions 0..n consume terminals; position n consumes the end marker
    for pos in 0..=n {
        let omega = lookahead_at(pos);
        let mut best_success = f64::NEG_INFINITY;
        debug_assert!(success.is_empty());

        'word: loop {
            if !success.is_empty() {
                let threshold = alpha_ln + (success.len() as f64).ln() + best_success;
                match pending.peek() {
                    None => break 'word,
                    Some(best) if best.0.fom < threshold => break 'word,
                    _ => {}
                }
            } else if pending.is_empty() {
                break 'word;
            }
            let analysis = pending.pop().unwrap().0;
            let Some(top_node) = analysis.stack.clone() else {
                // empty stack: complete exactly at the end marker
                if omega == Lookahead::End {
                    if analysis.log_prob > best_success {
                        best_success = analysis.log_prob;
                    }
                    success.push(analysis);
                }
                continue;
            };
            let top = top_node.sym;
            if table.is_terminal(top) {
                if omega == Lookahead::Term(top) {
                    let matched = Analysis {
                        stack: top_node.below.clone(),
                        hist: analysis.hist,
                        log_prob: analysis.log_prob,
                        fom: analysis.fom,
                        seq: analysis.seq,
                    };
                    if matched.log_prob > best_success {
                        best_success = matched.log_prob;
                    }
                    success.push(matched);
                }
                continue;
            }
            // expand the top category with every rule that could reach the
            // look-ahead
            let rest = &top_node.below;
            for rid in candidate_rules(g, table, top, omega, stack_iter(rest)) {
                let rule = &g.rules[rid];
                let mut stack = rest.clone();
                for &s in rule.rhs.iter().rev() {
                    stack = push(&stack, s);
                }
                let log_prob = analysis.log_prob + rule.log_prob;
                let lap = table.lap(stack_iter(&stack), omega, cfg.lookahead_floor);
                let fom = log_prob + lap.ln();
                debug_assert!(fom <= log_prob + 1e-12);
                pending.push(Pending(Analysis {
                    stack,
                    hist: Some(Rc::new(HistNode { rule: rid, prev: analysis.hist.clone() })),
                    log_prob,
                    fom,
                    seq,
                }));
                seq += 1;
                states_word += 1;
                states_total += 1;
                if states_word > cfg.max_states_per_word {
                    if success.is_empty() {
                        return ParseOutput::failed(
                            ParseFailure::StateBoundExceeded(format!(
                                "{} states at word {} without a success",
                                states_word, pos
                            )),
                            states_total,
                        );
                    }
                    break 'word;
                }
            }
        }

        if success.is_empty() {
            let at = match omega {
                Lookahead::Term(w) => format!("word {} ('{}')", pos, g.symbols.text(w)),
                Lookahead::End => "the end of the input".to_string(),
            };
            return ParseOutput::failed(
                ParseFailure::NoParse(format!("no analysis survived at {}", at)),
                states_total,
            );
        }

        if pos < n {
            // the success heap becomes the pending heap; FOMs are
            // recomputed against the next look-ahead. These transfers are
            // not rule expansions and are not counted.
            let next = lookahead_at(pos + 1);
            pending.clear();
            states_word = 0;
            for mut a in success.drain(..) {
                a.fom = a.log_prob
                    + table.lap(stack_iter(&a.stack), next, cfg.lookahead_floor).ln();
                pending.push(Pending(a));
            }
        }
    }

    // all successes at the end marker have empty stacks; pick the highest
    // probability, breaking float-level ties by canonical tree text so the
    // choice matches the oracle's
    let best_lp = success.iter().map(|a| a.log_prob).fold(f64::NEG_INFINITY, f64::max);
    let window = 1e-12 * (1.0 + best_lp.abs());
    let mut best: Option<(Tree, f64)> = None;
    for a in &success {
        if a.log_prob < best_lp - window {
            continue;
        }
        let tree = replay_rules(g, &a.history()).expect("parser produced a valid derivation");
        let better = match &best {
            None => true,
            Some((bt, blp)) => {
                a.log_prob > *blp + window
                    || ((a.log_prob - *blp).abs() <= window
                        && tree.bracketed() < bt.bracketed())
            }
        };
        if better {
            best = Some((tree, a.log_prob));
        }
    }
    let (tree, log_prob) = best.expect("non-empty success heap");
    ParseOutput {
        tree: Some(tree),
        probability: log_prob.exp(),
        log_probability: log_prob,
        states_considered: states_total,
        failure: None,
    }
}

/// Rebuilds the tree a leftmost derivation describes. The first rule must
/// expand `TOP`; the `TOP` node itself is not materialized.
pub fn replay_history(g: &Pcfg, history: &[RuleId]) -> Result<Tree> {
    replay_rules(g, history)
}

fn replay_rules(g: &Pcfg, history: &[RuleId]) -> Result<Tree> {
    struct Frame {
        sym: SymId,
        children: Vec<Tree>,
        remaining: usize,
    }
    let mut rules = history.iter();
    let &first = rules
        .next()
        .ok_or_else(|| Error::Parser("empty derivation history".into()))?;
    let first_rule = g
        .rules
        .get(first)
        .ok_or_else(|| Error::Parser(format!("unknown rule id {}", first)))?;
    if first_rule.lhs != g.top || first_rule.rhs.len() != 1 {
        return Err(Error::Parser("derivation must start with a TOP rule".into()));
    }
    let mut stack: Vec<Frame> = vec![Frame { sym: g.top, children: Vec::new(), remaining: 1 }];
    let mut expect: Vec<SymId> = vec![first_rule.rhs[0]];

    fn complete(stack: &mut Vec<Frame>, g: &Pcfg, mut tree: Tree) -> Option<Tree> {
        loop {
            let frame = stack.last_mut().expect("frame for completed subtree");
            frame.children.push(tree);
            frame.remaining -= 1;
            if frame.remaining > 0 {
                return None;
            }
            let frame = stack.pop().unwrap();
            let node = Tree::Node {
                label: g.symbols.symbol(frame.sym).clone(),
                children: frame.children,
            };
            if stack.is_empty() {
                return Some(node);
            }
            tree = node;
        }
    }

    while let Some(next) = expect.pop() {
        if g.is_terminal(next) {
            let leaf = Tree::Leaf(g.symbols.symbol(next).clone());
            if let Some(done) = complete(&mut stack, g, leaf) {
                if rules.next().is_some() || !expect.is_empty() {
                    return Err(Error::Parser("history continues past a complete tree".into()));
                }
                return finish(done);
            }
            continue;
        }
        let &rid = rules
            .next()
            .ok_or_else(|| Error::Parser("history ends before the derivation is complete".into()))?;
        let rule = g
            .rules
            .get(rid)
            .ok_or_else(|| Error::Parser(format!("unknown rule id {}", rid)))?;
        if rule.lhs != next {
            return Err(Error::Parser(format!(
                "rule for '{}' applied where '{}' was expected",
                g.symbols.text(rule.lhs),
                g.symbols.text(next)
            )));
        }
        if rule.rhs.is_empty() {
            let node = Tree::Node {
                label: g.symbols.symbol(rule.lhs).clone(),
                children: vec![Tree::Epsilon],
            };
            if let Some(done) = complete(&mut stack, g, node) {
                if rules.next().is_some() || !expect.is_empty() {
                    return Err(Error::Parser("history continues past a complete tree".into()));
                }
                return finish(done);
            }
        } else {
            stack.push(Frame {
                sym: rule.lhs,
                children: Vec::new(),
                remaining: rule.rhs.len(),
            });
            for &s in rule.rhs.iter().rev() {
                expect.push(s);
            }
        }
    }
    Err(Error::Parser("history ends before the derivation is complete".into()))
}

fn finish(top_node: Tree) -> Result<Tree> {
    // unwrap the TOP frame
    match top_node {
        Tree::Node { mut children, .. } if children.len() == 1 => Ok(children.pop().unwrap()),
        _ => Err(Error::Parser("malformed TOP derivation".into())),
    }
}

/// Per-sentence outcome in a corpus run.
#[derive(Debug, Clone)]
pub enum CorpusItem {
    Done(ParseOutput),
    /// Longer than the configured maximum; not a candidate.
    Skipped { length: usize },
}

/// Parses each sentence independently (in parallel); sentences longer than
/// `max_length` are skipped and flagged rather than counted as failures.
pub fn parse_corpus(
    g: &Pcfg,
    table: &LookaheadTable,
    sentences: &[Vec<Symbol>],
    cfg: &BeamConfig,
    max_length: usize,
) -> Result<Vec<CorpusItem>> {
    cfg.validate()?;
    sentences
        .par_iter()
        .map(|sent| {
            if sent.len() > max_length {
                return Ok(CorpusItem::Skipped { length: sent.len() });
            }
            parse_sentence(g, table, sent, cfg).map(CorpusItem::Done)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::induce_pcfg;
    use crate::lookahead::estimate_lookahead;
    use crate::treebank::read_trees;

    fn setup(s: &str) -> (Pcfg, LookaheadTable) {
        let c = read_trees(s).unwrap();
        let g = induce_pcfg(&c).unwrap();
        let t = estimate_lookahead(&c, &g).unwrap();
        (g, t)
    }

    fn syms(s: &str) -> Vec<Symbol> {
        s.split_whitespace().map(Symbol::parse).collect()
    }

    #[test]
    fn single_derivation_grammar() {
        let (g, t) = setup("(S a b)");
        let out = parse_sentence(&g, &t, &syms("a b"), &BeamConfig::default()).unwrap();
        assert!(out.is_parsed());
        assert_eq!(out.tree.unwrap().bracketed(), "(S a b)");
        assert_eq!(out.probability, 1.0);
    }

    #[test]
    fn lookahead_filter_kills_the_sibling() {
        let (g, t) = setup("(S a a) (S a b)");
        let out = parse_sentence(&g, &t, &syms("a b"), &BeamConfig::default()).unwrap();
        assert!(out.is_parsed());
        assert_eq!(out.tree.unwrap().bracketed(), "(S a b)");
        assert_eq!(out.probability, 0.5);
    }

    #[test]
    fn unknown_terminal_is_immediate_no_parse() {
        let (g, t) = setup("(S a b)");
        let out = parse_sentence(&g, &t, &syms("a z"), &BeamConfig::default()).unwrap();
        assert!(matches!(out.failure, Some(ParseFailure::NoParse(ref m)) if m.contains("'z'")));
        assert_eq!(out.states_considered, 0);
    }

    #[test]
    fn unparseable_input_is_no_parse() {
        let (g, t) = setup("(S a b)");
        let out = parse_sentence(&g, &t, &syms("b a"), &BeamConfig::default()).unwrap();
        assert!(matches!(out.failure, Some(ParseFailure::NoParse(_))));
    }

    #[test]
    fn left_recursion_trips_the_state_bound() {
        // S -> S b (0.4) | a (0.6)
        let (g, t) = setup("(S (S (S a) b) b) (S a) (S a)");
        let cfg = BeamConfig {
            max_states_per_word: 2,
            ..Default::default()
        };
        let out = parse_sentence(&g, &t, &syms("a b b"), &cfg).unwrap();
        assert!(
            matches!(out.failure, Some(ParseFailure::StateBoundExceeded(_))),
            "{:?}",
            out.failure
        );
    }

    #[test]
    fn determinism_including_state_counts() {
        let (g, t) = setup("(S (S a) b) (S a) (S (S (S a) b) b)");
        let cfg = BeamConfig::default();
        let a = parse_sentence(&g, &t, &syms("a b b"), &cfg).unwrap();
        let b = parse_sentence(&g, &t, &syms("a b b"), &cfg).unwrap();
        assert_eq!(a.states_considered, b.states_considered);
        assert_eq!(a.tree, b.tree);
        assert_eq!(a.log_probability, b.log_probability);
    }

    #[test]
    fn replay_reproduces_probability() {
        let (g, t) = setup("(S (S a) b) (S a) (S (S (S a) b) b)");
        let out =
            parse_sentence(&g, &t, &syms("a b b"), &BeamConfig::default()).unwrap();
        assert!(out.is_parsed());
        // log prob is the sum of the history's rule log probs
        let tree = out.tree.unwrap();
        let lp = crate::oracle::tree_log_prob(&g, &tree).unwrap();
        assert!((lp - out.log_probability).abs() < 1e-9);
    }

    #[test]
    fn replay_builds_trees_from_histories() {
        let (g, _) = setup("(S a b)");
        let top_rule = g.root_rules()[0];
        let s = g.rules[top_rule].rhs[0];
        let s_rule = g.rules_for(s)[0];
        let tree = replay_history(&g, &[top_rule, s_rule]).unwrap();
        assert_eq!(tree.bracketed(), "(S a b)");
    }

    #[test]
    fn empty_sentence_lists_give_empty_output() {
        let (g, t) = setup("(S a b)");
        let out = parse_corpus(&g, &t, &[], &BeamConfig::default(), 40).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn replay_rejects_truncated_history() {
        let (g, _) = setup("(S a b)");
        let top_rule = g.root_rules()[0];
        assert!(replay_history(&g, &[top_rule]).is_err());
        assert!(replay_history(&g, &[]).is_err());
    }

    #[test]
    fn corpus_skips_long_sentences() {
        let (g, t) = setup("(S a b)");
        let sentences = vec![syms("a b"), syms("a b a b a")];
        let out = parse_corpus(&g, &t, &sentences, &BeamConfig::default(), 3).unwrap();
        assert!(matches!(out[0], CorpusItem::Done(_)));
        assert!(matches!(out[1], CorpusItem::Skipped { length: 5 }));
    }
}
