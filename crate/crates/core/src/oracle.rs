//! Exhaustive reference parsing: the maximum likelihood parse via a
//! bottom-up chart, and a brute-force enumerator for small inputs.
//!
//! `mlp_parse` accepts arbitrary grammars (n-ary, unary, and empty rules).
//! Internally it folds best empty-yield derivations into the rules that
//! drop them, binarizes the remainder with hidden chain symbols, and runs
//! a Viterbi chart with max-probability unary closure; the returned tree
//! is in the caller's (transformed) grammar space with all empty-yield
//! subtrees reinstated. Efficiency is explicitly not a goal here — this
//! module is the measuring stick for the incremental parser.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};

use crate::error::{Error, Result};
use crate::grammar::{Pcfg, RuleId, SymId};
use crate::parser::replay_history;
use crate::symbol::Symbol;
use crate::treebank::Tree;

/// Relative window inside which two chart scores count as tied and the
/// canonical (lexicographically least) tree wins. Keeps tie-breaking stable
/// against float summation-order noise.
fn tie_window(score: f64) -> f64 {
    1e-12 * (1.0 + score.abs())
}

/// The log probability of a tree's derivation, accumulated in leftmost
/// (preorder) order starting from the root rule — the same summation order
/// the incremental parser uses, so equal derivations give bit-equal logs.
pub fn tree_log_prob(g: &Pcfg, t: &Tree) -> Result<f64> {
    let root = t
        .symbol()
        .and_then(|s| g.symbols.lookup(s))
        .ok_or_else(|| Error::Oracle("tree root is not a grammar symbol".into()))?;
    let top_rule = g
        .find_rule(g.top, &[root])
        .ok_or_else(|| Error::Oracle("tree root is not a start symbol".into()))?;
    let mut lp = g.rules[top_rule].log_prob;
    preorder_log_prob(g, t, &mut lp)?;
    Ok(lp)
}

fn preorder_log_prob(g: &Pcfg, t: &Tree, lp: &mut f64) -> Result<()> {
    let Tree::Node { label, children } = t else {
        return Ok(());
    };
    let lhs = g
        .symbols
        .lookup(label)
        .ok_or_else(|| Error::Oracle(format!("unknown symbol '{}'", label)))?;
    let rhs: Vec<SymId> = if matches!(children.as_slice(), [Tree::Epsilon]) {
        Vec::new()
    } else {
        children
            .iter()
            .map(|c| {
                c.symbol()
                    .and_then(|s| g.symbols.lookup(s))
                    .ok_or_else(|| Error::Oracle("unexpected empty leaf in rule".into()))
            })
            .collect::<Result<_>>()?
    };
    let rid = g.find_rule(lhs, &rhs).ok_or_else(|| {
        Error::Oracle(format!("tree uses a rule for '{}' the grammar lacks", label))
    })?;
    *lp += g.rules[rid].log_prob;
    for c in children {
        preorder_log_prob(g, c, lp)?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct OracleParse {
    pub tree: Tree,
    pub probability: f64,
    pub log_probability: f64,
}

// ---------------------------------------------------------------------
// maximum likelihood parse
// ---------------------------------------------------------------------

/// A rule with nullable positions dropped and their best empty derivations
/// folded into the probability.
struct Variant {
    rule: RuleId,
    kept: Vec<SymId>,
    /// For each original rhs position, whether it was kept.
    kept_mask: Vec<bool>,
    log_prob: f64,
}

/// Chart key: a grammar symbol, or the hidden chain symbol covering the
/// tail `kept[pos..]` of a variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Key {
    Sym(SymId),
    Chain { variant: u32, pos: u32 },
}

#[derive(Clone)]
enum Back {
    /// Width-1 terminal occupancy.
    Word,
    /// A complete variant whose kept sequence is a single symbol.
    Unary { variant: u32, child: Key },
    /// Binary combination at a split point.
    Binary { variant: u32, split: usize, left: Key, right: Key },
}

fn back_order(b: &Back) -> (u8, u32, usize, Key, Key) {
    match *b {
        Back::Word => (0, 0, 0, Key::Sym(SymId(0)), Key::Sym(SymId(0))),
        Back::Unary { variant, child } => (1, variant, 0, child, child),
        Back::Binary { variant, split, left, right } => (2, variant, split, left, right),
    }
}

#[derive(Clone)]
struct Entry {
    score: f64,
    back: Back,
}

struct Chart {
    n: usize,
    cells: Vec<HashMap<Key, Entry>>,
}

impl Chart {
    fn new(n: usize) -> Chart {
        Chart { n, cells: vec![HashMap::new(); (n + 1) * (n + 1)] }
    }

    fn cell(&self, i: usize, j: usize) -> &HashMap<Key, Entry> {
        &self.cells[i * (self.n + 1) + j]
    }

    fn cell_mut(&mut self, i: usize, j: usize) -> &mut HashMap<Key, Entry> {
        &mut self.cells[i * (self.n + 1) + j]
    }
}

struct Mlp<'g> {
    g: &'g Pcfg,
    input: Vec<SymId>,
    variants: Vec<Variant>,
    /// Best empty-yield derivation per nullable symbol.
    best_empty: HashMap<SymId, (f64, RuleId)>,
    /// Binary steps indexed by left operand: (left, right, parent, lp, variant, chain pos).
    by_left: HashMap<Key, Vec<(Key, Key, f64, u32)>>,
    /// Unary steps indexed by child.
    by_child: HashMap<Key, Vec<(Key, f64, u32)>>,
    chart: Chart,
}

pub fn mlp_parse(g: &Pcfg, input: &[Symbol]) -> Result<Option<OracleParse>> {
    let mut ids = Vec::with_capacity(input.len());
    for s in input {
        match g.symbols.lookup(s) {
            Some(id) if g.is_terminal(id) => ids.push(id),
            _ => return Ok(None),
        }
    }
    if ids.is_empty() {
        return Err(Error::Oracle("empty input sentence".into()));
    }
    let best_empty = best_empty_derivations(g);
    let variants = build_variants(g, &best_empty)?;
    let n = ids.len();
    let mut mlp = Mlp {
        g,
        input: ids,
        variants,
        best_empty,
        by_left: HashMap::new(),
        by_child: HashMap::new(),
        chart: Chart::new(n),
    };
    mlp.index_variants();
    mlp.fill();
    if !mlp.chart.cell(0, n).contains_key(&Key::Sym(g.top)) {
        return Ok(None);
    }
    let tree = mlp.build_tree(0, n, Key::Sym(g.top))?;
    // the goal entry is the TOP node; unwrap to its single child
    let Tree::Node { mut children, .. } = tree else { unreachable!() };
    if children.len() != 1 {
        return Err(Error::Oracle("malformed goal entry".into()));
    }
    let tree = children.pop().unwrap();
    let log_probability = tree_log_prob(g, &tree)?;
    Ok(Some(OracleParse { probability: log_probability.exp(), log_probability, tree }))
}

/// Viterbi-best empty derivation per symbol, by fixed point. Improvements
/// are strict, so unit-probability cycles cannot loop.
fn best_empty_derivations(g: &Pcfg) -> HashMap<SymId, (f64, RuleId)> {
    let mut best: HashMap<SymId, (f64, RuleId)> = HashMap::new();
    loop {
        let mut changed = false;
        for (rid, rule) in g.rules.iter().enumerate() {
            let mut lp = rule.log_prob;
            let mut ok = true;
            for s in &rule.rhs {
                match best.get(s) {
                    Some((e, _)) => lp += e,
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                continue;
            }
            match best.get(&rule.lhs) {
                Some((old, _)) if *old >= lp => {}
                _ => {
                    best.insert(rule.lhs, (lp, rid));
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    best
}

fn build_variants(g: &Pcfg, best_empty: &HashMap<SymId, (f64, RuleId)>) -> Result<Vec<Variant>> {
    let mut variants = Vec::new();
    for (rid, rule) in g.rules.iter().enumerate() {
        let nullable_positions: Vec<usize> = rule
            .rhs
            .iter()
            .enumerate()
            .filter(|(_, s)| best_empty.contains_key(s))
            .map(|(i, _)| i)
            .collect();
        if nullable_positions.len() > 20 {
            return Err(Error::Oracle(format!(
                "rule for '{}' has {} nullable positions; refusing the subset expansion",
                g.symbols.text(rule.lhs),
                nullable_positions.len()
            )));
        }
        for drop_bits in 0u32..(1 << nullable_positions.len()) {
            let mut kept_mask = vec![true; rule.rhs.len()];
            let mut log_prob = rule.log_prob;
            for (bit, &pos) in nullable_positions.iter().enumerate() {
                if drop_bits & (1 << bit) != 0 {
                    kept_mask[pos] = false;
                    log_prob += best_empty[&rule.rhs[pos]].0;
                }
            }
            let kept: Vec<SymId> = rule
                .rhs
                .iter()
                .zip(&kept_mask)
                .filter(|(_, &k)| k)
                .map(|(&s, _)| s)
                .collect();
            if kept.is_empty() {
                // the all-empty expansion lives in best_empty, not the chart
                continue;
            }
            variants.push(Variant { rule: rid, kept, kept_mask, log_prob });
        }
    }
    Ok(variants)
}

impl<'g> Mlp<'g> {
    fn index_variants(&mut self) {
        for (vi, v) in self.variants.iter().enumerate() {
            let vi = vi as u32;
            match v.kept.len() {
                1 => {
                    self.by_child
                        .entry(Key::Sym(v.kept[0]))
                        .or_default()
                        .push((Key::Sym(self.g.rules[v.rule].lhs), v.log_prob, vi));
                }
                _ => {
                    // chain: parent <- kept[0] chain(1); chain(p) <- kept[p] chain(p+1);
                    // chain(m-2) <- kept[m-2] kept[m-1]; the variant's whole
                    // probability rides on the top step
                    let m = v.kept.len();
                    for p in 0..m - 1 {
                        let parent = if p == 0 {
                            Key::Sym(self.g.rules[v.rule].lhs)
                        } else {
                            Key::Chain { variant: vi, pos: p as u32 }
                        };
                        let left = Key::Sym(v.kept[p]);
                        let right = if p == m - 2 {
                            Key::Sym(v.kept[m - 1])
                        } else {
                            Key::Chain { variant: vi, pos: (p + 1) as u32 }
                        };
                        let lp = if p == 0 { v.log_prob } else { 0.0 };
                        self.by_left.entry(left).or_default().push((right, parent, lp, vi));
                    }
                }
            }
        }
    }

    fn fill(&mut self) {
        let n = self.input.len();
        for i in 0..n {
            let word = self.input[i];
            self.chart
                .cell_mut(i, i + 1)
                .insert(Key::Sym(word), Entry { score: 0.0, back: Back::Word });
            self.close_unaries(i, i + 1);
        }
        for width in 2..=n {
            for i in 0..=n - width {
                let j = i + width;
                let mut updates: Vec<(Key, f64, Back)> = Vec::new();
                for split in i + 1..j {
                    for (left, left_entry) in self.chart.cell(i, split) {
                        let Some(steps) = self.by_left.get(left) else { continue };
                        for &(right, parent, lp, vi) in steps {
                            let Some(right_entry) = self.chart.cell(split, j).get(&right)
                            else {
                                continue;
                            };
                            let score = lp + left_entry.score + right_entry.score;
                            let back =
                                Back::Binary { variant: vi, split, left: *left, right };
                            updates.push((parent, score, back));
                        }
                    }
                }
                self.apply_sorted(i, j, updates);
                self.close_unaries(i, j);
            }
        }
    }

    /// Max-probability unary closure within a cell. Relaxation is strict
    /// improvement (or a canonical tie win), so it terminates.
    fn close_unaries(&mut self, i: usize, j: usize) {
        loop {
            let mut updates: Vec<(Key, f64, Back)> = Vec::new();
            for (&child, entry) in self.chart.cell(i, j) {
                let Some(steps) = self.by_child.get(&child) else { continue };
                for &(parent, lp, vi) in steps {
                    updates.push((
                        parent,
                        lp + entry.score,
                        Back::Unary { variant: vi, child },
                    ));
                }
            }
            if !self.apply_sorted(i, j, updates) {
                break;
            }
        }
    }

    /// Applies relaxations in a canonical order. Chart cells are hash maps,
    /// so candidates are collected in an arbitrary order; sorting before
    /// applying keeps tie resolution independent of hashing.
    fn apply_sorted(&mut self, i: usize, j: usize, mut updates: Vec<(Key, f64, Back)>) -> bool {
        updates.sort_by(|a, b| {
            a.0.cmp(&b.0)
                .then_with(|| b.1.total_cmp(&a.1))
                .then_with(|| back_order(&a.2).cmp(&back_order(&b.2)))
        });
        let mut changed = false;
        for (key, score, back) in updates {
            changed |= self.relax(i, j, key, score, back);
        }
        changed
    }

    fn relax(&mut self, i: usize, j: usize, key: Key, score: f64, back: Back) -> bool {
        let current = self.chart.cell(i, j).get(&key).map(|e| e.score);
        match current {
            None => {
                self.chart.cell_mut(i, j).insert(key, Entry { score, back });
                true
            }
            Some(old) if score > old + tie_window(old) => {
                self.chart.cell_mut(i, j).insert(key, Entry { score, back });
                true
            }
            Some(old) if score >= old - tie_window(old) => {
                // tie at float resolution: the canonical lesser tree wins
                let old_text = self
                    .build_tree(i, j, key)
                    .map(|t| t.bracketed())
                    .unwrap_or_default();
                let challenger = Entry { score, back };
                let new_text = self
                    .build_tree_with(i, j, key, Some(&challenger))
                    .map(|t| t.bracketed())
                    .unwrap_or_default();
                if !new_text.is_empty() && new_text < old_text {
                    self.chart.cell_mut(i, j).insert(key, challenger);
                    true
                } else {
                    false
                }
            }
            _ => false,
        }
    }

    fn build_tree(&self, i: usize, j: usize, key: Key) -> Result<Tree> {
        self.build_tree_with(i, j, key, None)
    }

    /// Rebuilds the derivation tree for an entry, optionally substituting a
    /// challenger entry at the root (used for tie comparison).
    fn build_tree_with(&self, i: usize, j: usize, key: Key, rooted: Option<&Entry>) -> Result<Tree> {
        let entry = match rooted {
            Some(e) => e.clone(),
            None => self
                .chart
                .cell(i, j)
                .get(&key)
                .cloned()
                .ok_or_else(|| Error::Oracle("missing chart entry".into()))?,
        };
        match entry.back {
            Back::Word => {
                let Key::Sym(s) = key else {
                    return Err(Error::Oracle("word entry under a chain key".into()));
                };
                Ok(Tree::Leaf(self.g.symbols.symbol(s).clone()))
            }
            Back::Unary { variant, child } => {
                let sub = self.build_tree(i, j, child)?;
                self.variant_node(variant, vec![sub])
            }
            Back::Binary { variant, .. } => {
                let (ops, vi) = self.collect_operands(i, j, &entry)?;
                debug_assert_eq!(vi, variant);
                self.variant_node(variant, ops)
            }
        }
    }

    /// Walks a binary chain collecting the kept operands' subtrees.
    fn collect_operands(&self, i: usize, j: usize, entry: &Entry) -> Result<(Vec<Tree>, u32)> {
        let Back::Binary { variant, split, left, right } = entry.back else {
            return Err(Error::Oracle("expected a binary backpointer".into()));
        };
        let mut ops = vec![self.build_tree(i, split, left)?];
        let mut cur = (split, j, right);
        loop {
            let (ci, cj, ckey) = cur;
            match ckey {
                Key::Sym(_) => {
                    ops.push(self.build_tree(ci, cj, ckey)?);
                    return Ok((ops, variant));
                }
                Key::Chain { .. } => {
                    let e = self
                        .chart
                        .cell(ci, cj)
                        .get(&ckey)
                        .ok_or_else(|| Error::Oracle("missing chain entry".into()))?;
                    let Back::Binary { split, left, right, .. } = e.back else {
                        return Err(Error::Oracle("chain entry without binary back".into()));
                    };
                    ops.push(self.build_tree(ci, split, left)?);
                    cur = (split, cj, right);
                }
            }
        }
    }

    /// Builds the original-space node for a completed variant: kept
    /// children from the chart, dropped ones from their best empty
    /// derivations.
    fn variant_node(&self, variant: u32, kept_subtrees: Vec<Tree>) -> Result<Tree> {
        let v = &self.variants[variant as usize];
        let rule = &self.g.rules[v.rule];
        let mut kept_iter = kept_subtrees.into_iter();
        let mut children = Vec::with_capacity(rule.rhs.len());
        for (pos, &keep) in v.kept_mask.iter().enumerate() {
            if keep {
                children.push(kept_iter.next().ok_or_else(|| {
                    Error::Oracle("operand count mismatch in reconstruction".into())
                })?);
            } else {
                children.push(self.build_empty(rule.rhs[pos])?);
            }
        }
        if kept_iter.next().is_some() {
            return Err(Error::Oracle("operand count mismatch in reconstruction".into()));
        }
        Ok(Tree::Node { label: self.g.symbols.symbol(rule.lhs).clone(), children })
    }

    fn build_empty(&self, sym: SymId) -> Result<Tree> {
        let (_, rid) = self
            .best_empty
            .get(&sym)
            .ok_or_else(|| Error::Oracle("dropped symbol has no empty derivation".into()))?;
        let rule = &self.g.rules[*rid];
        let children = if rule.rhs.is_empty() {
            vec![Tree::Epsilon]
        } else {
            rule.rhs.iter().map(|&s| self.build_empty(s)).collect::<Result<_>>()?
        };
        Ok(Tree::Node { label: self.g.symbols.symbol(rule.lhs).clone(), children })
    }
}

// ---------------------------------------------------------------------
// exhaustive enumeration
// ---------------------------------------------------------------------

/// Structural facts the enumerator derives for itself, independently of
/// the look-ahead module it serves as an oracle for.
struct EnumFacts {
    nullable: HashSet<SymId>,
    first: HashMap<SymId, HashSet<SymId>>,
    min_yield: HashMap<SymId, usize>,
}

fn enum_facts(g: &Pcfg) -> EnumFacts {
    let mut nullable: HashSet<SymId> = HashSet::new();
    loop {
        let mut changed = false;
        for r in &g.rules {
            if !nullable.contains(&r.lhs) && r.rhs.iter().all(|s| nullable.contains(s)) {
                nullable.insert(r.lhs);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut first: HashMap<SymId, HashSet<SymId>> = HashMap::new();
    loop {
        let mut changed = false;
        for r in &g.rules {
            let mut add = Vec::new();
            for &s in &r.rhs {
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
            let set = first.entry(r.lhs).or_default();
            for s in add {
                changed |= set.insert(s);
            }
        }
        if !changed {
            break;
        }
    }
    let mut min_yield: HashMap<SymId, usize> = HashMap::new();
    for t in g.terminal_ids() {
        min_yield.insert(t, 1);
    }
    loop {
        let mut changed = false;
        for r in &g.rules {
            let mut total = 0usize;
            let mut ok = true;
            for s in &r.rhs {
                if g.is_terminal(*s) {
                    total += 1;
                } else {
                    match min_yield.get(s) {
                        Some(m) => total = total.saturating_add(*m),
                        None => {
                            ok = false;
                            break;
                        }
                    }
                }
            }
            if !ok {
                continue;
            }
            match min_yield.get(&r.lhs) {
                Some(old) if *old <= total => {}
                _ => {
                    min_yield.insert(r.lhs, total);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    EnumFacts { nullable, first, min_yield }
}

/// Rejects grammars whose unit-probability rules form a cycle that
/// consumes nothing: such a cycle pumps derivations of undiminished
/// probability forever, so no enumeration bound can be established.
fn check_unit_cycles(g: &Pcfg, facts: &EnumFacts) -> Result<()> {
    let mut edges: HashMap<SymId, Vec<SymId>> = HashMap::new();
    for r in &g.rules {
        if r.prob < 1.0 {
            continue;
        }
        for (i, &s) in r.rhs.iter().enumerate() {
            if g.is_terminal(s) {
                continue;
            }
            let others_nullable = r
                .rhs
                .iter()
                .enumerate()
                .all(|(k, t)| k == i || facts.nullable.contains(t));
            if others_nullable {
                edges.entry(r.lhs).or_default().push(s);
            }
        }
    }
    // cycle detection over the unit edges
    let mut color: HashMap<SymId, u8> = HashMap::new();
    fn dfs(
        v: SymId,
        edges: &HashMap<SymId, Vec<SymId>>,
        color: &mut HashMap<SymId, u8>,
    ) -> bool {
        color.insert(v, 1);
        for &w in edges.get(&v).map(Vec::as_slice).unwrap_or(&[]) {
            match color.get(&w) {
                Some(1) => return true,
                Some(_) => {}
                None => {
                    if dfs(w, edges, color) {
                        return true;
                    }
                }
            }
        }
        color.insert(v, 2);
        false
    }
    let keys: Vec<SymId> = edges.keys().copied().collect();
    for v in keys {
        if !color.contains_key(&v) && dfs(v, &edges, &mut color) {
            return Err(Error::Oracle(
                "grammar has a unit-probability cycle that consumes no input; \
                 enumeration has no derivation bound"
                    .into(),
            ));
        }
    }
    Ok(())
}

struct EnumPartial {
    pos: usize,
    stack: Vec<SymId>, // top is last
    rules: Vec<RuleId>,
    log_prob: f64,
    seq: u64,
}

struct EnumOrd(EnumPartial);

impl PartialEq for EnumOrd {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for EnumOrd {}
impl PartialOrd for EnumOrd {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for EnumOrd {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .log_prob
            .total_cmp(&other.0.log_prob)
            .then_with(|| other.0.seq.cmp(&self.0.seq))
    }
}

const ENUM_BUDGET: u64 = 10_000_000;

/// All parse trees of the input with exact probabilities, best-first, up
/// to `cap` of them; exceeding the cap is an error that reports the count.
/// Inputs are limited to length 10 — this is a ground-truth oracle, not a
/// parser.
pub fn enumerate_parses(g: &Pcfg, input: &[Symbol], cap: usize) -> Result<Vec<OracleParse>> {
    if input.len() > 10 {
        return Err(Error::Oracle(format!(
            "enumeration is for inputs of length <= 10, got {}",
            input.len()
        )));
    }
    if input.is_empty() {
        return Err(Error::Oracle("empty input sentence".into()));
    }
    let mut ids = Vec::with_capacity(input.len());
    for s in input {
        match g.symbols.lookup(s) {
            Some(id) if g.is_terminal(id) => ids.push(id),
            _ => return Ok(Vec::new()),
        }
    }
    let facts = enum_facts(g);
    check_unit_cycles(g, &facts)?;

    let n = ids.len();
    let lookahead = |pos: usize| ids.get(pos).copied();
    // a stack sequence can still reach the look-ahead iff its structural
    // FIRST through nullable prefixes contains it (end: all nullable)
    let reaches = |seq: &mut dyn Iterator<Item = SymId>, omega: Option<SymId>| -> bool {
        for s in seq {
            if g.is_terminal(s) {
                return omega == Some(s);
            }
            if let Some(w) = omega {
                if facts.first.get(&s).is_some_and(|set| set.contains(&w)) {
                    return true;
                }
            }
            if !facts.nullable.contains(&s) {
                return false;
            }
        }
        omega.is_none()
    };
    let min_total = |stack: &[SymId]| -> usize {
        stack
            .iter()
            .map(|s| facts.min_yield.get(s).copied().unwrap_or(usize::MAX))
            .fold(0usize, usize::saturating_add)
    };

    let mut heap: BinaryHeap<EnumOrd> = BinaryHeap::new();
    let mut seq = 0u64;
    for &rid in g.root_rules() {
        let rule = &g.rules[rid];
        heap.push(EnumOrd(EnumPartial {
            pos: 0,
            stack: vec![rule.rhs[0]],
            rules: vec![rid],
            log_prob: rule.log_prob,
            seq,
        }));
        seq += 1;
    }

    let mut complete: Vec<(Vec<RuleId>, f64)> = Vec::new();
    let mut budget = ENUM_BUDGET;
    while let Some(EnumOrd(partial)) = heap.pop() {
        budget -= 1;
        if budget == 0 {
            return Err(Error::Oracle("enumeration budget exhausted".into()));
        }
        let EnumPartial { pos, mut stack, rules, log_prob, .. } = partial;
        let Some(top) = stack.pop() else {
            if pos == n {
                complete.push((rules, log_prob));
                if complete.len() > cap {
                    return Err(Error::Oracle(format!(
                        "more than {} parses (found {} so far)",
                        cap,
                        complete.len()
                    )));
                }
            }
            continue;
        };
        if g.is_terminal(top) {
            if lookahead(pos) == Some(top) {
                heap.push(EnumOrd(EnumPartial {
                    pos: pos + 1,
                    stack,
                    rules,
                    log_prob,
                    seq,
                }));
                seq += 1;
            }
            continue;
        }
        let omega = lookahead(pos);
        for &rid in g.rules_for(top) {
            let rule = &g.rules[rid];
            let mut seq_iter = rule.rhs.iter().copied().chain(stack.iter().rev().copied());
            if !reaches(&mut seq_iter, omega) {
                continue;
            }
            let mut new_stack = stack.clone();
            for &s in rule.rhs.iter().rev() {
                new_stack.push(s);
            }
            if min_total(&new_stack) > n - pos {
                continue;
            }
            let mut new_rules = rules.clone();
            new_rules.push(rid);
            heap.push(EnumOrd(EnumPartial {
                pos,
                stack: new_stack,
                rules: new_rules,
                log_prob: log_prob + rule.log_prob,
                seq,
            }));
            seq += 1;
        }
    }

    let mut out: Vec<OracleParse> = complete
        .into_iter()
        .map(|(rules, lp)| {
            let tree = replay_history(g, &rules)?;
            Ok(OracleParse { probability: lp.exp(), log_probability: lp, tree })
        })
        .collect::<Result<_>>()?;
    out.sort_by(|a, b| {
        b.log_probability
            .total_cmp(&a.log_probability)
            .then_with(|| a.tree.bracketed().cmp(&b.tree.bracketed()))
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::induce_pcfg;
    use crate::treebank::read_trees;

    fn grammar(s: &str) -> Pcfg {
        induce_pcfg(&read_trees(s).unwrap()).unwrap()
    }

    fn syms(s: &str) -> Vec<Symbol> {
        s.split_whitespace().map(Symbol::parse).collect()
    }

    // S -> S S (0.4) | a (0.6)
    fn catalan_grammar() -> Pcfg {
        grammar("(S (S (S a) (S a)) (S a))")
    }

    #[test]
    fn ambiguous_grammar_probability_and_tiebreak() {
        let g = catalan_grammar();
        let out = mlp_parse(&g, &syms("a a a")).unwrap().unwrap();
        let expected = 0.4 * 0.4 * 0.6 * 0.6 * 0.6;
        assert!((out.probability - expected).abs() < 1e-12 * expected);
        // two tied trees; the canonical tie-break picks the left-branching one
        assert_eq!(out.tree.bracketed(), "(S (S (S a) (S a)) (S a))");
    }

    #[test]
    fn single_rule_grammar() {
        let g = grammar("(S a b)");
        let out = mlp_parse(&g, &syms("a b")).unwrap().unwrap();
        assert_eq!(out.probability, 1.0);
        assert_eq!(out.tree.bracketed(), "(S a b)");
        assert!(mlp_parse(&g, &syms("b a")).unwrap().is_none());
    }

    #[test]
    fn enumerates_catalan_two_parses() {
        let g = catalan_grammar();
        let parses = enumerate_parses(&g, &syms("a a a"), 100).unwrap();
        assert_eq!(parses.len(), 2);
        assert!((parses[0].probability - parses[1].probability).abs() < 1e-15);
        let mlp = mlp_parse(&g, &syms("a a a")).unwrap().unwrap();
        assert_eq!(mlp.tree, parses[0].tree);
        assert_eq!(mlp.log_probability, parses[0].log_probability);
    }

    #[test]
    fn enumeration_cap_is_an_error() {
        let g = catalan_grammar();
        let err = enumerate_parses(&g, &syms("a a a a"), 2).unwrap_err();
        assert!(err.to_string().contains("parses"));
    }

    #[test]
    fn single_parse_unit_probability() {
        let g = grammar("(S a)");
        let parses = enumerate_parses(&g, &syms("a"), 10).unwrap();
        assert_eq!(parses.len(), 1);
        assert_eq!(parses[0].probability, 1.0);
    }

    #[test]
    fn epsilon_rules_are_parsed_and_reinstated() {
        // the nullary-composite grammar from right binarization
        let g = grammar(
            "(NP DT (NP-DT JJ (NP-DT-JJ JJ (NP-DT-JJ-JJ NN (NP-DT-JJ-JJ-NN -NONE-)))))",
        );
        let out = mlp_parse(&g, &syms("DT JJ JJ NN")).unwrap().unwrap();
        assert_eq!(
            out.tree.bracketed(),
            "(NP DT (NP-DT JJ (NP-DT-JJ JJ (NP-DT-JJ-JJ NN (NP-DT-JJ-JJ-NN -NONE-)))))"
        );
        assert_eq!(out.probability, 1.0);
    }

    #[test]
    fn unary_chains_close() {
        // S -> A (0.5) | B (0.5); B -> A (1.0); A -> a (1.0): tie between
        // (S (A a)) and (S (B (A a))); canonical pick is the former
        let g = grammar("(S (A a)) (S (B (A a)))");
        let out = mlp_parse(&g, &syms("a")).unwrap().unwrap();
        assert_eq!(out.tree.bracketed(), "(S (A a))");
        let parses = enumerate_parses(&g, &syms("a"), 10).unwrap();
        assert_eq!(parses.len(), 2);
        assert_eq!(parses[0].tree, out.tree);
    }

    #[test]
    fn mlp_agrees_with_enumeration_on_toys() {
        let toys = [
            "(S (S (S a) (S a)) (S a))",
            "(S (S a) b) (S a) (S (S (S a) b) b)",
            "(S (X x) (Y y)) (S (Z x y))",
            "(S a (S b)) (S b) (S b)",
        ];
        for toy in toys {
            let g = grammar(toy);
            for input in ["a", "a a", "b", "x y", "a b b", "a a a a"] {
                let input = syms(input);
                let mlp = mlp_parse(&g, &input).unwrap();
                let all = enumerate_parses(&g, &input, 10_000).unwrap();
                match (mlp, all.first()) {
                    (None, None) => {}
                    (Some(m), Some(e)) => {
                        assert!(
                            (m.log_probability - e.log_probability).abs()
                                <= 1e-12 * (1.0 + m.log_probability.abs()),
                            "probability mismatch on {:?}",
                            input
                        );
                        assert_eq!(m.tree, e.tree, "tree mismatch on {:?}", input);
                    }
                    (m, e) => panic!("oracle disagreement: {:?} vs {:?}", m.is_some(), e.is_some()),
                }
            }
        }
    }

    #[test]
    fn unit_cycle_is_rejected() {
        let text = "1 TOP -> S\n0.5 S -> A x\n0.5 S -> x\n1 A -> A\n";
        let g = Pcfg::from_text(text).unwrap();
        assert!(enumerate_parses(&g, &syms("x"), 10).is_err());
    }
}
