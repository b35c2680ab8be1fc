//! PARSEVAL labelled precision/recall and the aggregate report rows.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::treebank::Tree;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParsevalCounts {
    pub matched: usize,
    pub gold: usize,
    pub candidate: usize,
}

impl ParsevalCounts {
    pub fn precision(&self) -> f64 {
        if self.candidate == 0 {
            0.0
        } else {
            self.matched as f64 / self.candidate as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.gold == 0 {
            0.0
        } else {
            self.matched as f64 / self.gold as f64
        }
    }
}

/// Labelled constituents — (label, span) with multiplicity — of gold and
/// candidate trees with identical yields. The root constituent counts;
/// terminals (and hence preterminal POS leaves) do not. Both trees must be
/// fully de-transformed: annotation marks are an error.
pub fn parseval(gold: &Tree, candidate: &Tree) -> Result<ParsevalCounts> {
    if gold.has_marks() || candidate.has_marks() {
        return Err(Error::Eval(
            "trees still carry transform marks; de-transform before evaluating".into(),
        ));
    }
    let gy = gold.terminal_yield();
    let cy = candidate.terminal_yield();
    if gy != cy {
        return Err(Error::Eval(format!(
            "yield mismatch: gold '{}' vs candidate '{}'",
            gy.iter().map(|s| s.text()).collect::<Vec<_>>().join(" "),
            cy.iter().map(|s| s.text()).collect::<Vec<_>>().join(" ")
        )));
    }
    let g = constituents(gold);
    let c = constituents(candidate);
    let matched = g
        .iter()
        .map(|(k, &n)| n.min(c.get(k).copied().unwrap_or(0)))
        .sum();
    Ok(ParsevalCounts {
        matched,
        gold: g.values().sum(),
        candidate: c.values().sum(),
    })
}

fn constituents(t: &Tree) -> HashMap<(String, usize, usize), usize> {
    let mut out = HashMap::new();
    collect(t, 0, &mut out);
    out
}

fn collect(t: &Tree, start: usize, out: &mut HashMap<(String, usize, usize), usize>) -> usize {
    match t {
        Tree::Leaf(_) => start + 1,
        Tree::Epsilon => start,
        Tree::Node { label, children } => {
            let mut pos = start;
            for c in children {
                pos = collect(c, pos, out);
            }
            *out.entry((label.base().to_string(), start, pos)).or_default() += 1;
            pos
        }
    }
}

/// Per-sentence line in an experiment run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SentenceStatus {
    Parsed,
    NoParse,
    StateBound,
    Skipped,
}

impl SentenceStatus {
    pub fn name(self) -> &'static str {
        match self {
            SentenceStatus::Parsed => "ok",
            SentenceStatus::NoParse => "no-parse",
            SentenceStatus::StateBound => "state-bound-exceeded",
            SentenceStatus::Skipped => "skipped",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SentenceRecord {
    pub index: usize,
    pub length: usize,
    pub status: SentenceStatus,
    pub states: u64,
    pub parser_log_prob: Option<f64>,
    pub mlp_log_prob: Option<f64>,
    #[serde(skip)]
    pub parseval: Option<ParsevalCounts>,
    #[serde(skip)]
    pub mlp_parseval: Option<ParsevalCounts>,
    pub tree: Option<String>,
}

/// One report row: the aggregate measures of a whole run under one
/// transform.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub transform: String,
    pub rules_in_grammar: usize,
    /// Percentage of candidate (length-filtered) sentences parsed.
    pub pct_parsed: f64,
    /// Mean states considered per candidate sentence, failures included.
    pub avg_states: f64,
    /// Micro-averaged mean of labelled precision and recall over parsed
    /// sentences — the single-number accuracy column.
    pub avg_lp_lr: f64,
    pub precision: f64,
    pub recall: f64,
    pub mlp_lp_lr: f64,
    pub mlp_precision: f64,
    pub mlp_recall: f64,
    /// Mean over parsed sentences of parser probability / MLP probability.
    pub prob_ratio: f64,
    /// The other reading of the column: ratio of the average probabilities.
    pub prob_ratio_of_avgs: f64,
    pub candidates: usize,
    pub parsed: usize,
    pub skipped: usize,
}

impl Report {
    /// Shared column names follow the paper's table headers.
    pub fn csv_header() -> &'static str {
        "Transform,Rules in Grammar,Pct. of Sentences Parsed,Avg. States Considered,\
         Avg. Labelled Precision and Recall,Avg. MLP Labelled Prec/Rec,\
         Ratio of Avg. Prob to Avg. MLP Prob,Labelled Precision,Labelled Recall,\
         MLP Labelled Precision,MLP Labelled Recall,Ratio of Averaged Probs,\
         Candidates,Parsed,Skipped"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.transform,
            self.rules_in_grammar,
            self.pct_parsed,
            self.avg_states,
            self.avg_lp_lr,
            self.mlp_lp_lr,
            self.prob_ratio,
            self.precision,
            self.recall,
            self.mlp_precision,
            self.mlp_recall,
            self.prob_ratio_of_avgs,
            self.candidates,
            self.parsed,
            self.skipped
        )
    }
}

/// Folds per-sentence records into a report row. Accuracy and probability
/// columns average over parsed sentences only; the states column averages
/// over all candidates.
pub fn aggregate(transform: &str, rules_in_grammar: usize, records: &[SentenceRecord]) -> Report {
    let mut candidates = 0usize;
    let mut parsed = 0usize;
    let mut skipped = 0usize;
    let mut states_sum = 0f64;
    let mut matched = 0usize;
    let mut gold = 0usize;
    let mut cand = 0usize;
    let mut m_matched = 0usize;
    let mut m_gold = 0usize;
    let mut m_cand = 0usize;
    let mut ratio_sum = 0f64;
    let mut prob_sum = 0f64;
    let mut mlp_prob_sum = 0f64;

    for r in records {
        if r.status == SentenceStatus::Skipped {
            skipped += 1;
            continue;
        }
        candidates += 1;
        states_sum += r.states as f64;
        if r.status != SentenceStatus::Parsed {
            continue;
        }
        parsed += 1;
        if let Some(p) = r.parseval {
            matched += p.matched;
            gold += p.gold;
            cand += p.candidate;
        }
        if let Some(p) = r.mlp_parseval {
            m_matched += p.matched;
            m_gold += p.gold;
            m_cand += p.candidate;
        }
        if let (Some(lp), Some(mlp)) = (r.parser_log_prob, r.mlp_log_prob) {
            // the parser cannot beat the exhaustive maximum; clamp float lint
            ratio_sum += (lp - mlp).exp().min(1.0);
            prob_sum += lp.exp();
            mlp_prob_sum += mlp.exp();
        }
    }

    let frac = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = frac(matched, cand);
    let recall = frac(matched, gold);
    let mlp_precision = frac(m_matched, m_cand);
    let mlp_recall = frac(m_matched, m_gold);
    Report {
        transform: transform.to_string(),
        rules_in_grammar,
        pct_parsed: if candidates == 0 { 0.0 } else { 100.0 * parsed as f64 / candidates as f64 },
        avg_states: if candidates == 0 { 0.0 } else { states_sum / candidates as f64 },
        avg_lp_lr: (precision + recall) / 2.0,
        precision,
        recall,
        mlp_lp_lr: (mlp_precision + mlp_recall) / 2.0,
        mlp_precision,
        mlp_recall,
        prob_ratio: if parsed == 0 { 0.0 } else { ratio_sum / parsed as f64 },
        prob_ratio_of_avgs: if mlp_prob_sum == 0.0 { 0.0 } else { prob_sum / mlp_prob_sum },
        candidates,
        parsed,
        skipped,
    }
}
