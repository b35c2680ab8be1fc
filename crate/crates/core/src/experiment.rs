//! End-to-end experiment driver: normalize, transform, induce, parse,
//! de-transform, score against the exhaustive oracle, aggregate.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::{aggregate, parseval, Report, SentenceRecord, SentenceStatus};
use crate::grammar::{induce_pcfg, Pcfg};
use crate::lookahead::{estimate_lookahead, LookaheadTable};
use crate::oracle::mlp_parse;
use crate::parser::{parse_corpus, BeamConfig, CorpusItem, ParseFailure};
use crate::symbol::Symbol;
use crate::transform::{apply_pipeline_corpus, detransform, TransformSpec};
use crate::treebank::{normalize_corpus, Corpus, NormalizeOptions, Tree};

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub transform: TransformSpec,
    pub beam: BeamConfig,
    /// Test sentences longer than this are skipped, not failed.
    pub max_length: usize,
    pub normalize: NormalizeOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            transform: TransformSpec::identity(),
            beam: BeamConfig::default(),
            max_length: 40,
            normalize: NormalizeOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub report: Report,
    pub records: Vec<SentenceRecord>,
}

/// Grammar and tables induced from a transformed training corpus.
pub struct InducedGrammar {
    pub grammar: Pcfg,
    pub table: LookaheadTable,
}

pub fn induce_from(train: &Corpus, cfg: &ExperimentConfig) -> Result<InducedGrammar> {
    let normalized =
        normalize_corpus(train, cfg.normalize).map_err(|e| e.in_stage("normalize train"))?;
    let transformed = apply_pipeline_corpus(&cfg.transform, &normalized)
        .map_err(|e| e.in_stage("transform train"))?;
    let grammar = induce_pcfg(&transformed).map_err(|e| e.in_stage("induce"))?;
    let table =
        estimate_lookahead(&transformed, &grammar).map_err(|e| e.in_stage("look-ahead"))?;
    Ok(InducedGrammar { grammar, table })
}

pub fn run_experiment(
    train: &Corpus,
    test: &Corpus,
    cfg: &ExperimentConfig,
) -> Result<ExperimentResult> {
    let induced = induce_from(train, cfg)?;
    run_with_grammar(&induced, test, cfg)
}

/// Runs the test half of an experiment against an already induced grammar
/// (shared across the α values of a sweep).
pub fn run_with_grammar(
    induced: &InducedGrammar,
    test: &Corpus,
    cfg: &ExperimentConfig,
) -> Result<ExperimentResult> {
    let gold =
        normalize_corpus(test, cfg.normalize).map_err(|e| e.in_stage("normalize test"))?;
    let sentences: Vec<Vec<Symbol>> = gold.trees.iter().map(Tree::terminal_yield).collect();

    let outputs = parse_corpus(
        &induced.grammar,
        &induced.table,
        &sentences,
        &cfg.beam,
        cfg.max_length,
    )
    .map_err(|e| e.in_stage("parse"))?;

    let records: Vec<SentenceRecord> = outputs
        .par_iter()
        .enumerate()
        .map(|(i, item)| build_record(induced, &gold.trees[i], i, &sentences[i], item))
        .collect::<Result<_>>()?;

    let report = aggregate(
        &cfg.transform.to_string(),
        induced.grammar.rule_count_without_root(),
        &records,
    );
    Ok(ExperimentResult { report, records })
}

fn build_record(
    induced: &InducedGrammar,
    gold: &Tree,
    index: usize,
    sentence: &[Symbol],
    item: &CorpusItem,
) -> Result<SentenceRecord> {
    let stage = |e: Error, what: &str| e.in_stage(format!("{} (sentence {})", what, index));
    let output = match item {
        CorpusItem::Skipped { length } => {
            return Ok(SentenceRecord {
                index,
                length: *length,
                status: SentenceStatus::Skipped,
                states: 0,
                parser_log_prob: None,
                mlp_log_prob: None,
                parseval: None,
                mlp_parseval: None,
                tree: None,
            })
        }
        CorpusItem::Done(output) => output,
    };
    let mut record = SentenceRecord {
        index,
        length: sentence.len(),
        status: match output.failure {
            None => SentenceStatus::Parsed,
            Some(ParseFailure::NoParse(_)) => SentenceStatus::NoParse,
            Some(ParseFailure::StateBoundExceeded(_)) => SentenceStatus::StateBound,
        },
        states: output.states_considered,
        parser_log_prob: None,
        mlp_log_prob: None,
        parseval: None,
        mlp_parseval: None,
        tree: None,
    };
    let Some(parsed_tree) = &output.tree else {
        return Ok(record);
    };

    // every parse is de-transformed before evaluation
    let plain = detransform(parsed_tree).map_err(|e| stage(e, "de-transform"))?;
    record.parseval = Some(parseval(gold, &plain).map_err(|e| stage(e, "parseval"))?);
    record.parser_log_prob = Some(output.log_probability);
    record.tree = Some(plain.bracketed());

    // the oracle parses the same sentence with the same grammar; its output
    // is de-transformed and scored identically
    let mlp = mlp_parse(&induced.grammar, sentence)
        .map_err(|e| stage(e, "mlp"))?
        .ok_or_else(|| {
            stage(
                Error::Oracle("beam parser found a parse the exhaustive parser lacks".into()),
                "mlp",
            )
        })?;
    let mlp_plain = detransform(&mlp.tree).map_err(|e| stage(e, "de-transform mlp"))?;
    record.mlp_parseval = Some(parseval(gold, &mlp_plain).map_err(|e| stage(e, "parseval mlp"))?);
    record.mlp_log_prob = Some(mlp.log_probability);
    Ok(record)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub transform: String,
    pub alpha: f64,
    pub coverage: f64,
    pub avg_states: f64,
    pub avg_lp_lr: f64,
    pub prob_ratio: f64,
}

use serde::Serialize;

/// One row per (transform, α), α descending, grammar induced once per
/// transform.
pub fn run_sweep(
    train: &Corpus,
    test: &Corpus,
    cfg: &ExperimentConfig,
    alphas: &[f64],
) -> Result<Vec<SweepRow>> {
    if alphas.len() < 2 {
        return Err(Error::Parser("a sweep needs at least two beam factors".into()));
    }
    let induced = induce_from(train, cfg)?;
    let mut alphas: Vec<f64> = alphas.to_vec();
    alphas.sort_by(|a, b| b.total_cmp(a));
    let mut rows = Vec::with_capacity(alphas.len());
    for alpha in alphas {
        let mut run_cfg = cfg.clone();
        run_cfg.beam.base_beam_factor = alpha;
        let result = run_with_grammar(&induced, test, &run_cfg)?;
        rows.push(SweepRow {
            transform: cfg.transform.to_string(),
            alpha,
            coverage: result.report.pct_parsed,
            avg_states: result.report.avg_states,
            avg_lp_lr: result.report.avg_lp_lr,
            prob_ratio: result.report.prob_ratio,
        });
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("Transform,Beam Factor,Coverage,Avg. States Considered,Avg. Labelled Precision and Recall,Ratio of Avg. Prob to Avg. MLP Prob\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.transform, r.alpha, r.coverage, r.avg_states, r.avg_lp_lr, r.prob_ratio
        ));
    }
    out
}

/// The per-sentence log: one line per sentence.
pub fn sentence_log(records: &[SentenceRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&format!(
            "{}\t{}\t{}\tstates={}\tlogprob={}\tmlp_logprob={}\t{}\n",
            r.index,
            r.status.name(),
            r.length,
            r.states,
            r.parser_log_prob.map(|p| p.to_string()).unwrap_or_else(|| "-".into()),
            r.mlp_log_prob.map(|p| p.to_string()).unwrap_or_else(|| "-".into()),
            r.tree.as_deref().unwrap_or("-")
        ));
    }
    out
}
