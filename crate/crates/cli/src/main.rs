//! Batch experiment driver: induce grammars from transformed treebanks,
//! parse incrementally, compare against the exhaustive oracle, and emit
//! report rows and beam-factor sweeps.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use parselab::error::Error;
use parselab::eval::{parseval, Report};
use parselab::experiment::{
    induce_from, run_sweep, run_with_grammar, sentence_log, sweep_csv, ExperimentConfig,
};
use parselab::grammar::{induce_pcfg, Pcfg};
use parselab::lookahead::{estimate_lookahead, LookaheadTable};
use parselab::oracle::mlp_parse;
use parselab::parser::{parse_corpus, BeamConfig, CorpusItem};
use parselab::symbol::Symbol;
use parselab::transform::{apply_pipeline_corpus, detransform_corpus, TransformSpec};
use parselab::treebank::{normalize_corpus, read_trees, write_tree, Corpus, NormalizeOptions};

#[derive(Parser)]
#[command(
    name = "parselab",
    about = "Treebank grammars, tree transforms, and incremental best-first parsing",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct BeamArgs {
    /// Base beam factor α; the beam threshold is α·β times the best
    /// success probability
    #[arg(long, default_value_t = 1e-4)]
    beam_factor: f64,
    /// Per-word bound on pending-heap pushes (the left-recursion guard)
    #[arg(long, default_value_t = 100_000)]
    max_states: u64,
    /// Probability floor for unseen look-ahead pairs
    #[arg(long, default_value_t = 0.0)]
    lookahead_floor: f64,
}

impl BeamArgs {
    fn config(&self) -> BeamConfig {
        BeamConfig {
            base_beam_factor: self.beam_factor,
            max_states_per_word: self.max_states,
            lookahead_floor: self.lookahead_floor,
        }
    }
}

#[derive(Args, Clone)]
struct NormalizeArgs {
    /// Keep word leaves instead of making POS tags the terminals
    #[arg(long)]
    keep_words: bool,
    /// Keep functional-tag suffixes on nonterminal labels
    #[arg(long)]
    keep_tags: bool,
}

impl NormalizeArgs {
    fn options(&self) -> NormalizeOptions {
        NormalizeOptions { drop_words: !self.keep_words, strip_tags: !self.keep_tags }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline: normalize, transform, induce, parse, de-transform,
    /// score against the exhaustive oracle, and write one report row per transform
    Experiment {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Transform pipeline, e.g. "pa,rb0"; repeat for several rows
        #[arg(long = "transform", default_values_t = [String::new()])]
        transforms: Vec<String>,
        #[command(flatten)]
        beam: BeamArgs,
        /// Skip test sentences longer than this many terminals
        #[arg(long, default_value_t = 40)]
        max_length: usize,
        #[command(flatten)]
        normalize: NormalizeArgs,
        /// Output directory for report and per-sentence logs
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Parse the test set at several base beam factors and emit plot-ready rows
    Sweep {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long = "transform", default_values_t = [String::new()])]
        transforms: Vec<String>,
        /// Comma-separated beam factors
        #[arg(long, default_value = "1e-3,1e-4,1e-5,1e-6")]
        sweep: String,
        #[arg(long, default_value_t = 100_000)]
        max_states: u64,
        #[arg(long, default_value_t = 40)]
        max_length: usize,
        #[command(flatten)]
        normalize: NormalizeArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Induce a grammar and look-ahead table from (transformed) training trees
    Induce {
        #[arg(long)]
        train: PathBuf,
        #[arg(long, default_value = "")]
        transform: String,
        #[command(flatten)]
        normalize: NormalizeArgs,
        /// Directory receiving grammar.txt and lookahead.txt
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply (or invert) a transform pipeline over a tree file
    Transform {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "")]
        transform: String,
        /// De-transform instead of transforming
        #[arg(long)]
        invert: bool,
        #[command(flatten)]
        normalize: NormalizeArgs,
        /// Skip normalization entirely (input is already terminal-level trees)
        #[arg(long)]
        no_normalize: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse sentences (one per line, whitespace-separated terminals) with a
    /// grammar and look-ahead table written by `induce`
    Parse {
        #[arg(long)]
        grammar: PathBuf,
        #[arg(long)]
        lookahead: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        beam: BeamArgs,
        #[arg(long, default_value_t = 40)]
        max_length: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exhaustive maximum-likelihood parses of sentences under a grammar
    Mlp {
        #[arg(long)]
        grammar: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 40)]
        max_length: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Labelled precision/recall of candidate trees against gold trees
    Eval {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        candidate: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum CliError {
    Config(String),
    Pipeline(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Pipeline(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version requests are not errors
            use clap::error::ErrorKind;
            let kind = e.kind();
            let _ = e.print();
            return if matches!(kind, ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("configuration error: {}", msg);
            ExitCode::from(1)
        }
        Err(CliError::Pipeline(msg)) => {
            eprintln!("pipeline error: {}", msg);
            ExitCode::from(2)
        }
    }
}

fn read_corpus(path: &Path) -> Result<Corpus, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {}", path.display(), e)))?;
    let mut corpus = read_trees(&text)?;
    corpus.source = Some(path.display().to_string());
    Ok(corpus)
}

fn read_sentences(path: &Path) -> Result<Vec<Vec<Symbol>>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {}", path.display(), e)))?;
    Ok(text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split_whitespace().map(Symbol::parse).collect())
        .collect())
}

fn parse_spec(text: &str) -> Result<TransformSpec, CliError> {
    TransformSpec::parse(text).map_err(|e| CliError::Config(e.to_string()))
}

fn parse_alphas(text: &str) -> Result<Vec<f64>, CliError> {
    let alphas: Vec<f64> = text
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("unreadable beam factor '{}'", s)))
        })
        .collect::<Result<_, _>>()?;
    for &a in &alphas {
        if !(a > 0.0 && a <= 1.0) {
            return Err(CliError::Config(format!("beam factor {} out of (0,1]", a)));
        }
    }
    if alphas.len() < 2 {
        return Err(CliError::Config("a sweep needs at least two beam factors".into()));
    }
    Ok(alphas)
}

/// Writes to stdout, exiting quietly when the reading end of a pipe has
/// gone away.
fn print_out(content: &str) {
    use std::io::Write;
    let mut stdout = std::io::stdout();
    if stdout.write_all(content.as_bytes()).is_err() || stdout.flush().is_err() {
        std::process::exit(0);
    }
}

fn emit(out: Option<&Path>, name: &str, content: &str) -> Result<(), CliError> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)
                .map_err(|e| CliError::Config(format!("cannot create {}: {}", dir.display(), e)))?;
            let path = dir.join(name);
            fs::write(&path, content)
                .map_err(|e| CliError::Config(format!("cannot write {}: {}", path.display(), e)))?;
        }
        None => print_out(content),
    }
    Ok(())
}

fn emit_file(out: Option<&Path>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, content)
            .map_err(|e| CliError::Config(format!("cannot write {}: {}", path.display(), e))),
        None => {
            print_out(content);
            Ok(())
        }
    }
}

fn reports_text(reports: &[Report], format: Format) -> String {
    match format {
        Format::Csv => {
            let mut out = String::new();
            let _ = writeln!(out, "{}", Report::csv_header());
            for r in reports {
                let _ = writeln!(out, "{}", r.csv_row());
            }
            out
        }
        Format::Json => {
            let mut text = serde_json::to_string_pretty(reports).expect("report serializes");
            text.push('\n');
            text
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Experiment {
            train,
            test,
            transforms,
            beam,
            max_length,
            normalize,
            out,
            format,
        } => {
            let train = read_corpus(&train)?;
            let test = read_corpus(&test)?;
            let mut reports = Vec::new();
            for spec_text in &transforms {
                let cfg = ExperimentConfig {
                    transform: parse_spec(spec_text)?,
                    beam: beam.config(),
                    max_length,
                    normalize: normalize.options(),
                };
                cfg.beam.validate().map_err(|e| CliError::Config(e.to_string()))?;
                let induced = induce_from(&train, &cfg)?;
                let result = run_with_grammar(&induced, &test, &cfg)?;
                if out.is_some() {
                    let log_name = format!(
                        "sentences-{}.log",
                        cfg.transform.to_string().replace(',', "-")
                    );
                    emit(out.as_deref(), &log_name, &sentence_log(&result.records))?;
                }
                reports.push(result.report);
            }
            let name = match format {
                Format::Csv => "report.csv",
                Format::Json => "report.json",
            };
            emit(out.as_deref(), name, &reports_text(&reports, format))?;
            if out.is_some() {
                // a copy on stdout for quick reading
                print_out(&reports_text(&reports, Format::Csv));
            }
            Ok(())
        }
        Command::Sweep {
            train,
            test,
            transforms,
            sweep,
            max_states,
            max_length,
            normalize,
            out,
        } => {
            let alphas = parse_alphas(&sweep)?;
            let train = read_corpus(&train)?;
            let test = read_corpus(&test)?;
            let mut rows = Vec::new();
            for spec_text in &transforms {
                let cfg = ExperimentConfig {
                    transform: parse_spec(spec_text)?,
                    beam: BeamConfig {
                        max_states_per_word: max_states,
                        ..BeamConfig::default()
                    },
                    max_length,
                    normalize: normalize.options(),
                };
                rows.extend(run_sweep(&train, &test, &cfg, &alphas)?);
            }
            emit(out.as_deref(), "sweep.csv", &sweep_csv(&rows))?;
            if out.is_some() {
                print_out(&sweep_csv(&rows));
            }
            Ok(())
        }
        Command::Induce { train, transform, normalize, out } => {
            let train = read_corpus(&train)?;
            let spec = parse_spec(&transform)?;
            let normalized = normalize_corpus(&train, normalize.options())?;
            let transformed = apply_pipeline_corpus(&spec, &normalized)?;
            let grammar = induce_pcfg(&transformed)?;
            let table = estimate_lookahead(&transformed, &grammar)?;
            emit(Some(&out), "grammar.txt", &grammar.to_text())?;
            emit(Some(&out), "lookahead.txt", &table.to_text(&grammar))?;
            eprintln!(
                "induced {} rules over {} trees",
                grammar.rule_count_without_root(),
                transformed.len()
            );
            Ok(())
        }
        Command::Transform { input, transform, invert, normalize, no_normalize, out } => {
            let corpus = read_corpus(&input)?;
            let result = if invert {
                detransform_corpus(&corpus)?
            } else {
                let spec = parse_spec(&transform)?;
                let prepared = if no_normalize {
                    corpus
                } else {
                    normalize_corpus(&corpus, normalize.options())?
                };
                apply_pipeline_corpus(&spec, &prepared)?
            };
            let mut text = String::new();
            for t in &result.trees {
                let _ = writeln!(text, "{}", write_tree(t));
            }
            emit_file(out.as_deref(), &text)
        }
        Command::Parse { grammar, lookahead, input, beam, max_length, out } => {
            let g = load_grammar(&grammar)?;
            let table = load_table(&lookahead, &g)?;
            let sentences = read_sentences(&input)?;
            let cfg = beam.config();
            cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
            let outputs = parse_corpus(&g, &table, &sentences, &cfg, max_length)?;
            let mut text = String::new();
            for item in &outputs {
                match item {
                    CorpusItem::Skipped { length } => {
                        let _ = writeln!(text, "skipped\tlength={}", length);
                    }
                    CorpusItem::Done(o) => match (&o.failure, &o.tree) {
                        (None, Some(tree)) => {
                            let _ = writeln!(
                                text,
                                "ok\tp={}\tstates={}\t{}",
                                o.probability,
                                o.states_considered,
                                write_tree(tree)
                            );
                        }
                        (Some(f), _) => {
                            let _ = writeln!(text, "fail\t{}\tstates={}", f, o.states_considered);
                        }
                        _ => unreachable!(),
                    },
                }
            }
            emit_file(out.as_deref(), &text)
        }
        Command::Mlp { grammar, input, max_length, out } => {
            let g = load_grammar(&grammar)?;
            let sentences = read_sentences(&input)?;
            let mut text = String::new();
            for sent in &sentences {
                if sent.len() > max_length {
                    let _ = writeln!(text, "skipped\tlength={}", sent.len());
                    continue;
                }
                match mlp_parse(&g, sent)? {
                    Some(p) => {
                        let _ =
                            writeln!(text, "ok\tp={}\t{}", p.probability, write_tree(&p.tree));
                    }
                    None => {
                        let _ = writeln!(text, "fail\tno-parse");
                    }
                }
            }
            emit_file(out.as_deref(), &text)
        }
        Command::Eval { gold, candidate, format, out } => {
            let gold = read_corpus(&gold)?;
            let candidate = read_corpus(&candidate)?;
            if gold.len() != candidate.len() {
                return Err(CliError::Pipeline(format!(
                    "gold has {} trees but candidate has {}",
                    gold.len(),
                    candidate.len()
                )));
            }
            let mut matched = 0usize;
            let mut g_total = 0usize;
            let mut c_total = 0usize;
            let mut lines = String::new();
            for (i, (g, c)) in gold.trees.iter().zip(&candidate.trees).enumerate() {
                let p = parseval(g, c)
                    .map_err(|e| CliError::Pipeline(format!("sentence {}: {}", i, e)))?;
                matched += p.matched;
                g_total += p.gold;
                c_total += p.candidate;
                let _ = writeln!(
                    lines,
                    "{},{},{},{},{},{}",
                    i,
                    p.precision(),
                    p.recall(),
                    p.matched,
                    p.gold,
                    p.candidate
                );
            }
            let precision = if c_total == 0 { 0.0 } else { matched as f64 / c_total as f64 };
            let recall = if g_total == 0 { 0.0 } else { matched as f64 / g_total as f64 };
            let text = match format {
                Format::Csv => format!(
                    "Sentence,Labelled Precision,Labelled Recall,Matched,Gold,Candidate\n{}\
                     total,{},{},{},{},{}\n",
                    lines, precision, recall, matched, g_total, c_total
                ),
                Format::Json => {
                    let value = serde_json::json!({
                        "precision": precision,
                        "recall": recall,
                        "avg_lp_lr": (precision + recall) / 2.0,
                        "matched": matched,
                        "gold": g_total,
                        "candidate": c_total,
                    });
                    let mut s = serde_json::to_string_pretty(&value).expect("serializes");
                    s.push('\n');
                    s
                }
            };
            emit_file(out.as_deref(), &text)
        }
    }
}

fn load_grammar(path: &Path) -> Result<Pcfg, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {}", path.display(), e)))?;
    Ok(Pcfg::from_text(&text)?)
}

fn load_table(path: &Path, g: &Pcfg) -> Result<LookaheadTable, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {}", path.display(), e)))?;
    Ok(LookaheadTable::from_text(&text, g)?)
}
