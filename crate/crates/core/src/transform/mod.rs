//! Composable, invertible tree transforms that move parser announce points:
//! binarizations, the left-corner transform, and non-local annotations.

mod annotate;
mod binarize;
mod detransform;
mod left_corner;

pub use annotate::{announce_annotate, lc_ancestor_annotate, parent_annotate};
pub use binarize::{left_binarize, right_binarize, RightMode};
pub use detransform::detransform;
pub use left_corner::left_corner;

use crate::error::{Error, Result};
use crate::treebank::{Corpus, Tree};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    /// Left binarization.
    Lb,
    /// Right binarization to a final binary rule.
    Rb2,
    /// Right binarization to a final unary rule.
    Rb1,
    /// Right binarization to a final nullary rule.
    Rb0,
    /// Left-corner transform.
    Lc,
    /// Parent annotation.
    Pa,
    /// Left-corner-ancestor annotation.
    Lca,
    /// Announce-point annotation (parent identified at the left corner).
    Ann,
}

impl Step {
    pub fn name(self) -> &'static str {
        match self {
            Step::Lb => "lb",
            Step::Rb2 => "rb2",
            Step::Rb1 => "rb1",
            Step::Rb0 => "rb0",
            Step::Lc => "lc",
            Step::Pa => "pa",
            Step::Lca => "lca",
            Step::Ann => "ann",
        }
    }

    fn is_binarization(self) -> bool {
        matches!(self, Step::Lb | Step::Rb2 | Step::Rb1 | Step::Rb0)
    }
}

/// An ordered transform pipeline. Steps apply left to right: the spec
/// `a,b` denotes the composition whose result is `b(a(t))`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TransformSpec {
    pub steps: Vec<Step>,
}

impl TransformSpec {
    pub fn identity() -> TransformSpec {
        TransformSpec::default()
    }

    /// Parses a comma-separated, case-insensitive step list, e.g. `pa,rb0`
    /// or `lc,rb1,ann`. The empty string is the identity pipeline.
    pub fn parse(text: &str) -> Result<TransformSpec> {
        let mut steps = Vec::new();
        for part in text.split(',') {
            let name = part.trim().to_ascii_lowercase();
            if name.is_empty() {
                continue;
            }
            let step = match name.as_str() {
                "lb" => Step::Lb,
                "rb2" => Step::Rb2,
                "rb1" => Step::Rb1,
                "rb0" => Step::Rb0,
                "lc" => Step::Lc,
                "pa" => Step::Pa,
                "lca" => Step::Lca,
                "ann" => Step::Ann,
                other => {
                    return Err(Error::Transform {
                        step: other.to_string(),
                        msg: "unknown transform step".into(),
                    })
                }
            };
            steps.push(step);
        }
        let spec = TransformSpec { steps };
        spec.validate()?;
        Ok(spec)
    }

    /// Step-order sanity: at most one binarization per left-corner stage
    /// (a second one would stack composite marks ambiguously), and `ann`
    /// only after `lc`.
    pub fn validate(&self) -> Result<()> {
        let mut binarized = false;
        let mut lc_seen = false;
        for &step in &self.steps {
            match step {
                s if s.is_binarization() => {
                    if binarized {
                        return Err(Error::Transform {
                            step: s.name().into(),
                            msg: "second binarization in the same stage".into(),
                        });
                    }
                    binarized = true;
                }
                Step::Lc => {
                    binarized = false;
                    lc_seen = true;
                }
                Step::Ann
                    if !lc_seen => {
                        return Err(Error::Transform {
                            step: "ann".into(),
                            msg: "announce annotation requires a preceding lc step".into(),
                        });
                    }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.steps.is_empty()
    }
}

impl fmt::Display for TransformSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.steps.is_empty() {
            return f.write_str("none");
        }
        let names: Vec<&str> = self.steps.iter().map(|s| s.name()).collect();
        f.write_str(&names.join(","))
    }
}

impl FromStr for TransformSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<TransformSpec> {
        TransformSpec::parse(s)
    }
}

pub fn apply_step(step: Step, t: &Tree) -> Result<Tree> {
    Ok(match step {
        Step::Lb => left_binarize(t),
        Step::Rb2 => right_binarize(t, RightMode::Binary),
        Step::Rb1 => right_binarize(t, RightMode::Unary),
        Step::Rb0 => right_binarize(t, RightMode::Nullary),
        Step::Lc => left_corner(t)?,
        Step::Pa => parent_annotate(t),
        Step::Lca => lc_ancestor_annotate(t),
        Step::Ann => announce_annotate(t)?,
    })
}

/// Applies all steps left to right.
pub fn apply_pipeline(spec: &TransformSpec, t: &Tree) -> Result<Tree> {
    spec.validate()?;
    let mut cur = t.clone();
    for &step in &spec.steps {
        cur = apply_step(step, &cur)?;
    }
    Ok(cur)
}

pub fn apply_pipeline_corpus(spec: &TransformSpec, corpus: &Corpus) -> Result<Corpus> {
    let mut trees = Vec::with_capacity(corpus.trees.len());
    for (i, t) in corpus.trees.iter().enumerate() {
        trees.push(apply_pipeline(spec, t).map_err(|e| e.in_stage(format!("tree {}", i)))?);
    }
    Ok(Corpus { trees, source: corpus.source.clone() })
}

pub fn detransform_corpus(corpus: &Corpus) -> Result<Corpus> {
    let mut trees = Vec::with_capacity(corpus.trees.len());
    for (i, t) in corpus.trees.iter().enumerate() {
        trees.push(detransform(t).map_err(|e| e.in_stage(format!("tree {}", i)))?);
    }
    Ok(Corpus { trees, source: corpus.source.clone() })
}
