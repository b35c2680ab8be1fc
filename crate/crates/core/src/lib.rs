//! A laboratory for probabilistic predictive parsing over treebank grammars.
//!
//! The pipeline: read bracketed trees, normalize them so POS tags are the
//! terminals, rewrite them with composable invertible transforms
//! (binarizations, the left-corner transform, non-local annotations), induce
//! a PCFG and look-ahead tables by relative frequency, parse incrementally
//! with a best-first beam search, undo the transforms on the output, and
//! score against an exhaustive maximum-likelihood-parse oracle.

pub mod error;
pub mod eval;
pub mod experiment;
pub mod grammar;
pub mod lookahead;
pub mod oracle;
pub mod parser;
pub mod symbol;
pub mod transform;
pub mod treebank;

pub use error::{Error, Result};
pub use symbol::{Mark, Symbol};
pub use treebank::{read_trees, write_tree, Corpus, Tree};
