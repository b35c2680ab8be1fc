use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("tree syntax error at offset {offset}: {msg}")]
    TreeSyntax { offset: usize, msg: String },

    #[error("normalize: {0}")]
    Normalize(String),

    #[error("transform ({step}): {msg}")]
    Transform { step: String, msg: String },

    #[error("detransform: {0}")]
    Detransform(String),

    #[error("grammar induction: {0}")]
    Induce(String),

    #[error("grammar file, line {line}: {msg}")]
    GrammarFile { line: usize, msg: String },

    #[error("look-ahead table: {0}")]
    Lookahead(String),

    #[error("parser: {0}")]
    Parser(String),

    #[error("oracle parser: {0}")]
    Oracle(String),

    #[error("evaluation: {0}")]
    Eval(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Labels an error with the pipeline stage (and sentence, where known)
    /// it came from.
    pub fn in_stage(self, stage: impl Into<String>) -> Error {
        Error::Stage { stage: stage.into(), source: Box::new(self) }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
