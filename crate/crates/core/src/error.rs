use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("no quadruple for entity pair ({head}, {tail})")]
    UnknownPair { head: u32, tail: u32 },

    #[error("relation {relation} not present on entity pair ({head}, {tail})")]
    UnknownRelation { head: u32, relation: u32, tail: u32 },

    #[error("conditional probability undefined: no sample satisfies the conditions on pair ({head}, {tail})")]
    UndefinedProbability { head: u32, tail: u32 },

    #[error("omission count {requested} is beyond the reachable total {reachable}")]
    UnreachableOmission { requested: f64, reachable: f64 },

    #[error("message was compressed against graph {expected}, but the supplied graph is {actual}")]
    IncompatibleKnowledge { expected: String, actual: String },

    #[error("corrupt message: {0}")]
    CorruptMessage(String),

    #[error("decode error: {0}")]
    Decode(String),

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn decode(msg: impl Into<String>) -> Self {
        Error::Decode(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
