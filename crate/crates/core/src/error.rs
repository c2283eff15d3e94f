use thiserror::Error;

use crate::relcore::Attr;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("query is not simple: two relations share scheme {0}")]
    NotSimple(String),
    #[error("query is not binary: relation over {0} has arity {1}")]
    NotBinary(String, usize),
    #[error("attribute {0:?} is not part of the scheme")]
    UnknownAttribute(Attr),
    #[error("{0}")]
    Domain(String),
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("{what} too large: {size} exceeds the limit of {limit}")]
    TooLarge {
        what: &'static str,
        size: usize,
        limit: usize,
    },
    #[error("machine {from} addressed machine {dest}, but the cluster has {p} machines")]
    BadDestination { from: usize, dest: usize, p: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
