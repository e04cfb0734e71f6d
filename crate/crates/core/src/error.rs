use alloc::string::String;

use crate::kb::Split;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },

    #[error("unknown entity {name} in {split} split")]
    UnknownEntity { name: String, split: Split },

    #[error("unknown relation {name} in {split} split")]
    UnknownRelation { name: String, split: Split },

    #[error("{0} split is empty")]
    EmptySplit(Split),

    #[error("{kind} id {index} out of range (have {bound})")]
    IdOutOfRange {
        kind: &'static str,
        index: usize,
        bound: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
