use thiserror::Error;

use crate::harness::DatasetError;
use crate::induction::{DecodeError, GoldError, InductionError};
use crate::kb::KbError;
use crate::scorer::{CheckpointError, EmbeddingError, ScorerError};
use crate::sexpr::{ExecError, ParseError, SequenceError};

/// Any failure surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Sequence(#[from] SequenceError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Induction(#[from] InductionError),
    #[error(transparent)]
    Gold(#[from] GoldError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Kb(_) => "kb",
            Error::Parse(_) => "parse",
            Error::Sequence(_) => "sequence",
            Error::Exec(_) => "execute",
            Error::Induction(_) => "induction",
            Error::Gold(_) => "gold",
            Error::Decode(_) => "decode",
            Error::Scorer(_) => "scorer",
            Error::Checkpoint(_) => "checkpoint",
            Error::Embedding(_) => "embedding",
            Error::Dataset(_) => "dataset",
            Error::Io(_) => "io",
        }
    }
}
