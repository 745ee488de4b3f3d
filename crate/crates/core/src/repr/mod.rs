//! Word representations: vocabularies, frozen pretrained vectors, and the
//! word/character/sentence encoders that produce contextual vectors.

mod encoder;
mod pretrained;
mod vocab;

use std::path::PathBuf;

pub use encoder::{ReprConfig, WordDropout, WordEncoder};
pub use pretrained::{load_pretrained, parse_pretrained, Coverage, PretrainedTable};
pub use vocab::{build_vocab, SymbolTable, Vocab, PAD, UNK};

use crate::layers::BiLstmError;
use crate::tensor::TensorError;

#[derive(Debug, thiserror::Error)]
pub enum ReprError {
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("pretrained embedding file has no vectors")]
    EmptyPretrained,
    #[error("line {line}: invalid pretrained embedding header")]
    PretrainedHeader { line: usize },
    #[error("line {line}: expected {expected} vector components, found {found}")]
    PretrainedDimension {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: invalid vector component {value:?}")]
    PretrainedValue { line: usize, value: String },
    #[error("pretrained features enabled but no pretrained table supplied")]
    MissingPretrained,
    #[error("pretrained table has dimension {found}, model expects {expected}")]
    PretrainedMismatch { expected: usize, found: usize },
    #[error("cannot encode an empty word")]
    EmptyWord,
    #[error("cannot encode an empty sentence")]
    EmptySentence,
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

impl From<BiLstmError> for ReprError {
    fn from(e: BiLstmError) -> Self {
        match e {
            BiLstmError::EmptyInput => ReprError::EmptySentence,
            BiLstmError::Tensor(t) => ReprError::Tensor(t),
        }
    }
}
