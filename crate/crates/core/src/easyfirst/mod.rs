//! The easy-first transition system and its neural scorer.
//!
//! Pending positions are 1-based: action `i` joins `p_i` and `p_{i+1}`.

mod action;
mod model;
mod parse;
mod pending;

pub use action::{action_count, argmax, enumerate_actions, Action, Direction, ScoredAction};
pub use model::{ModelConfig, ModelError, NodeState, ParserModel, Session, WINDOW};
pub use parse::{parse_with, LexicalScorer, ParseOutput, Scorer, TraceStep};
pub use pending::{arcs_to_heads, Arc, Pending, PendingItem};

use crate::layers::BiLstmError;
use crate::repr::ReprError;
use crate::tensor::TensorError;

#[derive(Debug, thiserror::Error)]
pub enum ParseError {
    #[error("cannot parse an empty sentence")]
    EmptySentence,
    #[error("parse is complete; no actions remain")]
    Complete,
    #[error("no relation labels available")]
    NoRelations,
    #[error("attachment position {position} is invalid for {pending} pending items")]
    InvalidPosition { position: usize, pending: usize },
    #[error("{0} pending items remain")]
    Incomplete(usize),
    #[error("rules line {line}: cannot parse {text:?}")]
    Rule { line: usize, text: String },
    #[error(transparent)]
    Repr(#[from] ReprError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

impl From<BiLstmError> for ParseError {
    fn from(e: BiLstmError) -> Self {
        ParseError::Repr(e.into())
    }
}
