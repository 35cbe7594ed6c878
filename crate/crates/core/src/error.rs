use std::io;

use thiserror::Error;

use crate::transition::TransitionKind;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("sentence {sentence}: {message}")]
    Structure { sentence: usize, message: String },

    #[error("{kind:?} is not legal: {reason}")]
    IllegalTransition {
        kind: TransitionKind,
        reason: &'static str,
    },

    #[error("gold tree cannot be derived by the transition system")]
    UnreachableTree,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("gold transition {0} is masked as illegal")]
    MaskedGold(usize),

    #[error("non-finite gradient in parameter {0}")]
    NonFiniteGradient(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("sentence {sentence}: {message}")]
    Mismatch { sentence: usize, message: String },
}
