//! A greedy transition-based dependency parser whose word representations
//! can be composed from characters by a CNN or a BiLSTM.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod nn;
pub mod parser;
pub mod repr;
pub mod transition;

pub use corpus::{read_conll, write_conll, Attachment, Sentence, Token, Vocabulary};
pub use error::{Error, Result};
pub use parser::{load_model, save_model, train, Model, ModelConfig, TrainSchedule};
pub use repr::{Mode, ReprConfig};
pub use transition::{RootPolicy, Transition, TransitionSystem};
