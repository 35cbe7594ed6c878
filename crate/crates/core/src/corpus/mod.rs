//! Treebank reading and writing, vocabularies, and pre-trained embeddings.

mod conll;
mod embeddings;
pub mod vocab;

pub use conll::{read_conll, read_conll_with, write_conll, ReadOptions};
pub use embeddings::{load_embeddings, EmbeddingFile};
pub use vocab::{build_vocab, Symbols, Vocabulary};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single token of a treebank sentence.
///
/// `index` is 1-based; head 0 denotes the artificial root.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub index: usize,
    pub form: String,
    pub tag: String,
    pub head: usize,
    pub label: String,
}

impl Token {
    pub fn new(
        index: usize,
        form: impl Into<String>,
        tag: impl Into<String>,
        head: usize,
        label: impl Into<String>,
    ) -> Self {
        Token {
            index,
            form: form.into(),
            tag: tag.into(),
            head,
            label: label.into(),
        }
    }
}

/// A head/label pair assigned to one token, either gold or predicted.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Attachment {
    pub head: usize,
    pub label: String,
}

impl Attachment {
    pub fn new(head: usize, label: impl Into<String>) -> Self {
        Attachment {
            head,
            label: label.into(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn new(tokens: Vec<Token>) -> Self {
        Sentence { tokens }
    }

    /// Builds a sentence from `(form, tag, head, label)` tuples, numbering tokens from 1.
    pub fn from_tuples<'a>(rows: impl IntoIterator<Item = (&'a str, &'a str, usize, &'a str)>) -> Self {
        Sentence {
            tokens: rows
                .into_iter()
                .enumerate()
                .map(|(i, (form, tag, head, label))| Token::new(i + 1, form, tag, head, label))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Token by 1-based index. Index 0 (the root) has no token.
    pub fn token(&self, index: usize) -> Option<&Token> {
        index.checked_sub(1).and_then(|i| self.tokens.get(i))
    }

    /// Gold heads, indexed by `token index - 1`.
    pub fn heads(&self) -> Vec<usize> {
        self.tokens.iter().map(|t| t.head).collect()
    }

    pub fn gold_attachments(&self) -> Vec<Attachment> {
        self.tokens
            .iter()
            .map(|t| Attachment::new(t.head, t.label.clone()))
            .collect()
    }

    /// Returns a copy carrying `attachments` in place of the gold annotation.
    pub fn with_attachments(&self, attachments: &[Attachment]) -> Result<Sentence> {
        if attachments.len() != self.len() {
            return Err(Error::Mismatch {
                sentence: 0,
                message: format!(
                    "{} attachments for {} tokens",
                    attachments.len(),
                    self.len()
                ),
            });
        }
        let tokens = self
            .tokens
            .iter()
            .zip(attachments)
            .map(|(t, a)| Token {
                head: a.head,
                label: a.label.clone(),
                ..t.clone()
            })
            .collect();
        Ok(Sentence { tokens })
    }

    /// Checks that the gold heads form a tree rooted at the artificial root.
    ///
    /// `sentence` is only used to label the error.
    pub fn validate_tree(&self, sentence: usize) -> Result<()> {
        let n = self.len();
        let err = |message: String| Error::Structure { sentence, message };
        for (i, t) in self.tokens.iter().enumerate() {
            if t.index != i + 1 {
                return Err(err(format!("token {} has index {}", i + 1, t.index)));
            }
            if t.form.is_empty() {
                return Err(err(format!("token {} has an empty form", t.index)));
            }
            if t.head == t.index {
                return Err(err(format!("token {} is its own head", t.index)));
            }
            if t.head > n {
                return Err(err(format!(
                    "token {} has head {} beyond sentence length {}",
                    t.index, t.head, n
                )));
            }
        }
        // Every token must reach the root by following heads.
        let mut state = vec![0u8; n + 1]; // 0 = unvisited, 1 = on path, 2 = reaches root
        state[0] = 2;
        for start in 1..=n {
            let mut path = Vec::new();
            let mut cur = start;
            while state[cur] == 0 {
                state[cur] = 1;
                path.push(cur);
                cur = self.tokens[cur - 1].head;
            }
            if state[cur] == 1 {
                return Err(err(format!("cycle through token {}", cur)));
            }
            for p in path {
                state[p] = 2;
            }
        }
        Ok(())
    }

    /// Whether every arc is projective with respect to the artificial root at position 0.
    pub fn is_projective(&self) -> bool {
        let heads = self.heads();
        let n = heads.len();
        let dominated = |ancestor: usize, mut node: usize| -> bool {
            while node != 0 {
                if node == ancestor {
                    return true;
                }
                node = heads[node - 1];
            }
            ancestor == 0
        };
        for dep in 1..=n {
            let head = heads[dep - 1];
            let (lo, hi) = if head < dep { (head, dep) } else { (dep, head) };
            for between in lo + 1..hi {
                if !dominated(head, between) {
                    return false;
                }
            }
        }
        true
    }
}

/// Checks that there is exactly one attachment per token of every sentence.
pub fn check_prediction_shape(sentences: &[Sentence], predicted: &[Vec<Attachment>]) -> Result<()> {
    if sentences.len() != predicted.len() {
        return Err(Error::Mismatch {
            sentence: sentences.len().min(predicted.len()),
            message: format!(
                "{} sentences but {} predictions",
                sentences.len(),
                predicted.len()
            ),
        });
    }
    for (i, (s, p)) in sentences.iter().zip(predicted).enumerate() {
        if s.len() != p.len() {
            return Err(Error::Mismatch {
                sentence: i,
                message: format!("{} tokens but {} predicted attachments", s.len(), p.len()),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detects_cycles() {
        let s = Sentence::from_tuples(vec![("a", "X", 2, "l"), ("b", "X", 1, "l")]);
        assert!(matches!(s.validate_tree(3), Err(Error::Structure { sentence: 3, .. })));
    }

    #[test]
    fn projectivity() {
        let proj = Sentence::from_tuples(vec![("a", "X", 2, "l"), ("b", "X", 0, "l")]);
        assert!(proj.is_projective());
        // 1 <- 3, 4 <- 2: arc 2 -> 4 spans token 3, which 2 does not dominate.
        let crossing = Sentence::from_tuples(vec![
            ("a", "X", 3, "l"),
            ("b", "X", 3, "l"),
            ("c", "X", 0, "l"),
            ("d", "X", 2, "l"),
        ]);
        crossing.validate_tree(0).unwrap();
        assert!(!crossing.is_projective());
    }
}
