use std::collections::HashMap;
use std::io::BufRead;

use crate::error::{Error, Result};

/// Word vectors read from a word2vec-style text file.
#[derive(Clone, Debug, Default)]
pub struct EmbeddingFile {
    dimension: usize,
    forms: Vec<String>,
    vectors: Vec<Vec<f32>>,
    index: HashMap<String, usize>,
}

impl EmbeddingFile {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    pub fn get(&self, form: &str) -> Option<&[f32]> {
        self.index.get(form).map(|&i| self.vectors[i].as_slice())
    }

    pub fn forms(&self) -> impl Iterator<Item = &str> {
        self.forms.iter().map(String::as_str)
    }
}

/// Loads `form v1 ... vd` lines. A leading `count dim` header is skipped;
/// duplicate forms keep their first vector.
pub fn load_embeddings<R: BufRead>(reader: R, expected_dim: usize) -> Result<EmbeddingFile> {
    let mut embeddings = EmbeddingFile {
        dimension: expected_dim,
        ..Default::default()
    };

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let mut fields = line.split_whitespace();
        let form = match fields.next() {
            Some(form) => form,
            None => continue,
        };
        let values: Vec<&str> = fields.collect();

        if lineno == 0 && values.len() == 1 {
            if let (Ok(_), Ok(dim)) = (form.parse::<usize>(), values[0].parse::<usize>()) {
                if dim != expected_dim {
                    return Err(Error::Parse {
                        line: 1,
                        message: format!("header dimension {} but expected {}", dim, expected_dim),
                    });
                }
                continue;
            }
        }

        if values.len() != expected_dim {
            return Err(Error::Parse {
                line: lineno + 1,
                message: format!(
                    "vector has {} values but expected {}",
                    values.len(),
                    expected_dim
                ),
            });
        }
        let vector = values
            .iter()
            .map(|v| v.parse::<f32>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                line: lineno + 1,
                message: format!("invalid vector component: {}", e),
            })?;

        if embeddings.index.contains_key(form) {
            continue;
        }
        embeddings.index.insert(form.to_owned(), embeddings.forms.len());
        embeddings.forms.push(form.to_owned());
        embeddings.vectors.push(vector);
    }

    Ok(embeddings)
}
