use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::Sentence;

pub const NULL: &str = "<NULL>";
pub const ROOT: &str = "<ROOT>";
pub const UNK: &str = "<UNK>";
pub const NOLABEL: &str = "<NOLABEL>";

pub const SOW: &str = "<SOW>";
pub const EOW: &str = "<EOW>";
pub const MUL: &str = "<MUL>";
pub const PAD: &str = "<PAD>";

/// An insertion-ordered symbol table. Reserved symbols occupy the first ids.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Symbols {
    symbols: Vec<String>,
    index: HashMap<String, usize>,
}

impl Symbols {
    /// Creates a table with `reserved` symbols, which are sorted lexicographically first.
    pub fn with_reserved(reserved: &[&str]) -> Self {
        let mut reserved: Vec<&str> = reserved.to_vec();
        reserved.sort_unstable();
        let mut symbols = Symbols {
            symbols: Vec::new(),
            index: HashMap::new(),
        };
        for r in reserved {
            symbols.insert(r);
        }
        symbols
    }

    /// Returns the id of `symbol`, adding it if absent.
    pub fn insert(&mut self, symbol: &str) -> usize {
        if let Some(&id) = self.index.get(symbol) {
            return id;
        }
        let id = self.symbols.len();
        self.symbols.push(symbol.to_owned());
        self.index.insert(symbol.to_owned(), id);
        id
    }

    pub fn get(&self, symbol: &str) -> Option<usize> {
        self.index.get(symbol).copied()
    }

    pub fn symbol(&self, id: usize) -> Option<&str> {
        self.symbols.get(id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.symbols.iter().map(String::as_str)
    }
}

impl From<Vec<String>> for Symbols {
    fn from(symbols: Vec<String>) -> Self {
        let index = symbols
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        Symbols { symbols, index }
    }
}

impl From<Symbols> for Vec<String> {
    fn from(symbols: Symbols) -> Self {
        symbols.symbols
    }
}

/// Word, tag, label and character inventories of a training corpus.
///
/// All lookups are total: unseen words, tags and characters map to UNK,
/// unseen labels to NULL.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    words: Symbols,
    word_counts: Vec<u32>,
    tags: Symbols,
    labels: Symbols,
    chars: Symbols,
}

const WORD_RESERVED: [&str; 3] = [NULL, ROOT, UNK];
const LABEL_RESERVED: [&str; 2] = [NOLABEL, NULL];
const CHAR_RESERVED: [&str; 5] = [SOW, EOW, MUL, PAD, UNK];

impl Default for Vocabulary {
    fn default() -> Self {
        let words = Symbols::with_reserved(&WORD_RESERVED);
        Vocabulary {
            word_counts: vec![0; words.len()],
            words,
            tags: Symbols::with_reserved(&WORD_RESERVED),
            labels: Symbols::with_reserved(&LABEL_RESERVED),
            chars: Symbols::with_reserved(&CHAR_RESERVED),
        }
    }
}

impl Vocabulary {
    /// Adds all symbols of a sentence, counting word occurrences.
    pub fn add_sentence(&mut self, sentence: &Sentence) {
        for token in &sentence.tokens {
            let id = self.words.insert(&token.form);
            if id == self.word_counts.len() {
                self.word_counts.push(0);
            }
            self.word_counts[id] += 1;
            self.tags.insert(&token.tag);
            self.labels.insert(&token.label);
            for c in token.form.chars() {
                let mut buf = [0u8; 4];
                self.chars.insert(c.encode_utf8(&mut buf));
            }
        }
    }

    /// Adds word forms that do not occur in training (e.g. from pre-trained embeddings).
    /// They get a training count of zero.
    pub fn extend_words<'a>(&mut self, forms: impl IntoIterator<Item = &'a str>) {
        for form in forms {
            let id = self.words.insert(form);
            if id == self.word_counts.len() {
                self.word_counts.push(0);
            }
        }
    }

    pub fn words(&self) -> &Symbols {
        &self.words
    }

    pub fn tags(&self) -> &Symbols {
        &self.tags
    }

    pub fn chars(&self) -> &Symbols {
        &self.chars
    }

    pub fn word_id(&self, form: &str) -> usize {
        self.words.get(form).unwrap_or_else(|| self.word_unk())
    }

    pub fn word_null(&self) -> usize {
        self.words.get(NULL).unwrap()
    }

    pub fn word_root(&self) -> usize {
        self.words.get(ROOT).unwrap()
    }

    pub fn word_unk(&self) -> usize {
        self.words.get(UNK).unwrap()
    }

    /// Number of training occurrences of `form`.
    pub fn word_count(&self, form: &str) -> u32 {
        self.words
            .get(form)
            .map(|id| self.word_counts[id])
            .unwrap_or(0)
    }

    pub fn word_count_by_id(&self, id: usize) -> u32 {
        self.word_counts.get(id).copied().unwrap_or(0)
    }

    /// Whether `form` occurred in the training data.
    pub fn in_training(&self, form: &str) -> bool {
        self.word_count(form) > 0
    }

    pub fn tag_id(&self, tag: &str) -> usize {
        self.tags.get(tag).unwrap_or_else(|| self.tag_unk())
    }

    pub fn tag_null(&self) -> usize {
        self.tags.get(NULL).unwrap()
    }

    pub fn tag_root(&self) -> usize {
        self.tags.get(ROOT).unwrap()
    }

    pub fn tag_unk(&self) -> usize {
        self.tags.get(UNK).unwrap()
    }

    /// Embedding id of a label; unseen labels map to NULL.
    pub fn label_id(&self, label: &str) -> usize {
        self.labels.get(label).unwrap_or_else(|| self.label_null())
    }

    pub fn label_null(&self) -> usize {
        self.labels.get(NULL).unwrap()
    }

    pub fn label_nolabel(&self) -> usize {
        self.labels.get(NOLABEL).unwrap()
    }

    /// Size of the label embedding table, reserved symbols included.
    pub fn label_table_len(&self) -> usize {
        self.labels.len()
    }

    /// Number of real dependency labels (the ones transitions can carry).
    pub fn num_labels(&self) -> usize {
        self.labels.len() - LABEL_RESERVED.len()
    }

    /// Transition label index of a dependency label.
    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels
            .get(label)
            .and_then(|id| id.checked_sub(LABEL_RESERVED.len()))
    }

    pub fn label_name(&self, index: usize) -> &str {
        self.labels
            .symbol(index + LABEL_RESERVED.len())
            .expect("label index out of range")
    }

    /// Embedding id of the label with transition index `index`.
    pub fn label_feature_id(&self, index: usize) -> usize {
        index + LABEL_RESERVED.len()
    }

    pub fn char_id(&self, c: char) -> usize {
        let mut buf = [0u8; 4];
        self.chars
            .get(c.encode_utf8(&mut buf))
            .unwrap_or_else(|| self.char_symbol(UNK))
    }

    /// Id of a reserved character symbol (`SOW`, `EOW`, `MUL`, `PAD`, `UNK`).
    pub fn char_symbol(&self, symbol: &str) -> usize {
        self.chars
            .get(symbol)
            .unwrap_or_else(|| panic!("{} is not a reserved character symbol", symbol))
    }
}

/// Indexes every form, tag, label and character of the training corpus in
/// order of first occurrence.
pub fn build_vocab(train: &[Sentence]) -> Vocabulary {
    let mut vocab = Vocabulary::default();
    for sentence in train {
        vocab.add_sentence(sentence);
    }
    vocab
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus() -> Vec<Sentence> {
        vec![
            Sentence::from_tuples(vec![("ein", "ART", 2, "det"), ("Haus", "N", 0, "root")]),
            Sentence::from_tuples(vec![("ein", "ART", 0, "root")]),
        ]
    }

    #[test]
    fn counts() {
        let v = build_vocab(&corpus());
        assert_eq!(v.word_count("ein"), 2);
        assert_eq!(v.word_count("Haus"), 1);
        assert_eq!(v.word_count("haus"), 0);
    }

    #[test]
    fn unknown_lookup() {
        let v = build_vocab(&corpus());
        assert_eq!(v.word_id("nonexistent"), v.word_unk());
        assert_eq!(v.tag_id("VVFIN"), v.tag_unk());
        assert_eq!(v.label_id("nsubj"), v.label_null());
        assert_eq!(v.char_id('z'), v.char_symbol(UNK));
    }

    #[test]
    fn char_inventory() {
        let train = vec![Sentence::from_tuples(vec![("ein", "ART", 0, "root")])];
        let v = build_vocab(&train);
        let chars: Vec<&str> = v.chars().iter().collect();
        assert_eq!(chars, vec![EOW, MUL, PAD, SOW, UNK, "e", "i", "n"]);
    }

    #[test]
    fn reserved_ids_distinct() {
        let v = build_vocab(&corpus());
        let words = [v.word_null(), v.word_root(), v.word_unk()];
        assert_eq!(words, [0, 1, 2]);
        assert_ne!(v.label_null(), v.label_nolabel());
        let mut chars: Vec<usize> = CHAR_RESERVED.iter().map(|s| v.char_symbol(s)).collect();
        chars.sort_unstable();
        chars.dedup();
        assert_eq!(chars.len(), 5);
    }

    #[test]
    fn labels() {
        let v = build_vocab(&corpus());
        assert_eq!(v.num_labels(), 2);
        assert_eq!(v.label_index("det"), Some(0));
        assert_eq!(v.label_index("root"), Some(1));
        assert_eq!(v.label_index(NULL), None);
        assert_eq!(v.label_name(1), "root");
        assert_eq!(v.label_feature_id(1), v.label_id("root"));
    }

    #[test]
    fn deterministic_and_serializable() {
        let a = build_vocab(&corpus());
        let b = build_vocab(&corpus());
        assert_eq!(a, b);
        let bytes = bincode::serialize(&a).unwrap();
        let c: Vocabulary = bincode::deserialize(&bytes).unwrap();
        assert_eq!(a, c);
        assert_eq!(c.word_id("Haus"), a.word_id("Haus"));
    }

    #[test]
    fn extension_is_not_training() {
        let mut v = build_vocab(&corpus());
        v.extend_words(["Baum", "ein"]);
        assert_ne!(v.word_id("Baum"), v.word_unk());
        assert!(!v.in_training("Baum"));
        assert_eq!(v.word_count("ein"), 2);
    }
}
