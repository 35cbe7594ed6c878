//! Token input vectors `x(t)`: word lookup, pre-trained lookup, character
//! composition by CNN or BiLSTM, and their combinations.
//!
//! A batch is processed in two stages. [`Representations::compose`] builds a
//! table of composed vectors for a list of distinct forms, preceded by the
//! learned NULL and ROOT rows. [`Representations::assemble`] then builds one
//! input row per slot as `[composed; word; tag; label]`, leaving out the
//! parts the mode does not use.

use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array1, Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::vocab::{EOW, MUL, PAD, SOW, UNK};
use crate::corpus::{EmbeddingFile, Vocabulary};
use crate::error::{Error, Result};
use crate::nn::{gather_rows, init_he, scatter_add_rows, BiLstm, BiLstmCache, CharCnn, CnnCache, Float, HasParams, Parameter};

/// Row of the composed table used for absent slots.
pub const COMPOSED_NULL: usize = 0;
/// Row of the composed table used for the artificial root.
pub const COMPOSED_ROOT: usize = 1;
/// Index of the first composed form in the table.
pub const COMPOSED_FORMS: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Composition {
    Cnn,
    Lstm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Word,
    W2v,
    Cnn,
    Lstm,
    CnnWord,
    CnnW2v,
    LstmWord,
    LstmW2v,
}

impl Mode {
    pub const ALL: [Mode; 8] = [
        Mode::Word,
        Mode::W2v,
        Mode::Cnn,
        Mode::Lstm,
        Mode::CnnWord,
        Mode::CnnW2v,
        Mode::LstmWord,
        Mode::LstmW2v,
    ];

    pub fn composition(self) -> Option<Composition> {
        match self {
            Mode::Word | Mode::W2v => None,
            Mode::Cnn | Mode::CnnWord | Mode::CnnW2v => Some(Composition::Cnn),
            Mode::Lstm | Mode::LstmWord | Mode::LstmW2v => Some(Composition::Lstm),
        }
    }

    /// Whether the input contains a word lookup.
    pub fn uses_lookup(self) -> bool {
        !matches!(self, Mode::Cnn | Mode::Lstm)
    }

    /// Whether the lookup table is initialized from pre-trained vectors.
    pub fn pretrained(self) -> bool {
        matches!(self, Mode::W2v | Mode::CnnW2v | Mode::LstmW2v)
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Word => "WORD",
            Mode::W2v => "W2V",
            Mode::Cnn => "CNN",
            Mode::Lstm => "LSTM",
            Mode::CnnWord => "CNN+WORD",
            Mode::CnnW2v => "CNN+W2V",
            Mode::LstmWord => "LSTM+WORD",
            Mode::LstmW2v => "LSTM+W2V",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Mode> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown representation mode {:?}", s)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReprConfig {
    pub mode: Mode,
    pub word_dim: usize,
    pub tag_dim: usize,
    pub label_dim: usize,
    pub char_dim: usize,
    pub kernel_widths: Vec<usize>,
    pub channels_per_kernel: usize,
    /// Fixed character sequence length of the CNN input.
    pub char_length: usize,
    pub lstm_hidden: usize,
}

impl Default for ReprConfig {
    fn default() -> Self {
        ReprConfig {
            mode: Mode::Cnn,
            word_dim: 256,
            tag_dim: 32,
            label_dim: 32,
            char_dim: 32,
            kernel_widths: vec![3, 5, 7, 9],
            channels_per_kernel: 64,
            char_length: 32,
            lstm_hidden: 128,
        }
    }
}

impl ReprConfig {
    pub fn with_mode(mode: Mode) -> Self {
        ReprConfig {
            mode,
            ..Default::default()
        }
    }

    pub fn composed_dim(&self) -> usize {
        match self.mode.composition() {
            None => 0,
            Some(Composition::Cnn) => self.kernel_widths.len() * self.channels_per_kernel,
            Some(Composition::Lstm) => 2 * self.lstm_hidden,
        }
    }

    pub fn lookup_dim(&self) -> usize {
        if self.mode.uses_lookup() {
            self.word_dim
        } else {
            0
        }
    }

    /// Width of `x(t)`.
    pub fn input_dim(&self) -> usize {
        self.composed_dim() + self.lookup_dim() + self.tag_dim + self.label_dim
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("word_dim", self.word_dim),
            ("tag_dim", self.tag_dim),
            ("label_dim", self.label_dim),
            ("char_dim", self.char_dim),
            ("channels_per_kernel", self.channels_per_kernel),
            ("lstm_hidden", self.lstm_hidden),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{} must be positive", name)));
        }
        if self.char_length < 5 {
            return Err(Error::Config("char_length must be at least 5".into()));
        }
        if self.mode.composition() == Some(Composition::Cnn) {
            if self.kernel_widths.is_empty() || self.kernel_widths.contains(&0) {
                return Err(Error::Config("kernel widths must be positive".into()));
            }
            if let Some(w) = self.kernel_widths.iter().find(|&&w| w > self.char_length) {
                return Err(Error::Config(format!(
                    "kernel width {} exceeds char_length {}",
                    w, self.char_length
                )));
            }
        }
        Ok(())
    }
}

/// Ids of the reserved character symbols.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharSymbols {
    pub sow: usize,
    pub eow: usize,
    pub mul: usize,
    pub pad: usize,
    pub unk: usize,
}

impl CharSymbols {
    pub fn of(vocab: &Vocabulary) -> Self {
        CharSymbols {
            sow: vocab.char_symbol(SOW),
            eow: vocab.char_symbol(EOW),
            mul: vocab.char_symbol(MUL),
            pad: vocab.char_symbol(PAD),
            unk: vocab.char_symbol(UNK),
        }
    }
}

/// Fixed-length character ids of one word.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CharSequence {
    pub ids: Vec<usize>,
}

/// `SOW c1 .. cn EOW` without padding.
pub fn char_core(form: &str, vocab: &Vocabulary) -> Vec<usize> {
    let mut ids = Vec::with_capacity(form.chars().count() + 2);
    ids.push(vocab.char_symbol(SOW));
    ids.extend(form.chars().map(|c| vocab.char_id(c)));
    ids.push(vocab.char_symbol(EOW));
    ids
}

/// Brings a core sequence to exactly `length` ids. Long cores keep their
/// first `⌈(length−1)/2⌉` and last `⌊(length−1)/2⌋` ids around one MUL;
/// short ones are padded on both sides, the odd PAD going to the right.
pub fn fit_length(core: &[usize], length: usize, symbols: &CharSymbols) -> Vec<usize> {
    if core.len() > length {
        let head = length / 2;
        let tail = (length - 1) / 2;
        let mut ids = Vec::with_capacity(length);
        ids.extend_from_slice(&core[..head]);
        ids.push(symbols.mul);
        ids.extend_from_slice(&core[core.len() - tail..]);
        ids
    } else {
        let total = length - core.len();
        let left = total / 2;
        let mut ids = vec![symbols.pad; left];
        ids.extend_from_slice(core);
        ids.resize(length, symbols.pad);
        ids
    }
}

pub fn pad_chars(form: &str, length: usize, vocab: &Vocabulary) -> CharSequence {
    CharSequence {
        ids: fit_length(&char_core(form, vocab), length, &CharSymbols::of(vocab)),
    }
}

/// Embedding ids of a batch of token rows.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TokenRows {
    pub word: Vec<usize>,
    pub tag: Vec<usize>,
    pub label: Vec<usize>,
    /// Row of the composed table (see [`COMPOSED_NULL`], [`COMPOSED_ROOT`]).
    pub composed: Vec<usize>,
}

impl TokenRows {
    pub fn with_capacity(n: usize) -> Self {
        TokenRows {
            word: Vec::with_capacity(n),
            tag: Vec::with_capacity(n),
            label: Vec::with_capacity(n),
            composed: Vec::with_capacity(n),
        }
    }

    pub fn len(&self) -> usize {
        self.word.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word.is_empty()
    }

    pub fn push(&mut self, word: usize, tag: usize, label: usize, composed: usize) {
        self.word.push(word);
        self.tag.push(tag);
        self.label.push(label);
        self.composed.push(composed);
    }
}

#[derive(Debug)]
enum Composer<F> {
    None,
    Cnn { ids: Vec<usize>, cache: Option<CnnCache<F>> },
    Lstm { seqs: Vec<Vec<usize>>, cache: Option<BiLstmCache<F>> },
}

/// Forward state of [`Representations::compose`].
#[derive(Debug)]
pub struct ComposeCache<F> {
    composer: Composer<F>,
}

/// All representation parameters of a model.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "F: Float")]
pub struct Representations<F> {
    pub config: ReprConfig,
    pub symbols: CharSymbols,
    pub word: Option<Parameter<F>>,
    pub tag: Parameter<F>,
    pub label: Parameter<F>,
    pub chars: Option<Parameter<F>>,
    /// NULL and ROOT rows standing in for composed vectors.
    pub special: Option<Parameter<F>>,
    pub cnn: Option<CharCnn<F>>,
    pub lstm: Option<BiLstm<F>>,
}

fn embedding<F: Float, R: Rng + ?Sized>(name: &str, rows: usize, dim: usize, rng: &mut R) -> Parameter<F> {
    Parameter::new(name, init_he(rows, dim, dim, rng))
}

impl<F: Float> Representations<F> {
    /// Initializes all tables for `vocab`. In pre-trained modes the rows of
    /// forms found in `embeddings` are copied from it.
    pub fn new<R: Rng + ?Sized>(
        config: ReprConfig,
        vocab: &Vocabulary,
        embeddings: Option<&EmbeddingFile>,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let mode = config.mode;
        let word = if mode.uses_lookup() {
            let mut table = embedding("embed.word", vocab.words().len(), config.word_dim, rng);
            if mode.pretrained() {
                let file = embeddings
                    .ok_or_else(|| Error::Config(format!("mode {} needs pre-trained embeddings", mode)))?;
                if file.dimension() != config.word_dim {
                    return Err(Error::Config(format!(
                        "embedding dimension {} differs from word_dim {}",
                        file.dimension(),
                        config.word_dim
                    )));
                }
                for (id, form) in vocab.words().iter().enumerate() {
                    if let Some(v) = file.get(form) {
                        for (dst, &x) in table.value.row_mut(id).iter_mut().zip(v) {
                            *dst = F::of(x as f64);
                        }
                    }
                }
                table.average = table.value.clone();
            }
            Some(table)
        } else {
            None
        };
        let tag = embedding("embed.tag", vocab.tags().len(), config.tag_dim, rng);
        let label = embedding("embed.label", vocab.label_table_len(), config.label_dim, rng);

        let composition = mode.composition();
        let chars = composition.map(|_| embedding("embed.char", vocab.chars().len(), config.char_dim, rng));
        let special = composition.map(|_| embedding("embed.composed_special", 2, config.composed_dim(), rng));
        let cnn = (composition == Some(Composition::Cnn))
            .then(|| CharCnn::new(&config.kernel_widths, config.char_dim, config.channels_per_kernel, rng));
        let lstm = (composition == Some(Composition::Lstm)).then(|| BiLstm::new(config.char_dim, config.lstm_hidden, rng));

        Ok(Representations {
            symbols: CharSymbols::of(vocab),
            config,
            word,
            tag,
            label,
            chars,
            special,
            cnn,
            lstm,
        })
    }

    pub fn mode(&self) -> Mode {
        self.config.mode
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim()
    }

    /// Composed table for `forms`, given as character cores
    /// (see [`char_core`]). Row `COMPOSED_FORMS + k` belongs to `forms[k]`.
    /// Without a composition model the table has no columns.
    pub fn compose(&self, forms: &[Vec<usize>]) -> Result<(Array2<F>, ComposeCache<F>)> {
        let dim = self.config.composed_dim();
        let rows = COMPOSED_FORMS + forms.len();
        let mut table = Array2::zeros((rows, dim));
        let composer = match (&self.cnn, &self.lstm, &self.chars, &self.special) {
            (Some(cnn), _, Some(chars), Some(special)) => {
                table.slice_mut(s![..COMPOSED_FORMS, ..]).assign(&special.value);
                let length = self.config.char_length;
                let ids: Vec<usize> = forms
                    .iter()
                    .flat_map(|core| fit_length(core, length, &self.symbols))
                    .collect();
                let cache = if forms.is_empty() {
                    None
                } else {
                    let x = gather_rows(&chars.value, &ids);
                    let (out, cache) = cnn.forward(x.view(), length)?;
                    table.slice_mut(s![COMPOSED_FORMS.., ..]).assign(&out);
                    Some(cache)
                };
                Composer::Cnn { ids, cache }
            }
            (_, Some(lstm), Some(chars), Some(special)) => {
                table.slice_mut(s![..COMPOSED_FORMS, ..]).assign(&special.value);
                let embedded: Vec<Array2<F>> = forms.iter().map(|core| gather_rows(&chars.value, core)).collect();
                let cache = if forms.is_empty() {
                    None
                } else {
                    let views: Vec<ArrayView2<F>> = embedded.iter().map(|e| e.view()).collect();
                    let (out, cache) = lstm.forward(&views)?;
                    table.slice_mut(s![COMPOSED_FORMS.., ..]).assign(&out);
                    Some(cache)
                };
                Composer::Lstm {
                    seqs: forms.to_vec(),
                    cache,
                }
            }
            _ => Composer::None,
        };
        Ok((table, ComposeCache { composer }))
    }

    /// Accumulates gradients of the composition parameters from the
    /// gradient of the composed table.
    pub fn compose_backward(&mut self, cache: &ComposeCache<F>, d_table: ArrayView2<F>) {
        if let Some(special) = &mut self.special {
            *special.grad_mut() += &d_table.slice(s![..COMPOSED_FORMS, ..]);
        }
        let d_forms = d_table.slice(s![COMPOSED_FORMS.., ..]);
        match &cache.composer {
            Composer::None => {}
            Composer::Cnn { ids, cache } => {
                if let (Some(cache), Some(cnn), Some(chars)) = (cache, &mut self.cnn, &mut self.chars) {
                    let d_x = cnn.backward(cache, d_forms, self.config.char_dim);
                    scatter_add_rows(chars.grad_mut(), ids, d_x.view());
                }
            }
            Composer::Lstm { seqs, cache } => {
                if let (Some(cache), Some(lstm), Some(chars)) = (cache, &mut self.lstm, &mut self.chars) {
                    let d_seqs = lstm.backward(cache, d_forms);
                    for (core, d) in seqs.iter().zip(&d_seqs) {
                        scatter_add_rows(chars.grad_mut(), core, d.view());
                    }
                }
            }
        }
    }

    /// One input row per token: `[composed; word; tag; label]`.
    pub fn assemble(&self, table: &Array2<F>, rows: &TokenRows) -> Array2<F> {
        let c = &self.config;
        let (dc, dw) = (c.composed_dim(), c.lookup_dim());
        let mut x = Array2::zeros((rows.len(), self.input_dim()));
        for r in 0..rows.len() {
            let mut row = x.row_mut(r);
            let mut offset = 0;
            if dc > 0 {
                row.slice_mut(s![..dc]).assign(&table.row(rows.composed[r]));
                offset += dc;
            }
            if let Some(word) = &self.word {
                row.slice_mut(s![offset..offset + dw]).assign(&word.value.row(rows.word[r]));
                offset += dw;
            }
            row.slice_mut(s![offset..offset + c.tag_dim])
                .assign(&self.tag.value.row(rows.tag[r]));
            offset += c.tag_dim;
            row.slice_mut(s![offset..]).assign(&self.label.value.row(rows.label[r]));
        }
        x
    }

    /// Accumulates lookup-table gradients and returns the gradient of the
    /// composed table (`table_rows × composed_dim`).
    pub fn assemble_backward(&mut self, rows: &TokenRows, table_rows: usize, d_x: ArrayView2<F>) -> Array2<F> {
        let c = &self.config;
        let (dc, dw, dt) = (c.composed_dim(), c.lookup_dim(), c.tag_dim);
        let mut d_table = Array2::zeros((table_rows, dc));
        if dc > 0 {
            scatter_add_rows(&mut d_table, &rows.composed, d_x.slice(s![.., ..dc]));
        }
        let mut offset = dc;
        if let Some(word) = &mut self.word {
            scatter_add_rows(word.grad_mut(), &rows.word, d_x.slice(s![.., offset..offset + dw]));
            offset += dw;
        }
        scatter_add_rows(self.tag.grad_mut(), &rows.tag, d_x.slice(s![.., offset..offset + dt]));
        offset += dt;
        scatter_add_rows(self.label.grad_mut(), &rows.label, d_x.slice(s![.., offset..]));
        d_table
    }

    /// Composed vector of a single word.
    pub fn compose_form(&self, form: &str, vocab: &Vocabulary) -> Result<Array1<F>> {
        let (table, _) = self.compose(&[char_core(form, vocab)])?;
        Ok(table.row(COMPOSED_FORMS).to_owned())
    }

    /// `x(t)` of a single slot. `form` is the surface form of a sentence
    /// token and `None` for NULL and ROOT slots.
    pub fn token_input(&self, ids: &crate::features::SlotIds, form: Option<&str>, vocab: &Vocabulary) -> Result<Array1<F>> {
        use crate::features::SlotToken;
        let (forms, composed) = match (ids.token, form) {
            (SlotToken::Null, _) => (vec![], COMPOSED_NULL),
            (SlotToken::Root, _) => (vec![], COMPOSED_ROOT),
            (SlotToken::Token(_), Some(f)) => (vec![char_core(f, vocab)], COMPOSED_FORMS),
            (SlotToken::Token(t), None) => {
                return Err(Error::Config(format!("slot token {} has no form", t)));
            }
        };
        let (table, _) = self.compose(&forms)?;
        let mut rows = TokenRows::with_capacity(1);
        rows.push(ids.word, ids.tag, ids.label, composed);
        Ok(self.assemble(&table, &rows).row(0).to_owned())
    }
}

impl<F: Float> HasParams<F> for Representations<F> {
    fn params(&self) -> Vec<&Parameter<F>> {
        let mut p: Vec<&Parameter<F>> = self.word.iter().collect();
        p.push(&self.tag);
        p.push(&self.label);
        p.extend(self.chars.iter());
        p.extend(self.special.iter());
        if let Some(cnn) = &self.cnn {
            p.extend(cnn.params());
        }
        if let Some(lstm) = &self.lstm {
            p.extend(lstm.params());
        }
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter<F>> {
        let mut p: Vec<&mut Parameter<F>> = self.word.iter_mut().collect();
        p.push(&mut self.tag);
        p.push(&mut self.label);
        p.extend(self.chars.iter_mut());
        p.extend(self.special.iter_mut());
        if let Some(cnn) = &mut self.cnn {
            p.extend(cnn.params_mut());
        }
        if let Some(lstm) = &mut self.lstm {
            p.extend(lstm.params_mut());
        }
        p
    }
}
