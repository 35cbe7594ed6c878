//! The full network, greedy decoding and model files.
//!
//! `x(t)` of all 24 slots goes through a shared ReLU layer `f`; the 24
//! outputs are concatenated into `h0`, followed by two ReLU layers with
//! dropout and a linear output layer over `1 + 4·|labels|` transitions.

mod io;
mod train;

pub use io::{load_model, save_model, MODEL_MAGIC, MODEL_VERSION};
pub use train::{
    evaluate, train, train_with, EarlyStopping, LogRecord, StopReason, TrainLog, TrainOutcome, TrainSchedule,
    Verdict,
};

use std::collections::HashMap;

use ndarray::{Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Attachment, EmbeddingFile, Sentence, Vocabulary};
use crate::error::{Error, Result};
use crate::features::{extract, FeatureSlots, SlotToken, NUM_SLOTS};
use crate::nn::{dropout, dropout_backward, softmax_xent_batch, Activation, Dense, Float, HasParams, Parameter};
use crate::repr::{char_core, ReprConfig, Representations, TokenRows, COMPOSED_FORMS, COMPOSED_NULL, COMPOSED_ROOT};
use crate::transition::{Configuration, RootPolicy, Transition, TransitionSystem};

/// Forms composed per call when building an inference table.
const COMPOSE_CHUNK: usize = 256;
/// Sentences decoded together.
const PARSE_CHUNK: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub repr: ReprConfig,
    /// Width of the shared per-token layer `f`.
    pub token_dim: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub dropout: f64,
    pub root_policy: RootPolicy,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            repr: ReprConfig::default(),
            token_dim: 128,
            hidden1: 512,
            hidden2: 256,
            dropout: 0.1,
            root_policy: RootPolicy::Single,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.repr.validate()?;
        if self.token_dim == 0 || self.hidden1 == 0 || self.hidden2 == 0 {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} not in [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "F: Float")]
pub struct Model<F = f32> {
    pub vocab: Vocabulary,
    pub config: ModelConfig,
    pub repr: Representations<F>,
    pub token_layer: Dense<F>,
    pub hidden1: Dense<F>,
    pub hidden2: Dense<F>,
    pub output: Dense<F>,
}

/// Network inputs for a batch of configurations.
#[derive(Clone, Debug, Default)]
pub struct Batch {
    /// `NUM_SLOTS` rows per configuration.
    pub rows: TokenRows,
    /// Character cores of the distinct forms referenced by `rows`.
    pub forms: Vec<Vec<usize>>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.rows.len() / NUM_SLOTS
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Word, tag and composed-table ids of a sentence's tokens.
#[derive(Clone, Debug)]
pub(crate) struct TokenIds {
    pub words: Vec<usize>,
    pub tags: Vec<usize>,
    /// Row in the composed table.
    pub composed: Vec<usize>,
}

/// Appends the 24 rows of one configuration.
pub(crate) fn push_slots(rows: &mut TokenRows, slots: &FeatureSlots, ids: &TokenIds, vocab: &Vocabulary) {
    for (token, arc_label) in slots.tokens.iter().zip(&slots.arc_labels) {
        let label = match arc_label {
            Some(l) => vocab.label_feature_id(*l),
            None => vocab.label_nolabel(),
        };
        match *token {
            SlotToken::Null => rows.push(vocab.word_null(), vocab.tag_null(), vocab.label_null(), COMPOSED_NULL),
            SlotToken::Root => rows.push(vocab.word_root(), vocab.tag_root(), label, COMPOSED_ROOT),
            SlotToken::Token(t) => rows.push(ids.words[t - 1], ids.tags[t - 1], label, ids.composed[t - 1]),
        }
    }
}

#[derive(Debug)]
struct ForwardCache<F> {
    compose: crate::repr::ComposeCache<F>,
    table_rows: usize,
    x: Array2<F>,
    f: Array2<F>,
    h0: Array2<F>,
    h1: Array2<F>,
    mask1: Option<Array2<F>>,
    h1d: Array2<F>,
    h2: Array2<F>,
    mask2: Option<Array2<F>>,
    h2d: Array2<F>,
    logits: Array2<F>,
}

impl<F: Float> Model<F> {
    /// A randomly initialized model. In pre-trained modes the vocabulary
    /// should already contain the embedding file's forms.
    pub fn new<R: Rng + ?Sized>(
        vocab: Vocabulary,
        config: ModelConfig,
        embeddings: Option<&EmbeddingFile>,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let repr = Representations::new(config.repr.clone(), &vocab, embeddings, rng)?;
        let token_layer = Dense::new("token", repr.input_dim(), config.token_dim, Activation::Relu, rng);
        let hidden1 = Dense::new("hidden1", NUM_SLOTS * config.token_dim, config.hidden1, Activation::Relu, rng);
        let hidden2 = Dense::new("hidden2", config.hidden1, config.hidden2, Activation::Relu, rng);
        let outputs = Transition::output_size(vocab.num_labels());
        let output = Dense::new("output", config.hidden2, outputs, Activation::Identity, rng);
        Ok(Model {
            vocab,
            config,
            repr,
            token_layer,
            hidden1,
            hidden2,
            output,
        })
    }

    pub fn system(&self) -> TransitionSystem {
        TransitionSystem::new(self.config.root_policy)
    }

    pub fn num_outputs(&self) -> usize {
        self.output.outputs()
    }

    /// Copy whose parameter values are the running averages.
    pub fn averaged(&self) -> Self {
        let mut m = self.clone();
        for p in m.params_mut() {
            p.value = p.average.clone();
        }
        m
    }

    pub(crate) fn token_ids(&self, sentence: &Sentence, forms: &mut HashMap<String, usize>) -> TokenIds {
        let mut ids = TokenIds {
            words: Vec::with_capacity(sentence.len()),
            tags: Vec::with_capacity(sentence.len()),
            composed: Vec::with_capacity(sentence.len()),
        };
        let composing = self.config.repr.mode.composition().is_some();
        for t in &sentence.tokens {
            ids.words.push(self.vocab.word_id(&t.form));
            ids.tags.push(self.vocab.tag_id(&t.tag));
            let composed = if composing {
                let next = forms.len();
                COMPOSED_FORMS + *forms.entry(t.form.clone()).or_insert(next)
            } else {
                COMPOSED_NULL
            };
            ids.composed.push(composed);
        }
        ids
    }

    /// Batch for configurations of (possibly different) sentences.
    pub fn encode(&self, items: &[(&Sentence, &Configuration)]) -> Batch {
        let mut forms = HashMap::new();
        let mut rows = TokenRows::with_capacity(items.len() * NUM_SLOTS);
        for (sentence, config) in items {
            let ids = self.token_ids(sentence, &mut forms);
            push_slots(&mut rows, &extract(config), &ids, &self.vocab);
        }
        Batch {
            rows,
            forms: self.form_cores(forms),
        }
    }

    fn form_cores(&self, forms: HashMap<String, usize>) -> Vec<Vec<usize>> {
        let mut cores = vec![Vec::new(); forms.len()];
        for (form, i) in forms {
            cores[i] = char_core(&form, &self.vocab);
        }
        cores
    }

    /// Composed table without keeping backward state, built in chunks to
    /// bound memory.
    fn composed_table(&self, forms: &[Vec<usize>]) -> Result<Array2<F>> {
        let (mut table, _) = self.repr.compose(&forms[..forms.len().min(COMPOSE_CHUNK)])?;
        let mut start = COMPOSE_CHUNK;
        while start < forms.len() {
            let end = (start + COMPOSE_CHUNK).min(forms.len());
            let (part, _) = self.repr.compose(&forms[start..end])?;
            table.append(Axis(0), part.slice(ndarray::s![COMPOSED_FORMS.., ..])).expect("same width");
            start = end;
        }
        Ok(table)
    }

    /// Logits from already composed token inputs, without dropout.
    fn logits_from_inputs(&self, x: Array2<F>) -> Result<Array2<F>> {
        let n = x.nrows() / NUM_SLOTS;
        let f = self.token_layer.forward(x.view())?;
        let h0 = f
            .into_shape_with_order((n, NUM_SLOTS * self.config.token_dim))
            .map_err(|e| Error::Shape(e.to_string()))?;
        let h1 = self.hidden1.forward(h0.view())?;
        let h2 = self.hidden2.forward(h1.view())?;
        self.output.forward(h2.view())
    }

    /// Logits of every configuration in the batch (inference mode).
    pub fn logits(&self, batch: &Batch) -> Result<Array2<F>> {
        let table = self.composed_table(&batch.forms)?;
        self.logits_from_inputs(self.repr.assemble(&table, &batch.rows))
    }

    fn forward<R: Rng + ?Sized>(&self, batch: &Batch, training: bool, rng: &mut R) -> Result<ForwardCache<F>> {
        let n = batch.len();
        let (table, compose) = self.repr.compose(&batch.forms)?;
        let x = self.repr.assemble(&table, &batch.rows);
        let f = self.token_layer.forward(x.view())?;
        let h0 = f
            .clone()
            .into_shape_with_order((n, NUM_SLOTS * self.config.token_dim))
            .map_err(|e| Error::Shape(e.to_string()))?;
        let h1 = self.hidden1.forward(h0.view())?;
        let (h1d, mask1) = dropout(h1.clone(), self.config.dropout, training, rng);
        let h2 = self.hidden2.forward(h1d.view())?;
        let (h2d, mask2) = dropout(h2.clone(), self.config.dropout, training, rng);
        let logits = self.output.forward(h2d.view())?;
        Ok(ForwardCache {
            compose,
            table_rows: table.nrows(),
            x,
            f,
            h0,
            h1,
            mask1,
            h1d,
            h2,
            mask2,
            h2d,
            logits,
        })
    }

    fn backward(&mut self, batch: &Batch, cache: ForwardCache<F>, d_logits: Array2<F>) -> Result<()> {
        let d_h2d = self.output.backward(cache.h2d.view(), cache.logits.view(), d_logits);
        let d_h2 = dropout_backward(d_h2d, cache.mask2.as_ref());
        let d_h1d = self.hidden2.backward(cache.h1d.view(), cache.h2.view(), d_h2);
        let d_h1 = dropout_backward(d_h1d, cache.mask1.as_ref());
        let d_h0 = self.hidden1.backward(cache.h0.view(), cache.h1.view(), d_h1);
        let d_f = d_h0
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((batch.rows.len(), self.config.token_dim))
            .map_err(|e| Error::Shape(e.to_string()))?;
        let d_x = self.token_layer.backward(cache.x.view(), cache.f.view(), d_f);
        let d_table = self.repr.assemble_backward(&batch.rows, cache.table_rows, d_x.view());
        self.repr.compose_backward(&cache.compose, d_table.view());
        Ok(())
    }

    /// Mean masked cross-entropy of the batch. Accumulates its gradient into
    /// the parameters (it is not applied). Dropout is active when `training`.
    pub fn loss_and_gradients<R: Rng + ?Sized>(
        &mut self,
        batch: &Batch,
        gold: &[usize],
        masks: &[Vec<bool>],
        training: bool,
        rng: &mut R,
    ) -> Result<F> {
        if gold.len() != batch.len() || masks.len() != batch.len() {
            return Err(Error::Shape(format!(
                "{} configurations, {} gold transitions, {} masks",
                batch.len(),
                gold.len(),
                masks.len()
            )));
        }
        let cache = self.forward(batch, training, rng)?;
        let (loss, d_logits) = softmax_xent_batch(cache.logits.view(), gold, masks)?;
        self.backward(batch, cache, d_logits)?;
        Ok(loss)
    }

    /// Mean masked cross-entropy without dropout and without gradients.
    pub fn loss(&self, batch: &Batch, gold: &[usize], masks: &[Vec<bool>]) -> Result<F> {
        let logits = self.logits(batch)?;
        Ok(softmax_xent_batch(logits.view(), gold, masks)?.0)
    }

    /// Logits of a single configuration.
    pub fn score(&self, sentence: &Sentence, config: &Configuration) -> Result<Vec<F>> {
        let logits = self.logits(&self.encode(&[(sentence, config)]))?;
        Ok(logits.row(0).to_vec())
    }

    pub fn parse(&self, sentence: &Sentence) -> Result<Vec<Attachment>> {
        Ok(self.parse_many(std::slice::from_ref(sentence))?.remove(0))
    }

    /// Greedy decoding of many sentences in lockstep. Each step takes the
    /// highest-scoring legal transition (the first one on ties).
    pub fn parse_many(&self, sentences: &[Sentence]) -> Result<Vec<Vec<Attachment>>> {
        let mut out = Vec::with_capacity(sentences.len());
        for chunk in sentences.chunks(PARSE_CHUNK) {
            out.extend(self.parse_chunk(chunk)?);
        }
        Ok(out)
    }

    fn parse_chunk(&self, sentences: &[Sentence]) -> Result<Vec<Vec<Attachment>>> {
        let system = self.system();
        let num_labels = self.vocab.num_labels();
        let mut forms = HashMap::new();
        let ids: Vec<TokenIds> = sentences.iter().map(|s| self.token_ids(s, &mut forms)).collect();
        let table = self.composed_table(&self.form_cores(forms))?;
        let mut configs = sentences
            .iter()
            .map(|s| system.initial(s.len()))
            .collect::<Result<Vec<_>>>()?;

        loop {
            let active: Vec<usize> = (0..configs.len()).filter(|&i| !system.is_terminal(&configs[i])).collect();
            if active.is_empty() {
                break;
            }
            let mut rows = TokenRows::with_capacity(active.len() * NUM_SLOTS);
            for &i in &active {
                push_slots(&mut rows, &extract(&configs[i]), &ids[i], &self.vocab);
            }
            let logits = self.logits_from_inputs(self.repr.assemble(&table, &rows))?;
            for (row, &i) in logits.outer_iter().zip(&active) {
                let mask = system.legal(&configs[i]).output_mask(num_labels);
                let mut best: Option<usize> = None;
                for (k, &allowed) in mask.iter().enumerate() {
                    if allowed && best.is_none_or(|b| row[k] > row[b]) {
                        best = Some(k);
                    }
                }
                let best = best.ok_or_else(|| Error::Config("no legal transition in a non-terminal state".into()))?;
                system.apply_mut(&mut configs[i], Transition::from_index(best, num_labels))?;
            }
        }

        Ok(configs
            .iter()
            .map(|c| {
                let mut attachments = vec![Attachment::new(0, ""); c.sentence_len()];
                for arc in c.arcs() {
                    attachments[arc.dependent - 1] = Attachment::new(arc.head, self.vocab.label_name(arc.label));
                }
                attachments
            })
            .collect())
    }
}

impl<F: Float> HasParams<F> for Model<F> {
    fn params(&self) -> Vec<&Parameter<F>> {
        let mut p = self.repr.params();
        for layer in [&self.token_layer, &self.hidden1, &self.hidden2, &self.output] {
            p.extend(layer.params());
        }
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter<F>> {
        let mut p = self.repr.params_mut();
        for layer in [&mut self.token_layer, &mut self.hidden1, &mut self.hidden2, &mut self.output] {
            p.extend(layer.params_mut());
        }
        p
    }
}
