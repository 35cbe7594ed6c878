use std::collections::HashMap;
use std::io::Write;

use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Batch, Model, ModelConfig, TokenIds};
use crate::corpus::{build_vocab, EmbeddingFile, Sentence};
use crate::error::{Error, Result};
use crate::eval::{score, Score};
use crate::features::{extract, SlotToken, NUM_SLOTS};
use crate::nn::{sgd_step, Float, HasParams, OptimizerConfig, OptimizerState};
use crate::repr::{char_core, TokenRows, COMPOSED_FORMS, COMPOSED_NULL, COMPOSED_ROOT};
use crate::transition::{GoldTree, KindSet};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainSchedule {
    pub max_steps: u64,
    pub batch_size: usize,
    /// Dev evaluation interval in optimizer steps.
    pub eval_every: u64,
    /// Consecutive non-improving evaluations before stopping.
    pub patience: usize,
    pub optimizer: OptimizerConfig,
    /// Probability of replacing a singleton training word by UNK each time
    /// it is sampled. Only the word lookup is affected.
    pub unk_replacement: f64,
    /// Stop as soon as a dev evaluation reaches this UAS.
    pub target_uas: Option<f64>,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule {
            max_steps: 100_000,
            batch_size: 100,
            eval_every: 2000,
            patience: 3,
            optimizer: OptimizerConfig::default(),
            unk_replacement: 0.5,
            target_uas: None,
        }
    }
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.eval_every == 0 || self.patience == 0 {
            return Err(Error::Config("batch_size, eval_every and patience must be positive".into()));
        }
        if self.optimizer.decay_steps == 0 {
            return Err(Error::Config("decay_steps must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.unk_replacement) {
            return Err(Error::Config("unk_replacement must be in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Improved,
    NotImproved,
    Stop,
}

/// Patience counter over successive dev scores.
#[derive(Clone, Debug, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best: Option<f64>,
    pub misses: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: None,
            misses: 0,
        }
    }

    pub fn observe(&mut self, value: f64) -> Verdict {
        if self.best.is_none_or(|b| value > b) {
            self.best = Some(value);
            self.misses = 0;
            Verdict::Improved
        } else {
            self.misses += 1;
            if self.misses >= self.patience {
                Verdict::Stop
            } else {
                Verdict::NotImproved
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LogRecord {
    /// One optimizer update. `step` is the 0-based index of the update.
    Update { step: u64, learning_rate: f64, loss: f64 },
    /// A dev evaluation after `step` completed updates.
    Eval { step: u64, las: f64, uas: f64, improved: bool },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    MaxSteps,
    EarlyStopping,
    Target,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<LogRecord>,
}

impl TrainLog {
    pub fn evals(&self) -> impl Iterator<Item = (u64, f64, f64)> + '_ {
        self.records.iter().filter_map(|r| match *r {
            LogRecord::Eval { step, las, uas, .. } => Some((step, las, uas)),
            _ => None,
        })
    }

    pub fn updates(&self) -> impl Iterator<Item = (u64, f64, f64)> + '_ {
        self.records.iter().filter_map(|r| match *r {
            LogRecord::Update {
                step,
                learning_rate,
                loss,
            } => Some((step, learning_rate, loss)),
            _ => None,
        })
    }

    /// Tab-separated `kind step lr loss dev_las dev_uas`; unused cells are empty.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "kind\tstep\tlr\tloss\tdev_las\tdev_uas")?;
        for r in &self.records {
            write_record(&mut w, r)?;
        }
        Ok(())
    }
}

pub(crate) fn write_record<W: Write>(w: &mut W, r: &LogRecord) -> std::io::Result<()> {
    match *r {
        LogRecord::Update {
            step,
            learning_rate,
            loss,
        } => writeln!(w, "update\t{}\t{}\t{}\t\t", step, learning_rate, loss),
        LogRecord::Eval { step, las, uas, .. } => writeln!(w, "eval\t{}\t\t\t{}\t{}", step, las, uas),
    }
}

pub struct TrainOutcome<F> {
    /// The averaged model of the best dev evaluation (the final averaged
    /// model if no evaluation took place).
    pub model: Model<F>,
    pub log: TrainLog,
    pub stop: StopReason,
    pub steps: u64,
    pub best_las: Option<f64>,
}

/// One training example: the slots of an oracle configuration and the gold transition.
struct Instance {
    sentence: u32,
    /// 0 for NULL, 1 for the root, `t + 1` for token `t`.
    slots: [u32; NUM_SLOTS],
    /// Label embedding id of each slot.
    labels: [u32; NUM_SLOTS],
    gold: u32,
    legal: KindSet,
}

/// Instances of every derivable sentence. Underivable ones are skipped.
fn instances<F: Float>(model: &Model<F>, train: &[Sentence]) -> Result<Vec<Instance>> {
    let system = model.system();
    let vocab = &model.vocab;
    let num_labels = vocab.num_labels();
    let mut out = Vec::new();
    let mut skipped = 0;
    for (si, sentence) in train.iter().enumerate() {
        let gold = GoldTree::from_sentence(sentence, vocab)?;
        let derivation = match system.derive(&gold) {
            Ok(d) => d,
            Err(Error::UnreachableTree) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        for (config, transition) in derivation {
            let features = extract(&config);
            let mut slots = [0u32; NUM_SLOTS];
            let mut labels = [0u32; NUM_SLOTS];
            for (k, token) in features.tokens.iter().enumerate() {
                slots[k] = match token {
                    SlotToken::Null => 0,
                    SlotToken::Root => 1,
                    SlotToken::Token(t) => *t as u32 + 1,
                };
                labels[k] = match features.arc_labels[k] {
                    Some(l) => vocab.label_feature_id(l),
                    None => vocab.label_nolabel(),
                } as u32;
            }
            out.push(Instance {
                sentence: si as u32,
                slots,
                labels,
                gold: transition.index(num_labels) as u32,
                legal: system.legal(&config),
            });
        }
    }
    if skipped > 0 {
        warn!("skipped {} training sentences the transition system cannot derive", skipped);
    }
    Ok(out)
}

/// Ids of the training tokens; `composed` holds the true word id of each
/// form, which keys the composition.
fn training_ids<F: Float>(model: &Model<F>, train: &[Sentence]) -> Vec<TokenIds> {
    train
        .iter()
        .map(|s| TokenIds {
            words: s.tokens.iter().map(|t| model.vocab.word_id(&t.form)).collect(),
            tags: s.tokens.iter().map(|t| model.vocab.tag_id(&t.tag)).collect(),
            composed: s.tokens.iter().map(|t| model.vocab.word_id(&t.form)).collect(),
        })
        .collect()
}

struct Sampler<'a> {
    instances: &'a [Instance],
    ids: &'a [TokenIds],
    cores: HashMap<usize, Vec<usize>>,
    singleton: Vec<bool>,
    unk: usize,
    replacement: f64,
    composing: bool,
    null: (usize, usize, usize),
    root: (usize, usize),
}

impl Sampler<'_> {
    fn batch<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> (Batch, Vec<usize>, Vec<KindSet>) {
        let mut rows = TokenRows::with_capacity(size * NUM_SLOTS);
        let mut local: HashMap<usize, usize> = HashMap::new();
        let mut forms = Vec::new();
        let mut gold = Vec::with_capacity(size);
        let mut legal = Vec::with_capacity(size);
        for _ in 0..size {
            let inst = &self.instances[rng.random_range(0..self.instances.len())];
            let ids = &self.ids[inst.sentence as usize];
            for (&slot, &label) in inst.slots.iter().zip(&inst.labels) {
                match slot {
                    0 => rows.push(self.null.0, self.null.1, self.null.2, COMPOSED_NULL),
                    1 => rows.push(self.root.0, self.root.1, label as usize, COMPOSED_ROOT),
                    t => {
                        let t = t as usize - 2;
                        let mut word = ids.words[t];
                        if self.replacement > 0.0 && self.singleton[word] && rng.random::<f64>() < self.replacement {
                            word = self.unk;
                        }
                        let composed = if self.composing {
                            let key = ids.composed[t];
                            let next = local.len();
                            let k = *local.entry(key).or_insert_with(|| {
                                forms.push(self.cores[&key].clone());
                                next
                            });
                            COMPOSED_FORMS + k
                        } else {
                            COMPOSED_NULL
                        };
                        rows.push(word, ids.tags[t], label as usize, composed);
                    }
                }
            }
            gold.push(inst.gold as usize);
            legal.push(inst.legal);
        }
        (Batch { rows, forms }, gold, legal)
    }
}

/// Parses `sentences` with `model` and scores the result.
pub fn evaluate<F: Float>(model: &Model<F>, sentences: &[Sentence]) -> Result<Score> {
    let predicted = model.parse_many(sentences)?;
    score(sentences, &predicted)
}

/// Trains a model from scratch. The vocabulary is built from `train`,
/// extended by the embedding file's forms in pre-trained modes.
pub fn train<F: Float>(
    train: &[Sentence],
    dev: &[Sentence],
    config: ModelConfig,
    schedule: &TrainSchedule,
    embeddings: Option<&EmbeddingFile>,
    seed: u64,
) -> Result<TrainOutcome<F>> {
    train_with(train, dev, config, schedule, embeddings, seed, |_| {})
}

/// [`train`] reporting every log record to `observer` as it is produced.
pub fn train_with<F: Float>(
    train: &[Sentence],
    dev: &[Sentence],
    config: ModelConfig,
    schedule: &TrainSchedule,
    embeddings: Option<&EmbeddingFile>,
    seed: u64,
    mut observer: impl FnMut(&LogRecord),
) -> Result<TrainOutcome<F>> {
    schedule.validate()?;
    if train.is_empty() || dev.is_empty() {
        return Err(Error::Config("training and development corpora must be non-empty".into()));
    }
    let mut vocab = build_vocab(train);
    if config.repr.mode.pretrained() {
        let file = embeddings
            .ok_or_else(|| Error::Config(format!("mode {} needs pre-trained embeddings", config.repr.mode)))?;
        vocab.extend_words(file.forms());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model: Model<F> = Model::new(vocab, config, embeddings, &mut rng)?;
    let instances = instances(&model, train)?;
    if instances.is_empty() {
        return Err(Error::Config("no derivable training instances".into()));
    }
    info!("{} training instances", instances.len());

    let ids = training_ids(&model, train);
    let mut cores = HashMap::new();
    for s in train {
        for t in &s.tokens {
            cores
                .entry(model.vocab.word_id(&t.form))
                .or_insert_with(|| char_core(&t.form, &model.vocab));
        }
    }
    let vocab = &model.vocab;
    let sampler = Sampler {
        instances: &instances,
        ids: &ids,
        cores,
        singleton: (0..vocab.words().len()).map(|i| vocab.word_count_by_id(i) == 1).collect(),
        unk: vocab.word_unk(),
        replacement: if model.config.repr.mode.uses_lookup() {
            schedule.unk_replacement
        } else {
            0.0
        },
        composing: model.config.repr.mode.composition().is_some(),
        null: (vocab.word_null(), vocab.tag_null(), vocab.label_null()),
        root: (vocab.word_root(), vocab.tag_root()),
    };
    let num_labels = model.vocab.num_labels();

    let mut opt = OptimizerState::new(schedule.optimizer.clone());
    let mut log = TrainLog::default();
    let mut stopping = EarlyStopping::new(schedule.patience);
    let mut best: Option<Model<F>> = None;
    let mut stop = StopReason::MaxSteps;
    let mut record = |r: LogRecord, log: &mut TrainLog| {
        observer(&r);
        log.records.push(r);
    };

    while opt.step < schedule.max_steps {
        let step = opt.step;
        let (batch, gold, legal) = sampler.batch(schedule.batch_size, &mut rng);
        let masks: Vec<Vec<bool>> = legal.iter().map(|k| k.output_mask(num_labels)).collect();
        let loss = model.loss_and_gradients(&batch, &gold, &masks, true, &mut rng)?;
        let stats = sgd_step(&mut model.params_mut(), &mut opt)?;
        record(
            LogRecord::Update {
                step,
                learning_rate: stats.learning_rate,
                loss: loss.to_f64().unwrap_or(f64::NAN),
            },
            &mut log,
        );

        if opt.step.is_multiple_of(schedule.eval_every) {
            let averaged = model.averaged();
            let s = evaluate(&averaged, dev)?;
            let verdict = stopping.observe(s.las());
            info!(
                "step {}: dev LAS {:.4} UAS {:.4} lr {}",
                opt.step,
                s.las(),
                s.uas(),
                stats.learning_rate
            );
            record(
                LogRecord::Eval {
                    step: opt.step,
                    las: s.las(),
                    uas: s.uas(),
                    improved: verdict == Verdict::Improved,
                },
                &mut log,
            );
            if verdict == Verdict::Improved {
                best = Some(averaged);
            }
            if schedule.target_uas.is_some_and(|t| s.uas() >= t) {
                stop = StopReason::Target;
                break;
            }
            if verdict == Verdict::Stop {
                stop = StopReason::EarlyStopping;
                break;
            }
        }
    }

    let model = match best {
        Some(m) => m,
        None => model.averaged(),
    };
    Ok(TrainOutcome {
        model,
        log,
        stop,
        steps: opt.step,
        best_las: stopping.best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::tests::small_config;
    use crate::repr::Mode;

    #[test]
    fn patience_stops_on_third_miss() {
        let mut es = EarlyStopping::new(3);
        assert_eq!(es.observe(0.80), Verdict::Improved);
        assert_eq!(es.observe(0.79), Verdict::NotImproved);
        assert_eq!(es.observe(0.79), Verdict::NotImproved);
        assert_eq!(es.observe(0.79), Verdict::Stop);
        assert_eq!(es.best, Some(0.80));
    }

    #[test]
    fn improvement_resets_patience() {
        let mut es = EarlyStopping::new(2);
        es.observe(0.5);
        es.observe(0.4);
        assert_eq!(es.observe(0.6), Verdict::Improved);
        assert_eq!(es.observe(0.6), Verdict::NotImproved);
        assert_eq!(es.observe(0.1), Verdict::Stop);
    }

    fn toy() -> Vec<Sentence> {
        vec![
            Sentence::from_tuples(vec![("a", "D", 2, "det"), ("dog", "N", 3, "subj"), ("runs", "V", 0, "root")]),
            Sentence::from_tuples(vec![("the", "D", 2, "det"), ("cat", "N", 0, "root")]),
        ]
    }

    #[test]
    fn instance_count_is_twice_tokens() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = toy();
        let m: Model<f32> = Model::new(build_vocab(&c), small_config(Mode::Word), None, &mut rng).unwrap();
        assert_eq!(instances(&m, &c).unwrap().len(), 2 * 5);
    }

    #[test]
    fn deterministic_and_logged() {
        let c = toy();
        let schedule = TrainSchedule {
            max_steps: 12,
            batch_size: 4,
            eval_every: 5,
            ..Default::default()
        };
        let run = || train::<f32>(&c, &c, small_config(Mode::Cnn), &schedule, None, 9).unwrap();
        let (a, b) = (run(), run());
        assert_eq!(a.log, b.log);
        assert_eq!(bincode::serialize(&a.model).unwrap(), bincode::serialize(&b.model).unwrap());
        assert_eq!(a.log.updates().count(), 12);
        assert_eq!(a.log.evals().map(|e| e.0).collect::<Vec<_>>(), vec![5, 10]);
    }

    #[test]
    fn rejects_empty_corpus() {
        let schedule = TrainSchedule::default();
        assert!(train::<f32>(&[], &toy(), small_config(Mode::Word), &schedule, None, 0).is_err());
    }
}
