use std::hint::black_box;

use chardep::corpus::build_vocab;
use chardep::nn::{sgd_step, HasParams, OptimizerConfig, OptimizerState};
use chardep::parser::{train, TrainSchedule};
use chardep::repr::{pad_chars, Representations};
use chardep::transition::GoldTree;
use chardep::{Mode, Model, ModelConfig, ReprConfig, TransitionSystem};
use chardep_bench::corpus;
use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn padding(c: &mut Criterion) {
    let sentences = corpus(100, 500, 1);
    let vocab = build_vocab(&sentences);
    let forms: Vec<&str> = sentences.iter().flat_map(|s| s.tokens.iter().map(|t| t.form.as_str())).collect();
    c.bench_function("pad_chars/corpus", |b| {
        b.iter(|| forms.iter().map(|f| pad_chars(f, 32, &vocab).ids.len()).sum::<usize>())
    });
}

fn oracle(c: &mut Criterion) {
    let sentences = corpus(200, 500, 2);
    let vocab = build_vocab(&sentences);
    let system = TransitionSystem::default();
    let gold: Vec<GoldTree> = sentences.iter().map(|s| GoldTree::from_sentence(s, &vocab).unwrap()).collect();
    c.bench_function("derive/200 sentences", |b| {
        b.iter(|| gold.iter().map(|g| system.derive(g).unwrap().len()).sum::<usize>())
    });
}

fn composition(c: &mut Criterion) {
    let sentences = corpus(50, 256, 3);
    let vocab = build_vocab(&sentences);
    let forms: Vec<Vec<usize>> = (0..256)
        .map(|i| pad_chars(vocab.words().symbol(i + 4).unwrap_or("x"), 32, &vocab).ids)
        .collect();
    for mode in [Mode::Cnn, Mode::Lstm] {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let repr = Representations::<f32>::new(ReprConfig::with_mode(mode), &vocab, None, &mut rng).unwrap();
        c.bench_function(&format!("compose/{}/256 forms", mode), |b| {
            b.iter(|| black_box(repr.compose(&forms).unwrap().0))
        });
    }
}

fn parsing(c: &mut Criterion) {
    let sentences = corpus(100, 2000, 4);
    let mut group = c.benchmark_group("parse_many/100 sentences");
    group.sample_size(10);
    for mode in [Mode::Word, Mode::Cnn, Mode::Lstm] {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let config = ModelConfig { repr: ReprConfig::with_mode(mode), ..Default::default() };
        let model: Model = Model::new(build_vocab(&sentences), config, None, &mut rng).unwrap();
        group.bench_function(mode.name(), |b| b.iter(|| black_box(model.parse_many(&sentences).unwrap())));
    }
    group.finish();
}

fn training_step(c: &mut Criterion) {
    let sentences = corpus(50, 500, 5);
    let mut group = c.benchmark_group("train_step/batch 100");
    group.sample_size(10);
    for mode in [Mode::Word, Mode::Cnn, Mode::Lstm] {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let config = ModelConfig { repr: ReprConfig::with_mode(mode), ..Default::default() };
        let model: Model = Model::new(build_vocab(&sentences), config, None, &mut rng).unwrap();
        let system = model.system();
        let derivation = system.derive(&GoldTree::from_sentence(&sentences[0], &model.vocab).unwrap()).unwrap();
        let mut items = Vec::new();
        let mut gold = Vec::new();
        let mut masks = Vec::new();
        let labels = model.vocab.num_labels();
        for (config, t) in derivation.iter().cycle().take(100) {
            items.push((&sentences[0], config));
            gold.push(t.index(labels));
            masks.push(system.legal(config).output_mask(labels));
        }
        let batch = model.encode(&items);
        group.bench_function(mode.name(), |b| {
            b.iter_batched(
                || (model.clone(), OptimizerState::new(OptimizerConfig::default())),
                |(mut m, mut opt)| {
                    m.loss_and_gradients(&batch, &gold, &masks, true, &mut rng).unwrap();
                    sgd_step(&mut m.params_mut(), &mut opt).unwrap();
                    m
                },
                BatchSize::LargeInput,
            )
        });
    }
    group.finish();
}

fn end_to_end(c: &mut Criterion) {
    let sentences = corpus(100, 300, 6);
    let mut group = c.benchmark_group("train/100 steps");
    group.sample_size(10);
    let schedule = TrainSchedule { max_steps: 100, eval_every: 100, ..Default::default() };
    group.bench_function("WORD", |b| {
        b.iter(|| train::<f32>(&sentences, &sentences[..10], ModelConfig::default(), &schedule, None, 0).unwrap().steps)
    });
    group.finish();
}

criterion_group!(benches, padding, oracle, composition, parsing, training_step, end_to_end);
criterion_main!(benches);
