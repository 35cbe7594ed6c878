mod settings;

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};
use rayon::prelude::*;

use chardep::corpus::{load_embeddings, read_conll_with, write_conll, ReadOptions, Sentence};
use chardep::eval::{mask_corpus, oov_buckets, report, score, MaskSpec, NamedScore};
use chardep::parser::{train_with, LogRecord};
use chardep::{load_model, save_model, Mode, Model};

use settings::{Settings, KEYS};

#[derive(Parser)]
#[command(name = "chardep", version, args_override_self = true, about = "Greedy dependency parser with character-composed word representations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on a treebank, selecting the best dev checkpoint.
    Train(Box<TrainArgs>),
    /// Parse a CoNLL file with a trained model.
    Parse(ParseArgs),
    /// Score predictions against gold trees.
    Eval(EvalArgs),
    /// Replace one or two thirds of every word form by a mask character.
    Mask(MaskArgs),
}

#[derive(Args)]
struct CorpusArgs {
    /// 1-based CoNLL column holding the POS tag (5 = fine tag, 4 = coarse/UPOS).
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u16).range(4..=10))]
    tag_column: u16,
}

impl CorpusArgs {
    fn options(&self, require_tree: bool) -> ReadOptions {
        ReadOptions {
            tag_column: self.tag_column as usize - 1,
            require_tree,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    dev: PathBuf,
    /// Where to write the model.
    #[arg(long)]
    out: PathBuf,
    /// Training log (tab-separated). Defaults to the model path with `.log.tsv` appended.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Pre-trained word vectors (`form v1 .. vd` per line), required by the W2V modes.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// File of `key = value` hyperparameters; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// WORD, W2V, CNN, LSTM, CNN+WORD, CNN+W2V, LSTM+WORD or LSTM+W2V.
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    seed: Option<u64>,
    /// Maximum number of updates.
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    eval_every: Option<u64>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    /// Any hyperparameter as KEY=VALUE (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", long_help = set_help())]
    set: Vec<String>,
    #[command(flatten)]
    corpus: CorpusArgs,
}

#[derive(Args)]
struct ParseArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    /// Output file; standard output if omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Worker threads for parsing.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    threads: u16,
    #[command(flatten)]
    corpus: CorpusArgs,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    gold: PathBuf,
    /// Predicted trees (repeatable). Δ columns compare each file with the first.
    #[arg(long, required = true)]
    pred: Vec<PathBuf>,
    /// A model whose training vocabulary splits tokens into IV and OOV buckets.
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Print tab-separated values instead of an aligned table.
    #[arg(long)]
    tsv: bool,
    #[command(flatten)]
    corpus: CorpusArgs,
}

#[derive(Args)]
struct MaskArgs {
    #[arg(long)]
    input: PathBuf,
    /// Which thirds to mask, e.g. `•bc`, `a•c`, `••c` (`*`, `_` or `.` also mark a masked third).
    #[arg(long)]
    pattern: MaskSpec,
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    corpus: CorpusArgs,
}

fn set_help() -> String {
    format!(
        "Any hyperparameter as KEY=VALUE (repeatable); also accepted in --config files. Keys: {}",
        KEYS.join(", ")
    )
}

fn read_corpus(path: &Path, options: &ReadOptions) -> Result<Vec<Sentence>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    read_conll_with(BufReader::new(file), options).with_context(|| format!("reading {}", path.display()))
}

fn read_model(path: &Path) -> Result<Model> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    load_model(BufReader::new(file)).with_context(|| format!("loading {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn usage_error(message: impl std::fmt::Display) -> ! {
    Cli::command().error(ErrorKind::MissingRequiredArgument, message).exit()
}

fn settings(args: &TrainArgs) -> Result<Settings> {
    let mut s = Settings::default();
    if let Some(path) = &args.config {
        s.apply_file(path)?;
    }
    if let Some(mode) = args.mode {
        s.model.repr.mode = mode;
    }
    let flags = [
        ("seed", args.seed.map(|v| v.to_string())),
        ("steps", args.steps.map(|v| v.to_string())),
        ("batch_size", args.batch_size.map(|v| v.to_string())),
        ("eval_every", args.eval_every.map(|v| v.to_string())),
        ("patience", args.patience.map(|v| v.to_string())),
        ("learning_rate", args.learning_rate.map(|v| v.to_string())),
        ("dropout", args.dropout.map(|v| v.to_string())),
    ];
    for (key, value) in flags {
        if let Some(value) = value {
            s.set(key, &value)?;
        }
    }
    for pair in &args.set {
        let (key, value) = pair
            .split_once('=')
            .with_context(|| format!("--set {}: expected KEY=VALUE", pair))?;
        s.set(key.trim(), value)?;
    }
    s.validate()?;
    Ok(s)
}

fn train(args: TrainArgs) -> Result<()> {
    let s = settings(&args)?;
    let mode = s.model.repr.mode;
    let embeddings = match (&args.embeddings, mode.pretrained()) {
        (None, true) => usage_error(format!("mode {} needs --embeddings", mode)),
        (Some(path), true) => {
            let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
            let e = load_embeddings(BufReader::new(file), s.model.repr.word_dim)
                .with_context(|| format!("reading {}", path.display()))?;
            log::info!("{} pre-trained vectors of dimension {}", e.len(), e.dimension());
            Some(e)
        }
        (Some(_), false) => {
            log::warn!("mode {} does not use --embeddings; ignoring them", mode);
            None
        }
        (None, false) => None,
    };

    let train_set = read_corpus(&args.train, &args.corpus.options(true))?;
    let dev = read_corpus(&args.dev, &args.corpus.options(true))?;
    log::info!("{} training and {} dev sentences, mode {}", train_set.len(), dev.len(), mode);

    let outcome = train_with::<f32>(
        &train_set,
        &dev,
        s.model.clone(),
        &s.schedule,
        embeddings.as_ref(),
        s.seed,
        |record| {
            if let LogRecord::Eval { step, las, uas, improved } = record {
                log::info!(
                    "step {}: dev LAS {:.2} UAS {:.2}{}",
                    step,
                    100.0 * las,
                    100.0 * uas,
                    if *improved { " (best)" } else { "" }
                );
            }
        },
    )?;

    let mut writer = create(&args.out)?;
    save_model(&outcome.model, &mut writer)?;
    writer.flush()?;
    let log_path = args.log.unwrap_or_else(|| {
        let mut p = args.out.clone().into_os_string();
        p.push(".log.tsv");
        p.into()
    });
    let mut log_writer = create(&log_path)?;
    outcome.log.write_tsv(&mut log_writer)?;
    log_writer.flush()?;
    log::info!(
        "stopped after {} steps ({:?}); best dev LAS {}",
        outcome.steps,
        outcome.stop,
        outcome.best_las.map_or("n/a".into(), |l| format!("{:.2}", 100.0 * l))
    );
    Ok(())
}

fn parse(args: ParseArgs) -> Result<()> {
    let model = read_model(&args.model)?;
    let input = read_corpus(&args.input, &args.corpus.options(false))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads as usize)
        .build()?;
    let chunk = input.len().div_ceil(args.threads as usize).max(1);
    let parsed: Vec<_> = pool.install(|| {
        input
            .par_chunks(chunk)
            .map(|c| model.parse_many(c))
            .collect::<chardep::Result<Vec<_>>>()
    })?;
    let predicted: Vec<_> = parsed.into_iter().flatten().collect();
    let mut out = output(args.output.as_deref())?;
    write_conll(&mut out, &input, &predicted)?;
    out.flush()?;
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let gold = read_corpus(&args.gold, &args.corpus.options(true))?;
    let vocab = args.vocab.as_deref().map(read_model).transpose()?.map(|m| m.vocab);
    let mut rows = Vec::new();
    for path in &args.pred {
        let pred = read_corpus(path, &args.corpus.options(false))?;
        let attachments: Vec<_> = pred.iter().map(|s| s.gold_attachments()).collect();
        let context = || format!("comparing {} with {}", path.display(), args.gold.display());
        let sc = score(&gold, &attachments).with_context(context)?;
        let buckets = vocab
            .as_ref()
            .map(|v| oov_buckets(&gold, &attachments, v))
            .transpose()
            .with_context(context)?;
        let name = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
        rows.push(NamedScore { name, score: sc, buckets });
    }
    let r = report(&rows);
    print!("{}", if args.tsv { r.tsv } else { r.text });
    Ok(())
}

fn mask(args: MaskArgs) -> Result<()> {
    let input = read_corpus(&args.input, &args.corpus.options(false))?;
    let masked = mask_corpus(&input, &args.pattern);
    let attachments: Vec<_> = input.iter().map(|s| s.gold_attachments()).collect();
    let mut out = output(args.output.as_deref())?;
    write_conll(&mut out, &masked, &attachments)?;
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => train(*a),
        Command::Parse(a) => parse(a),
        Command::Eval(a) => eval(a),
        Command::Mask(a) => mask(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = format!("{:#}", e).replace('\n', " ");
            eprintln!("chardep: error: {}", message);
            ExitCode::FAILURE
        }
    }
}
