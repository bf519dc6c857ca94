//! `attnlab` command line: `train`, `tune`, `evaluate`, `predict` and
//! `synth`.
//!
//! Every run option can come from a flag or from a flat `key = value` file
//! (`--config`, and for `tune` also `--grid`); flags win. The fully resolved
//! options are echoed to `config.resolved` in the output directory and can be
//! passed back through `--config` to replay a run.
//!
//! Exit codes: 0 success, 1 other failure, 2 missing file or bad usage,
//! 3 non-finite loss, 4 corrupt ledger, 5 vocabulary/checkpoint mismatch.

use std::collections::HashSet;
use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::KeyValues;
use crate::corpus::synthetic::{self, SynthSpec};
use crate::corpus::{load_corpus, Corpus, VocabSource, DEFAULT_MAX_TOKENS};
use crate::metrics::{MetricsReport, PredictionSet};
use crate::nn::{checkpoint, Arch, Hyperparams, ModelParams};
use crate::trainer::{self, EmbeddingInit, TrainConfig, DEFAULT_EMBED_DIM};
use crate::tuner::{self, ledger, GridSpec, RunOptions, TrialData};
use crate::{Error, Result};

pub const CONFIG_FILE: &str = "config.resolved";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const HISTORY_FILE: &str = "history.tsv";
pub const LEDGER_FILE: &str = "ledger.tsv";
pub const SUMMARY_FILE: &str = "summary.txt";

const GRID_KEYS: [&str; 7] = ["d_c", "k", "q", "eta", "seeds", "top_m", "workers"];

#[derive(Debug, Parser)]
#[command(name = "attnlab", version, about = "Train and tune CNN/CAML multi-label text classifiers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one model with early stopping and write checkpoint + history.
    Train(RunArgs),
    /// Grid search over (d_c, k, q, eta) and seeds; resumable.
    Tune(TuneArgs),
    /// Print test metrics of a checkpoint as TSV.
    Evaluate(EvalArgs),
    /// Print the top-n labels with probabilities for every document.
    Predict(PredictArgs),
    /// Write a seeded synthetic corpus (train/valid/test + embeddings).
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Flat `key = value` file supplying defaults for any option.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub valid: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Pretrained vectors (`V d` header, then `word v1 ... vd`).
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Embedding width when no pretrained file is given (default 100).
    #[arg(long)]
    pub embed_dim: Option<usize>,
    /// cnn or caml (default caml).
    #[arg(long)]
    pub arch: Option<String>,
    /// Number of filters.
    #[arg(long)]
    pub dc: Option<usize>,
    /// Filter size.
    #[arg(long)]
    pub k: Option<usize>,
    /// Dropout probability.
    #[arg(long)]
    pub q: Option<f64>,
    /// Learning rate.
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_tokens: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// Validation metric, `p@N` (default p@5).
    #[arg(long)]
    pub val_metric: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Grid file with `d_c`, `k`, `q`, `eta`, `seeds`, `top_m` lists.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Report the plan and exit without training.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Checkpoint file (default: `<out>/checkpoint.bin`).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub eval: EvalArgs,
    #[arg(long, default_value_t = 5)]
    pub top_n: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 120)]
    pub train_docs: usize,
    #[arg(long, default_value_t = 40)]
    pub eval_docs: usize,
    #[arg(long, default_value_t = 10)]
    pub labels: usize,
    #[arg(long, default_value_t = 20)]
    pub min_len: usize,
    #[arg(long, default_value_t = 60)]
    pub max_len: usize,
    #[arg(long, default_value_t = 32)]
    pub embed_dim: usize,
    #[arg(long, default_value_t = 2021)]
    pub seed: u64,
}

/// Parses `std::env::args`, runs the command and returns the exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } => 2,
        Error::NonFiniteLoss { .. } | Error::NonFiniteGradient(_) => 3,
        Error::Ledger { .. } => 4,
        Error::VocabMismatch { .. } => 5,
        Error::Invalid(msg) if msg.starts_with("missing required option") => 2,
        _ => 1,
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Train(a) => cmd_train(&a),
        Command::Tune(a) => cmd_tune(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Predict(a) => cmd_predict(&a),
        Command::Synth(a) => cmd_synth(&a),
    }
}

/// Options after layering flags over config files over defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: Option<PathBuf>,
    pub valid: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub embed_dim: usize,
    pub arch: Arch,
    pub hyperparams: Hyperparams,
    pub max_tokens: usize,
    pub train_config: TrainConfig,
    pub out: PathBuf,
}

impl RunConfig {
    /// Resolves `args` over the given config layers (later layers override
    /// earlier ones).
    pub fn resolve(args: &RunArgs, layers: &[KeyValues]) -> Result<RunConfig> {
        let mut kv = KeyValues::new();
        for layer in layers {
            for key in layer.keys() {
                kv.set(key, layer.get(key).unwrap_or_default());
            }
        }
        if let Some(path) = &args.config {
            let file = KeyValues::load(path)?;
            for key in file.keys() {
                kv.set(key, file.get(key).unwrap_or_default());
            }
        }

        fn pick<T: std::str::FromStr>(flag: Option<T>, kv: &KeyValues, key: &str) -> Result<Option<T>>
        where
            T::Err: std::fmt::Display,
        {
            match flag {
                Some(v) => Ok(Some(v)),
                None => kv.parsed(key),
            }
        }

        let arch: Arch = pick(args.arch.clone(), &kv, "arch")?
            .map(|s: String| s.parse())
            .transpose()?
            .unwrap_or(Arch::Caml);
        let defaults = Hyperparams::default_for(arch);
        let hyperparams = Hyperparams {
            filters: pick(args.dc, &kv, "dc")?.unwrap_or(defaults.filters),
            kernel: pick(args.k, &kv, "k")?.unwrap_or(defaults.kernel),
            dropout: pick(args.q, &kv, "q")?.unwrap_or(defaults.dropout),
            learning_rate: pick(args.eta, &kv, "eta")?.unwrap_or(defaults.learning_rate),
        };
        hyperparams.validate()?;

        let base = TrainConfig::default();
        let metric_n = match pick(args.val_metric.clone(), &kv, "val_metric")? {
            Some(s) => parse_val_metric(&s)?,
            None => base.metric_n,
        };
        let train_config = TrainConfig {
            batch_size: pick(args.batch_size, &kv, "batch_size")?.unwrap_or(base.batch_size),
            max_epochs: pick(args.max_epochs, &kv, "max_epochs")?.unwrap_or(base.max_epochs),
            patience: pick(args.patience, &kv, "patience")?.unwrap_or(base.patience),
            metric_n,
            seed: pick(args.seed, &kv, "seed")?.unwrap_or(base.seed),
            adam: base.adam,
        };
        train_config.validate()?;

        let max_tokens = pick(args.max_tokens, &kv, "max_tokens")?.unwrap_or(DEFAULT_MAX_TOKENS);
        if max_tokens == 0 {
            return Err(Error::invalid("max_tokens must be positive"));
        }
        let embed_dim = pick(args.embed_dim, &kv, "embed_dim")?.unwrap_or(DEFAULT_EMBED_DIM);
        if embed_dim == 0 {
            return Err(Error::invalid("embed_dim must be positive"));
        }

        Ok(RunConfig {
            train: pick(args.train.clone(), &kv, "train")?,
            valid: pick(args.valid.clone(), &kv, "valid")?,
            test: pick(args.test.clone(), &kv, "test")?,
            embeddings: pick(args.embeddings.clone(), &kv, "embeddings")?,
            embed_dim,
            arch,
            hyperparams,
            max_tokens,
            train_config,
            out: args.out.clone().unwrap_or_else(|| PathBuf::from("attnlab-out")),
        })
    }

    /// Echo in config-file syntax; the output directory is omitted so a
    /// replay can target a different one.
    pub fn to_config(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        for (key, value) in [
            ("train", path(&self.train)),
            ("valid", path(&self.valid)),
            ("test", path(&self.test)),
            ("embeddings", path(&self.embeddings)),
        ] {
            if let Some(v) = value {
                kv.set(key, v);
            }
        }
        let tc = &self.train_config;
        kv.set("embed_dim", self.embed_dim.to_string());
        kv.set("arch", self.arch.to_string());
        kv.set("dc", self.hyperparams.filters.to_string());
        kv.set("k", self.hyperparams.kernel.to_string());
        kv.set("q", self.hyperparams.dropout.to_string());
        kv.set("eta", self.hyperparams.learning_rate.to_string());
        kv.set("seed", tc.seed.to_string());
        kv.set("max_tokens", self.max_tokens.to_string());
        kv.set("batch_size", tc.batch_size.to_string());
        kv.set("patience", tc.patience.to_string());
        kv.set("max_epochs", tc.max_epochs.to_string());
        kv.set("val_metric", format!("p@{}", tc.metric_n));
        kv.set("adam_beta1", tc.adam.beta1.to_string());
        kv.set("adam_beta2", tc.adam.beta2.to_string());
        kv.set("adam_epsilon", tc.adam.epsilon.to_string());
        kv
    }

    fn embedding_init(&self) -> EmbeddingInit<'_> {
        match &self.embeddings {
            Some(p) => EmbeddingInit::Pretrained(p),
            None => EmbeddingInit::Random {
                dim: self.embed_dim,
            },
        }
    }
}

pub fn parse_val_metric(s: &str) -> Result<usize> {
    s.trim()
        .to_ascii_lowercase()
        .strip_prefix("p@")
        .and_then(|n| n.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::invalid(format!("validation metric `{s}` is not of the form p@N")))
}

fn require<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| Error::invalid(format!("missing required option --{flag}")))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

struct Splits {
    train: Corpus,
    valid: Option<Corpus>,
    test: Option<Corpus>,
}

fn load_splits(cfg: &RunConfig) -> Result<Splits> {
    let train = load_corpus(require(&cfg.train, "train")?, VocabSource::Build, cfg.max_tokens)?;
    let load = |p: &Option<PathBuf>| -> Result<Option<Corpus>> {
        p.as_deref()
            .map(|p| {
                load_corpus(
                    p,
                    VocabSource::Fixed(&train.vocab, &train.labels),
                    cfg.max_tokens,
                )
            })
            .transpose()
    };
    let valid = load(&cfg.valid)?;
    let test = load(&cfg.test)?;
    eprintln!(
        "loaded {} training documents, vocabulary {}, {} labels",
        train.docs.len(),
        train.vocab.len(),
        train.num_labels()
    );
    Ok(Splits { train, valid, test })
}

pub fn cmd_train(args: &RunArgs) -> Result<()> {
    let cfg = RunConfig::resolve(args, &[])?;
    require(&cfg.valid, "valid")?;
    let splits = load_splits(&cfg)?;
    let valid = splits.valid.as_ref().expect("checked above");

    let outcome = trainer::train(
        cfg.arch,
        &cfg.hyperparams,
        &splits.train,
        &valid.docs,
        cfg.embedding_init(),
        &cfg.train_config,
    )?;

    create_dir(&cfg.out)?;
    write_file(&cfg.out.join(CONFIG_FILE), cfg.to_config().to_string())?;
    checkpoint::save(&outcome.best, &cfg.out.join(CHECKPOINT_FILE))?;
    write_file(&cfg.out.join(HISTORY_FILE), outcome.history.to_tsv())?;
    eprintln!(
        "best epoch {} of {} with validation p@{} = {:.6}",
        outcome.best_epoch,
        outcome.history.epochs.len(),
        cfg.train_config.metric_n,
        outcome.best_metric
    );

    if let Some(test) = &splits.test {
        let report = tuner::test_metrics(&outcome.best, &test.docs, cfg.train_config.metric_n)?;
        print!("{}", report.to_tsv());
    }
    Ok(())
}

pub fn cmd_tune(args: &TuneArgs) -> Result<()> {
    // The grid file and --config share one namespace; grid lists are pulled
    // out before the rest is resolved as ordinary run options.
    let mut merged = KeyValues::new();
    for path in [&args.grid, &args.run.config].into_iter().flatten() {
        let file = KeyValues::load(path)?;
        for key in file.keys() {
            merged.set(key, file.get(key).unwrap_or_default());
        }
    }
    let spec = GridSpec::from_config(&merged)?;
    let mut run_layer = KeyValues::new();
    for key in merged.keys().filter(|k| !GRID_KEYS.contains(k)) {
        run_layer.set(key, merged.get(key).unwrap_or_default());
    }
    let run_args = RunArgs {
        config: None,
        ..args.run.clone()
    };
    let cfg = RunConfig::resolve(&run_args, &[run_layer])?;
    let workers = match args.workers {
        Some(w) => w,
        None => merged.parsed("workers")?.unwrap_or(1),
    };

    let combos = spec.num_combinations();
    let planned = combos * spec.seeds.len();
    println!(
        "planned {combos} grid combinations x {} seeds = {planned} trials",
        spec.seeds.len()
    );
    if args.dry_run {
        return Ok(());
    }

    require(&cfg.valid, "valid")?;
    require(&cfg.test, "test")?;
    let metric_n = cfg.train_config.metric_n;

    // Earlier ledger rows must match this plan; they are kept verbatim.
    let ledger_path = cfg.out.join(LEDGER_FILE);
    let plan = tuner::plan(&spec)?;
    let mut previous = Vec::new();
    if ledger_path.exists() {
        let file = File::open(&ledger_path).map_err(|e| Error::io(&ledger_path, e))?;
        previous = ledger::parse(BufReader::new(file), metric_n)?;
        for (i, rec) in previous.iter().enumerate() {
            let matches = plan
                .iter()
                .any(|(s, idx, hp)| *s == rec.seed && *idx == rec.grid_index && *hp == rec.hyperparams);
            if !matches {
                return Err(Error::Ledger {
                    line: i + 2,
                    msg: "trial does not belong to the current grid".into(),
                });
            }
        }
    }
    let skip: HashSet<(u64, usize)> = previous.iter().map(|r| r.key()).collect();
    if !skip.is_empty() {
        eprintln!("resuming: {} trials already in the ledger", skip.len());
    }

    let splits = load_splits(&cfg)?;
    create_dir(&cfg.out)?;
    let mut resolved = KeyValues::new();
    let run_echo = cfg.to_config();
    for key in run_echo.keys().filter(|k| !["dc", "k", "q", "eta", "seed"].contains(k)) {
        resolved.set(key, run_echo.get(key).unwrap_or_default());
    }
    let grid_echo = spec.to_config();
    for key in grid_echo.keys() {
        resolved.set(key, grid_echo.get(key).unwrap_or_default());
    }
    resolved.set("workers", workers.to_string());
    write_file(&cfg.out.join(CONFIG_FILE), resolved.to_string())?;
    let trials_dir = cfg.out.join("trials");
    create_dir(&trials_dir)?;

    let mut ledger_file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&ledger_path)
        .map_err(|e| Error::io(&ledger_path, e))?;
    if previous.is_empty() {
        writeln!(ledger_file, "{}", ledger::header(metric_n)).map_err(|e| Error::io(&ledger_path, e))?;
    }

    let data = TrialData {
        arch: cfg.arch,
        train: &splits.train,
        valid: &splits.valid.as_ref().expect("checked above").docs,
        test: &splits.test.as_ref().expect("checked above").docs,
        embeddings: cfg.embedding_init(),
    };
    let opts = RunOptions {
        workers,
        checkpoint_dir: Some(trials_dir),
        skip,
    };
    let total = planned;
    let mut done = previous.len();
    let fresh = tuner::run_trials(&spec, &data, &cfg.train_config, &opts, |rec| {
        writeln!(ledger_file, "{}", ledger::format_row(rec, metric_n))
            .and_then(|_| ledger_file.flush())
            .map_err(|e| Error::io(&ledger_path, e))?;
        done += 1;
        let status = match &rec.outcome {
            tuner::TrialOutcome::Completed { best_valid, .. } => {
                format!("valid p@{metric_n} {best_valid:.4}")
            }
            tuner::TrialOutcome::Failed(msg) => format!("failed: {msg}"),
        };
        eprintln!(
            "[{done}/{total}] seed {} d_c={} k={} q={} eta={}: {status} ({:.1}s)",
            rec.seed,
            rec.hyperparams.filters,
            rec.hyperparams.kernel,
            rec.hyperparams.dropout,
            rec.hyperparams.learning_rate,
            rec.wall_seconds
        );
        Ok(())
    })?;

    let mut all = previous;
    all.extend(fresh);
    let summary = tuner::aggregate_seeds(&all, spec.top_m, metric_n, &spec.seeds)?;
    let text = summary.render(&cfg.arch.to_string().to_uppercase());
    write_file(&cfg.out.join(SUMMARY_FILE), &text)?;
    print!("{text}");
    Ok(())
}

/// Loads the checkpoint and the data file (`--test`, falling back to
/// `--valid`), rebuilding the vocabulary from the training file. The training
/// path defaults to the one recorded in `config.resolved` beside the
/// checkpoint.
fn load_for_inference(args: &EvalArgs) -> Result<(RunConfig, ModelParams, Corpus, Corpus)> {
    let ckpt_path = args
        .checkpoint
        .clone()
        .or_else(|| args.run.out.as_ref().map(|o| o.join(CHECKPOINT_FILE)))
        .ok_or_else(|| Error::invalid("missing required option --checkpoint (or --out)"))?;
    let mut layers = Vec::new();
    if let Some(dir) = ckpt_path.parent() {
        let recorded = dir.join(CONFIG_FILE);
        if recorded.exists() {
            let kv = KeyValues::load(&recorded)?;
            // only the data-shaping keys are inherited
            let mut keep = KeyValues::new();
            for key in ["train", "max_tokens", "val_metric"] {
                if let Some(v) = kv.get(key) {
                    keep.set(key, v);
                }
            }
            layers.push(keep);
        }
    }
    let cfg = RunConfig::resolve(&args.run, &layers)?;
    let model = checkpoint::load(&ckpt_path)?;
    let train = load_corpus(require(&cfg.train, "train")?, VocabSource::Build, cfg.max_tokens)?;
    let data_path = cfg
        .test
        .clone()
        .or_else(|| args.run.valid.clone())
        .ok_or_else(|| Error::invalid("missing required option --test"))?;
    trainer::check_compatible(&model, &train)?;
    let data = load_corpus(
        &data_path,
        VocabSource::Fixed(&train.vocab, &train.labels),
        cfg.max_tokens,
    )?;
    Ok((cfg, model, train, data))
}

pub fn cmd_evaluate(args: &EvalArgs) -> Result<()> {
    let (cfg, model, _, data) = load_for_inference(args)?;
    let probs = trainer::predict(&model, &data)?;
    let labels: Vec<Vec<u32>> = data.docs.iter().map(|d| d.labels.clone()).collect();
    let set = PredictionSet::from_rows(&probs, &labels, model.shape.labels)?;
    let report = MetricsReport::compute(&set, &[cfg.train_config.metric_n])?;
    print!("{}", report.to_tsv());
    Ok(())
}

pub fn cmd_predict(args: &PredictArgs) -> Result<()> {
    let (_, model, train, data) = load_for_inference(&args.eval)?;
    let n = args.top_n;
    if n == 0 || n > model.shape.labels {
        return Err(Error::invalid(format!(
            "--top-n must be between 1 and {}",
            model.shape.labels
        )));
    }
    let probs = trainer::predict(&model, &data)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let io = |e| Error::io("<stdout>", e);
    writeln!(out, "id\trank\tlabel\tprobability").map_err(io)?;
    for (doc, p) in data.docs.iter().zip(&probs) {
        let mut order: Vec<usize> = (0..p.len()).collect();
        order.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));
        for (rank, &l) in order[..n].iter().enumerate() {
            let name = train.labels.name(l as u32).unwrap_or("?");
            writeln!(out, "{}\t{}\t{}\t{:.6}", doc.id, rank + 1, name, p[l]).map_err(io)?;
        }
    }
    Ok(())
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    create_dir(&args.out)?;
    let base = SynthSpec {
        num_docs: args.train_docs,
        num_labels: args.labels,
        min_len: args.min_len,
        max_len: args.max_len,
        seed: args.seed,
        ..SynthSpec::default()
    };
    let splits = [
        ("train.tsv", base.clone()),
        (
            "valid.tsv",
            SynthSpec {
                num_docs: args.eval_docs,
                id_prefix: "val".into(),
                seed: args.seed.wrapping_add(1),
                ..base.clone()
            },
        ),
        (
            "test.tsv",
            SynthSpec {
                num_docs: args.eval_docs,
                id_prefix: "tst".into(),
                seed: args.seed.wrapping_add(2),
                ..base.clone()
            },
        ),
    ];
    for (name, spec) in splits {
        write_file(&args.out.join(name), synthetic::generate(&spec))?;
    }
    write_file(
        &args.out.join("embeddings.txt"),
        synthetic::embeddings_text(&base, args.embed_dim, args.seed.wrapping_add(3)),
    )?;
    Ok(())
}
