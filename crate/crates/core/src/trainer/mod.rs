//! Training protocol: Adam with default moments, fixed length-sorted batches,
//! validation P@n at batch size 1 after every epoch, patience-based stopping
//! and best-epoch selection.

mod adam;
mod early_stop;

use std::fmt::Write as _;
use std::ops::ControlFlow;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use adam::{adam_step, AdamConfig, OptimizerState};
pub use early_stop::{replay, EarlyStopping, Observation};

use crate::corpus::{load_embeddings, make_batches, Batch, Corpus, Document, Vocabulary};
use crate::metrics::{precision_at_n, PredictionSet};
use crate::nn::{
    backward, bce_loss, forward, Arch, Dropout, Hyperparams, ModelParams, ModelShape,
};
use crate::{Error, Result};

pub const DEFAULT_EMBED_DIM: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// `n` of the validation P@n.
    pub metric_n: usize,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 16,
            max_epochs: 200,
            patience: 10,
            metric_n: 5,
            seed: 1337,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::invalid(
                "batch size, max epochs and patience must be positive",
            ));
        }
        if self.patience >= self.max_epochs {
            return Err(Error::invalid(format!(
                "patience {} must be smaller than max epochs {}",
                self.patience, self.max_epochs
            )));
        }
        if self.metric_n == 0 {
            return Err(Error::invalid("validation metric needs n >= 1"));
        }
        Ok(())
    }
}

/// Where initial embeddings come from.
#[derive(Debug, Clone, Copy)]
pub enum EmbeddingInit<'a> {
    /// Standard-normal rows of the given width.
    Random { dim: usize },
    /// Pretrained text-format vectors; missing words get small uniform rows.
    Pretrained(&'a Path),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_metric: f64,
    pub is_best: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct History {
    pub metric_n: usize,
    pub epochs: Vec<EpochRecord>,
}

impl History {
    /// Header plus `epoch<TAB>train_loss<TAB>valid_p@n<TAB>is_best` rows.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("epoch\ttrain_loss\tvalid_p@{}\tis_best\n", self.metric_n);
        for e in &self.epochs {
            let _ = writeln!(
                out,
                "{}\t{:.6}\t{:.6}\t{}",
                e.epoch,
                e.train_loss,
                e.valid_metric,
                u8::from(e.is_best)
            );
        }
        out
    }

    pub fn best(&self) -> Option<&EpochRecord> {
        self.epochs.iter().find(|e| e.is_best)
    }
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    /// Parameters of the best validation epoch, at checkpoint (`f32`)
    /// precision.
    pub best: ModelParams,
    pub best_epoch: usize,
    pub best_metric: f64,
    pub history: History,
}

/// Builds a fresh model. Draw order from `rng`: conv, attention and output
/// weights, then embeddings (random rows or out-of-vocabulary rows).
pub fn init_model(
    arch: Arch,
    hp: &Hyperparams,
    vocab: &Vocabulary,
    num_labels: usize,
    embeddings: EmbeddingInit<'_>,
    rng: &mut ChaCha8Rng,
) -> Result<ModelParams> {
    hp.validate()?;
    let dim = match embeddings {
        EmbeddingInit::Random { dim } => dim,
        EmbeddingInit::Pretrained(path) => crate::corpus::peek_embedding_dim(path)?,
    };
    let shape = ModelShape {
        arch,
        vocab_size: vocab.len(),
        embed_dim: dim,
        filters: hp.filters,
        kernel: hp.kernel,
        labels: num_labels,
    };
    let mut params = ModelParams::init_weights(shape, rng)?;
    match embeddings {
        EmbeddingInit::Random { .. } => params.randomize_embedding(rng),
        EmbeddingInit::Pretrained(path) => {
            let m = load_embeddings(path, vocab, rng)?;
            params.set_embedding(&m)?;
        }
    }
    Ok(params)
}

/// Seeds one stream from `config.seed`, initialises a model and fits it.
pub fn train(
    arch: Arch,
    hp: &Hyperparams,
    train_set: &Corpus,
    valid: &[Document],
    embeddings: EmbeddingInit<'_>,
    config: &TrainConfig,
) -> Result<FitOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let model = init_model(
        arch,
        hp,
        &train_set.vocab,
        train_set.num_labels(),
        embeddings,
        &mut rng,
    )?;
    fit(model, &train_set.docs, valid, hp, config, &mut rng)
}

pub fn fit(
    model: ModelParams,
    train: &[Document],
    valid: &[Document],
    hp: &Hyperparams,
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<FitOutcome> {
    fit_with_observer(model, train, valid, hp, config, rng, |_, _| {
        ControlFlow::Continue(())
    })
}

/// Like [`fit`], calling `observer` after each epoch with the epoch record
/// and current parameters; `Break` ends training after that epoch.
pub fn fit_with_observer<F>(
    mut model: ModelParams,
    train: &[Document],
    valid: &[Document],
    hp: &Hyperparams,
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
    mut observer: F,
) -> Result<FitOutcome>
where
    F: FnMut(&EpochRecord, &ModelParams) -> ControlFlow<()>,
{
    config.validate()?;
    hp.validate()?;
    let num_labels = model.shape.labels;
    if config.metric_n > num_labels {
        return Err(Error::invalid(format!(
            "validation P@{} needs at least {} labels, model has {num_labels}",
            config.metric_n, config.metric_n
        )));
    }
    if valid.is_empty() {
        return Err(Error::invalid("validation set is empty"));
    }
    let batches = make_batches(train, config.batch_size, num_labels)?;

    let mut state = OptimizerState::new(&model);
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best = model.clone();
    let mut history = Vec::new();

    for epoch in 1..=config.max_epochs {
        let mut loss_sum = 0.0;
        for (bi, batch) in batches.iter().enumerate() {
            let loss = train_step(&mut model, batch, hp, config, &mut state, rng)
                .map_err(|e| match e {
                    Error::NonFiniteGradient(_) => Error::NonFiniteLoss {
                        epoch,
                        batch: bi + 1,
                    },
                    other => other,
                })?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: bi + 1,
                });
            }
            loss_sum += loss;
        }

        let valid_metric = evaluate_p_at_n(&model, valid, config.metric_n)?;
        let obs = stopper.observe(valid_metric);
        if obs.improved {
            best.clone_from(&model);
        }
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            valid_metric,
            is_best: obs.improved,
        };
        let flow = observer(&record, &model);
        history.push(record);
        if obs.stop || flow.is_break() {
            break;
        }
    }

    let best_epoch = stopper.best_epoch();
    for e in &mut history {
        e.is_best = e.epoch == best_epoch;
    }
    best.round_to_f32();
    Ok(FitOutcome {
        best,
        best_epoch,
        best_metric: stopper.best().unwrap_or(0.0),
        history: History {
            metric_n: config.metric_n,
            epochs: history,
        },
    })
}

/// Forward with dropout, backward and one Adam update. Returns the batch loss
/// computed before the update.
fn train_step(
    model: &mut ModelParams,
    batch: &Batch,
    hp: &Hyperparams,
    config: &TrainConfig,
    state: &mut OptimizerState,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let trace = forward(
        model,
        batch,
        Dropout::Enabled {
            rate: hp.dropout,
            rng,
        },
    )?;
    let loss = bce_loss(&trace.logits(), &batch.targets);
    if !loss.is_finite() {
        return Ok(loss);
    }
    let grads = backward(model, &trace, &batch.targets)?;
    adam_step(model, &grads, state, hp.learning_rate, &config.adam)?;
    Ok(loss)
}

/// Validation P@n at batch size 1 with dropout disabled.
pub fn evaluate_p_at_n(model: &ModelParams, docs: &[Document], n: usize) -> Result<f64> {
    let probs = predict_docs(model, docs)?;
    let labels: Vec<Vec<u32>> = docs.iter().map(|d| d.labels.clone()).collect();
    let set = PredictionSet::from_rows(&probs, &labels, model.shape.labels)?;
    precision_at_n(&set, n)
}

/// Per-document label probabilities, one document at a time, dropout
/// disabled.
pub fn predict_docs(model: &ModelParams, docs: &[Document]) -> Result<Vec<Vec<f64>>> {
    docs.iter()
        .enumerate()
        .map(|(i, d)| {
            let batch = Batch::from_docs([(i, d)], model.shape.labels)?;
            let trace = forward(model, &batch, Dropout::Disabled)?;
            Ok(trace.docs.into_iter().next().map(|t| t.probs).unwrap_or_default())
        })
        .collect()
}

/// [`predict_docs`] after checking that the corpus was read with a
/// vocabulary and label space matching the checkpoint.
pub fn predict(model: &ModelParams, corpus: &Corpus) -> Result<Vec<Vec<f64>>> {
    check_compatible(model, corpus)?;
    predict_docs(model, &corpus.docs)
}

pub fn check_compatible(model: &ModelParams, corpus: &Corpus) -> Result<()> {
    if corpus.vocab.len() != model.shape.vocab_size {
        return Err(Error::VocabMismatch {
            what: "vocabulary entries",
            expected: model.shape.vocab_size,
            found: corpus.vocab.len(),
        });
    }
    if corpus.num_labels() != model.shape.labels {
        return Err(Error::VocabMismatch {
            what: "labels",
            expected: model.shape.labels,
            found: corpus.num_labels(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::synthetic::{generate, SynthSpec};
    use crate::corpus::{parse_corpus, VocabSource};

    fn corpus() -> Corpus {
        let text = generate(&SynthSpec {
            num_docs: 12,
            num_labels: 4,
            ..SynthSpec::default()
        });
        parse_corpus(text.as_bytes(), VocabSource::Build, 2500).unwrap()
    }

    fn small_hp() -> Hyperparams {
        Hyperparams {
            filters: 4,
            kernel: 3,
            dropout: 0.2,
            learning_rate: 0.003,
        }
    }

    fn quick_config() -> TrainConfig {
        TrainConfig {
            max_epochs: 4,
            patience: 2,
            metric_n: 2,
            batch_size: 4,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn history_tsv_layout() {
        let h = History {
            metric_n: 5,
            epochs: vec![EpochRecord {
                epoch: 1,
                train_loss: 1.5,
                valid_metric: 0.25,
                is_best: true,
            }],
        };
        assert_eq!(
            h.to_tsv(),
            "epoch\ttrain_loss\tvalid_p@5\tis_best\n1\t1.500000\t0.250000\t1\n"
        );
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            patience: 200,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn seeded_training_is_reproducible() {
        let c = corpus();
        let cfg = quick_config();
        let emb = EmbeddingInit::Random { dim: 8 };
        let a = train(Arch::Caml, &small_hp(), &c, &c.docs, emb, &cfg).unwrap();
        let b = train(Arch::Caml, &small_hp(), &c, &c.docs, emb, &cfg).unwrap();
        assert_eq!(a.best, b.best);
        assert_eq!(a.history, b.history);
        assert_eq!(a.history.epochs.iter().filter(|e| e.is_best).count(), 1);
    }

    #[test]
    fn metric_n_larger_than_labels_is_rejected() {
        let c = corpus();
        let cfg = TrainConfig {
            metric_n: 9,
            ..quick_config()
        };
        let emb = EmbeddingInit::Random { dim: 4 };
        assert!(train(Arch::Cnn, &small_hp(), &c, &c.docs, emb, &cfg).is_err());
    }

    #[test]
    fn non_finite_loss_reports_location() {
        let c = corpus();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = init_model(
            Arch::Cnn,
            &small_hp(),
            &c.vocab,
            c.num_labels(),
            EmbeddingInit::Random { dim: 4 },
            &mut rng,
        )
        .unwrap();
        model.output_bias[0] = f64::NAN;
        let err = fit(model, &c.docs, &c.docs, &small_hp(), &quick_config(), &mut rng).unwrap_err();
        assert!(
            matches!(err, Error::NonFiniteLoss { epoch: 1, batch: 1 }),
            "{err}"
        );
    }

    #[test]
    fn pad_row_zero_after_training() {
        let c = corpus();
        let out = train(
            Arch::Cnn,
            &small_hp(),
            &c,
            &c.docs,
            EmbeddingInit::Random { dim: 4 },
            &quick_config(),
        )
        .unwrap();
        assert!(out.best.embedding_row(0).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn predict_checks_vocabulary() {
        let c = corpus();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let model = init_model(
            Arch::Caml,
            &small_hp(),
            &c.vocab,
            c.num_labels(),
            EmbeddingInit::Random { dim: 4 },
            &mut rng,
        )
        .unwrap();
        let mut other = c.clone();
        other.vocab.intern("brand-new");
        assert!(matches!(
            predict(&model, &other),
            Err(Error::VocabMismatch { .. })
        ));
        let a = predict(&model, &c).unwrap();
        assert_eq!(a, predict(&model, &c).unwrap());
    }
}
