//! Grid search over `(d_c, k, q, eta)` across several seeds, with top-m
//! selection by validation P@n and per-seed aggregation of test metrics.

mod aggregate;
mod grid;
pub mod ledger;

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

pub use aggregate::{aggregate, aggregate_seeds, MeanStd, SeedSummary, Summary};
pub use grid::{enumerate_grid, GridSpec};

use crate::corpus::{Corpus, Document};
use crate::metrics::{MetricsReport, PredictionSet};
use crate::nn::{checkpoint, Arch, Hyperparams};
use crate::trainer::{predict_docs, train, EmbeddingInit, TrainConfig};
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub enum TrialOutcome {
    Completed {
        /// Best validation P@n reached during training.
        best_valid: f64,
        /// Test metrics of the best-validation checkpoint.
        test: MetricsReport,
    },
    Failed(String),
}

/// One `(hyperparameters, seed)` run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    /// Position of the hyperparameters in canonical grid order.
    pub grid_index: usize,
    pub hyperparams: Hyperparams,
    pub seed: u64,
    pub outcome: TrialOutcome,
    pub checkpoint: Option<PathBuf>,
    pub wall_seconds: f64,
}

impl TrialRecord {
    pub fn key(&self) -> (u64, usize) {
        (self.seed, self.grid_index)
    }

    pub fn is_ok(&self) -> bool {
        matches!(self.outcome, TrialOutcome::Completed { .. })
    }
}

/// Data shared by every trial; all three splits use the training vocabulary.
#[derive(Debug, Clone, Copy)]
pub struct TrialData<'a> {
    pub arch: Arch,
    pub train: &'a Corpus,
    pub valid: &'a [Document],
    pub test: &'a [Document],
    pub embeddings: EmbeddingInit<'a>,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Parallel trials; 0 or 1 runs sequentially.
    pub workers: usize,
    /// Where per-trial best checkpoints are written, if anywhere.
    pub checkpoint_dir: Option<PathBuf>,
    /// `(seed, grid_index)` pairs already completed.
    pub skip: HashSet<(u64, usize)>,
}

/// Planned trials in canonical order: seeds in spec order, then grid order.
pub fn plan(spec: &GridSpec) -> Result<Vec<(u64, usize, Hyperparams)>> {
    let grid = enumerate_grid(spec)?;
    Ok(spec
        .seeds
        .iter()
        .flat_map(|&seed| grid.iter().enumerate().map(move |(i, hp)| (seed, i, *hp)))
        .collect())
}

/// Runs one fit per planned `(hyperparameters, seed)` not in `opts.skip`.
///
/// Each trial seeds its own stream from its seed, so results do not depend on
/// scheduling. `on_record` sees records in canonical plan order regardless of
/// `workers`; failed trials are reported, not propagated.
pub fn run_trials<F>(
    spec: &GridSpec,
    data: &TrialData<'_>,
    base: &TrainConfig,
    opts: &RunOptions,
    mut on_record: F,
) -> Result<Vec<TrialRecord>>
where
    F: FnMut(&TrialRecord) -> Result<()>,
{
    spec.validate()?;
    let pending: Vec<(u64, usize, Hyperparams)> = plan(spec)?
        .into_iter()
        .filter(|(seed, idx, _)| !opts.skip.contains(&(*seed, *idx)))
        .collect();
    let workers = opts.workers.clamp(1, pending.len().max(1));

    let mut records = Vec::with_capacity(pending.len());
    if workers == 1 {
        for &(seed, idx, hp) in &pending {
            let r = run_one(seed, idx, hp, data, base, opts.checkpoint_dir.as_deref());
            on_record(&r)?;
            records.push(r);
        }
        return Ok(records);
    }

    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|scope| -> Result<()> {
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, pending) = (&next, &pending);
            let ckpt = opts.checkpoint_dir.as_deref();
            scope.spawn(move || loop {
                let pos = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(seed, idx, hp)) = pending.get(pos) else {
                    break;
                };
                if tx.send((pos, run_one(seed, idx, hp, data, base, ckpt))).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        // Release records strictly in plan order.
        let mut buffer = BTreeMap::new();
        let mut emit = 0;
        for (pos, rec) in rx {
            buffer.insert(pos, rec);
            while let Some(rec) = buffer.remove(&emit) {
                if let Err(e) = on_record(&rec) {
                    next.store(pending.len(), Ordering::SeqCst);
                    return Err(e);
                }
                records.push(rec);
                emit += 1;
            }
        }
        Ok(())
    })?;
    Ok(records)
}

/// Trains one trial and evaluates its best checkpoint on the test split.
pub fn run_one(
    seed: u64,
    grid_index: usize,
    hp: Hyperparams,
    data: &TrialData<'_>,
    base: &TrainConfig,
    checkpoint_dir: Option<&Path>,
) -> TrialRecord {
    let start = Instant::now();
    let config = TrainConfig {
        seed,
        ..base.clone()
    };
    let mut ckpt_path = None;
    let outcome = (|| -> Result<TrialOutcome> {
        let fit = train(data.arch, &hp, data.train, data.valid, data.embeddings, &config)?;
        if let Some(dir) = checkpoint_dir {
            let path = dir.join(format!("trial-{seed}-{grid_index:04}.bin"));
            checkpoint::save(&fit.best, &path)?;
            ckpt_path = Some(path);
        }
        let test = test_metrics(&fit.best, data.test, config.metric_n)?;
        Ok(TrialOutcome::Completed {
            best_valid: fit.best_metric,
            test,
        })
    })()
    .unwrap_or_else(|e| TrialOutcome::Failed(e.to_string()));

    TrialRecord {
        grid_index,
        hyperparams: hp,
        seed,
        outcome,
        checkpoint: ckpt_path,
        wall_seconds: start.elapsed().as_secs_f64(),
    }
}

/// Metrics of `model` on `docs` at batch size 1, with P@`metric_n`.
pub fn test_metrics(
    model: &crate::nn::ModelParams,
    docs: &[Document],
    metric_n: usize,
) -> Result<MetricsReport> {
    let probs = predict_docs(model, docs)?;
    let labels: Vec<Vec<u32>> = docs.iter().map(|d| d.labels.clone()).collect();
    let set = PredictionSet::from_rows(&probs, &labels, model.shape.labels)?;
    MetricsReport::compute(&set, &[metric_n])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::synthetic::{generate, SynthSpec};
    use crate::corpus::{parse_corpus, VocabSource};

    fn corpora() -> (Corpus, Vec<Document>) {
        let train = parse_corpus(
            generate(&SynthSpec {
                num_docs: 16,
                num_labels: 5,
                ..SynthSpec::default()
            })
            .as_bytes(),
            VocabSource::Build,
            2500,
        )
        .unwrap();
        let valid = parse_corpus(
            generate(&SynthSpec {
                num_docs: 6,
                num_labels: 5,
                seed: 9,
                ..SynthSpec::default()
            })
            .as_bytes(),
            VocabSource::Fixed(&train.vocab, &train.labels),
            2500,
        )
        .unwrap();
        (train, valid.docs)
    }

    fn spec() -> GridSpec {
        GridSpec {
            filters: vec![4, 6],
            kernels: vec![2, 3],
            dropouts: vec![0.2],
            learning_rates: vec![0.003],
            seeds: vec![1, 2],
            top_m: 2,
        }
    }

    fn config() -> TrainConfig {
        TrainConfig {
            max_epochs: 3,
            patience: 2,
            metric_n: 2,
            batch_size: 4,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn parallel_matches_sequential_order_and_values() {
        let (train, valid) = corpora();
        let data = TrialData {
            arch: Arch::Caml,
            train: &train,
            valid: &valid,
            test: &valid,
            embeddings: EmbeddingInit::Random { dim: 6 },
        };
        let strip = |mut v: Vec<TrialRecord>| {
            for r in &mut v {
                r.wall_seconds = 0.0;
            }
            v
        };
        let seq = strip(run_trials(&spec(), &data, &config(), &RunOptions::default(), |_| Ok(())).unwrap());
        let mut seen = Vec::new();
        let par_opts = RunOptions {
            workers: 3,
            ..RunOptions::default()
        };
        let par = strip(
            run_trials(&spec(), &data, &config(), &par_opts, |r| {
                seen.push(r.key());
                Ok(())
            })
            .unwrap(),
        );
        assert_eq!(seq.len(), 8);
        assert_eq!(seq, par);
        let expected: Vec<_> = plan(&spec()).unwrap().iter().map(|(s, i, _)| (*s, *i)).collect();
        assert_eq!(seen, expected);
        assert!(seq.iter().all(TrialRecord::is_ok));
    }

    #[test]
    fn skip_set_is_honoured() {
        let (train, valid) = corpora();
        let data = TrialData {
            arch: Arch::Cnn,
            train: &train,
            valid: &valid,
            test: &valid,
            embeddings: EmbeddingInit::Random { dim: 4 },
        };
        let opts = RunOptions {
            skip: [(1, 0), (2, 3)].into_iter().collect(),
            ..RunOptions::default()
        };
        let recs = run_trials(&spec(), &data, &config(), &opts, |_| Ok(())).unwrap();
        assert_eq!(recs.len(), 6);
        assert!(recs.iter().all(|r| r.key() != (1, 0) && r.key() != (2, 3)));
    }

    #[test]
    fn failing_trial_is_recorded() {
        let (train, valid) = corpora();
        let data = TrialData {
            arch: Arch::Cnn,
            train: &train,
            valid: &valid,
            test: &valid,
            embeddings: EmbeddingInit::Random { dim: 4 },
        };
        // kernel larger than any document makes the CNN fail
        let spec = GridSpec {
            kernels: vec![2, 500],
            seeds: vec![1],
            filters: vec![4],
            ..spec()
        };
        let recs = run_trials(&spec, &data, &config(), &RunOptions::default(), |_| Ok(())).unwrap();
        assert!(recs[0].is_ok());
        assert!(matches!(recs[1].outcome, TrialOutcome::Failed(_)));
    }
}
