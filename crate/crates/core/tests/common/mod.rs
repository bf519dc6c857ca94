//! Independent reference implementations shared by the integration tests.
//!
//! Everything here is written with plain nested loops over explicit indices
//! and shares no code with the library's numeric paths.
#![allow(dead_code, clippy::needless_range_loop)]

use std::path::PathBuf;

use attnlab::corpus::{Batch, Document, PAD};
use attnlab::metrics::PredictionSet;
use attnlab::nn::{Arch, ModelParams, ModelShape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn bundled(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("data/synthetic")
        .join(name)
}

/// Uniform weights in ±`scale` everywhere (biases included), PAD row zero.
pub fn random_params(shape: ModelShape, scale: f64, rng: &mut ChaCha8Rng) -> ModelParams {
    let mut p = ModelParams::zeros(shape);
    for (_, values) in p.arrays_mut() {
        for v in values.iter_mut() {
            *v = rng.random_range(-scale..scale);
        }
    }
    for j in 0..shape.embed_dim {
        p.embedding[PAD as usize * shape.embed_dim + j] = 0.0;
    }
    p
}

/// Random documents with ids `d0, d1, ...`, lengths in `[min_len, max_len]`
/// and token ids in `[2, vocab)`.
pub fn random_docs(
    n: usize,
    min_len: usize,
    max_len: usize,
    vocab: usize,
    labels: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Document> {
    (0..n)
        .map(|i| {
            let len = rng.random_range(min_len..=max_len);
            let tokens = (0..len).map(|_| rng.random_range(2..vocab as u32)).collect();
            let mut doc_labels: Vec<u32> = (0..labels as u32).filter(|_| rng.random_bool(0.4)).collect();
            doc_labels.dedup();
            Document {
                id: format!("d{i}"),
                tokens,
                labels: doc_labels,
            }
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Logits for one (possibly PAD-extended) token row, dropout off.
pub fn oracle_logits(p: &ModelParams, tokens: &[u32]) -> Vec<f64> {
    let s = p.shape;
    let (d, c, k, l) = (s.embed_dim, s.filters, s.kernel, s.labels);
    let (left, right) = match s.arch {
        Arch::Cnn => (0, 0),
        Arch::Caml => ((k - 1) / 2, k / 2),
    };

    let mut x = vec![vec![0.0; d]; left];
    for &t in tokens {
        x.push((0..d).map(|j| p.embedding[t as usize * d + j]).collect());
    }
    x.extend(std::iter::repeat_n(vec![0.0; d], right));

    let positions = x.len() + 1 - k;
    let mut h = vec![vec![0.0; positions]; c];
    for f in 0..c {
        for t in 0..positions {
            let mut acc = p.conv_bias[f];
            for j in 0..d {
                for i in 0..k {
                    acc += p.conv_weight[f * d * k + j * k + i] * x[t + i][j];
                }
            }
            h[f][t] = acc.tanh();
        }
    }

    let mut logits = vec![0.0; l];
    match s.arch {
        Arch::Cnn => {
            let pooled: Vec<f64> = h
                .iter()
                .map(|row| row.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
                .collect();
            for lab in 0..l {
                logits[lab] = p.output_bias[lab];
                for f in 0..c {
                    logits[lab] += p.output_weight[lab * c + f] * pooled[f];
                }
            }
        }
        Arch::Caml => {
            let u = p.attention.as_ref().expect("CAML has attention");
            for lab in 0..l {
                let scores: Vec<f64> = (0..positions)
                    .map(|t| (0..c).map(|f| u[lab * c + f] * h[f][t]).sum())
                    .collect();
                let top = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = scores.iter().map(|sc| (sc - top).exp()).collect();
                let z: f64 = exps.iter().sum();
                logits[lab] = p.output_bias[lab];
                for f in 0..c {
                    let v: f64 = (0..positions).map(|t| exps[t] / z * h[f][t]).sum();
                    logits[lab] += p.output_weight[lab * c + f] * v;
                }
            }
        }
    }
    logits
}

/// Summed binary cross-entropy of a whole batch through [`oracle_logits`].
pub fn oracle_loss(p: &ModelParams, batch: &Batch) -> f64 {
    let mut total = 0.0;
    for b in 0..batch.len() {
        let logits = oracle_logits(p, batch.row(b));
        for (z, y) in logits.iter().zip(batch.target_row(b)) {
            let prob = 1.0 / (1.0 + (-z).exp());
            total -= y * prob.ln() + (1.0 - y) * (1.0 - prob).ln();
        }
    }
    total
}

/// Central differences of `loss` for every parameter, in `arrays()` order.
pub fn finite_differences(
    p: &ModelParams,
    step: f64,
    loss: impl Fn(&ModelParams) -> f64,
) -> Vec<(&'static str, Vec<f64>)> {
    let mut q = p.clone();
    let sizes: Vec<(&'static str, usize)> = p.arrays().iter().map(|(n, a)| (*n, a.len())).collect();
    let mut out = Vec::new();
    for (a, (name, len)) in sizes.into_iter().enumerate() {
        let mut grad = vec![0.0; len];
        for (i, g) in grad.iter_mut().enumerate() {
            let orig = q.arrays()[a].1[i];
            q.arrays_mut()[a].1[i] = orig + step;
            let plus = loss(&q);
            q.arrays_mut()[a].1[i] = orig - step;
            let minus = loss(&q);
            q.arrays_mut()[a].1[i] = orig;
            *g = (plus - minus) / (2.0 * step);
        }
        out.push((name, grad));
    }
    out
}

fn cell_counts(set: &PredictionSet, label: Option<usize>) -> (f64, f64, f64) {
    let (mut tp, mut fp, mut fneg) = (0.0, 0.0, 0.0);
    for doc in 0..set.num_docs() {
        for lab in 0..set.num_labels {
            if label.is_some_and(|want| want != lab) {
                continue;
            }
            let cell = doc * set.num_labels + lab;
            let predicted = set.probs[cell] >= set.threshold;
            let truth = set.truths[cell];
            match (predicted, truth) {
                (true, true) => tp += 1.0,
                (true, false) => fp += 1.0,
                (false, true) => fneg += 1.0,
                (false, false) => {}
            }
        }
    }
    (tp, fp, fneg)
}

fn safe_div(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        a / b
    }
}

pub fn oracle_micro_f1(set: &PredictionSet) -> f64 {
    let (tp, fp, fneg) = cell_counts(set, None);
    safe_div(2.0 * tp, 2.0 * tp + fp + fneg)
}

/// (mean of per-label F1, F1 of macro precision and macro recall)
pub fn oracle_macro_f1(set: &PredictionSet) -> (f64, f64) {
    let l = set.num_labels as f64;
    let (mut f1_sum, mut p_sum, mut r_sum) = (0.0, 0.0, 0.0);
    for lab in 0..set.num_labels {
        let (tp, fp, fneg) = cell_counts(set, Some(lab));
        f1_sum += safe_div(2.0 * tp, 2.0 * tp + fp + fneg);
        p_sum += safe_div(tp, tp + fp);
        r_sum += safe_div(tp, tp + fneg);
    }
    let (p, r) = (p_sum / l, r_sum / l);
    (f1_sum / l, safe_div(2.0 * p * r, p + r))
}

/// Repeated selection of the highest remaining score, first index on ties.
pub fn oracle_p_at_n(set: &PredictionSet, n: usize) -> f64 {
    let l = set.num_labels;
    let docs = set.num_docs();
    let mut total = 0.0;
    for doc in 0..docs {
        let mut taken = vec![false; l];
        let mut hits = 0.0;
        for _ in 0..n {
            let mut best: Option<usize> = None;
            for lab in 0..l {
                if taken[lab] {
                    continue;
                }
                match best {
                    Some(b) if set.probs[doc * l + b] >= set.probs[doc * l + lab] => {}
                    _ => best = Some(lab),
                }
            }
            let pick = best.expect("n <= L");
            taken[pick] = true;
            if set.truths[doc * l + pick] {
                hits += 1.0;
            }
        }
        total += hits / n as f64;
    }
    total / docs as f64
}
