use rand::{Rng, RngCore};

use super::conv::{same_padding, ConvGeometry};
use super::loss::sigmoid;
use super::params::{Arch, ModelParams};
use crate::corpus::Batch;
use crate::{Error, Result};

/// Whether embedding dropout is active for a forward pass.
pub enum Dropout<'a> {
    Disabled,
    /// Drop each embedding entry with probability `rate` and scale survivors
    /// by `1 / (1 - rate)`.
    Enabled { rate: f64, rng: &'a mut dyn RngCore },
}

/// How the conv features of one document were reduced per label.
#[derive(Debug, Clone, PartialEq)]
pub enum Pooling {
    /// Max over time per filter; `argmax[f]` is the first maximising column.
    Max { pooled: Vec<f64>, argmax: Vec<usize> },
    /// Row-major `L × T'` attention weights and `L × d_c` context vectors.
    Attention { weights: Vec<f64>, context: Vec<f64> },
}

/// Activations of one document needed for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct DocTrace {
    pub tokens: Vec<u32>,
    /// Dropout mask (`T × d`), `None` when dropout was disabled.
    pub mask: Option<Vec<f64>>,
    /// Embedded input after dropout, `T × d`.
    pub input: Vec<f64>,
    /// `tanh` of the conv output, `d_c × T'`.
    pub hidden: Vec<f64>,
    pub out_len: usize,
    pub pooling: Pooling,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub shape: super::params::ModelShape,
    pub docs: Vec<DocTrace>,
}

impl ForwardTrace {
    /// Row-major `B × L` logits.
    pub fn logits(&self) -> Vec<f64> {
        self.docs.iter().flat_map(|d| d.logits.iter().copied()).collect()
    }

    pub fn probs(&self) -> Vec<f64> {
        self.docs.iter().flat_map(|d| d.probs.iter().copied()).collect()
    }
}

/// Dispatches on the model's architecture.
pub fn forward(params: &ModelParams, batch: &Batch, dropout: Dropout<'_>) -> Result<ForwardTrace> {
    match params.shape.arch {
        Arch::Cnn => forward_cnn(params, batch, dropout),
        Arch::Caml => forward_caml(params, batch, dropout),
    }
}

/// Embedding, dropout, unpadded convolution, tanh, max over time, linear
/// output and logistic probabilities.
pub fn forward_cnn(params: &ModelParams, batch: &Batch, dropout: Dropout<'_>) -> Result<ForwardTrace> {
    if params.shape.arch != Arch::Cnn {
        return Err(Error::Shape("forward_cnn called on a CAML model".into()));
    }
    if batch.width < params.shape.kernel {
        let id = batch.doc_ids.first().cloned().unwrap_or_default();
        return Err(Error::DocumentTooShort {
            id,
            len: batch.lengths.first().copied().unwrap_or(0),
            k: params.shape.kernel,
        });
    }
    run(params, batch, dropout, (0, 0))
}

/// Embedding, dropout, length-preserving convolution, tanh, per-label
/// attention over all `T` columns (padding included), per-label linear output.
pub fn forward_caml(params: &ModelParams, batch: &Batch, dropout: Dropout<'_>) -> Result<ForwardTrace> {
    if params.shape.arch != Arch::Caml {
        return Err(Error::Shape("forward_caml called on a CNN model".into()));
    }
    run(params, batch, dropout, same_padding(params.shape.kernel))
}

fn run(
    params: &ModelParams,
    batch: &Batch,
    mut dropout: Dropout<'_>,
    padding: (usize, usize),
) -> Result<ForwardTrace> {
    let s = params.shape;
    if batch.num_labels != s.labels {
        return Err(Error::Shape(format!(
            "batch has {} labels, model has {}",
            batch.num_labels, s.labels
        )));
    }
    let geom = ConvGeometry {
        channels: s.embed_dim,
        filters: s.filters,
        kernel: s.kernel,
        pad_left: padding.0,
        pad_right: padding.1,
    };
    let mut docs = Vec::with_capacity(batch.len());
    for b in 0..batch.len() {
        let tokens = batch.row(b);
        let mask = match &mut dropout {
            Dropout::Enabled { rate, rng } if *rate > 0.0 => {
                Some(dropout_mask(tokens.len() * s.embed_dim, *rate, &mut **rng))
            }
            _ => None,
        };
        docs.push(forward_doc(params, &geom, tokens, mask, &batch.doc_ids[b])?);
    }
    Ok(ForwardTrace { shape: s, docs })
}

fn dropout_mask(n: usize, rate: f64, rng: &mut dyn RngCore) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..n)
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect()
}

fn forward_doc(
    params: &ModelParams,
    geom: &ConvGeometry,
    tokens: &[u32],
    mask: Option<Vec<f64>>,
    doc_id: &str,
) -> Result<DocTrace> {
    let s = params.shape;
    let (d, c, l) = (s.embed_dim, s.filters, s.labels);
    let len = tokens.len();

    let mut input = Vec::with_capacity(len * d);
    for &tok in tokens {
        if tok as usize >= s.vocab_size {
            return Err(Error::Shape(format!(
                "document `{doc_id}` has token id {tok}, vocabulary size is {}",
                s.vocab_size
            )));
        }
        input.extend_from_slice(params.embedding_row(tok));
    }
    if let Some(m) = &mask {
        for (x, k) in input.iter_mut().zip(m) {
            *x *= k;
        }
    }

    let mut hidden = geom.forward(&input, len, &params.conv_weight, &params.conv_bias)?;
    for h in &mut hidden {
        *h = h.tanh();
    }
    let out_len = hidden.len() / c;

    let mut logits = params.output_bias.clone();
    let pooling = match &params.attention {
        None => {
            let mut pooled = vec![f64::NEG_INFINITY; c];
            let mut argmax = vec![0; c];
            for f in 0..c {
                for t in 0..out_len {
                    let h = hidden[f * out_len + t];
                    if h > pooled[f] {
                        pooled[f] = h;
                        argmax[f] = t;
                    }
                }
            }
            for (lab, z) in logits.iter_mut().enumerate() {
                *z += dot(&params.output_weight[lab * c..(lab + 1) * c], &pooled);
            }
            Pooling::Max { pooled, argmax }
        }
        Some(u) => {
            let mut weights = vec![0.0; l * out_len];
            let mut context = vec![0.0; l * c];
            for lab in 0..l {
                let ul = &u[lab * c..(lab + 1) * c];
                let alpha = &mut weights[lab * out_len..(lab + 1) * out_len];
                for (t, a) in alpha.iter_mut().enumerate() {
                    *a = (0..c).map(|f| ul[f] * hidden[f * out_len + t]).sum();
                }
                softmax_in_place(alpha);
                let v = &mut context[lab * c..(lab + 1) * c];
                for (f, vf) in v.iter_mut().enumerate() {
                    *vf = dot(&hidden[f * out_len..(f + 1) * out_len], alpha);
                }
                logits[lab] += dot(&params.output_weight[lab * c..(lab + 1) * c], v);
            }
            Pooling::Attention { weights, context }
        }
    };
    let probs = logits.iter().map(|&z| sigmoid(z)).collect();

    Ok(DocTrace {
        tokens: tokens.to_vec(),
        mask,
        input,
        hidden,
        out_len,
        pooling,
        logits,
        probs,
    })
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use crate::nn::params::ModelShape;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn shape(arch: Arch) -> ModelShape {
        ModelShape {
            arch,
            vocab_size: 6,
            embed_dim: 2,
            filters: 2,
            kernel: 2,
            labels: 2,
        }
    }

    fn batch(tokens: &[&[u32]], labels: usize) -> Batch {
        let docs: Vec<Document> = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| Document {
                id: format!("d{i}"),
                tokens: t.to_vec(),
                labels: vec![],
            })
            .collect();
        Batch::from_docs(docs.iter().enumerate(), labels).unwrap()
    }

    fn seeded(arch: Arch) -> ModelParams {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut p = ModelParams::init_weights(shape(arch), &mut rng).unwrap();
        p.randomize_embedding(&mut rng);
        p
    }

    #[test]
    fn zero_output_layer_gives_half() {
        for arch in [Arch::Cnn, Arch::Caml] {
            let mut p = seeded(arch);
            let single = ModelShape { labels: 1, ..p.shape };
            let att = p.attention.as_ref().map(|_| vec![0.3; 2]);
            p = ModelParams {
                shape: single,
                attention: att,
                output_weight: vec![0.0; 2],
                output_bias: vec![0.0],
                ..p
            };
            let tr = forward(&p, &batch(&[&[2, 3, 4]], 1), Dropout::Disabled).unwrap();
            assert_eq!(tr.probs(), vec![0.5]);
        }
    }

    #[test]
    fn single_column_cnn_pools_that_column() {
        let p = seeded(Arch::Cnn);
        let tr = forward(&p, &batch(&[&[2, 5]], 2), Dropout::Disabled).unwrap();
        let doc = &tr.docs[0];
        assert_eq!(doc.out_len, 1);
        match &doc.pooling {
            Pooling::Max { pooled, .. } => assert_eq!(pooled, &doc.hidden),
            _ => unreachable!(),
        }
    }

    #[test]
    fn cnn_rejects_short_documents() {
        let p = seeded(Arch::Cnn);
        let err = forward(&p, &batch(&[&[3]], 2), Dropout::Disabled).unwrap_err();
        assert!(matches!(err, Error::DocumentTooShort { ref id, .. } if id == "d0"));
    }

    #[test]
    fn zero_attention_is_uniform() {
        let mut p = seeded(Arch::Caml);
        p.attention = Some(vec![0.0; 4]);
        let tr = forward(&p, &batch(&[&[2, 3, 4, 5]], 2), Dropout::Disabled).unwrap();
        let doc = &tr.docs[0];
        let Pooling::Attention { weights, context } = &doc.pooling else {
            unreachable!()
        };
        assert!(weights.iter().all(|&w| (w - 0.25).abs() < 1e-15));
        for (row, ctx) in doc.hidden.chunks(4).zip(context) {
            let mean = row.iter().sum::<f64>() / 4.0;
            assert!((ctx - mean).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_of_log_three() {
        let mut v = [0.0, 3f64.ln()];
        softmax_in_place(&mut v);
        assert!((v[0] - 0.25).abs() < 1e-15 && (v[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn dropout_changes_output_and_is_seeded() {
        let p = seeded(Arch::Caml);
        let b = batch(&[&[2, 3, 4, 5]], 2);
        let clean = forward(&p, &b, Dropout::Disabled).unwrap();
        let mut r1 = ChaCha8Rng::seed_from_u64(5);
        let mut r2 = ChaCha8Rng::seed_from_u64(5);
        let a = forward(&p, &b, Dropout::Enabled { rate: 0.5, rng: &mut r1 }).unwrap();
        let c = forward(&p, &b, Dropout::Enabled { rate: 0.5, rng: &mut r2 }).unwrap();
        assert_eq!(a, c);
        assert_ne!(a.logits(), clean.logits());
        assert!(clean.docs[0].mask.is_none());
    }
}
