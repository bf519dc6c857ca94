//! Seeded generator for small labeled corpora used in tests and demos.
//!
//! Each label owns a handful of keyword tokens; a document mixes noise words
//! with a few keyword occurrences of each of its labels, so a convolutional
//! model can learn the mapping.

use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub num_docs: usize,
    pub num_labels: usize,
    pub noise_words: usize,
    pub keywords_per_label: usize,
    pub keyword_hits: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub max_labels_per_doc: usize,
    pub id_prefix: String,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            num_docs: 20,
            num_labels: 8,
            noise_words: 40,
            keywords_per_label: 3,
            keyword_hits: 2,
            min_len: 12,
            max_len: 30,
            max_labels_per_doc: 3,
            id_prefix: "doc".into(),
            seed: 0,
        }
    }
}

pub fn label_name(l: usize) -> String {
    format!("L{l:02}")
}

pub fn keyword(l: usize, j: usize) -> String {
    format!("k{l}_{j}")
}

pub fn noise_word(n: usize) -> String {
    format!("w{n}")
}

/// Renders a corpus TSV. The first `num_labels` documents each carry label
/// `i` so every label occurs at least once.
pub fn generate(spec: &SynthSpec) -> String {
    assert!(spec.num_labels > 0 && spec.min_len > 0 && spec.min_len <= spec.max_len);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = String::new();
    for i in 0..spec.num_docs {
        let n_labels = rng.random_range(1..=spec.max_labels_per_doc.clamp(1, spec.num_labels));
        let mut labels: Vec<usize> = sample(&mut rng, spec.num_labels, n_labels).into_vec();
        if i < spec.num_labels && !labels.contains(&i) {
            labels[0] = i;
        }
        labels.sort_unstable();
        labels.dedup();

        let min_len = spec.min_len.max(labels.len() * spec.keyword_hits);
        let len = rng.random_range(min_len..=spec.max_len.max(min_len));
        let mut words: Vec<String> = (0..len)
            .map(|_| noise_word(rng.random_range(0..spec.noise_words.max(1))))
            .collect();
        let slots = sample(&mut rng, len, labels.len() * spec.keyword_hits).into_vec();
        for (s, slot) in slots.into_iter().enumerate() {
            let l = labels[s / spec.keyword_hits];
            words[slot] = keyword(l, rng.random_range(0..spec.keywords_per_label.max(1)));
        }

        let names: Vec<String> = labels.iter().map(|&l| label_name(l)).collect();
        let _ = writeln!(
            out,
            "{}{i:04}\t{}\t{}",
            spec.id_prefix,
            names.join(";"),
            words.join(" ")
        );
    }
    out
}

/// Random word vectors in the text embedding format for every word the
/// generator can emit.
pub fn embeddings_text(spec: &SynthSpec, dim: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut words: Vec<String> = (0..spec.noise_words).map(noise_word).collect();
    for l in 0..spec.num_labels {
        for j in 0..spec.keywords_per_label {
            words.push(keyword(l, j));
        }
    }
    let mut out = format!("{} {dim}\n", words.len());
    for w in words {
        out.push_str(&w);
        for _ in 0..dim {
            let _ = write!(out, " {:.6}", rng.random_range(-0.5..0.5f64));
        }
        out.push('\n');
    }
    out
}
