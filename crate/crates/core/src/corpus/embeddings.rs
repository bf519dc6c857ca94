use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::Rng;

use super::vocab::{Vocabulary, PAD, UNK};
use crate::{Error, Result};

/// Largest embedding width accepted from a file header.
const MAX_DIM: usize = 1 << 16;

/// Row-major `V × d` embedding table aligned to a [`Vocabulary`].
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub vocab_size: usize,
    pub dim: usize,
    pub weights: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn row(&self, id: u32) -> &[f64] {
        let start = id as usize * self.dim;
        &self.weights[start..start + self.dim]
    }
}

/// Loads word vectors in text format (`V d` header, then `word v1 ... vd`).
///
/// Vocabulary words missing from the file, and UNK, are drawn from
/// uniform(-0.25/d, 0.25/d) using `rng`, in id order. The PAD row is zero.
pub fn load_embeddings<R: Rng + ?Sized>(
    path: &Path,
    vocab: &Vocabulary,
    rng: &mut R,
) -> Result<EmbeddingMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings(BufReader::new(file), vocab, rng).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn parse_embeddings<B: BufRead, R: Rng + ?Sized>(
    reader: B,
    vocab: &Vocabulary,
    rng: &mut R,
) -> Result<EmbeddingMatrix> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(l) => l.map_err(|e| Error::io("<embeddings>", e))?,
        None => {
            return Err(Error::EmbeddingFormat {
                line: 1,
                msg: "missing `V d` header".into(),
            })
        }
    };
    let dim = parse_header(&header)?;

    let v = vocab.len();
    let mut weights = vec![0.0; v * dim];
    let mut seen = vec![false; v];

    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line.map_err(|e| Error::io("<embeddings>", e))?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let word = parts.next().unwrap_or_default();
        let values: Vec<&str> = parts.collect();
        if values.len() != dim {
            return Err(Error::EmbeddingFormat {
                line: line_no,
                msg: format!("expected {dim} values for `{word}`, found {}", values.len()),
            });
        }
        let mut row = Vec::with_capacity(dim);
        for s in values {
            let x: f64 = s.parse().map_err(|_| Error::EmbeddingFormat {
                line: line_no,
                msg: format!("non-numeric entry `{s}`"),
            })?;
            if !x.is_finite() {
                return Err(Error::EmbeddingFormat {
                    line: line_no,
                    msg: format!("non-finite entry `{s}`"),
                });
            }
            row.push(x);
        }
        if let Some(id) = vocab.get(word) {
            let id = id as usize;
            if !seen[id] {
                seen[id] = true;
                weights[id * dim..(id + 1) * dim].copy_from_slice(&row);
            }
        }
    }

    let bound = 0.25 / dim as f64;
    for id in 0..v {
        if id == PAD as usize || (seen[id] && id != UNK as usize) {
            continue;
        }
        for w in &mut weights[id * dim..(id + 1) * dim] {
            *w = rng.random_range(-bound..bound);
        }
    }

    Ok(EmbeddingMatrix {
        vocab_size: v,
        dim,
        weights,
    })
}

/// Reads only the `V d` header and returns `d`.
pub fn peek_embedding_dim(path: &Path) -> Result<usize> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut header = String::new();
    BufReader::new(file)
        .read_line(&mut header)
        .map_err(|e| Error::io(path, e))?;
    parse_header(header.trim_end())
}

fn parse_header(header: &str) -> Result<usize> {
    let bad = |msg: String| Error::EmbeddingFormat { line: 1, msg };
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 2 {
        return Err(bad(format!("expected `V d` header, found `{header}`")));
    }
    parts[0]
        .parse::<usize>()
        .map_err(|_| bad(format!("bad vocabulary count `{}`", parts[0])))?;
    let dim: usize = parts[1]
        .parse()
        .map_err(|_| bad(format!("bad dimension `{}`", parts[1])))?;
    if dim == 0 || dim > MAX_DIM {
        return Err(bad(format!("dimension {dim} out of range 1..={MAX_DIM}")));
    }
    Ok(dim)
}
