use super::vocab::PAD;
use super::Document;
use crate::{Error, Result};

/// A group of documents padded with [`PAD`] to a common width.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub doc_ids: Vec<String>,
    /// Position of each member in the list passed to [`make_batches`].
    pub source_index: Vec<usize>,
    /// Row-major `B × width` token ids.
    pub tokens: Vec<u32>,
    pub width: usize,
    pub lengths: Vec<usize>,
    /// Row-major `B × num_labels` 0/1 targets.
    pub targets: Vec<f64>,
    pub num_labels: usize,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    pub fn row(&self, b: usize) -> &[u32] {
        &self.tokens[b * self.width..(b + 1) * self.width]
    }

    pub fn target_row(&self, b: usize) -> &[f64] {
        &self.targets[b * self.num_labels..(b + 1) * self.num_labels]
    }

    /// Packs documents in the given order without sorting.
    pub fn from_docs<'a, I>(docs: I, num_labels: usize) -> Result<Batch>
    where
        I: IntoIterator<Item = (usize, &'a Document)>,
    {
        let members: Vec<(usize, &Document)> = docs.into_iter().collect();
        if members.is_empty() {
            return Err(Error::invalid("cannot build an empty batch"));
        }
        let width = members.iter().map(|(_, d)| d.len()).max().unwrap_or(0);
        let mut tokens = vec![PAD; members.len() * width];
        let mut targets = vec![0.0; members.len() * num_labels];
        for (b, (_, d)) in members.iter().enumerate() {
            tokens[b * width..b * width + d.len()].copy_from_slice(&d.tokens);
            for &l in &d.labels {
                let l = l as usize;
                if l >= num_labels {
                    return Err(Error::Shape(format!(
                        "document `{}` has label id {l}, but only {num_labels} labels",
                        d.id
                    )));
                }
                targets[b * num_labels + l] = 1.0;
            }
        }
        Ok(Batch {
            doc_ids: members.iter().map(|(_, d)| d.id.clone()).collect(),
            source_index: members.iter().map(|(i, _)| *i).collect(),
            tokens,
            width,
            lengths: members.iter().map(|(_, d)| d.len()).collect(),
            targets,
            num_labels,
        })
    }
}

/// Sorts documents by ascending length (stable, so ties keep input order) and
/// chunks them into consecutive batches of `batch_size`, each padded to its
/// own longest member. The result is a pure function of the input.
pub fn make_batches(docs: &[Document], batch_size: usize, num_labels: usize) -> Result<Vec<Batch>> {
    if batch_size == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    if docs.is_empty() {
        return Err(Error::invalid("cannot batch an empty document list"));
    }
    let mut order: Vec<usize> = (0..docs.len()).collect();
    order.sort_by_key(|&i| docs[i].len());
    order
        .chunks(batch_size)
        .map(|chunk| Batch::from_docs(chunk.iter().map(|&i| (i, &docs[i])), num_labels))
        .collect()
}
