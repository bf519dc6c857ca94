//! Document ingestion, vocabulary, pretrained embeddings and batching.
//!
//! Corpus files are UTF-8 TSV with one record per line:
//!
//! ```text
//! id<TAB>label;label;...<TAB>token token ...
//! ```

mod batch;
mod embeddings;
pub mod synthetic;
mod vocab;

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

pub use batch::{make_batches, Batch};
pub use embeddings::{load_embeddings, parse_embeddings, peek_embedding_dim, EmbeddingMatrix};
pub use vocab::{LabelSpace, Vocabulary, PAD, UNK};

use crate::{Error, Result};

/// Token cap applied at ingestion.
pub const DEFAULT_MAX_TOKENS: usize = 2500;

/// One labeled, tokenised document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub tokens: Vec<u32>,
    /// Sorted, deduplicated label ids.
    pub labels: Vec<u32>,
}

impl Document {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Documents together with the vocabulary and label space they were read with.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub docs: Vec<Document>,
    pub vocab: Vocabulary,
    pub labels: LabelSpace,
}

impl Corpus {
    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }
}

/// Where token and label ids come from while reading a corpus.
#[derive(Debug, Clone, Copy)]
pub enum VocabSource<'a> {
    /// Build both from the file (training data).
    Build,
    /// Reuse an existing vocabulary and label space. Unseen tokens map to
    /// [`UNK`]; unseen labels are an error.
    Fixed(&'a Vocabulary, &'a LabelSpace),
}

/// Keeps the first `max_tokens` entries.
pub fn truncate<T>(tokens: &mut Vec<T>, max_tokens: usize) {
    tokens.truncate(max_tokens);
}

pub fn load_corpus(path: &Path, source: VocabSource<'_>, max_tokens: usize) -> Result<Corpus> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(BufReader::new(file), source, max_tokens).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Parses corpus TSV from any reader. Line numbers in errors are 1-based.
pub fn parse_corpus<R: BufRead>(
    reader: R,
    source: VocabSource<'_>,
    max_tokens: usize,
) -> Result<Corpus> {
    if max_tokens == 0 {
        return Err(Error::invalid("max_tokens must be positive"));
    }
    let (mut vocab, mut labels) = match source {
        VocabSource::Build => (Vocabulary::new(), LabelSpace::new()),
        VocabSource::Fixed(v, l) => (v.clone(), l.clone()),
    };
    let building = matches!(source, VocabSource::Build);
    let mut docs = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io("<corpus>", e))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        let (id, label_field, token_field) = (fields[0], fields[1], fields[2]);

        let mut words: Vec<&str> = token_field.split_whitespace().collect();
        truncate(&mut words, max_tokens);
        if words.is_empty() {
            return Err(Error::Record {
                line: line_no,
                id: id.to_string(),
                msg: "empty token field".into(),
            });
        }
        let tokens = words
            .iter()
            .map(|w| {
                if building {
                    vocab.intern(w)
                } else {
                    vocab.lookup(w)
                }
            })
            .collect();

        let mut doc_labels = Vec::new();
        for name in label_field.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            let id = if building {
                labels.intern(name)
            } else {
                labels.get(name).ok_or_else(|| Error::UnknownLabel {
                    line: line_no,
                    label: name.to_string(),
                })?
            };
            doc_labels.push(id);
        }
        doc_labels.sort_unstable();
        doc_labels.dedup();

        docs.push(Document {
            id: id.to_string(),
            tokens,
            labels: doc_labels,
        });
    }

    Ok(Corpus {
        docs,
        vocab,
        labels,
    })
}

/// Writes documents back to corpus TSV using the given vocabulary.
pub fn write_corpus<W: std::io::Write>(
    mut out: W,
    docs: &[Document],
    vocab: &Vocabulary,
    labels: &LabelSpace,
) -> std::io::Result<()> {
    for d in docs {
        let label_names: Vec<&str> = d.labels.iter().filter_map(|&l| labels.name(l)).collect();
        let toks: Vec<&str> = d.tokens.iter().filter_map(|&t| vocab.token(t)).collect();
        writeln!(out, "{}\t{}\t{}", d.id, label_names.join(";"), toks.join(" "))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Corpus> {
        parse_corpus(text.as_bytes(), VocabSource::Build, DEFAULT_MAX_TOKENS)
    }

    #[test]
    fn three_lines_two_labels() {
        let c = parse("d1\tA\tx y\nd2\tA;B\ty z\nd3\tB\tz\n").unwrap();
        assert_eq!(c.docs.len(), 3);
        assert_eq!(c.num_labels(), 2);
        assert_eq!(c.docs[1].labels, vec![0, 1]);
        assert_eq!(c.docs[0].tokens, vec![2, 3]);
    }

    #[test]
    fn truncates_to_max_tokens_keeping_prefix() {
        let toks: Vec<String> = (0..3000).map(|i| format!("w{i}")).collect();
        let line = format!("d\tA\t{}\n", toks.join(" "));
        let c = parse_corpus(line.as_bytes(), VocabSource::Build, 2500).unwrap();
        assert_eq!(c.docs[0].len(), 2500);
        assert_eq!(c.vocab.token(c.docs[0].tokens[0]), Some("w0"));
        assert_eq!(c.vocab.token(c.docs[0].tokens[2499]), Some("w2499"));
    }

    #[test]
    fn truncate_is_idempotent() {
        let mut a: Vec<u32> = (0..10).collect();
        truncate(&mut a, 4);
        let once = a.clone();
        truncate(&mut a, 4);
        assert_eq!(a, once);
    }

    #[test]
    fn reload_with_own_vocab_is_identical() {
        let text = "d1\tA\tx y x\nd2\tB\ty z\n";
        let c = parse(text).unwrap();
        let again =
            parse_corpus(text.as_bytes(), VocabSource::Fixed(&c.vocab, &c.labels), 2500).unwrap();
        assert_eq!(c.docs, again.docs);
    }

    #[test]
    fn unseen_tokens_map_to_unk() {
        let c = parse("d1\tA\tx\n").unwrap();
        let t = parse_corpus(
            "e\tA\tx q\n".as_bytes(),
            VocabSource::Fixed(&c.vocab, &c.labels),
            10,
        )
        .unwrap();
        assert_eq!(t.docs[0].tokens, vec![2, UNK]);
    }

    #[test]
    fn wrong_field_count_reports_line() {
        match parse("d1\tA\tx\nbroken line\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_tokens_rejected() {
        assert!(matches!(
            parse("d1\tA\t   \n"),
            Err(Error::Record { line: 1, .. })
        ));
    }

    #[test]
    fn unknown_label_is_named() {
        let c = parse("d1\tA\tx\n").unwrap();
        let err = parse_corpus(
            "e\tZZ\tx\n".as_bytes(),
            VocabSource::Fixed(&c.vocab, &c.labels),
            10,
        )
        .unwrap_err();
        assert!(err.to_string().contains("ZZ"), "{err}");
    }

    #[test]
    fn write_then_parse_preserves_documents() {
        let c = parse("d1\tA;B\tx y\nd2\tB\tz\n").unwrap();
        let mut buf = Vec::new();
        write_corpus(&mut buf, &c.docs, &c.vocab, &c.labels).unwrap();
        let back = parse(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back.docs, c.docs);
    }
}
