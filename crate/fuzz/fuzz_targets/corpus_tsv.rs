#![no_main]

use attnlab::corpus::{parse_corpus, VocabSource};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(corpus) = parse_corpus(data, VocabSource::Build, 64) {
        for doc in &corpus.docs {
            assert!(!doc.tokens.is_empty() && doc.tokens.len() <= 64);
            assert!(doc.tokens.iter().all(|&t| (t as usize) < corpus.vocab.len()));
            assert!(doc.labels.windows(2).all(|w| w[0] < w[1]));
        }
    }
});
