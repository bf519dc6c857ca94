#![no_main]

use attnlab::corpus::{parse_embeddings, Vocabulary};
use libfuzzer_sys::fuzz_target;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fuzz_target!(|data: &[u8]| {
    let mut vocab = Vocabulary::new();
    for word in ["the", "patient", "was", "admitted"] {
        vocab.intern(word);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    if let Ok(m) = parse_embeddings(data, &vocab, &mut rng) {
        assert_eq!(m.weights.len(), m.vocab_size * m.dim);
        assert!(m.weights.iter().all(|w| w.is_finite()));
    }
});
