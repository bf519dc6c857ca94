#![no_main]

use attnlab::nn::checkpoint::{decode, encode};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(params) = decode(data) {
        assert_eq!(encode(&params), data);
    }
});
