#![no_main]

use attnlab::tuner::ledger::{format_row, header, parse};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(records) = parse(data, 5) {
        let mut text = header(5);
        for r in &records {
            text.push('\n');
            text.push_str(&format_row(r, 5));
        }
        assert_eq!(parse(text.as_bytes(), 5).expect("rendered ledger parses"), records);
    }
});
