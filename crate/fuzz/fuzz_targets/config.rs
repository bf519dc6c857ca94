#![no_main]

use attnlab::config::KeyValues;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(kv) = KeyValues::parse(text) {
        let again = KeyValues::parse(&kv.to_string()).expect("rendered config parses");
        assert_eq!(again, kv);
    }
});
