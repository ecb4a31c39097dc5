#![no_main]

use libfuzzer_sys::fuzz_target;
use ultratext::corpus::tokenize;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        for t in tokenize(text) {
            assert!(!t.text.is_empty());
            assert!(text.is_char_boundary(t.offset));
        }
    }
});
