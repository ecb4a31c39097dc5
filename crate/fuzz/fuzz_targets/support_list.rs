#![no_main]

use libfuzzer_sys::fuzz_target;
use ultratext::corpus::SupportSet;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(s) = SupportSet::parse(text) {
            for (i, t) in s.terms().iter().enumerate() {
                assert_eq!(s.position(t), Some(i));
            }
        }
    }
});
