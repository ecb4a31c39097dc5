#![no_main]

use libfuzzer_sys::fuzz_target;
use ultratext::cvnc::CodedDistanceMatrix;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(m) = CodedDistanceMatrix::from_tsv(text) else { return };
    let again = CodedDistanceMatrix::from_tsv(&m.to_tsv()).unwrap();
    assert_eq!(again.ids(), m.ids());
});
