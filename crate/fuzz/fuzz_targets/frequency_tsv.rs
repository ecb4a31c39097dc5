#![no_main]

use libfuzzer_sys::fuzz_target;
use ultratext::corpus::{FrequencyMatrix, MatrixMode};
use ultratext::embed::correspondence_analysis;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(m) = FrequencyMatrix::from_tsv(text, MatrixMode::Counts) else { return };
    let again = FrequencyMatrix::from_tsv(&m.to_tsv(), MatrixMode::Counts).unwrap();
    assert_eq!(again.values, m.values);
    if m.nrows() * m.ncols() <= 400 {
        let _ = correspondence_analysis(&m);
    }
});
