#![no_main]

use libfuzzer_sys::fuzz_target;
use ultratext::corpus::{segment, Corpus, Segmentation};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let (spec, body) = text.split_once('\n').unwrap_or((text, "a b c"));
    let Ok(strategy) = spec.parse::<Segmentation>() else { return };
    let Ok(corpus) = Corpus::from_texts([("d", "d", body)]) else { return };
    if let Ok(set) = segment(&corpus, strategy) {
        let n: usize = set.segments.iter().map(|s| s.tokens.len()).sum();
        assert!(n <= corpus.token_count());
    }
});
