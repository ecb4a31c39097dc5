#![no_main]

use libfuzzer_sys::fuzz_target;
use ultratext::embed::{EmbeddingJson, FactorEmbedding};

fuzz_target!(|data: &[u8]| {
    let Ok(json) = serde_json::from_slice::<EmbeddingJson>(data) else { return };
    if let Ok(e) = FactorEmbedding::from_json(&json) {
        assert_eq!(e.rank(), json.rank);
    }
});
