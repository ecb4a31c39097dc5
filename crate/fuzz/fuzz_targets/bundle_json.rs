#![no_main]

use libfuzzer_sys::fuzz_target;
use ultratext::ontology::ConceptHierarchy;
use ultratext::pipeline::{ConfigRecord, SegmentsFile};

fuzz_target!(|data: &[u8]| {
    if let Ok(h) = serde_json::from_slice::<ConceptHierarchy>(data) {
        if h.nodes.len() <= 256 {
            let _ = h.depths();
            let _ = h.to_dot();
        }
    }
    if let Ok(c) = serde_json::from_slice::<ConfigRecord>(data) {
        let _ = c.config.validate();
        let _ = c.config.hash();
    }
    let _ = serde_json::from_slice::<SegmentsFile>(data);
});
