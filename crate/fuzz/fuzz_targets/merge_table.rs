#![no_main]

use libfuzzer_sys::fuzz_target;
use ultratext::hclust::{cophenetic, Dendrogram};
use ultratext::ontology::canonicalize;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let n = text.lines().filter(|l| !l.trim().is_empty()).count() + 1;
    if n > 256 {
        return;
    }
    let labels: Vec<String> = (0..n).map(|i| format!("t{i}")).collect();
    let Ok(tree) = Dendrogram::from_merge_table(labels, text) else { return };
    let c = canonicalize(&tree);
    assert_eq!(cophenetic(&c), cophenetic(&tree));
});
