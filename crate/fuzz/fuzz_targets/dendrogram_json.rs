#![no_main]

use libfuzzer_sys::fuzz_target;
use ultratext::hclust::Dendrogram;
use ultratext::ontology::{canonicalize, derive_concept_hierarchy, HierarchyOptions};

fuzz_target!(|data: &[u8]| {
    let Ok(tree) = serde_json::from_slice::<Dendrogram>(data) else { return };
    if tree.len() > 256 {
        return;
    }
    let back: Dendrogram = serde_json::from_str(&serde_json::to_string(&tree).unwrap()).unwrap();
    assert_eq!(back, tree);
    let _ = derive_concept_hierarchy(&canonicalize(&tree), HierarchyOptions::default());
});
