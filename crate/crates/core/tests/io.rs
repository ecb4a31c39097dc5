use std::path::{Path, PathBuf};

use ultratext::corpus::{FrequencyMatrix, MatrixMode, SupportSet};
use ultratext::cvnc::CodedDistanceMatrix;
use ultratext::embed::FactorEmbedding;
use ultratext::hclust::{agglomerate, cut_clusters, Criterion, Dendrogram};
use ultratext::pipeline::{self, PipelineConfig, SupportSpec};
use ultratext::Error;

fn data() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

fn sample_config() -> PipelineConfig {
    PipelineConfig {
        corpus: vec![data().join("sample")],
        support: SupportSpec::File { path: data().join("nouns.txt") },
        ..PipelineConfig::default()
    }
}

#[test]
fn artifacts_round_trip() {
    let a = pipeline::analyse(&sample_config()).unwrap();

    let tsv = a.matrix.to_tsv();
    let back = FrequencyMatrix::from_tsv(&tsv, MatrixMode::Counts).unwrap();
    assert_eq!(back.values, a.matrix.values);
    assert_eq!(back.col_ids, a.matrix.col_ids);

    let json = serde_json::to_string(&a.embedding.to_json()).unwrap();
    let e = FactorEmbedding::from_json(&serde_json::from_str(&json).unwrap()).unwrap();
    assert_eq!(e.row_coords, a.embedding.row_coords);
    assert_eq!(e.eigenvalues, a.embedding.eigenvalues);

    let coded = pipeline::coded_terms(&a).unwrap();
    let back = CodedDistanceMatrix::from_tsv(&coded.to_tsv()).unwrap();
    assert_eq!(back.ids(), coded.ids());
    let n = coded.ids().len();
    assert!((0..n).all(|i| (0..n).all(|j| back.get(i, j) == coded.get(i, j))));

    let tree = pipeline::cluster(&a, &sample_config()).unwrap();
    let table = Dendrogram::from_merge_table(tree.labels().to_vec(), &tree.merge_table_tsv()).unwrap();
    assert_eq!(table.merges(), tree.merges());
    let json = serde_json::to_string(&tree).unwrap();
    assert_eq!(serde_json::from_str::<Dendrogram>(&json).unwrap(), tree);
}

#[test]
fn single_link_cut_at_one_is_connected_components() {
    let a = pipeline::analyse(&sample_config()).unwrap();
    let coded = pipeline::coded_terms(&a).unwrap();
    let n = coded.ids().len();
    let tree = agglomerate(&coded.to_dissimilarity(), Criterion::Single, None).unwrap();

    // Components of the graph joining codes of at most 1, by flood fill.
    let mut comp = vec![usize::MAX; n];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for s in 0..n {
        if comp[s] != usize::MAX {
            continue;
        }
        let id = groups.len();
        let mut stack = vec![s];
        let mut members = Vec::new();
        comp[s] = id;
        while let Some(i) = stack.pop() {
            members.push(i);
            for j in 0..n {
                if comp[j] == usize::MAX && coded.get(i, j) <= 1 {
                    comp[j] = id;
                    stack.push(j);
                }
            }
        }
        members.sort_unstable();
        groups.push(members);
    }
    assert_eq!(cut_clusters(&tree, 1.0), groups);
}

#[test]
fn errors_name_their_subject() {
    let missing = PipelineConfig {
        corpus: vec![PathBuf::from("/nonexistent/texts")],
        ..sample_config()
    };
    let err = missing.validate().unwrap_err();
    assert!(matches!(err, Error::Config(_)));
    assert!(err.to_string().contains("/nonexistent/texts"));

    let err = FrequencyMatrix::from_tsv("segment\ta\tb\ns1\t1\n", MatrixMode::Counts).unwrap_err();
    assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");

    let err = SupportSet::parse("# only a comment\n").unwrap_err();
    assert!(err.to_string().contains("empty") || err.to_string().contains("no "), "{err}");

    let a = pipeline::analyse(&sample_config()).unwrap();
    let err = pipeline::nearest(&a, &sample_config(), Some("nowhere")).unwrap_err();
    assert!(err.to_string().contains("nowhere"));
}

#[test]
fn sampled_fingerprint_is_seeded() {
    let base = PipelineConfig {
        synthetic: Some(pipeline::SyntheticSpec { n: 60, dims: 5 }),
        budget: 5000,
        seed: 11,
        ..PipelineConfig::default()
    };
    let a = pipeline::fingerprint(&base).unwrap().report;
    let b = pipeline::fingerprint(&base).unwrap().report;
    assert_eq!(a, b);
    assert_eq!(a.total, 5000);
    assert_eq!(a.seed, Some(11));
    let c = pipeline::fingerprint(&PipelineConfig { seed: 12, ..base }).unwrap().report;
    assert_ne!(a.counts, c.counts);
}
