//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ultratext::corpus::{FrequencyMatrix, MatrixMode, Segmentation};
use ultratext::cvnc::{recode_distances, CodedDistanceMatrix};
use ultratext::embed::correspondence_analysis;
use ultratext::hclust::{agglomerate, cophenetic, tree_fit_stress, Criterion, Dendrogram, Merge};
use ultratext::ontology::{
    canonicalize, extract_subsumption_triples, packed_permutation, promote_labels,
};
use ultratext::pipeline::{self, PipelineConfig, SupportSpec, Writer};
use ultratext::umetry::{
    classify_coded_triplet, scan_global, DissimilarityClassifier, TripletClass,
};
use ultratext::Dissimilarity;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("t{i}")).collect()
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, dims: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, dims, |_, _| rng.random::<f64>())
}

fn coded_points(rng: &mut ChaCha8Rng, n: usize, dims: usize) -> CodedDistanceMatrix {
    let pts = random_points(rng, n, dims);
    let d = Dissimilarity::squared_euclidean(names(n), &pts).unwrap();
    recode_distances(&d, 2).unwrap()
}

/// Random binary tree: merges two random live nodes at a time, levels
/// non-decreasing and possibly tied.
fn random_tree(rng: &mut ChaCha8Rng, n: usize) -> Dendrogram {
    let mut live: Vec<(usize, usize)> = (0..n).map(|i| (i, 1)).collect();
    let mut merges = Vec::new();
    let mut level = 1.0;
    for r in 0..n - 1 {
        let a = live.swap_remove(rng.random_range(0..live.len()));
        let b = live.swap_remove(rng.random_range(0..live.len()));
        level += [0.0, 0.5, 1.0][rng.random_range(0..3)];
        merges.push(Merge {
            left: a.0,
            right: b.0,
            level,
            size: a.1 + b.1,
        });
        live.push((n + r, a.1 + b.1));
    }
    Dendrogram::new(names(n), merges).unwrap()
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut violations = 0usize;
    let mut checked = 0u64;
    for _ in 0..200 {
        let n = rng.random_range(5..=40);
        let dims = rng.random_range(2..=15);
        let c = coded_points(&mut rng, n, dims);
        for i in 0..n {
            if c.get(i, i) != 0 {
                violations += 1;
            }
            for j in 0..n {
                if c.get(i, j) != c.get(j, i) {
                    violations += 1;
                }
                for k in 0..n {
                    checked += 1;
                    if c.get(i, k) > c.get(i, j) + c.get(j, k) {
                        violations += 1;
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    check(violations == 0, || format!("{violations} violations"))?;
    check(elapsed < Duration::from_secs(10), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "200 sets, {checked} ordered triples, 0 violations, {elapsed:.2?}"
    ))
}

fn criterion_2() -> Outcome {
    let mut seen = 0;
    for a in 0..3u8 {
        for b in 0..3u8 {
            for c in 0..3u8 {
                let mut s = [a, b, c];
                s.sort_unstable();
                let expected = match s {
                    [0, _, _] => TripletClass::Trivial,
                    [1, 1, 1] | [2, 2, 2] => TripletClass::Equilateral,
                    [1, 2, 2] => TripletClass::IsoscelesSmallBase,
                    [1, 1, 2] => TripletClass::NonUltrametric,
                    _ => unreachable!(),
                };
                let got = classify_coded_triplet(a, b, c).map_err(|e| e.to_string())?;
                check(got == expected, || format!("({a},{b},{c}) gave {got:?}"))?;
                seen += 1;
            }
        }
    }
    Ok(format!("{seen} code triples classified as expected"))
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let c = coded_points(&mut rng, 231, 10);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let start = Instant::now();
    let report = pool
        .install(|| scan_global(&c, 4_000_000, 0))
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let counted = report.counts.trivial
        + report.counts.equilateral
        + report.counts.isosceles
        + report.counts.non_ultrametric;
    check(report.total == 2_027_795 && counted == 2_027_795, || {
        format!("total {} counted {counted}", report.total)
    })?;
    check(elapsed < Duration::from_secs(60), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!("2027795 triplets on one thread in {elapsed:.2?}"))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for t in 0..100 {
        let tree = random_tree(&mut rng, 32);
        let d = cophenetic(&tree);
        let classifier = DissimilarityClassifier {
            dissimilarity: &d,
            rel_tol: 0.0,
        };
        let report = scan_global(&classifier, u64::MAX, 0).map_err(|e| e.to_string())?;
        check(report.index == 1.0, || {
            format!("tree {t}: index {}", report.index)
        })?;
        let single = cophenetic(&agglomerate(&d, Criterion::Single, None).unwrap());
        let complete = cophenetic(&agglomerate(&d, Criterion::Complete, None).unwrap());
        check(single == complete, || {
            format!("tree {t}: single and complete differ")
        })?;
        check(single == d, || {
            format!("tree {t}: single link does not recover the tree")
        })?;
    }
    Ok("100 trees, index 1.0, single == complete exactly".into())
}

/// Squared chi-squared distances between row profiles, straight from the
/// definition.
fn chi2_rows(v: &DMatrix<f64>) -> DMatrix<f64> {
    let total: f64 = v.sum();
    let rows: Vec<f64> = (0..v.nrows()).map(|i| v.row(i).sum()).collect();
    let cols: Vec<f64> = (0..v.ncols()).map(|j| v.column(j).sum() / total).collect();
    DMatrix::from_fn(v.nrows(), v.nrows(), |a, b| {
        (0..v.ncols())
            .filter(|&j| cols[j] > 0.0)
            .map(|j| (v[(a, j)] / rows[a] - v[(b, j)] / rows[b]).powi(2) / cols[j])
            .sum()
    })
}

fn max_rel_dev(coords: &DMatrix<f64>, chi2: &DMatrix<f64>, keep: &[usize]) -> f64 {
    let mut worst = 0.0f64;
    for (a, &i) in keep.iter().enumerate() {
        for (b, &j) in keep.iter().enumerate().skip(a + 1) {
            let f: f64 = (coords.row(a) - coords.row(b)).norm_squared();
            let x = chi2[(i, j)];
            let dev = if x > 1e-12 {
                (f - x).abs() / x
            } else {
                (f - x).abs()
            };
            worst = worst.max(dev);
        }
    }
    worst
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for t in 0..50 {
        let r = rng.random_range(2..=30);
        let c = rng.random_range(2..=30);
        let v = DMatrix::from_fn(r, c, |_, _| {
            if rng.random_bool(0.3) {
                0.0
            } else {
                rng.random_range(1..20) as f64
            }
        });
        if v.sum() == 0.0 {
            continue;
        }
        let m = FrequencyMatrix::new(
            names(r),
            (0..c).map(|j| format!("c{j}")).collect(),
            v.clone(),
            MatrixMode::Counts,
        )
        .map_err(|e| e.to_string())?;
        let e = correspondence_analysis(&m).map_err(|e| format!("matrix {t}: {e}"))?;
        let kept_rows: Vec<usize> = (0..r).filter(|&i| v.row(i).sum() > 0.0).collect();
        let kept_cols: Vec<usize> = (0..c).filter(|&j| v.column(j).sum() > 0.0).collect();
        let dr = max_rel_dev(&e.row_coords, &chi2_rows(&v), &kept_rows);
        let dc = max_rel_dev(&e.col_coords, &chi2_rows(&v.transpose()), &kept_cols);
        worst = worst.max(dr).max(dc);
    }
    check(worst <= 1e-8, || {
        format!("max relative deviation {worst:e}")
    })?;
    Ok(format!("50 matrices, max relative deviation {worst:.2e}"))
}

fn tree(labels: &[&str], merges: &[(usize, usize, f64, usize)]) -> Dendrogram {
    Dendrogram::new(
        labels.iter().map(|s| s.to_string()).collect(),
        merges
            .iter()
            .map(|&(left, right, level, size)| Merge {
                left,
                right,
                level,
                size,
            })
            .collect(),
    )
    .unwrap()
}

/// The eight-term tree of the worked example, in canonical form.
fn eight_term_tree() -> Dendrogram {
    tree(
        &[
            "existence",
            "object",
            "position",
            "disposition",
            "fact",
            "motion",
            "name",
            "definition",
        ],
        &[
            (0, 1, 1.0, 2),
            (3, 4, 2.0, 2),
            (8, 2, 3.0, 3),
            (6, 7, 4.0, 2),
            (9, 5, 5.0, 3),
            (10, 12, 6.0, 6),
            (13, 11, 7.0, 8),
        ],
    )
}

fn criterion_6() -> Outcome {
    let abcd = ["a", "b", "c", "d"];
    let balanced = tree(&abcd, &[(0, 1, 1.0, 2), (2, 3, 2.0, 2), (4, 5, 3.0, 4)]);
    let chain = tree(&abcd, &[(0, 1, 1.0, 2), (4, 2, 2.0, 3), (5, 3, 3.0, 4)]);
    let eight = eight_term_tree();
    let cases: [(&str, &Dendrogram, &[usize]); 3] = [
        ("balanced", &balanced, &[1, 3, 2, 4]),
        ("left chain", &chain, &[1, 2, 3, 4]),
        ("eight terms", &eight, &[1, 3, 6, 2, 5, 7, 4, 8]),
    ];
    for (name, t, expected) in cases {
        let p = packed_permutation(t).map_err(|e| format!("{name}: {e}"))?;
        check(p == expected, || format!("{name}: got {p:?}"))?;
    }
    // The same tree drawn with children swapped canonicalizes back.
    let shuffled = tree(
        &[
            "existence",
            "object",
            "position",
            "disposition",
            "fact",
            "motion",
            "name",
            "definition",
        ],
        &[
            (1, 0, 1.0, 2),
            (4, 3, 2.0, 2),
            (2, 8, 3.0, 3),
            (7, 6, 4.0, 2),
            (5, 9, 5.0, 3),
            (12, 10, 6.0, 6),
            (11, 13, 7.0, 8),
        ],
    );
    let p = packed_permutation(&canonicalize(&shuffled)).map_err(|e| e.to_string())?;
    check(p == [1, 3, 6, 2, 5, 7, 4, 8], || {
        format!("canonicalized copy gave {p:?}")
    })?;
    let promoted = promote_labels(&eight).map_err(|e| e.to_string())?;
    check(
        promoted.node_labels[6] == "motion" && promoted.root_label == "definition",
        || {
            format!(
                "promotion gave {:?} / {}",
                promoted.node_labels, promoted.root_label
            )
        },
    )?;
    Ok("(1,3,2,4), (1,2,3,4), (1,3,6,2,5,7,4,8)".into())
}

/// Rank at which adjacent leaves first share a cluster.
fn naive_permutation(t: &Dendrogram) -> Vec<usize> {
    let order = t.leaf_order();
    let n = order.len();
    let mut p: Vec<usize> = order
        .windows(2)
        .map(|w| {
            (0..n - 1)
                .find(|&r| {
                    let m = t.members(n + r);
                    m.contains(&w[0]) && m.contains(&w[1])
                })
                .unwrap()
                + 1
        })
        .collect();
    p.push(n);
    p
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut mismatches = 0;
    for _ in 0..500 {
        let n = rng.random_range(2..=64);
        let t = canonicalize(&random_tree(&mut rng, n));
        let p = packed_permutation(&t).map_err(|e| e.to_string())?;
        let promoted = promote_labels(&t).map_err(|e| e.to_string())?;
        if promoted.assignment != p || p != naive_permutation(&t) || p[n - 1] != n {
            mismatches += 1;
        }
    }
    check(mismatches == 0, || format!("{mismatches} mismatches"))?;
    Ok("500 canonical trees, 0 mismatches".into())
}

type Triple = ((String, String), String);

/// Window classification written from the side lengths alone.
fn naive_triples(seq: &[&str], c: &CodedDistanceMatrix) -> Vec<(Triple, Vec<usize>)> {
    let mut out: Vec<(Triple, Vec<usize>)> = Vec::new();
    for t in 0..seq.len().saturating_sub(2) {
        let w = [seq[t], seq[t + 1], seq[t + 2]];
        if w[0] == w[1] || w[0] == w[2] || w[1] == w[2] {
            continue;
        }
        let ix: Vec<usize> = w.iter().map(|s| c.index_of(s).unwrap()).collect();
        let mut sides = [
            (c.get(ix[0], ix[1]), w[0], w[1], w[2]),
            (c.get(ix[0], ix[2]), w[0], w[2], w[1]),
            (c.get(ix[1], ix[2]), w[1], w[2], w[0]),
        ];
        sides.sort_by_key(|s| s.0);
        if sides[0].0 == 0 || !(sides[0].0 < sides[1].0 && sides[1].0 == sides[2].0) {
            continue;
        }
        let (x, y) = if sides[0].1 <= sides[0].2 {
            (sides[0].1, sides[0].2)
        } else {
            (sides[0].2, sides[0].1)
        };
        let key = ((x.to_string(), y.to_string()), sides[0].3.to_string());
        match out.iter_mut().find(|e| e.0 == key) {
            Some(e) => e.1.push(t),
            None => out.push((key, vec![t])),
        }
    }
    out
}

fn criterion_8() -> Outcome {
    let anchor = CodedDistanceMatrix::from_codes(
        vec!["x".into(), "y".into(), "z".into()],
        vec![0, 1, 2, 1, 0, 2, 2, 2, 0],
        2,
    )
    .map_err(|e| e.to_string())?;
    let got = extract_subsumption_triples(&["z", "y", "x"], &anchor).map_err(|e| e.to_string())?;
    check(
        got.len() == 1 && got[0].pair == ["x", "y"] && got[0].apex == "z",
        || format!("anchor gave {got:?}"),
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut found = 0;
    for d in 0..100 {
        let v = rng.random_range(3..=20);
        let dims = rng.random_range(2..=6);
        let c = coded_points(&mut rng, v, dims);
        let len = rng.random_range(0..=200);
        let ids = c.ids().to_vec();
        let seq: Vec<&str> = (0..len)
            .map(|_| ids[rng.random_range(0..v)].as_str())
            .collect();
        let got = extract_subsumption_triples(&seq, &c).map_err(|e| e.to_string())?;
        let got: Vec<(Triple, Vec<usize>)> = got
            .into_iter()
            .map(|t| {
                let [x, y] = t.pair;
                (((x, y), t.apex), t.positions)
            })
            .collect();
        let expected = naive_triples(&seq, &c);
        check(got == expected, || {
            format!("document {d} differs from the oracle")
        })?;
        found += got.len();
    }
    Ok(format!(
        "anchor ((x,y) z) plus 100 documents, {found} triples agree"
    ))
}

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas")
}

fn run_all(out: &Path, config: &PipelineConfig) -> ultratext::Result<f64> {
    let w = Writer::new(out, config)?;
    let fp = pipeline::fingerprint(config)?;
    w.json("report.json", &fp.report)?;
    w.json(
        "reports.json",
        &pipeline::ReportsFile {
            documents: fp.documents.clone(),
        },
    )?;
    w.text("table.txt", &fp.table())?;
    let a = pipeline::analyse(config)?;
    let tree = pipeline::cluster(&a, config)?;
    w.json("dendrogram.json", &tree)?;
    w.text("merges.tsv", &tree.merge_table_tsv())?;
    let h = pipeline::ontology(&a, config)?;
    w.bundle(&a, &h)?;
    w.text("hierarchy.dot", &h.to_dot())?;
    w.json_lines("triples.jsonl", &pipeline::triples(&a)?)?;
    w.json(
        "nearest.json",
        &serde_json::json!({ "results": pipeline::nearest(&a, config, None)? }),
    )?;
    let mut worst = (fp.report.proportions.sum() - 1.0).abs();
    for d in &fp.documents {
        worst = worst.max((d.report.proportions.sum() - 1.0).abs());
    }
    Ok(worst)
}

fn validate(dir: &Path) -> Result<usize, String> {
    let schema = |name: &str| -> Result<jsonschema::Validator, String> {
        let text = std::fs::read_to_string(schema_dir().join(format!("{name}.schema.json")))
            .map_err(|e| e.to_string())?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        jsonschema::validator_for(&value).map_err(|e| format!("{name} schema: {e}"))
    };
    let mut count = 0;
    let mut one = |v: &jsonschema::Validator, value: &serde_json::Value, what: &str| {
        if let Some(err) = v.iter_errors(value).next() {
            return Err(format!("{what}: {err} at {}", err.instance_path));
        }
        count += 1;
        Ok(())
    };
    for name in [
        "report",
        "reports",
        "embedding",
        "dendrogram",
        "hierarchy",
        "segments",
        "config",
        "nearest",
    ] {
        let text =
            std::fs::read_to_string(dir.join(format!("{name}.json"))).map_err(|e| e.to_string())?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        one(&schema(name)?, &value, name)?;
    }
    let triple = schema("triple")?;
    let text = std::fs::read_to_string(dir.join("triples.jsonl")).map_err(|e| e.to_string())?;
    for line in text.lines() {
        let value: serde_json::Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
        one(&triple, &value, "triple")?;
    }
    Ok(count)
}

fn criterion_9() -> Outcome {
    let data = data_dir();
    let docs = std::fs::read_dir(data.join("sample"))
        .map_err(|e| e.to_string())?
        .count();
    check(docs >= 10, || format!("only {docs} sample texts"))?;
    let config = PipelineConfig {
        corpus: vec![data.join("sample")],
        segmentation: Segmentation::ByDocument,
        support: SupportSpec::File {
            path: data.join("nouns.txt"),
        },
        per_document: true,
        seed: 9,
        ..PipelineConfig::default()
    };
    config.validate().map_err(|e| e.to_string())?;
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let start = Instant::now();
    let worst = run_all(&a, &config).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    run_all(&b, &config).map_err(|e| e.to_string())?;
    check(elapsed < Duration::from_secs(120), || {
        format!("took {elapsed:?}")
    })?;
    check(worst <= 1e-9, || format!("proportions off by {worst:e}"))?;
    let validated = validate(&a)?;
    let mut files: Vec<_> = std::fs::read_dir(&a)
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().file_name())
        .collect();
    files.sort();
    for f in &files {
        let x = std::fs::read(a.join(f)).map_err(|e| e.to_string())?;
        let y = std::fs::read(b.join(f)).map_err(|e| e.to_string())?;
        check(x == y, || {
            format!("{} differs between runs", f.to_string_lossy())
        })?;
    }
    Ok(format!(
        "{docs} texts in {elapsed:.2?}, {validated} documents valid, {} files identical",
        files.len()
    ))
}

fn naive_stress(d: &Dissimilarity, t: &Dendrogram) -> f64 {
    let n = d.len();
    let order = |i: usize, j: usize| {
        (0..n - 1)
            .find(|&r| {
                let m = t.members(n + r);
                m.contains(&i) && m.contains(&j)
            })
            .map(|r| t.merges()[r].level)
            .unwrap()
    };
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            num += (order(i, j) - d.get(i, j)).powi(2);
            den += d.get(i, j).powi(2);
        }
    }
    num / den
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.random_range(2..=40);
        let t = random_tree(&mut rng, n);
        let s = tree_fit_stress(&cophenetic(&t), &t).map_err(|e| e.to_string())?;
        check(s == 0.0, || format!("own cophenetic gave {s}"))?;

        let pts = random_points(&mut rng, n, 3);
        let d = Dissimilarity::squared_euclidean(names(n), &pts).unwrap();
        for crit in [Criterion::Single, Criterion::Complete, Criterion::Ward] {
            let fitted = agglomerate(&d, crit, None).unwrap();
            let s = tree_fit_stress(&d, &fitted).map_err(|e| e.to_string())?;
            worst = worst.max((s - naive_stress(&d, &fitted)).abs());
        }
    }
    check(worst <= 1e-12, || format!("deviation {worst:e}"))?;
    Ok(format!(
        "0 on own cophenetic; naive recomputation within {worst:.1e}"
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("coded distance is a metric", criterion_1),
        ("code pattern table", criterion_2),
        ("triplet count for n = 231", criterion_3),
        ("ultrametric fixed point", criterion_4),
        ("factor space equals chi-squared", criterion_5),
        ("packed permutation anchors", criterion_6),
        ("promotion matches permutation", criterion_7),
        ("subsumption oracle", criterion_8),
        ("end to end on sample corpus", criterion_9),
        ("stress anchor", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of 10 criteria failed");
        std::process::exit(1);
    }
    println!("all 10 criteria passed");
}
