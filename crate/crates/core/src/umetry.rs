//! Triplet classification and ultrametricity scans.
//!
//! Every triangle is either trivial (two coincident points), equilateral,
//! isosceles with a small base, or non-ultrametric. The first three are
//! what an ultrametric allows; the ultrametricity index is the share of
//! non-trivial triangles that fall in the two ultrametric classes.

use std::collections::HashSet;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cvnc::{recode_triplet, CodedDistanceMatrix};
use crate::dissimilarity::Dissimilarity;
use crate::error::{Error, Result};

/// Default angle tolerance: two degrees.
pub const ANGLE_TOLERANCE: f64 = 0.0349;

/// Triplet budget above which global scans switch to sampling.
pub const DEFAULT_BUDGET: u64 = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripletClass {
    Trivial,
    Equilateral,
    IsoscelesSmallBase,
    NonUltrametric,
}

impl TripletClass {
    pub fn is_ultrametric(self) -> bool {
        matches!(
            self,
            TripletClass::Equilateral | TripletClass::IsoscelesSmallBase
        )
    }
}

// Shape of a triangle from its three (non-zero) side values, with
// `close(a, b)` deciding equality.
fn shape(mut d: [f64; 3], close: impl Fn(f64, f64) -> bool) -> TripletClass {
    d.sort_by(f64::total_cmp);
    if close(d[0], d[2]) && close(d[0], d[1]) && close(d[1], d[2]) {
        TripletClass::Equilateral
    } else if close(d[1], d[2]) {
        TripletClass::IsoscelesSmallBase
    } else {
        TripletClass::NonUltrametric
    }
}

fn classify_codes(a: u8, b: u8, c: u8) -> TripletClass {
    if a == 0 || b == 0 || c == 0 {
        return TripletClass::Trivial;
    }
    shape([a, b, c].map(f64::from), |x, y| x == y)
}

/// Classifies a triangle of recoded distances, each in `{0, 1, 2}`.
pub fn classify_coded_triplet(d12: u8, d13: u8, d23: u8) -> Result<TripletClass> {
    if let Some(bad) = [d12, d13, d23].into_iter().find(|c| *c > 2) {
        return Err(Error::domain(format!("code {bad} is outside {{0, 1, 2}}")));
    }
    Ok(classify_codes(d12, d13, d23))
}

/// Interior angles of triangle `abc` at `a`, `b` and `c`, or `None` if two
/// vertices coincide.
fn interior_angles(a: &[f64], b: &[f64], c: &[f64]) -> Option<[f64; 3]> {
    let angle = |p: &[f64], q: &[f64], r: &[f64]| -> Option<f64> {
        let (mut dot, mut nq, mut nr) = (0.0, 0.0, 0.0);
        for ((p, q), r) in p.iter().zip(q).zip(r) {
            let (u, v) = (q - p, r - p);
            dot += u * v;
            nq += u * u;
            nr += v * v;
        }
        if nq == 0.0 || nr == 0.0 {
            return None;
        }
        Some((dot / (nq.sqrt() * nr.sqrt())).clamp(-1.0, 1.0).acos())
    };
    Some([angle(a, b, c)?, angle(b, a, c)?, angle(c, a, b)?])
}

/// Angle-based test: after dropping the smallest interior angle, the other
/// two must agree within `tol` radians.
pub fn classify_angle_triplet(
    a: &[f64],
    b: &[f64],
    c: &[f64],
    tol: f64,
) -> Result<(bool, TripletClass)> {
    if a.len() != b.len() || a.len() != c.len() {
        return Err(Error::domain(format!(
            "dimension mismatch: {}, {}, {}",
            a.len(),
            b.len(),
            c.len()
        )));
    }
    Ok(angle_class(a, b, c, tol))
}

fn angle_class(a: &[f64], b: &[f64], c: &[f64], tol: f64) -> (bool, TripletClass) {
    let Some(mut angles) = interior_angles(a, b, c) else {
        return (false, TripletClass::Trivial);
    };
    angles.sort_by(f64::total_cmp);
    if angles[2] - angles[1] > tol {
        return (false, TripletClass::NonUltrametric);
    }
    let class = if angles[2] - angles[0] <= tol {
        TripletClass::Equilateral
    } else {
        TripletClass::IsoscelesSmallBase
    };
    (true, class)
}

/// Strong triangle inequality on three non-negative values: the two largest
/// must be equal to within `rel_tol` times the largest.
pub fn ultrametric_triplet_check(d12: f64, d13: f64, d23: f64, rel_tol: f64) -> Result<bool> {
    let d = [d12, d13, d23];
    if d.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::domain(
            "triplet distances must be finite and non-negative",
        ));
    }
    let mut d = d;
    d.sort_by(f64::total_cmp);
    Ok(d[2] - d[1] <= rel_tol * d[2])
}

/// Something that can classify triangles over `len()` indexed points.
pub trait TripletClassifier: Sync {
    fn len(&self) -> usize;
    fn classify(&self, i: usize, j: usize, k: usize) -> TripletClass;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl TripletClassifier for CodedDistanceMatrix {
    fn len(&self) -> usize {
        CodedDistanceMatrix::len(self)
    }

    fn classify(&self, i: usize, j: usize, k: usize) -> TripletClass {
        classify_codes(self.get(i, j), self.get(i, k), self.get(j, k))
    }
}

/// Angle test on points given as the rows of a coordinate matrix.
pub struct AngleClassifier {
    points: Vec<Vec<f64>>,
    pub tol: f64,
}

impl AngleClassifier {
    pub fn new(coords: &DMatrix<f64>, tol: f64) -> Self {
        let points = coords
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect();
        AngleClassifier { points, tol }
    }
}

impl TripletClassifier for AngleClassifier {
    fn len(&self) -> usize {
        self.points.len()
    }

    fn classify(&self, i: usize, j: usize, k: usize) -> TripletClass {
        angle_class(&self.points[i], &self.points[j], &self.points[k], self.tol).1
    }
}

/// Direct comparison of real-valued dissimilarities with a relative
/// tolerance; `rel_tol = 0` is the exact test used on cophenetic distances.
pub struct DissimilarityClassifier<'a> {
    pub dissimilarity: &'a Dissimilarity,
    pub rel_tol: f64,
}

impl TripletClassifier for DissimilarityClassifier<'_> {
    fn len(&self) -> usize {
        self.dissimilarity.len()
    }

    fn classify(&self, i: usize, j: usize, k: usize) -> TripletClass {
        let d = &self.dissimilarity;
        let v = [d.get(i, j), d.get(i, k), d.get(j, k)];
        if v.contains(&0.0) {
            return TripletClass::Trivial;
        }
        let scale = v.iter().copied().fold(0.0, f64::max);
        let tol = self.rel_tol * scale;
        shape(v, |x, y| (x - y).abs() <= tol)
    }
}

/// Recodes every triangle of squared distances against its own mean
/// before classifying it.
pub struct PerTripletCoded<'a> {
    pub squared: &'a Dissimilarity,
}

impl TripletClassifier for PerTripletCoded<'_> {
    fn len(&self) -> usize {
        self.squared.len()
    }

    fn classify(&self, i: usize, j: usize, k: usize) -> TripletClass {
        let d = self.squared;
        match recode_triplet([d.get(i, j), d.get(i, k), d.get(j, k)]) {
            Ok([a, b, c]) => classify_codes(a, b, c),
            Err(_) => TripletClass::Trivial,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanMode {
    GlobalExhaustive,
    GlobalSampled,
    Linear,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub trivial: u64,
    pub equilateral: u64,
    pub isosceles: u64,
    #[serde(rename = "nonUM")]
    pub non_ultrametric: u64,
}

impl ClassCounts {
    fn add(&mut self, class: TripletClass) {
        match class {
            TripletClass::Trivial => self.trivial += 1,
            TripletClass::Equilateral => self.equilateral += 1,
            TripletClass::IsoscelesSmallBase => self.isosceles += 1,
            TripletClass::NonUltrametric => self.non_ultrametric += 1,
        }
    }

    fn merge(mut self, o: ClassCounts) -> ClassCounts {
        self.trivial += o.trivial;
        self.equilateral += o.equilateral;
        self.isosceles += o.isosceles;
        self.non_ultrametric += o.non_ultrametric;
        self
    }

    pub fn total(&self) -> u64 {
        self.trivial + self.equilateral + self.isosceles + self.non_ultrametric
    }

    pub fn non_trivial(&self) -> u64 {
        self.total() - self.trivial
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Proportions {
    pub trivial: f64,
    pub equilateral: f64,
    pub isosceles: f64,
    #[serde(rename = "nonUM")]
    pub non_ultrametric: f64,
}

impl Proportions {
    fn of(c: &ClassCounts, denominator: u64, include_trivial: bool) -> Self {
        if denominator == 0 {
            return Proportions::default();
        }
        let d = denominator as f64;
        Proportions {
            trivial: if include_trivial {
                c.trivial as f64 / d
            } else {
                0.0
            },
            equilateral: c.equilateral as f64 / d,
            isosceles: c.isosceles as f64 / d,
            non_ultrametric: c.non_ultrametric as f64 / d,
        }
    }

    pub fn sum(&self) -> f64 {
        self.trivial + self.equilateral + self.isosceles + self.non_ultrametric
    }
}

/// Outcome of a global or linear scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UltrametricityReport {
    pub mode: ScanMode,
    /// Number of points (global) or reduced-document length (linear).
    pub n: usize,
    pub total: u64,
    pub counts: ClassCounts,
    /// Over all triplets considered, trivial included.
    pub proportions: Proportions,
    /// Over non-trivial triplets only.
    pub nontrivial_proportions: Proportions,
    /// `(equilateral + isosceles) / (total - trivial)`; 0 when undefined.
    pub index: f64,
    pub index_defined: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unique_triplets: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unique_ultrametric: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unique_index: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
}

impl UltrametricityReport {
    fn from_counts(mode: ScanMode, n: usize, counts: ClassCounts) -> Self {
        let total = counts.total();
        let nt = counts.non_trivial();
        let index_defined = nt > 0;
        let index = if index_defined {
            (counts.equilateral + counts.isosceles) as f64 / nt as f64
        } else {
            0.0
        };
        UltrametricityReport {
            mode,
            n,
            total,
            counts,
            proportions: Proportions::of(&counts, total, true),
            nontrivial_proportions: Proportions::of(&counts, nt, false),
            index,
            index_defined,
            unique_triplets: None,
            unique_ultrametric: None,
            unique_index: None,
            seed: None,
            budget: None,
        }
    }

    /// One line in the style of a results table: total triangles, then
    /// rounded percentages of isosceles, equilateral and non-ultrametric
    /// among the non-trivial ones. Rounded values may not sum to 100.
    pub fn table_row(&self, label: &str) -> String {
        let pct = |x: f64| (x * 100.0).round() as i64;
        let p = &self.nontrivial_proportions;
        format!(
            "{label}\t{}\t{}\t{}\t{}",
            self.total,
            pct(p.isosceles),
            pct(p.equilateral),
            pct(p.non_ultrametric)
        )
    }
}

/// `n choose 3`.
pub fn triplet_count(n: usize) -> u64 {
    let n = n as u128;
    if n < 3 {
        return 0;
    }
    (n * (n - 1) * (n - 2) / 6) as u64
}

fn choose(n: u64, k: u64) -> u64 {
    match k {
        2 => n * n.saturating_sub(1) / 2,
        3 => triplet_count(n as usize),
        _ => unreachable!(),
    }
}

// Largest `c` with `choose(c, k) <= r`.
fn largest_below(r: u64, k: u64, upper: u64) -> u64 {
    let (mut lo, mut hi) = (k - 1, upper);
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if choose(mid, k) <= r {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    lo
}

/// Maps a rank in `0..n choose 3` to the triple `a < b < c` (colexicographic
/// order).
pub fn unrank_triplet(rank: u64, n: usize) -> (usize, usize, usize) {
    let c = largest_below(rank, 3, n as u64 - 1);
    let r = rank - choose(c, 3);
    let b = largest_below(r, 2, c - 1);
    let a = r - choose(b, 2);
    (a as usize, b as usize, c as usize)
}

/// Scans all triangles if there are at most `budget` of them, in the order
/// `i < j < k`; otherwise classifies `budget` distinct triangles drawn
/// uniformly with the given seed. Results do not depend on thread count.
pub fn scan_global<C: TripletClassifier + ?Sized>(
    classifier: &C,
    budget: u64,
    seed: u64,
) -> Result<UltrametricityReport> {
    let n = classifier.len();
    if n < 3 {
        return Err(Error::domain(format!("need at least 3 points, got {n}")));
    }
    let total = triplet_count(n);
    if total <= budget {
        let counts = (0..n - 2)
            .into_par_iter()
            .map(|i| {
                let mut c = ClassCounts::default();
                for j in i + 1..n - 1 {
                    for k in j + 1..n {
                        c.add(classifier.classify(i, j, k));
                    }
                }
                c
            })
            .reduce(ClassCounts::default, ClassCounts::merge);
        return Ok(UltrametricityReport::from_counts(
            ScanMode::GlobalExhaustive,
            n,
            counts,
        ));
    }
    let length =
        usize::try_from(total).map_err(|_| Error::domain("triplet space too large to sample"))?;
    let amount = usize::try_from(budget).map_err(|_| Error::domain("budget too large"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = index::sample(&mut rng, length, amount).into_vec();
    let counts = picks
        .par_chunks(1 << 14)
        .map(|chunk| {
            let mut c = ClassCounts::default();
            for &r in chunk {
                let (a, b, k) = unrank_triplet(r as u64, n);
                c.add(classifier.classify(a, b, k));
            }
            c
        })
        .reduce(ClassCounts::default, ClassCounts::merge);
    let mut report = UltrametricityReport::from_counts(ScanMode::GlobalSampled, n, counts);
    report.seed = Some(seed);
    report.budget = Some(budget);
    Ok(report)
}

/// Classifies the successive windows `(t, t+1, t+2)` of a sequence of point
/// indices. Windows that repeat a point are trivial. Also counts the
/// distinct point sets among non-trivial windows.
pub fn scan_linear<C: TripletClassifier + ?Sized>(
    sequence: &[usize],
    classifier: &C,
) -> Result<UltrametricityReport> {
    let len = sequence.len();
    if len < 3 {
        return Err(Error::domain(format!(
            "linear scan needs at least 3 terms, got {len}"
        )));
    }
    if let Some(bad) = sequence.iter().find(|&&i| i >= classifier.len()) {
        return Err(Error::domain(format!("point index {bad} out of range")));
    }
    let mut counts = ClassCounts::default();
    let mut seen: HashSet<[usize; 3]> = HashSet::new();
    let mut unique_um = 0;
    for w in sequence.windows(3) {
        let (a, b, c) = (w[0], w[1], w[2]);
        let class = if a == b || a == c || b == c {
            TripletClass::Trivial
        } else {
            classifier.classify(a, b, c)
        };
        counts.add(class);
        if class != TripletClass::Trivial {
            let mut key = [a, b, c];
            key.sort_unstable();
            if seen.insert(key) && class.is_ultrametric() {
                unique_um += 1;
            }
        }
    }
    let mut report = UltrametricityReport::from_counts(ScanMode::Linear, len, counts);
    let unique = seen.len() as u64;
    report.unique_triplets = Some(unique);
    report.unique_ultrametric = Some(unique_um);
    report.unique_index = Some(if unique > 0 {
        unique_um as f64 / unique as f64
    } else {
        0.0
    });
    Ok(report)
}

/// Resolves a sequence of terms against point ids, naming the first term
/// that has no point.
pub fn resolve_terms<'a, I>(terms: I, ids: &[String]) -> Result<Vec<usize>>
where
    I: IntoIterator<Item = &'a str>,
{
    let lookup: std::collections::HashMap<&str, usize> = ids
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    terms
        .into_iter()
        .map(|t| {
            lookup
                .get(t)
                .copied()
                .ok_or_else(|| Error::domain(format!("term `{t}` has no coordinates")))
        })
        .collect()
}
