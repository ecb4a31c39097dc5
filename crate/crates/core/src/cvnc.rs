//! "Change versus no change" recoding of squared distances onto `{0, 1, 2}`.
//!
//! Pairs at or below the mean squared distance become 1, pairs above it
//! become 2, and exactly coincident points become 0. The result is a
//! metric.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dissimilarity::Dissimilarity;
use crate::error::{Error, Result};

/// Where the 1/2 threshold comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdMode {
    /// Mean squared distance over all unique pairs.
    #[default]
    GlobalMean,
    /// Mean of the three squared distances of each triangle. Codes then
    /// depend on the triplet being examined, so this mode only exists as a
    /// triplet classifier (see `umetry::PerTripletCoded`) and gives no
    /// metric guarantee.
    PerTriplet,
}

impl std::str::FromStr for ThresholdMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global-mean" | "global" => Ok(ThresholdMode::GlobalMean),
            "per-triplet" => Ok(ThresholdMode::PerTriplet),
            _ => Err(Error::domain(format!("unknown threshold mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodedDistanceMatrix {
    ids: Vec<String>,
    codes: Vec<u8>,
    pub threshold: f64,
    pub levels: u8,
}

impl CodedDistanceMatrix {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.codes[i * self.ids.len() + j]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    /// Builds directly from codes; used for hand-made fixtures and parsing.
    pub fn from_codes(ids: Vec<String>, codes: Vec<u8>, levels: u8) -> Result<Self> {
        let n = ids.len();
        if codes.len() != n * n {
            return Err(Error::domain("code count does not match ids"));
        }
        for i in 0..n {
            if codes[i * n + i] != 0 {
                return Err(Error::domain(format!("non-zero diagonal code at {i}")));
            }
            for j in 0..n {
                let c = codes[i * n + j];
                if c > levels || c != codes[j * n + i] {
                    return Err(Error::domain(format!("invalid code {c} at ({i}, {j})")));
                }
            }
        }
        Ok(CodedDistanceMatrix {
            ids,
            codes,
            threshold: f64::NAN,
            levels,
        })
    }

    /// The codes as a dissimilarity, for clustering.
    pub fn to_dissimilarity(&self) -> Dissimilarity {
        Dissimilarity::from_fn(self.ids.clone(), |i, j| f64::from(self.get(i, j)))
            .expect("codes are symmetric with a zero diagonal")
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("id");
        for id in &self.ids {
            out.push('\t');
            out.push_str(id);
        }
        out.push('\n');
        for (i, id) in self.ids.iter().enumerate() {
            out.push_str(id);
            for j in 0..self.len() {
                write!(out, "\t{}", self.get(i, j)).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.is_empty());
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let ids: Vec<String> = header.split('\t').skip(1).map(str::to_string).collect();
        let mut codes = Vec::with_capacity(ids.len() * ids.len());
        let mut rows = 0;
        for (n, line) in lines {
            let mut cells = line.split('\t');
            let id = cells.next().unwrap_or_default();
            if ids.get(rows).map(String::as_str) != Some(id) {
                return Err(Error::Parse {
                    line: n + 1,
                    msg: format!("unexpected row id `{id}`"),
                });
            }
            let before = codes.len();
            for cell in cells {
                codes.push(cell.trim().parse::<u8>().map_err(|_| Error::Parse {
                    line: n + 1,
                    msg: format!("bad code `{cell}`"),
                })?);
            }
            if codes.len() - before != ids.len() {
                return Err(Error::Parse {
                    line: n + 1,
                    msg: "wrong number of codes".into(),
                });
            }
            rows += 1;
        }
        if rows != ids.len() {
            return Err(Error::Parse {
                line: rows + 2,
                msg: "matrix is not square".into(),
            });
        }
        let levels = codes.iter().copied().max().unwrap_or(0).max(2);
        CodedDistanceMatrix::from_codes(ids, codes, levels)
    }
}

fn check_len(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::domain("recoding needs at least two points"));
    }
    Ok(())
}

/// Recodes squared distances with `levels` bins (the usual setting is 2).
///
/// With two levels, the threshold is the mean over the unique off-diagonal
/// pairs. With more, the range `[min, max]` of the off-diagonal values is
/// cut into equal-width bins numbered `1..=levels`. Exact zeros stay 0.
pub fn recode_distances(squared: &Dissimilarity, levels: u8) -> Result<CodedDistanceMatrix> {
    let n = squared.len();
    check_len(n)?;
    if levels < 2 {
        return Err(Error::domain("at least two code levels are required"));
    }
    let pairs = (n * (n - 1) / 2) as f64;
    let threshold = squared.upper_triangle().sum::<f64>() / pairs;
    let (lo, hi) = squared
        .upper_triangle()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    let code = |v: f64| -> u8 {
        if v == 0.0 {
            0
        } else if levels == 2 {
            if v <= threshold {
                1
            } else {
                2
            }
        } else if hi == lo {
            1
        } else {
            let bin = ((v - lo) / (hi - lo) * f64::from(levels)).floor() as u8;
            bin.min(levels - 1) + 1
        }
    };
    let mut codes = vec![0u8; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let c = code(squared.get(i, j));
            codes[i * n + j] = c;
            codes[j * n + i] = c;
        }
    }
    Ok(CodedDistanceMatrix {
        ids: squared.labels().to_vec(),
        codes,
        threshold,
        levels,
    })
}

/// Recodes the three squared distances of one triangle against their own
/// mean. Zeros stay 0.
pub fn recode_triplet(d: [f64; 3]) -> Result<[u8; 3]> {
    if d.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::domain(
            "triplet distances must be finite and non-negative",
        ));
    }
    let mean = (d[0] + d[1] + d[2]) / 3.0;
    Ok(d.map(|v| {
        if v == 0.0 {
            0
        } else if v <= mean {
            1
        } else {
            2
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i}")).collect()
    }

    #[test]
    fn threshold_rule() {
        // ab = 2, ac = 8, bc = 8; mean 6
        let d = Dissimilarity::new(labels(3), vec![0., 2., 8., 2., 0., 8., 8., 8., 0.]).unwrap();
        let c = recode_distances(&d, 2).unwrap();
        assert_eq!((c.get(0, 1), c.get(0, 2), c.get(1, 2)), (1, 2, 2));
        assert_eq!(c.threshold, 6.0);
    }

    #[test]
    fn boundary_maps_to_one() {
        // values 1, 2, 3: mean is exactly 2
        let d = Dissimilarity::new(labels(3), vec![0., 1., 2., 1., 0., 3., 2., 3., 0.]).unwrap();
        let c = recode_distances(&d, 2).unwrap();
        assert_eq!((c.get(0, 1), c.get(0, 2), c.get(1, 2)), (1, 1, 2));
    }

    #[test]
    fn identical_points_code_zero() {
        let coords = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        let d = Dissimilarity::squared_euclidean(labels(3), &coords).unwrap();
        let c = recode_distances(&d, 2).unwrap();
        assert!((0..3).all(|i| (0..3).all(|j| c.get(i, j) == 0)));
    }

    #[test]
    fn too_few_points() {
        let d = Dissimilarity::new(labels(1), vec![0.0]).unwrap();
        assert!(recode_distances(&d, 2).is_err());
    }

    #[test]
    fn more_levels_bin_the_range() {
        let d = Dissimilarity::from_fn(labels(4), |i, j| (i + j) as f64).unwrap();
        // off-diagonal values 1,2,3,3,4,5 over [1,5] with 4 bins of width 1
        let c = recode_distances(&d, 4).unwrap();
        assert_eq!(c.get(0, 1), 1);
        assert_eq!(c.get(0, 2), 2);
        assert_eq!(c.get(1, 2), 3);
        assert_eq!(c.get(2, 3), 4);
    }

    #[test]
    fn per_triplet_codes() {
        assert_eq!(recode_triplet([2.0, 8.0, 8.0]).unwrap(), [1, 2, 2]);
        assert_eq!(recode_triplet([4.0, 4.0, 4.0]).unwrap(), [1, 1, 1]);
        assert_eq!(recode_triplet([0.0, 4.0, 4.0]).unwrap(), [0, 2, 2]);
        assert!(recode_triplet([1.0, -1.0, 0.0]).is_err());
    }

    #[test]
    fn tsv_round_trip() {
        let d = Dissimilarity::from_fn(labels(4), |i, j| (i * j + 1) as f64).unwrap();
        let c = recode_distances(&d, 2).unwrap();
        let back = CodedDistanceMatrix::from_tsv(&c.to_tsv()).unwrap();
        assert_eq!(back.ids(), c.ids());
        assert!((0..4).all(|i| (0..4).all(|j| back.get(i, j) == c.get(i, j))));
        assert!(CodedDistanceMatrix::from_tsv("id\ta\tb\na\t0\t1\nb\t2\t0\n").is_err());
    }
}
