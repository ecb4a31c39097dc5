//! Chi-squared profile distances and correspondence analysis.
//!
//! Rows and columns are both returned in principal coordinates, so that
//! squared Euclidean distance between two row points equals the chi-squared
//! distance between the corresponding row profiles. Rows and columns then
//! share one space; distances between a row point and a column point are
//! used for nearest-term lookups, which is a convention rather than a
//! property of the biplot.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::corpus::FrequencyMatrix;
use crate::error::{Error, Result};

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Squared chi-squared distance between the profiles of rows `a` and `b`,
/// computed on relative frequencies.
pub fn chi2_distance_sq(matrix: &FrequencyMatrix, a: usize, b: usize) -> Result<f64> {
    let v = &matrix.values;
    let total = matrix.total();
    let row_a: f64 = v.row(a).sum();
    let row_b: f64 = v.row(b).sum();
    for (row, t) in [(a, row_a), (b, row_b)] {
        if t == 0.0 {
            return Err(Error::domain(format!(
                "row `{}` has zero total",
                matrix.row_ids[row]
            )));
        }
    }
    let mut acc = 0.0;
    for j in 0..v.ncols() {
        let col = v.column(j).sum();
        if col == 0.0 {
            continue;
        }
        let diff = v[(a, j)] / row_a - v[(b, j)] / row_b;
        acc += diff * diff * total / col;
    }
    Ok(acc)
}

/// Pairs each row-profile value `p` with its complement `1 - p`, giving an
/// `n x 2m` table whose rows all sum to `m` (equal row masses).
pub fn double_profiles(matrix: &FrequencyMatrix) -> Result<FrequencyMatrix> {
    let (n, m) = (matrix.nrows(), matrix.ncols());
    let totals = matrix.row_totals();
    if let Some(i) = totals.iter().position(|t| *t == 0.0) {
        return Err(Error::domain(format!(
            "cannot double zero row `{}`",
            matrix.row_ids[i]
        )));
    }
    let mut values = DMatrix::zeros(n, 2 * m);
    for i in 0..n {
        for j in 0..m {
            let p = matrix.values[(i, j)] / totals[i];
            values[(i, j)] = p;
            values[(i, m + j)] = 1.0 - p;
        }
    }
    let mut col_ids = matrix.col_ids.clone();
    col_ids.extend(matrix.col_ids.iter().map(|c| format!("{c}-")));
    FrequencyMatrix::new(matrix.row_ids.clone(), col_ids, values, matrix.mode)
}

/// Full-rank factor coordinates for the rows and columns of a table.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorEmbedding {
    pub row_ids: Vec<String>,
    pub col_ids: Vec<String>,
    /// `n x rank`, principal coordinates.
    pub row_coords: DMatrix<f64>,
    /// `m x rank`, principal coordinates.
    pub col_coords: DMatrix<f64>,
    /// Descending, strictly positive.
    pub eigenvalues: Vec<f64>,
    pub row_masses: Vec<f64>,
    pub col_masses: Vec<f64>,
    pub dropped_rows: Vec<String>,
    pub dropped_cols: Vec<String>,
}

impl FactorEmbedding {
    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn row_index(&self, id: &str) -> Option<usize> {
        self.row_ids.iter().position(|r| r == id)
    }

    pub fn col_index(&self, id: &str) -> Option<usize> {
        self.col_ids.iter().position(|c| c == id)
    }

    pub fn row_point(&self, i: usize) -> Vec<f64> {
        self.row_coords.row(i).iter().copied().collect()
    }

    pub fn col_point(&self, j: usize) -> Vec<f64> {
        self.col_coords.row(j).iter().copied().collect()
    }

    /// Column coordinates rescaled to unit inertia per axis.
    pub fn col_standard_coords(&self) -> DMatrix<f64> {
        let mut out = self.col_coords.clone();
        for (k, ev) in self.eigenvalues.iter().enumerate() {
            let s = ev.sqrt();
            out.column_mut(k).iter_mut().for_each(|x| *x /= s);
        }
        out
    }

    pub fn to_json(&self) -> EmbeddingJson {
        let points = |ids: &[String], masses: &[f64], coords: &DMatrix<f64>| {
            ids.iter()
                .enumerate()
                .map(|(i, id)| PointJson {
                    id: id.clone(),
                    mass: masses[i],
                    coords: coords.row(i).iter().copied().collect(),
                })
                .collect()
        };
        EmbeddingJson {
            rank: self.rank(),
            eigenvalues: self.eigenvalues.clone(),
            rows: points(&self.row_ids, &self.row_masses, &self.row_coords),
            cols: points(&self.col_ids, &self.col_masses, &self.col_coords),
            dropped: DroppedJson {
                rows: self.dropped_rows.clone(),
                cols: self.dropped_cols.clone(),
            },
        }
    }

    pub fn from_json(json: &EmbeddingJson) -> Result<Self> {
        let rank = json.rank;
        if json.eigenvalues.len() != rank {
            return Err(Error::domain("eigenvalue count does not match rank"));
        }
        let matrix = |pts: &[PointJson]| -> Result<DMatrix<f64>> {
            if let Some(p) = pts.iter().find(|p| p.coords.len() != rank) {
                return Err(Error::domain(format!(
                    "point `{}` has {} coordinates, expected {rank}",
                    p.id,
                    p.coords.len()
                )));
            }
            let flat: Vec<f64> = pts.iter().flat_map(|p| p.coords.iter().copied()).collect();
            Ok(DMatrix::from_row_slice(pts.len(), rank, &flat))
        };
        Ok(FactorEmbedding {
            row_ids: json.rows.iter().map(|p| p.id.clone()).collect(),
            col_ids: json.cols.iter().map(|p| p.id.clone()).collect(),
            row_coords: matrix(&json.rows)?,
            col_coords: matrix(&json.cols)?,
            eigenvalues: json.eigenvalues.clone(),
            row_masses: json.rows.iter().map(|p| p.mass).collect(),
            col_masses: json.cols.iter().map(|p| p.mass).collect(),
            dropped_rows: json.dropped.rows.clone(),
            dropped_cols: json.dropped.cols.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointJson {
    pub id: String,
    pub mass: f64,
    pub coords: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DroppedJson {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
}

/// Wire form of a [`FactorEmbedding`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingJson {
    pub rank: usize,
    pub eigenvalues: Vec<f64>,
    pub rows: Vec<PointJson>,
    pub cols: Vec<PointJson>,
    pub dropped: DroppedJson,
}

/// Correspondence analysis of a non-negative table.
///
/// Zero rows and columns are removed first and reported as dropped. The
/// standardized residual matrix is eigen-reduced in its smaller dual
/// space and the other side is projected; axes whose singular value falls
/// below [`RANK_TOLERANCE`] relative to the largest (the trivial centring
/// axis among them) are discarded.
pub fn correspondence_analysis(matrix: &FrequencyMatrix) -> Result<FactorEmbedding> {
    let total = matrix.total();
    if !(total > 0.0) {
        return Err(Error::domain("cannot analyse an all-zero matrix"));
    }
    if !total.is_finite() {
        return Err(Error::domain("matrix total overflows"));
    }
    let zero_rows = matrix.zero_rows();
    let zero_cols = matrix.zero_cols();
    let keep_rows: Vec<usize> = (0..matrix.nrows())
        .filter(|i| !zero_rows.contains(i))
        .collect();
    let keep_cols: Vec<usize> = (0..matrix.ncols())
        .filter(|j| !zero_cols.contains(j))
        .collect();
    let (n, m) = (keep_rows.len(), keep_cols.len());

    let k = DMatrix::from_fn(n, m, |i, j| matrix.values[(keep_rows[i], keep_cols[j])]);
    let row_masses: Vec<f64> = k.row_iter().map(|r| r.sum() / total).collect();
    let col_masses: Vec<f64> = k.column_iter().map(|c| c.sum() / total).collect();
    let residual = DMatrix::from_fn(n, m, |i, j| {
        let expected = row_masses[i] * col_masses[j];
        (k[(i, j)] / total - expected) / expected.sqrt()
    });

    // Eigen-reduce the cross-product in the smaller dual space, then project
    // the other side. Singular values come from the projections.
    let small_rows = n <= m;
    let cross = if small_rows {
        &residual * residual.transpose()
    } else {
        residual.transpose() * &residual
    };
    let basis = cross.symmetric_eigen().eigenvectors;
    let projected = if small_rows {
        residual.transpose() * &basis
    } else {
        &residual * &basis
    };
    let sigma: Vec<f64> = projected.column_iter().map(|c| c.norm()).collect();

    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]).then(a.cmp(&b)));
    let largest = order.first().map(|&i| sigma[i]).unwrap_or(0.0);
    let axes: Vec<usize> = order
        .into_iter()
        .filter(|&i| largest > 0.0 && sigma[i] > RANK_TOLERANCE * largest)
        .collect();
    let rank = axes.len();

    // Unit singular vectors scaled by sigma: rows of `basis` times sigma on
    // the reduced side, `projected` as is on the other.
    let (row_scaled, col_scaled) = if small_rows {
        let r = DMatrix::from_fn(n, rank, |i, a| basis[(i, axes[a])] * sigma[axes[a]]);
        let c = DMatrix::from_fn(m, rank, |j, a| projected[(j, axes[a])]);
        (r, c)
    } else {
        let r = DMatrix::from_fn(n, rank, |i, a| projected[(i, axes[a])]);
        let c = DMatrix::from_fn(m, rank, |j, a| basis[(j, axes[a])] * sigma[axes[a]]);
        (r, c)
    };

    let mut row_coords = DMatrix::zeros(n, rank);
    let mut col_coords = DMatrix::zeros(m, rank);
    for a in 0..rank {
        // Fix the sign so that the largest-magnitude column loading is positive.
        let pivot = col_scaled.column(a).iter().copied().fold(0.0f64, |acc, x| {
            if x.abs() > acc.abs() {
                x
            } else {
                acc
            }
        });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            row_coords[(i, a)] = sign * row_scaled[(i, a)] / row_masses[i].sqrt();
        }
        for j in 0..m {
            col_coords[(j, a)] = sign * col_scaled[(j, a)] / col_masses[j].sqrt();
        }
    }

    Ok(FactorEmbedding {
        row_ids: keep_rows
            .iter()
            .map(|&i| matrix.row_ids[i].clone())
            .collect(),
        col_ids: keep_cols
            .iter()
            .map(|&j| matrix.col_ids[j].clone())
            .collect(),
        row_coords,
        col_coords,
        eigenvalues: axes.iter().map(|&ax| sigma[ax] * sigma[ax]).collect(),
        row_masses,
        col_masses,
        dropped_rows: zero_rows
            .iter()
            .map(|&i| matrix.row_ids[i].clone())
            .collect(),
        dropped_cols: zero_cols
            .iter()
            .map(|&j| matrix.col_ids[j].clone())
            .collect(),
    })
}
