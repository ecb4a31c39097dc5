use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A labelled, square, symmetric dissimilarity matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Dissimilarity {
    labels: Vec<String>,
    values: Vec<f64>,
}

impl Dissimilarity {
    /// Validates shape, symmetry, finiteness, non-negativity and a zero diagonal.
    pub fn new(labels: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let n = labels.len();
        if values.len() != n * n {
            return Err(Error::domain(format!(
                "{} values for {n} labels",
                values.len()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let v = values[i * n + j];
                if !v.is_finite() {
                    return Err(Error::domain(format!(
                        "non-finite dissimilarity at ({i}, {j})"
                    )));
                }
                if v < 0.0 {
                    return Err(Error::domain(format!(
                        "negative dissimilarity at ({i}, {j})"
                    )));
                }
                if i == j && v != 0.0 {
                    return Err(Error::domain(format!("non-zero diagonal at {i}")));
                }
                if v != values[j * n + i] {
                    return Err(Error::domain(format!("asymmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Dissimilarity { labels, values })
    }

    /// Builds from the upper triangle; `f(i, j)` is called for `i < j`.
    pub fn from_fn(labels: Vec<String>, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let n = labels.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        Dissimilarity::new(labels, values)
    }

    /// Squared Euclidean distances between the rows of `coords`.
    pub fn squared_euclidean(labels: Vec<String>, coords: &DMatrix<f64>) -> Result<Self> {
        if labels.len() != coords.nrows() {
            return Err(Error::domain("label count does not match point count"));
        }
        Dissimilarity::from_fn(labels, |i, j| {
            (coords.row(i) - coords.row(j)).norm_squared()
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.labels.len() + j]
    }

    /// Values for the unique pairs `i < j`, row by row.
    pub fn upper_triangle(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.len();
        (0..n).flat_map(move |i| (i + 1..n).map(move |j| self.get(i, j)))
    }

    /// Reorders points so that new index `k` is old index `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let labels = order.iter().map(|&i| self.labels[i].clone()).collect();
        Dissimilarity::from_fn(labels, |a, b| self.get(order[a], order[b]))
    }

    pub fn subset(&self, keep: &[usize]) -> Result<Self> {
        self.permuted(keep)
    }
}
