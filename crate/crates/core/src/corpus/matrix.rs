use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::corpus::{SegmentSet, SupportSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixMode {
    #[default]
    Counts,
    Presence,
}

impl std::str::FromStr for MatrixMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "counts" => Ok(MatrixMode::Counts),
            "presence" => Ok(MatrixMode::Presence),
            _ => Err(Error::domain(format!("unknown matrix mode `{s}`"))),
        }
    }
}

/// Rows are segments, columns are terms. Entries are non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyMatrix {
    pub row_ids: Vec<String>,
    pub col_ids: Vec<String>,
    pub values: DMatrix<f64>,
    pub mode: MatrixMode,
}

impl FrequencyMatrix {
    pub fn new(
        row_ids: Vec<String>,
        col_ids: Vec<String>,
        values: DMatrix<f64>,
        mode: MatrixMode,
    ) -> Result<Self> {
        if values.nrows() != row_ids.len() || values.ncols() != col_ids.len() {
            return Err(Error::domain(format!(
                "matrix is {}x{} but has {} row ids and {} column ids",
                values.nrows(),
                values.ncols(),
                row_ids.len(),
                col_ids.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::domain(format!("invalid matrix entry {v}")));
        }
        Ok(FrequencyMatrix {
            row_ids,
            col_ids,
            values,
            mode,
        })
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn row_totals(&self) -> Vec<f64> {
        self.values.row_iter().map(|r| r.sum()).collect()
    }

    pub fn col_totals(&self) -> Vec<f64> {
        self.values.column_iter().map(|c| c.sum()).collect()
    }

    pub fn total(&self) -> f64 {
        self.values.sum()
    }

    /// Indices of rows whose total is zero.
    pub fn zero_rows(&self) -> Vec<usize> {
        self.row_totals()
            .iter()
            .enumerate()
            .filter(|(_, t)| **t == 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn zero_cols(&self) -> Vec<usize> {
        self.col_totals()
            .iter()
            .enumerate()
            .filter(|(_, t)| **t == 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    /// Tab-separated table: a header of term ids after a `segment` cell, then
    /// one line per segment.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("segment");
        for c in &self.col_ids {
            out.push('\t');
            out.push_str(c);
        }
        out.push('\n');
        for (i, id) in self.row_ids.iter().enumerate() {
            out.push_str(id);
            for j in 0..self.ncols() {
                write!(out, "\t{}", self.values[(i, j)]).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_tsv(text: &str, mode: MatrixMode) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.is_empty());
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let mut cells = header.split('\t');
        cells.next();
        let col_ids: Vec<String> = cells.map(str::to_string).collect();
        if col_ids.is_empty() {
            return Err(Error::Parse {
                line: 1,
                msg: "no term columns".into(),
            });
        }
        if let Some(bad) = col_ids.iter().find(|c| !valid_id(c)) {
            return Err(Error::Parse {
                line: 1,
                msg: format!("bad term id `{}`", bad.escape_debug()),
            });
        }
        let mut row_ids = Vec::new();
        let mut data = Vec::new();
        for (n, line) in lines {
            let mut cells = line.split('\t');
            let id = cells.next().unwrap_or_default();
            if !valid_id(id) {
                return Err(Error::Parse {
                    line: n + 1,
                    msg: format!("bad segment id `{}`", id.escape_debug()),
                });
            }
            row_ids.push(id.to_string());
            let before = data.len();
            for cell in cells {
                let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                    line: n + 1,
                    msg: format!("bad number `{cell}`"),
                })?;
                data.push(v);
            }
            if data.len() - before != col_ids.len() {
                return Err(Error::Parse {
                    line: n + 1,
                    msg: format!(
                        "expected {} values, found {}",
                        col_ids.len(),
                        data.len() - before
                    ),
                });
            }
        }
        let values = DMatrix::from_row_slice(row_ids.len(), col_ids.len(), &data);
        FrequencyMatrix::new(row_ids, col_ids, values, mode)
    }
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && !id.chars().any(char::is_control)
}

/// Counts occurrences of each support term in each segment.
pub fn build_frequency_matrix(
    segments: &SegmentSet,
    support: &SupportSet,
    mode: MatrixMode,
) -> FrequencyMatrix {
    let mut values = DMatrix::zeros(segments.len(), support.len());
    for (i, seg) in segments.segments.iter().enumerate() {
        for tok in &seg.tokens {
            if let Some(j) = support.position(tok) {
                match mode {
                    MatrixMode::Counts => values[(i, j)] += 1.0,
                    MatrixMode::Presence => values[(i, j)] = 1.0,
                }
            }
        }
    }
    FrequencyMatrix {
        row_ids: segments.ids(),
        col_ids: support.terms().to_vec(),
        values,
        mode,
    }
}
