//! Nearest column points (terms) to a row point (segment) in the joint
//! factor space, by exhaustive scan.

use serde::{Deserialize, Serialize};

use crate::embed::FactorEmbedding;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnCoords {
    #[default]
    Principal,
    Standard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Neighbor {
    pub term: String,
    pub d2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearestTermsResult {
    pub query: String,
    pub k: usize,
    pub results: Vec<Neighbor>,
}

/// The `k` terms closest to row `row_id` in the full factor space. Ties are
/// broken by term.
pub fn nearest_terms(
    embedding: &FactorEmbedding,
    row_id: &str,
    k: usize,
    coords: ColumnCoords,
) -> Result<NearestTermsResult> {
    if k == 0 {
        return Err(Error::domain("k must be at least 1"));
    }
    let row = embedding
        .row_index(row_id)
        .ok_or_else(|| Error::domain(format!("unknown row `{row_id}`")))?;
    let cols = match coords {
        ColumnCoords::Principal => embedding.col_coords.clone(),
        ColumnCoords::Standard => embedding.col_standard_coords(),
    };
    let q = embedding.row_coords.row(row);
    let mut results: Vec<Neighbor> = embedding
        .col_ids
        .iter()
        .enumerate()
        .map(|(j, term)| Neighbor {
            term: term.clone(),
            d2: (cols.row(j) - q).norm_squared(),
        })
        .collect();
    results.sort_by(|a, b| a.d2.total_cmp(&b.d2).then_with(|| a.term.cmp(&b.term)));
    results.truncate(k);
    Ok(NearestTermsResult {
        query: row_id.to_string(),
        k,
        results,
    })
}

/// The single closest term to every row, in row order, without repeats:
/// a row whose closest term is already taken gets its next free one.
pub fn closest_term_per_row(
    embedding: &FactorEmbedding,
    coords: ColumnCoords,
) -> Result<Vec<String>> {
    let mut chosen: Vec<String> = Vec::new();
    for id in &embedding.row_ids {
        let all = nearest_terms(embedding, id, embedding.col_ids.len().max(1), coords)?;
        if let Some(n) = all.results.into_iter().find(|n| !chosen.contains(&n.term)) {
            chosen.push(n.term);
        }
    }
    Ok(chosen)
}
