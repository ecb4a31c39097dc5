//! Stored-matrix agglomerative clustering with Lance-Williams updates,
//! cophenetic distances, cuts, and the tree-fit stress measure.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dissimilarity::Dissimilarity;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Single,
    Complete,
    /// Minimum variance; expects squared Euclidean input.
    Ward,
}

impl std::str::FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Criterion::Single),
            "complete" => Ok(Criterion::Complete),
            "ward" => Ok(Criterion::Ward),
            _ => Err(Error::domain(format!("unknown criterion `{s}`"))),
        }
    }
}

/// One agglomeration. `left` and `right` address terminals as `0..n` and
/// earlier merges as `n + rank - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub level: f64,
    pub size: usize,
}

/// A binary, rooted, ranked tree over labelled terminals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DendrogramJson", into = "DendrogramJson")]
pub struct Dendrogram {
    labels: Vec<String>,
    merges: Vec<Merge>,
    canonical: bool,
}

#[derive(Serialize, Deserialize)]
struct DendrogramJson {
    labels: Vec<String>,
    merges: Vec<Merge>,
    #[serde(default)]
    canonical: bool,
}

impl TryFrom<DendrogramJson> for Dendrogram {
    type Error = Error;

    fn try_from(j: DendrogramJson) -> Result<Self> {
        let mut d = Dendrogram::new(j.labels, j.merges)?;
        if j.canonical {
            d.canonical = crate::ontology::is_canonical(&d);
            if !d.canonical {
                return Err(Error::domain("dendrogram marked canonical is not"));
            }
        }
        Ok(d)
    }
}

impl From<Dendrogram> for DendrogramJson {
    fn from(d: Dendrogram) -> Self {
        DendrogramJson {
            labels: d.labels,
            merges: d.merges,
            canonical: d.canonical,
        }
    }
}

impl Dendrogram {
    /// Checks that the merges form one binary tree over `labels`: `n - 1`
    /// merges, children referring to terminals or earlier merges, each node
    /// used once, sizes adding up and levels non-decreasing.
    pub fn new(labels: Vec<String>, merges: Vec<Merge>) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::domain("dendrogram has no terminals"));
        }
        if merges.len() != n - 1 {
            return Err(Error::domain(format!(
                "{} merges for {n} terminals",
                merges.len()
            )));
        }
        let mut used = vec![false; 2 * n - 1];
        let mut sizes: Vec<usize> = vec![1; n];
        let mut last = f64::NEG_INFINITY;
        for (r, m) in merges.iter().enumerate() {
            if !m.level.is_finite() {
                return Err(Error::domain(format!(
                    "merge {} has non-finite level",
                    r + 1
                )));
            }
            if m.level < last {
                return Err(Error::domain(format!("merge {} lowers the level", r + 1)));
            }
            last = m.level;
            for child in [m.left, m.right] {
                if child >= n + r {
                    return Err(Error::domain(format!(
                        "merge {} refers to node {child} before it exists",
                        r + 1
                    )));
                }
                if std::mem::replace(&mut used[child], true) {
                    return Err(Error::domain(format!("node {child} merged twice")));
                }
            }
            let size = sizes[m.left] + sizes[m.right];
            if m.size != size {
                return Err(Error::domain(format!(
                    "merge {} has size {} but children cover {size}",
                    r + 1,
                    m.size
                )));
            }
            sizes.push(size);
        }
        Ok(Dendrogram {
            labels,
            merges,
            canonical: false,
        })
    }

    pub(crate) fn with_canonical(mut self, canonical: bool) -> Self {
        self.canonical = canonical;
        self
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn is_canonical(&self) -> bool {
        self.canonical
    }

    /// Node id of the root (a terminal when `n == 1`).
    pub fn root(&self) -> usize {
        2 * self.len() - 2
    }

    pub fn is_terminal(&self, node: usize) -> bool {
        node < self.len()
    }

    /// The merge that forms `node`, if it is internal.
    pub fn merge_of(&self, node: usize) -> Option<&Merge> {
        node.checked_sub(self.len()).map(|r| &self.merges[r])
    }

    /// Parent of every node; `None` for the root.
    pub fn parents(&self) -> Vec<Option<usize>> {
        let n = self.len();
        let mut parent = vec![None; 2 * n - 1];
        for (r, m) in self.merges.iter().enumerate() {
            parent[m.left] = Some(n + r);
            parent[m.right] = Some(n + r);
        }
        parent
    }

    /// Terminals under `node`, left to right.
    pub fn members(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            match self.merge_of(x) {
                None => out.push(x),
                Some(m) => {
                    stack.push(m.right);
                    stack.push(m.left);
                }
            }
        }
        out
    }

    /// Terminals in left-to-right drawing order.
    pub fn leaf_order(&self) -> Vec<usize> {
        self.members(self.root())
    }

    /// Four whitespace-free columns per merge: left, right, level, size.
    pub fn merge_table_tsv(&self) -> String {
        let mut out = String::new();
        for m in &self.merges {
            writeln!(out, "{}\t{}\t{}\t{}", m.left, m.right, m.level, m.size).unwrap();
        }
        out
    }

    /// Parses a merge table written by [`Dendrogram::merge_table_tsv`].
    pub fn from_merge_table(labels: Vec<String>, tsv: &str) -> Result<Self> {
        let mut merges = Vec::new();
        for (n, line) in tsv.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split('\t').collect();
            let bad = |msg: String| Error::Parse { line: n + 1, msg };
            if cells.len() != 4 {
                return Err(bad(format!("expected 4 columns, found {}", cells.len())));
            }
            let int = |s: &str| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| bad(format!("bad integer `{s}`")))
            };
            merges.push(Merge {
                left: int(cells[0])?,
                right: int(cells[1])?,
                level: cells[2]
                    .trim()
                    .parse()
                    .map_err(|_| bad(format!("bad level `{}`", cells[2])))?,
                size: int(cells[3])?,
            });
        }
        Dendrogram::new(labels, merges)
    }
}

/// Agglomerates `d` under `criterion`. Ties go to the lowest `(i, j)` pair
/// of cluster slots; a merged cluster keeps the lower slot. Ward uses the
/// given masses (equal when `None`).
pub fn agglomerate(
    d: &Dissimilarity,
    criterion: Criterion,
    masses: Option<&[f64]>,
) -> Result<Dendrogram> {
    let n = d.len();
    if n < 2 {
        return Err(Error::domain("clustering needs at least two points"));
    }
    let mut mass: Vec<f64> = match masses {
        Some(w) if w.len() != n => return Err(Error::domain("mass count does not match points")),
        Some(w) if w.iter().any(|x| !(*x > 0.0) || !x.is_finite()) => {
            return Err(Error::domain("masses must be positive"))
        }
        Some(w) => w.to_vec(),
        None => vec![1.0; n],
    };
    let mut dist: Vec<f64> = (0..n * n).map(|x| d.get(x / n, x % n)).collect();
    let mut active = vec![true; n];
    let mut node: Vec<usize> = (0..n).collect();
    let mut size = vec![1usize; n];
    let mut merges = Vec::with_capacity(n - 1);

    for rank in 0..n - 1 {
        let mut best = (usize::MAX, usize::MAX, f64::INFINITY);
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in i + 1..n {
                if active[j] && dist[i * n + j] < best.2 {
                    best = (i, j, dist[i * n + j]);
                }
            }
        }
        let (i, j, level) = best;
        let level = if criterion == Criterion::Ward
            && merges.last().is_some_and(|m: &Merge| m.level > level)
        {
            // rounding can dip a hair below the previous level
            merges.last().unwrap().level
        } else {
            level
        };
        for k in 0..n {
            if !active[k] || k == i || k == j {
                continue;
            }
            let (dik, djk) = (dist[i * n + k], dist[j * n + k]);
            let updated = match criterion {
                Criterion::Single => dik.min(djk),
                Criterion::Complete => dik.max(djk),
                Criterion::Ward => {
                    let (wi, wj, wk) = (mass[i], mass[j], mass[k]);
                    ((wi + wk) * dik + (wj + wk) * djk - wk * dist[i * n + j]) / (wi + wj + wk)
                }
            };
            dist[i * n + k] = updated;
            dist[k * n + i] = updated;
        }
        merges.push(Merge {
            left: node[i],
            right: node[j],
            level,
            size: size[i] + size[j],
        });
        active[j] = false;
        node[i] = n + rank;
        size[i] += size[j];
        mass[i] += mass[j];
    }
    Dendrogram::new(d.labels().to_vec(), merges)
}

/// Tree distance: the level of the lowest merge joining each pair.
pub fn cophenetic(tree: &Dendrogram) -> Dissimilarity {
    let n = tree.len();
    let mut values = vec![0.0; n * n];
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    for m in tree.merges() {
        let left = std::mem::take(&mut members[m.left]);
        let right = std::mem::take(&mut members[m.right]);
        for &a in &left {
            for &b in &right {
                values[a * n + b] = m.level;
                values[b * n + a] = m.level;
            }
        }
        let mut joined = left;
        joined.extend(right);
        members.push(joined);
    }
    Dissimilarity::new(tree.labels().to_vec(), values)
        .expect("cophenetic matrix of a valid dendrogram")
}

/// Clusters formed by all merges at or below `level`, each sorted, ordered
/// by smallest member.
pub fn cut_clusters(tree: &Dendrogram, level: f64) -> Vec<Vec<usize>> {
    let n = tree.len();
    let mut members: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
    for m in tree.merges() {
        if m.level > level {
            members.push(None);
            continue;
        }
        let mut joined = members[m.left].take().unwrap_or_default();
        joined.extend(members[m.right].take().unwrap_or_default());
        members.push(Some(joined));
    }
    let mut clusters: Vec<Vec<usize>> = members
        .into_iter()
        .flatten()
        .filter(|c| !c.is_empty())
        .map(|mut c| {
            c.sort_unstable();
            c
        })
        .collect();
    clusters.sort_by_key(|c| c[0]);
    clusters
}

/// `sum (delta - d)^2 / sum d^2` over unique pairs, with `delta` the tree
/// distance.
pub fn tree_fit_stress(d: &Dissimilarity, tree: &Dendrogram) -> Result<f64> {
    if d.len() != tree.len() {
        return Err(Error::domain("dissimilarity and tree sizes differ"));
    }
    let delta = cophenetic(tree);
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..d.len() {
        for j in i + 1..d.len() {
            let (x, t) = (d.get(i, j), delta.get(i, j));
            num += (t - x) * (t - x);
            den += x * x;
        }
    }
    if den == 0.0 {
        return Err(Error::domain(
            "stress is undefined for an all-zero dissimilarity",
        ));
    }
    Ok(num / den)
}
