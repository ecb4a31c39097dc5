//! From dendrograms to concept hierarchies.
//!
//! In canonical form, at every internal node the child subtree containing
//! the earliest agglomeration is drawn on the left; a lone terminal always
//! goes to the right of a cluster. Two terminals joined directly keep their
//! input order, since either drawing is canonical.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cvnc::CodedDistanceMatrix;
use crate::error::{Error, Result};
use crate::hclust::{Dendrogram, Merge};
use crate::umetry::TripletClassifier;

// Smallest merge rank (1-based) inside each node's subtree; terminals have
// none and sort last.
fn earliest_rank(tree: &Dendrogram) -> Vec<usize> {
    let n = tree.len();
    let mut key = vec![usize::MAX; n];
    for (r, m) in tree.merges().iter().enumerate() {
        key.push((r + 1).min(key[m.left]).min(key[m.right]));
    }
    key
}

pub fn is_canonical(tree: &Dendrogram) -> bool {
    let key = earliest_rank(tree);
    tree.merges().iter().all(|m| key[m.left] <= key[m.right])
}

/// Reorders children into canonical form. Merge ranks and levels are
/// unchanged, so the cophenetic distances are too.
pub fn canonicalize(tree: &Dendrogram) -> Dendrogram {
    let key = earliest_rank(tree);
    let merges: Vec<Merge> = tree
        .merges()
        .iter()
        .map(|m| {
            if key[m.left] > key[m.right] {
                Merge {
                    left: m.right,
                    right: m.left,
                    ..*m
                }
            } else {
                *m
            }
        })
        .collect();
    Dendrogram::new(tree.labels().to_vec(), merges)
        .expect("swapping children keeps a valid tree")
        .with_canonical(true)
}

fn require_canonical(tree: &Dendrogram) -> Result<()> {
    if tree.is_canonical() || is_canonical(tree) {
        Ok(())
    } else {
        Err(Error::domain("dendrogram is not in canonical form"))
    }
}

/// Packed representation: for the terminal at left-to-right position `i`,
/// the rank of the merge at which it first joins a terminal on its right;
/// the rightmost terminal gets `n`. Ranks are 1-based.
pub fn packed_permutation(tree: &Dendrogram) -> Result<Vec<usize>> {
    require_canonical(tree)?;
    let n = tree.len();
    // In-order walk: between the two subtrees of each node sits that node.
    let mut out = Vec::with_capacity(n);
    let mut stack: Vec<(usize, bool)> = vec![(tree.root(), false)];
    while let Some((node, expanded)) = stack.pop() {
        match tree.merge_of(node) {
            None => {}
            Some(m) if !expanded => {
                stack.push((m.right, false));
                stack.push((node, true));
                stack.push((m.left, false));
            }
            Some(_) => out.push(node - n + 1),
        }
    }
    out.push(n);
    Ok(out)
}

/// Internal nodes of a canonical dendrogram labelled by promoting terminal
/// labels, plus the label left over for the virtual root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromotedTree {
    /// Label of internal node of rank `r` at index `r - 1`.
    pub node_labels: Vec<String>,
    /// Rank of each internal node's parent; `None` means the arc goes to
    /// the virtual root.
    pub parent: Vec<Option<usize>>,
    pub root_label: String,
    /// For each left-to-right terminal position, the rank of the node its
    /// label went to (`n` for the virtual root).
    pub assignment: Vec<usize>,
}

/// Walks each terminal label, left to right, up from its parent to the
/// first internal node that has no label yet. The rightmost label finds
/// none and goes to the virtual root.
pub fn promote_labels(tree: &Dendrogram) -> Result<PromotedTree> {
    require_canonical(tree)?;
    let n = tree.len();
    let parents = tree.parents();
    let mut node_labels: Vec<Option<String>> = vec![None; n - 1];
    let mut assignment = Vec::with_capacity(n);
    let mut root_label = None;
    for leaf in tree.leaf_order() {
        let mut at = parents[leaf];
        while let Some(node) = at {
            if node_labels[node - n].is_none() {
                break;
            }
            at = parents[node];
        }
        let label = tree.labels()[leaf].clone();
        match at {
            Some(node) => {
                node_labels[node - n] = Some(label);
                assignment.push(node - n + 1);
            }
            None => {
                root_label = Some(label);
                assignment.push(n);
            }
        }
    }
    let parent = (0..n - 1)
        .map(|r| parents[n + r].map(|p| p - n + 1))
        .collect();
    Ok(PromotedTree {
        node_labels: node_labels
            .into_iter()
            .map(|l| l.expect("every internal node receives a label"))
            .collect(),
        parent,
        root_label: root_label.expect("the last label reaches the virtual root"),
        assignment,
    })
}

/// Which side of an agglomeration is read as the broader concept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dominance {
    /// The later-formed (right) side dominates.
    #[default]
    LaterDominates,
    /// The earlier-formed (left) side dominates.
    EarlierDominates,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HierarchyOptions {
    pub dominance: Dominance,
    /// Merges whose levels differ by at most this much are ex aequo.
    pub level_tolerance: f64,
}

impl Default for HierarchyOptions {
    fn default() -> Self {
        HierarchyOptions {
            dominance: Dominance::LaterDominates,
            level_tolerance: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConceptNode {
    pub id: usize,
    pub label: String,
    pub members: Vec<String>,
    pub level: f64,
    /// Ex-aequo nodes of the same peer group.
    pub peers: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Arc {
    /// Dominated node.
    pub from: usize,
    /// Dominating node.
    pub to: usize,
}

/// Concept nodes joined by dominance arcs. Each term belongs to exactly
/// one node; every node has at most one outgoing arc.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HierarchyJson")]
pub struct ConceptHierarchy {
    pub nodes: Vec<ConceptNode>,
    pub arcs: Vec<Arc>,
}

#[derive(Deserialize)]
struct HierarchyJson {
    nodes: Vec<ConceptNode>,
    arcs: Vec<Arc>,
}

impl TryFrom<HierarchyJson> for ConceptHierarchy {
    type Error = Error;

    fn try_from(j: HierarchyJson) -> Result<Self> {
        let n = j.nodes.len();
        if let Some((i, _)) = j.nodes.iter().enumerate().find(|(i, x)| x.id != *i) {
            return Err(Error::domain(format!("node at position {i} has a different id")));
        }
        if j.nodes.iter().any(|x| x.peers.iter().any(|&p| p >= n)) {
            return Err(Error::domain("peer refers to a missing node"));
        }
        let mut seen = vec![false; n];
        for a in &j.arcs {
            if a.from >= n || a.to >= n {
                return Err(Error::domain("arc refers to a missing node"));
            }
            if std::mem::replace(&mut seen[a.from], true) {
                return Err(Error::domain(format!("node {} has two outgoing arcs", a.from)));
            }
        }
        let h = ConceptHierarchy { nodes: j.nodes, arcs: j.arcs };
        h.try_depths()?;
        Ok(h)
    }
}

impl ConceptHierarchy {
    pub fn node_of(&self, term: &str) -> Option<&ConceptNode> {
        self.nodes
            .iter()
            .find(|n| n.members.iter().any(|m| m == term))
    }

    /// Arcs from a node to the top of its chain. A node without an arc
    /// takes the depth of a peer that has one.
    pub fn depths(&self) -> Vec<usize> {
        self.try_depths().expect("hierarchy is acyclic")
    }

    fn try_depths(&self) -> Result<Vec<usize>> {
        let out: HashMap<usize, usize> = self.arcs.iter().map(|a| (a.from, a.to)).collect();
        // Where a node's depth comes from: its own arc, else a peer's.
        let up = |id: usize| -> Option<usize> {
            out.get(&id)
                .or_else(|| self.nodes[id].peers.iter().find_map(|p| out.get(p)))
                .copied()
        };
        let n = self.nodes.len();
        let mut memo: Vec<Option<usize>> = vec![None; n];
        for start in 0..n {
            let mut path = Vec::new();
            let mut cur = start;
            let base = loop {
                if let Some(d) = memo[cur] {
                    break d;
                }
                if path.len() > n {
                    return Err(Error::domain("dominance arcs form a cycle"));
                }
                path.push(cur);
                match up(cur) {
                    Some(next) => cur = next,
                    None => break 0,
                }
            };
            // `base` is the depth of the last node reached.
            let mut d = base;
            let last_known = memo[cur].is_some();
            for (k, &node) in path.iter().rev().enumerate() {
                if k > 0 || last_known {
                    d += 1;
                }
                memo[node] = Some(d);
            }
        }
        Ok(memo.into_iter().map(|d| d.unwrap_or(0)).collect())
    }

    pub fn term_depths(&self) -> HashMap<String, usize> {
        let depths = self.depths();
        self.nodes
            .iter()
            .flat_map(|n| n.members.iter().map(|m| (m.clone(), depths[n.id])))
            .collect()
    }

    /// Graphviz rendering: one box per node, arcs pointing at the dominating
    /// node, dashed edges between peers.
    pub fn to_dot(&self) -> String {
        let esc = |s: &str| s.replace('\\', "\\\\").replace('"', "\\\"");
        let mut out = String::from("digraph concepts {\n  rankdir=BT;\n  node [shape=box];\n");
        for n in &self.nodes {
            let members = n
                .members
                .iter()
                .map(|m| esc(m))
                .collect::<Vec<_>>()
                .join(", ");
            writeln!(
                out,
                "  n{} [label=\"{}\\n{{{}}}\\nlevel {:.4}\"];",
                n.id,
                esc(&n.label),
                members,
                n.level
            )
            .unwrap();
        }
        for a in &self.arcs {
            writeln!(out, "  n{} -> n{};", a.from, a.to).unwrap();
        }
        for n in &self.nodes {
            for &p in n.peers.iter().filter(|&&p| p > n.id) {
                writeln!(out, "  n{} -> n{} [dir=none, style=dashed];", n.id, p).unwrap();
            }
        }
        out.push_str("}\n");
        out
    }
}

struct Builder<'a> {
    tree: &'a Dendrogram,
    opts: HierarchyOptions,
    nodes: Vec<ConceptNode>,
    arcs: Vec<Arc>,
}

impl Builder<'_> {
    fn same_level(&self, a: f64, b: f64) -> bool {
        (a - b).abs() <= self.opts.level_tolerance
    }

    // Children of an internal node after splicing in descendants formed at
    // the same level, left to right.
    fn multiway_children(&self, node: usize, out: &mut Vec<usize>) {
        let m = self.tree.merge_of(node).expect("internal node");
        for child in [m.left, m.right] {
            match self.tree.merge_of(child) {
                Some(cm) if self.same_level(cm.level, m.level) => {
                    self.multiway_children(child, out)
                }
                _ => out.push(child),
            }
        }
    }

    fn add_node(&mut self, label: String, members: Vec<String>, level: f64) -> usize {
        let id = self.nodes.len();
        self.nodes.push(ConceptNode {
            id,
            label,
            members,
            level,
            peers: Vec::new(),
        });
        id
    }

    fn link(&mut self, dominated: usize, dominating: usize) {
        self.arcs.push(Arc {
            from: dominated,
            to: dominating,
        });
    }

    // Builds the concepts under `node` and returns the one that stands for
    // the whole subtree.
    fn build(&mut self, node: usize) -> usize {
        let labels = self.tree.labels();
        let Some(m) = self.tree.merge_of(node) else {
            return self.add_node(labels[node].clone(), vec![labels[node].clone()], 0.0);
        };
        let level = m.level;
        let mut children = Vec::new();
        self.multiway_children(node, &mut children);

        // Peer groups ordered by the level at which each child was formed;
        // terminals enter at this node's level and come last.
        let mut clusters: Vec<(f64, usize)> = children
            .iter()
            .filter_map(|&c| self.tree.merge_of(c).map(|cm| (cm.level, c)))
            .collect();
        clusters.sort_by(|a, b| a.0.total_cmp(&b.0));
        let terminals: Vec<usize> = children
            .iter()
            .copied()
            .filter(|&c| self.tree.is_terminal(c))
            .collect();

        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut group_level = f64::NAN;
        for (lvl, c) in clusters {
            if groups.is_empty() || !self.same_level(lvl, group_level) {
                groups.push(Vec::new());
                group_level = lvl;
            }
            let rep = self.build(c);
            groups.last_mut().unwrap().push(rep);
        }
        if !terminals.is_empty() {
            let members: Vec<String> = terminals.iter().map(|&t| labels[t].clone()).collect();
            let label = members.last().unwrap().clone();
            let id = self.add_node(label, members, level);
            groups.push(vec![id]);
        }

        for g in &groups {
            for &a in g {
                let peers: Vec<usize> = g.iter().copied().filter(|&b| b != a).collect();
                self.nodes[a].peers.extend(peers);
            }
        }
        let reps: Vec<usize> = groups.iter().map(|g| *g.last().unwrap()).collect();
        match self.opts.dominance {
            Dominance::LaterDominates => {
                for w in reps.windows(2) {
                    self.link(w[0], w[1]);
                }
                *reps.last().unwrap()
            }
            Dominance::EarlierDominates => {
                for w in reps.windows(2) {
                    self.link(w[1], w[0]);
                }
                reps[0]
            }
        }
    }
}

/// Reads a concept hierarchy off a canonical dendrogram.
///
/// Merges at the same level are collapsed into one multiway node. The
/// children of a multiway node are grouped by the level at which they were
/// formed (terminals: the node's own level); groups are ex-aequo peers, and
/// each group is dominated by the next one formed later. Terminals joining
/// at the same node form one concept node labelled by the rightmost term.
pub fn derive_concept_hierarchy(
    tree: &Dendrogram,
    opts: HierarchyOptions,
) -> Result<ConceptHierarchy> {
    require_canonical(tree)?;
    let mut b = Builder {
        tree,
        opts,
        nodes: Vec::new(),
        arcs: Vec::new(),
    };
    b.build(tree.root());
    Ok(ConceptHierarchy {
        nodes: b.nodes,
        arcs: b.arcs,
    })
}

/// `((x, y) z)`: `x` and `y` close together, `z` far from both.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsumptionTriple {
    pub pair: [String; 2],
    pub apex: String,
    /// Start indices of the windows in the reduced document.
    pub positions: Vec<usize>,
}

/// Collects `((x, y) z)` from every successive window of `sequence` whose
/// coded triangle is isosceles with a small base. The pair is ordered
/// lexicographically; repeats of the same triple are merged, keeping all
/// window positions in first-seen order.
pub fn extract_subsumption_triples(
    sequence: &[&str],
    coded: &CodedDistanceMatrix,
) -> Result<Vec<SubsumptionTriple>> {
    let index = crate::umetry::resolve_terms(sequence.iter().copied(), coded.ids())?;
    let mut out: Vec<SubsumptionTriple> = Vec::new();
    let mut seen: HashMap<(usize, usize, usize), usize> = HashMap::new();
    for (t, w) in index.windows(3).enumerate() {
        let (a, b, c) = (w[0], w[1], w[2]);
        if a == b || a == c || b == c {
            continue;
        }
        if coded.classify(a, b, c) != crate::umetry::TripletClass::IsoscelesSmallBase {
            continue;
        }
        // The base is the strictly shortest side.
        let sides = [
            (coded.get(a, b), a, b, c),
            (coded.get(a, c), a, c, b),
            (coded.get(b, c), b, c, a),
        ];
        let &(_, x, y, z) = sides.iter().min_by_key(|s| s.0).unwrap();
        let ids = coded.ids();
        let (x, y) = if ids[x] <= ids[y] { (x, y) } else { (y, x) };
        match seen.get(&(x, y, z)) {
            Some(&i) => out[i].positions.push(t),
            None => {
                seen.insert((x, y, z), out.len());
                out.push(SubsumptionTriple {
                    pair: [ids[x].clone(), ids[y].clone()],
                    apex: ids[z].clone(),
                    positions: vec![t],
                });
            }
        }
    }
    Ok(out)
}
