//! Ward agglomerative clustering of equal-length arcs.
//!
//! Linkage heights follow the usual convention of reporting Ward distances
//! on the scale of the input Euclidean metric: merging clusters `A` and `B`
//! happens at `sqrt(2 |A| |B| / (|A| + |B|)) * ||mean(A) - mean(B)||`.
//! Internally the Lance–Williams update runs on squared distances, where
//! the Ward recurrence is exact.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("need at least 2 items to cluster, got {0}")]
    TooFew(usize),
    #[error("arc {index} has length {found}, expected {expected}")]
    LengthMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("condensed matrix of {len} entries does not match any item count")]
    BadCondensed { len: usize },
    #[error("cluster count {k} out of range 1..={n}")]
    KOutOfRange { k: usize, n: usize },
    #[error("{labels} labels supplied for {n} items")]
    LabelCount { labels: usize, n: usize },
    #[error("invalid linkage: {0}")]
    InvalidLinkage(String),
    #[error("invalid dendrogram: {0}")]
    InvalidDendrogram(String),
}

/// Upper triangle of a symmetric distance matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    condensed: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_condensed(condensed: Vec<f64>) -> Result<Self, ClusterError> {
        let len = condensed.len();
        // n (n - 1) / 2 = len
        let n = ((1.0 + (1.0 + 8.0 * len as f64).sqrt()) / 2.0).round() as usize;
        if n < 2 || n * (n - 1) / 2 != len {
            return Err(ClusterError::BadCondensed { len });
        }
        Ok(DistanceMatrix { n, condensed })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn condensed(&self) -> &[f64] {
        &self.condensed
    }

    fn offset(n: usize, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < n);
        n * i - i * (i + 1) / 2 + (j - i - 1)
    }

    /// Distance between items `i` and `j` (0 on the diagonal).
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            Ordering::Equal => 0.0,
            Ordering::Less => self.condensed[Self::offset(self.n, i, j)],
            Ordering::Greater => self.condensed[Self::offset(self.n, j, i)],
        }
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Pairwise Euclidean distances between arcs of one common length.
pub fn distance_matrix<A: AsRef<[f64]> + Sync>(arcs: &[A]) -> Result<DistanceMatrix, ClusterError> {
    let n = arcs.len();
    if n < 2 {
        return Err(ClusterError::TooFew(n));
    }
    let len = arcs[0].as_ref().len();
    if let Some((index, a)) = arcs
        .iter()
        .enumerate()
        .find(|(_, a)| a.as_ref().len() != len)
    {
        return Err(ClusterError::LengthMismatch {
            index,
            expected: len,
            found: a.as_ref().len(),
        });
    }
    let rows: Vec<Vec<f64>> = (0..n - 1)
        .into_par_iter()
        .map(|i| {
            let a = arcs[i].as_ref();
            (i + 1..n).map(|j| euclidean(a, arcs[j].as_ref())).collect()
        })
        .collect();
    Ok(DistanceMatrix {
        n,
        condensed: rows.concat(),
    })
}

/// One agglomeration step. `left < right`; ids below `n` are leaves and
/// step `s` creates id `n + s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linkage {
    pub n: usize,
    pub merges: Vec<Merge>,
}

impl Linkage {
    /// Checks the structural invariants: `n - 1` merges, every id merged
    /// exactly once and only after it exists, sizes add up, heights are
    /// finite and non-negative.
    pub fn validate(&self) -> Result<(), ClusterError> {
        let n = self.n;
        if n < 2 {
            return Err(ClusterError::InvalidLinkage(format!("n = {n}")));
        }
        if self.merges.len() != n - 1 {
            return Err(ClusterError::InvalidLinkage(format!(
                "{} merges for {n} items",
                self.merges.len()
            )));
        }
        let mut sizes = vec![1usize; n];
        let mut used = vec![false; 2 * n - 1];
        for (s, m) in self.merges.iter().enumerate() {
            let created = n + s;
            for id in [m.left, m.right] {
                if id >= created {
                    return Err(ClusterError::InvalidLinkage(format!(
                        "step {s} references id {id} before it exists"
                    )));
                }
                if std::mem::replace(&mut used[id], true) {
                    return Err(ClusterError::InvalidLinkage(format!(
                        "id {id} merged twice"
                    )));
                }
            }
            if m.left >= m.right {
                return Err(ClusterError::InvalidLinkage(format!(
                    "step {s}: left id {} not below right id {}",
                    m.left, m.right
                )));
            }
            if !(m.height.is_finite() && m.height >= 0.0) {
                return Err(ClusterError::InvalidLinkage(format!(
                    "step {s}: bad height {}",
                    m.height
                )));
            }
            let size = sizes[m.left] + sizes[m.right];
            if size != m.size {
                return Err(ClusterError::InvalidLinkage(format!(
                    "step {s}: size {} but children hold {size}",
                    m.size
                )));
            }
            sizes.push(size);
        }
        Ok(())
    }

    pub fn heights(&self) -> Vec<f64> {
        self.merges.iter().map(|m| m.height).collect()
    }
}

/// Key ordering candidate merges: smaller distance first, then the smaller
/// `(min id, max id)` pair.
#[derive(Clone, Copy, PartialEq)]
struct Candidate {
    dist: f64,
    pair: (usize, usize),
}

impl Candidate {
    fn new(dist: f64, a: usize, b: usize) -> Self {
        Candidate {
            dist,
            pair: (a.min(b), a.max(b)),
        }
    }

    fn beats(&self, other: &Candidate) -> bool {
        match self.dist.total_cmp(&other.dist) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => self.pair < other.pair,
        }
    }
}

/// Ward linkage with the Lance–Williams update.
///
/// Each active cluster caches its nearest neighbour. Ward distances are
/// reducible (a merged cluster is never closer to a third cluster than the
/// nearer of its two parts), so after a merge only clusters whose cached
/// neighbour disappeared need a full rescan; everyone else just compares
/// against the new cluster.
pub fn ward_linkage(d: &DistanceMatrix) -> Result<Linkage, ClusterError> {
    let n = d.n;
    if n < 2 {
        return Err(ClusterError::TooFew(n));
    }
    // Dense squared distances between slots; slot `a` is reused by the
    // cluster formed when `a` absorbs another slot.
    let mut dist = vec![0.0f64; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = d.get(i, j).powi(2);
            dist[i * n + j] = v;
            dist[j * n + i] = v;
        }
    }
    let mut id: Vec<usize> = (0..n).collect();
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut nn: Vec<Option<(usize, Candidate)>> = vec![None; n];

    let scan = |slot: usize, dist: &[f64], active: &[bool], id: &[usize]| {
        let mut best: Option<(usize, Candidate)> = None;
        for other in 0..n {
            if other == slot || !active[other] {
                continue;
            }
            let c = Candidate::new(dist[slot * n + other], id[slot], id[other]);
            if best.as_ref().is_none_or(|(_, b)| c.beats(b)) {
                best = Some((other, c));
            }
        }
        best
    };
    for (slot, cached) in nn.iter_mut().enumerate() {
        *cached = scan(slot, &dist, &active, &id);
    }

    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        let (a, (b, cand)) = nn
            .iter()
            .enumerate()
            .filter(|(s, _)| active[*s])
            .filter_map(|(s, c)| c.map(|c| (s, c)))
            .reduce(|x, y| if y.1 .1.beats(&x.1 .1) { y } else { x })
            .expect("at least two active clusters");
        let (na, nb) = (size[a] as f64, size[b] as f64);
        let dab = dist[a * n + b];

        // Lance–Williams for Ward on squared distances; `a` becomes the
        // merged cluster.
        for k in 0..n {
            if !active[k] || k == a || k == b {
                continue;
            }
            let nk = size[k] as f64;
            let total = na + nb + nk;
            let v = ((na + nk) * dist[a * n + k] + (nb + nk) * dist[b * n + k] - nk * dab) / total;
            let v = v.max(0.0);
            dist[a * n + k] = v;
            dist[k * n + a] = v;
        }
        merges.push(Merge {
            left: cand.pair.0,
            right: cand.pair.1,
            height: dab.max(0.0).sqrt(),
            size: size[a] + size[b],
        });
        active[b] = false;
        nn[b] = None;
        size[a] += size[b];
        id[a] = n + step;

        for k in 0..n {
            if !active[k] || k == a {
                continue;
            }
            let stale = matches!(nn[k], Some((s, _)) if s == a || s == b);
            if stale {
                nn[k] = scan(k, &dist, &active, &id);
            } else {
                let c = Candidate::new(dist[k * n + a], id[k], id[a]);
                if nn[k].as_ref().is_none_or(|(_, cur)| c.beats(cur)) {
                    nn[k] = Some((a, c));
                }
            }
        }
        nn[a] = scan(a, &dist, &active, &id);
    }
    Ok(Linkage { n, merges })
}

/// Flat cluster labels `1..=k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub k: usize,
}

impl ClusterAssignment {
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == cluster)
            .map(|(i, _)| i)
            .collect()
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Replays all but the last `k - 1` merges. Labels are numbered in order of
/// each cluster's smallest member.
pub fn cut(linkage: &Linkage, k: usize) -> Result<ClusterAssignment, ClusterError> {
    let n = linkage.n;
    if k == 0 || k > n {
        return Err(ClusterError::KOutOfRange { k, n });
    }
    let mut parent: Vec<usize> = (0..2 * n - 1).collect();
    for (s, m) in linkage.merges.iter().take(n - k).enumerate() {
        let node = n + s;
        let l = find(&mut parent, m.left);
        let r = find(&mut parent, m.right);
        parent[l] = node;
        parent[r] = node;
    }
    let mut label_of_root = BTreeMap::new();
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let root = find(&mut parent, i);
        let next = label_of_root.len() + 1;
        labels.push(*label_of_root.entry(root).or_insert(next));
    }
    Ok(ClusterAssignment { labels, k })
}

/// Pointwise mean arc per cluster.
pub fn cluster_means<A: AsRef<[f64]>>(
    arcs: &[A],
    assignment: &ClusterAssignment,
) -> Result<BTreeMap<usize, Vec<f64>>, ClusterError> {
    if arcs.len() != assignment.labels.len() {
        return Err(ClusterError::LabelCount {
            labels: assignment.labels.len(),
            n: arcs.len(),
        });
    }
    let mut sums: BTreeMap<usize, (Vec<f64>, usize)> = BTreeMap::new();
    for (arc, &label) in arcs.iter().zip(&assignment.labels) {
        let arc = arc.as_ref();
        let (sum, count) = sums
            .entry(label)
            .or_insert_with(|| (vec![0.0; arc.len()], 0));
        if sum.len() != arc.len() {
            return Err(ClusterError::LengthMismatch {
                index: *count,
                expected: sum.len(),
                found: arc.len(),
            });
        }
        for (s, v) in sum.iter_mut().zip(arc) {
            *s += v;
        }
        *count += 1;
    }
    Ok(sums
        .into_iter()
        .map(|(label, (sum, count))| (label, sum.into_iter().map(|s| s / count as f64).collect()))
        .collect())
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must cover the same items");
    let n = a.len();
    let comb2 = |x: u64| (x * x.saturating_sub(1) / 2) as f64;
    let mut table: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, u64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, u64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_insert(0) += 1;
        *rows.entry(x).or_insert(0) += 1;
        *cols.entry(y).or_insert(0) += 1;
    }
    let index: f64 = table.values().map(|&c| comb2(c)).sum();
    let sum_rows: f64 = rows.values().map(|&c| comb2(c)).sum();
    let sum_cols: f64 = cols.values().map(|&c| comb2(c)).sum();
    let total = comb2(n as u64);
    if total == 0.0 {
        return 1.0;
    }
    let expected = sum_rows * sum_cols / total;
    let max = 0.5 * (sum_rows + sum_cols);
    if max == expected {
        // Both partitions are trivial (all singletons or one block).
        return 1.0;
    }
    (index - expected) / (max - expected)
}

/// Nested JSON tree. Internal nodes carry `id`, `height`, `size` and two
/// `children`; leaves carry `id`, `label` and `size: 1`.
///
/// The text is written with an explicit stack so deep, chain-like trees do
/// not exhaust the call stack.
pub fn dendrogram_json<S: AsRef<str>>(
    linkage: &Linkage,
    labels: &[S],
) -> Result<String, ClusterError> {
    if linkage.n < 2 {
        return Err(ClusterError::TooFew(linkage.n));
    }
    if labels.len() != linkage.n {
        return Err(ClusterError::LabelCount {
            labels: labels.len(),
            n: linkage.n,
        });
    }
    linkage.validate()?;
    enum Step {
        Node(usize),
        Text(&'static str),
    }
    let n = linkage.n;
    let num = |v: f64| serde_json::to_string(&v).expect("finite height");
    let mut out = format!("{{\"format\":\"narrarc-dendrogram\",\"version\":1,\"n\":{n},\"root\":");
    let mut stack = vec![Step::Text("}\n"), Step::Node(2 * n - 2)];
    while let Some(step) = stack.pop() {
        match step {
            Step::Text(t) => out.push_str(t),
            Step::Node(id) if id < n => {
                let label = serde_json::to_string(labels[id].as_ref()).expect("string serializes");
                out.push_str(&format!("{{\"id\":{id},\"label\":{label},\"size\":1}}"));
            }
            Step::Node(id) => {
                let m = &linkage.merges[id - n];
                out.push_str(&format!(
                    "{{\"id\":{id},\"height\":{},\"size\":{},\"children\":[",
                    num(m.height),
                    m.size
                ));
                stack.extend([
                    Step::Text("]}"),
                    Step::Node(m.right),
                    Step::Text(","),
                    Step::Node(m.left),
                ]);
            }
        }
    }
    Ok(out)
}

/// Parses [`dendrogram_json`] output back into a linkage and leaf labels.
pub fn parse_dendrogram(value: &Value) -> Result<(Linkage, Vec<String>), ClusterError> {
    let bad = |msg: &str| ClusterError::InvalidDendrogram(msg.to_string());
    let n = value["n"].as_u64().ok_or_else(|| bad("missing `n`"))? as usize;
    if n < 2 {
        return Err(bad("fewer than two leaves"));
    }
    let mut labels: Vec<Option<String>> = vec![None; n];
    let mut merges: Vec<Option<Merge>> = vec![None; n - 1];
    let mut stack = vec![&value["root"]];
    while let Some(node) = stack.pop() {
        let id = node["id"]
            .as_u64()
            .ok_or_else(|| bad("node without `id`"))? as usize;
        if id < n {
            let label = node["label"]
                .as_str()
                .ok_or_else(|| bad("leaf without `label`"))?;
            if labels[id].replace(label.to_string()).is_some() {
                return Err(bad("leaf appears twice"));
            }
            continue;
        }
        if id >= 2 * n - 1 {
            return Err(bad("node id out of range"));
        }
        let children = node["children"]
            .as_array()
            .filter(|c| c.len() == 2)
            .ok_or_else(|| bad("internal node needs two children"))?;
        let child_id = |c: &Value| {
            c["id"]
                .as_u64()
                .map(|x| x as usize)
                .ok_or_else(|| bad("child without `id`"))
        };
        let (x, y) = (child_id(&children[0])?, child_id(&children[1])?);
        let merge = Merge {
            left: x.min(y),
            right: x.max(y),
            height: node["height"]
                .as_f64()
                .ok_or_else(|| bad("internal node without `height`"))?,
            size: node["size"]
                .as_u64()
                .ok_or_else(|| bad("internal node without `size`"))? as usize,
        };
        if merges[id - n].replace(merge).is_some() {
            return Err(bad("internal node appears twice"));
        }
        stack.push(&children[1]);
        stack.push(&children[0]);
    }
    let labels = labels
        .into_iter()
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| bad("missing leaves"))?;
    let merges = merges
        .into_iter()
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| bad("missing internal nodes"))?;
    let linkage = Linkage { n, merges };
    linkage
        .validate()
        .map_err(|e| ClusterError::InvalidDendrogram(e.to_string()))?;
    Ok((linkage, labels))
}

/// Deserializes dendrogram JSON text without serde_json's nesting limit;
/// chain-shaped trees over large corpora nest deeper than 128 levels.
pub fn parse_dendrogram_str(text: &str) -> Result<(Linkage, Vec<String>), ClusterError> {
    // Parsing into a `Value` and dropping it both recurse once per tree
    // level, so run them on a thread whose stack scales with the input.
    let stack = (text.len().saturating_mul(256)).max(8 << 20);
    std::thread::scope(|scope| {
        std::thread::Builder::new()
            .stack_size(stack)
            .spawn_scoped(scope, || {
                let mut de = serde_json::Deserializer::from_str(text);
                de.disable_recursion_limit();
                let value = Value::deserialize(&mut de)
                    .map_err(|e| ClusterError::InvalidDendrogram(e.to_string()))?;
                parse_dendrogram(&value)
            })
            .map_err(|e| {
                ClusterError::InvalidDendrogram(format!("cannot start parser thread: {e}"))
            })?
            .join()
            .unwrap_or_else(|p| std::panic::resume_unwind(p))
    })
}
