//! Hierarchical density-based clustering.
//!
//! Core distances (k nearest neighbours, the point itself included) define
//! mutual reachability distances; Prim's algorithm builds their minimum
//! spanning tree without materializing the n×n matrix; sorting the tree edges
//! gives the single-linkage dendrogram, which is condensed with
//! `min_cluster_size` and cut by excess of mass.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::{ClusterError, LabelAssignment, NOISE};

/// Parameters; the defaults are the conventional library defaults.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HdbscanParams {
    pub min_cluster_size: usize,
    pub min_samples: usize,
}

impl Default for HdbscanParams {
    fn default() -> Self {
        Self { min_cluster_size: 5, min_samples: 5 }
    }
}

/// Row-major point matrix view.
#[derive(Clone, Copy, Debug)]
pub struct Points<'a> {
    data: &'a [f64],
    dim: usize,
}

impl<'a> Points<'a> {
    pub fn new(data: &'a [f64], dim: usize) -> Result<Self, ClusterError> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(ClusterError::Shape { len: data.len(), dim });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(ClusterError::NonFinite);
        }
        Ok(Self { data, dim })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        euclidean(self.point(i), self.point(j))
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Distance from each point to its `k`-th nearest neighbour, counting the
/// point itself as the first.
pub fn core_distances(points: &Points<'_>, k: usize) -> Vec<f64> {
    let n = points.len();
    let mut row = vec![0.0; n];
    (0..n)
        .map(|i| {
            for (j, d) in row.iter_mut().enumerate() {
                *d = points.distance(i, j);
            }
            let kth = k.clamp(1, n) - 1;
            *row.select_nth_unstable_by(kth, f64::total_cmp).1
        })
        .collect()
}

pub fn mutual_reachability(points: &Points<'_>, core: &[f64], i: usize, j: usize) -> f64 {
    points.distance(i, j).max(core[i]).max(core[j])
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MstEdge {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

/// Prim's algorithm over the implicit mutual reachability graph, O(n²)
/// time and O(n) memory. Starts at point 0; edges come out in the order
/// their endpoints join the tree.
pub fn mutual_reachability_mst(points: &Points<'_>, core: &[f64]) -> Vec<MstEdge> {
    let n = points.len();
    if n < 2 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut source = vec![0usize; n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut current = 0;
    for _ in 0..n - 1 {
        in_tree[current] = true;
        let mut next_weight = f64::MAX;
        let mut next_from = 0;
        let mut next = 0;
        for j in 0..n {
            if in_tree[j] {
                continue;
            }
            let d = mutual_reachability(points, core, current, j);
            if d < best[j] {
                best[j] = d;
                source[j] = current;
                if d < next_weight {
                    next_weight = d;
                    next_from = current;
                    next = j;
                }
            } else if best[j] < next_weight {
                next_weight = best[j];
                next_from = source[j];
                next = j;
            }
        }
        edges.push(MstEdge { from: next_from, to: next, weight: next_weight });
        current = next;
    }
    edges
}

/// One merge of the single-linkage dendrogram. Node ids below `n` are
/// points; merge `i` creates node `n + i`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    pub size: usize,
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
    next: usize,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..2 * n - 1).collect(), size: (0..2 * n - 1).map(|i| usize::from(i < n)).collect(), next: n }
    }

    fn union(&mut self, a: usize, b: usize) {
        self.parent[a] = self.next;
        self.parent[b] = self.next;
        self.size[self.next] = self.size[a] + self.size[b];
        self.next += 1;
    }

    fn find(&mut self, mut x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[x] != root {
            let up = self.parent[x];
            self.parent[x] = root;
            x = up;
        }
        root
    }
}

/// Single-linkage dendrogram from MST edges (sorted stably by weight here).
pub fn single_linkage(mut mst: Vec<MstEdge>) -> Vec<Merge> {
    mst.sort_by(|a, b| a.weight.total_cmp(&b.weight));
    let n = mst.len() + 1;
    let mut uf = UnionFind::new(n);
    mst.iter()
        .map(|e| {
            let (a, b) = (uf.find(e.from), uf.find(e.to));
            let size = uf.size[a] + uf.size[b];
            uf.union(a, b);
            Merge { left: a, right: b, distance: e.weight, size }
        })
        .collect()
}

/// Entry of the condensed tree: `child` (a point when `< n`, otherwise a
/// cluster id) leaves `parent` at density `lambda`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CondensedEntry {
    pub parent: usize,
    pub child: usize,
    pub lambda: f64,
    pub size: usize,
}

/// Cluster hierarchy after removing splits smaller than `min_cluster_size`.
/// The root cluster has id `n_points`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CondensedTree {
    pub n_points: usize,
    pub entries: Vec<CondensedEntry>,
}

fn bfs_dendrogram(merges: &[Merge], root: usize) -> Vec<usize> {
    let n = merges.len() + 1;
    let mut out = Vec::new();
    let mut queue = vec![root];
    while !queue.is_empty() {
        out.extend_from_slice(&queue);
        queue = queue
            .iter()
            .filter(|&&x| x >= n)
            .flat_map(|&x| {
                let m = merges[x - n];
                [m.left, m.right]
            })
            .collect();
    }
    out
}

impl CondensedTree {
    pub fn build(merges: &[Merge], min_cluster_size: usize) -> Self {
        let n = merges.len() + 1;
        let root = 2 * merges.len();
        let mut relabel = vec![0usize; root + 1];
        relabel[root] = n;
        let mut next_label = n + 1;
        let mut entries = Vec::new();
        let mut ignore = vec![false; root + 1];
        let size_of = |node: usize| if node >= n { merges[node - n].size } else { 1 };

        for node in bfs_dendrogram(merges, root) {
            if ignore[node] || node < n {
                continue;
            }
            let m = merges[node - n];
            let lambda = if m.distance > 0.0 { 1.0 / m.distance } else { f64::INFINITY };
            let (lc, rc) = (size_of(m.left), size_of(m.right));
            let parent = relabel[node];
            let fall_out = |sub: usize, entries: &mut Vec<CondensedEntry>, ignore: &mut Vec<bool>| {
                for s in bfs_dendrogram(merges, sub) {
                    if s < n {
                        entries.push(CondensedEntry { parent, child: s, lambda, size: 1 });
                    }
                    ignore[s] = true;
                }
            };
            match (lc >= min_cluster_size, rc >= min_cluster_size) {
                (true, true) => {
                    relabel[m.left] = next_label;
                    entries.push(CondensedEntry { parent, child: next_label, lambda, size: lc });
                    next_label += 1;
                    relabel[m.right] = next_label;
                    entries.push(CondensedEntry { parent, child: next_label, lambda, size: rc });
                    next_label += 1;
                }
                (false, false) => {
                    fall_out(m.left, &mut entries, &mut ignore);
                    fall_out(m.right, &mut entries, &mut ignore);
                }
                (false, true) => {
                    relabel[m.right] = parent;
                    fall_out(m.left, &mut entries, &mut ignore);
                }
                (true, false) => {
                    relabel[m.left] = parent;
                    fall_out(m.right, &mut entries, &mut ignore);
                }
            }
        }
        Self { n_points: n, entries }
    }

    /// Birth density of every cluster (the root is born at 0).
    pub fn births(&self) -> BTreeMap<usize, f64> {
        let mut births = BTreeMap::new();
        births.insert(self.n_points, 0.0);
        for e in self.entries.iter().filter(|e| e.child >= self.n_points) {
            births.insert(e.child, e.lambda);
        }
        births
    }

    /// Excess of mass of each cluster: Σ (λ_leave − λ_birth) · size over
    /// everything that leaves it.
    pub fn stability(&self) -> BTreeMap<usize, f64> {
        let births = self.births();
        let mut stability: BTreeMap<usize, f64> = births.keys().map(|&c| (c, 0.0)).collect();
        for e in &self.entries {
            *stability.entry(e.parent).or_insert(0.0) += (e.lambda - births[&e.parent]) * e.size as f64;
        }
        stability
    }

    fn cluster_children(&self, cluster: usize) -> impl Iterator<Item = &CondensedEntry> {
        self.entries.iter().filter(move |e| e.parent == cluster && e.child >= self.n_points)
    }

    /// Excess-of-mass selection; the root is never selected.
    pub fn select_eom(&self) -> BTreeSet<usize> {
        let mut stability = self.stability();
        let root = self.n_points;
        let mut is_cluster: BTreeMap<usize, bool> =
            stability.keys().filter(|&&c| c != root).map(|&c| (c, true)).collect();
        let nodes: Vec<usize> = is_cluster.keys().rev().copied().collect();
        for node in nodes {
            let subtree: f64 = self.cluster_children(node).map(|e| stability[&e.child]).sum();
            if subtree > stability[&node] {
                is_cluster.insert(node, false);
                stability.insert(node, subtree);
            } else {
                let mut queue: Vec<usize> = self.cluster_children(node).map(|e| e.child).collect();
                while let Some(c) = queue.pop() {
                    is_cluster.insert(c, false);
                    queue.extend(self.cluster_children(c).map(|e| e.child));
                }
            }
        }
        is_cluster.into_iter().filter_map(|(c, keep)| keep.then_some(c)).collect()
    }

    /// Labels points by the selected cluster that contains them; labels are
    /// numbered in increasing cluster-id order.
    pub fn labels(&self, selected: &BTreeSet<usize>) -> Vec<i64> {
        let n = self.n_points;
        let max_id = self.entries.iter().map(|e| e.parent.max(e.child)).max().unwrap_or(n);
        let mut parent_of: Vec<usize> = (0..=max_id).collect();
        for e in &self.entries {
            if !selected.contains(&e.child) {
                parent_of[e.child] = e.parent;
            }
        }
        let label_of: BTreeMap<usize, i64> = selected.iter().enumerate().map(|(i, &c)| (c, i as i64)).collect();
        (0..n)
            .map(|p| {
                let mut c = p;
                while parent_of[c] != c {
                    c = parent_of[c];
                }
                if c == n {
                    NOISE
                } else {
                    label_of.get(&c).copied().unwrap_or(NOISE)
                }
            })
            .collect()
    }
}

/// Intermediate products of one clustering run.
#[derive(Clone, Debug)]
pub struct HdbscanResult {
    pub labels: LabelAssignment,
    pub core_distances: Vec<f64>,
    pub mst: Vec<MstEdge>,
    pub tree: CondensedTree,
    pub selected: BTreeSet<usize>,
}

pub fn hdbscan(points: &Points<'_>, params: HdbscanParams) -> Result<LabelAssignment, ClusterError> {
    Ok(hdbscan_detailed(points, params)?.labels)
}

pub fn hdbscan_detailed(points: &Points<'_>, params: HdbscanParams) -> Result<HdbscanResult, ClusterError> {
    let n = points.len();
    if params.min_cluster_size < 2 || params.min_samples < 1 {
        return Err(ClusterError::Params(format!(
            "min_cluster_size must be ≥ 2 and min_samples ≥ 1, got {} and {}",
            params.min_cluster_size, params.min_samples
        )));
    }
    if n < params.min_cluster_size || n < 2 {
        return Err(ClusterError::TooFewPoints { n, min_cluster_size: params.min_cluster_size });
    }
    if params.min_samples > n {
        return Err(ClusterError::Params(format!("min_samples {} exceeds {} points", params.min_samples, n)));
    }
    let core = core_distances(points, params.min_samples);
    let mst = mutual_reachability_mst(points, &core);
    let merges = single_linkage(mst.clone());
    let tree = CondensedTree::build(&merges, params.min_cluster_size);
    let selected = tree.select_eom();
    let labels = LabelAssignment::new(tree.labels(&selected));
    Ok(HdbscanResult { labels, core_distances: core, mst, tree, selected })
}

/// Distinct non-noise labels.
pub fn cluster_ids(labels: &[i64]) -> HashSet<i64> {
    labels.iter().copied().filter(|&l| l != NOISE).collect()
}
