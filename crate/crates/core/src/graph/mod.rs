//! Graph data model, client partitioning, synthetic generation and file I/O.

mod generate;
mod io;
mod partition;

pub use generate::{generate_sbm, SbmParams};
pub use io::{load_graph, write_graph};
pub use partition::{partition_nonoverlapping, partition_overlapping, PartitionMode, PartitionSpec};

use std::collections::VecDeque;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::numerics::{seeded_rng, Matrix};

/// Which labeled-node mask to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Parameter(format!("unknown split '{other}'"))),
        }
    }
}

/// Undirected node-attributed graph with labels and split masks.
///
/// Neighbor lists are sorted, deduplicated and free of self-loops. For
/// subgraphs, `global_ids` maps each local node back to the graph it was cut
/// from.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    neighbors: Vec<Vec<usize>>,
    features: Matrix,
    labels: Vec<Option<usize>>,
    num_classes: usize,
    train: Vec<bool>,
    val: Vec<bool>,
    test: Vec<bool>,
    global_ids: Vec<usize>,
}

impl Graph {
    /// Builds a graph from an undirected edge list. Duplicate edges and
    /// self-loops are dropped. Masks start empty.
    pub fn new(
        features: Matrix,
        edges: &[(usize, usize)],
        labels: Vec<Option<usize>>,
        num_classes: usize,
    ) -> Result<Self> {
        let n = features.rows();
        if labels.len() != n {
            return Err(Error::Dimension(format!(
                "{} labels for {n} feature rows",
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().flatten().find(|&&c| c >= num_classes) {
            return Err(Error::Value(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        if !features.is_finite() {
            return Err(Error::Value("features contain non-finite values".into()));
        }
        let mut neighbors = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::Value(format!("edge ({u}, {v}) outside 0..{n}")));
            }
            if u != v {
                neighbors[u].push(v);
                neighbors[v].push(u);
            }
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self {
            neighbors,
            features,
            labels,
            num_classes,
            train: vec![false; n],
            val: vec![false; n],
            test: vec![false; n],
            global_ids: (0..n).collect(),
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.neighbors.len()
    }

    pub fn num_edges(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn label(&self, v: usize) -> Option<usize> {
        self.labels[v]
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn global_ids(&self) -> &[usize] {
        &self.global_ids
    }

    pub fn mask(&self, split: Split) -> &[bool] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    /// Nodes in `split` that carry a label.
    pub fn split_nodes(&self, split: Split) -> Vec<usize> {
        let mask = self.mask(split);
        (0..self.num_nodes())
            .filter(|&v| mask[v] && self.labels[v].is_some())
            .collect()
    }

    /// Undirected edges with `u < v`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.num_edges());
        for (u, list) in self.neighbors.iter().enumerate() {
            out.extend(list.iter().filter(|&&v| v > u).map(|&v| (u, v)));
        }
        out
    }

    /// Fraction of edges whose endpoints share a label (edges touching an
    /// unlabeled node are ignored). Zero for edgeless graphs.
    pub fn edge_homophily(&self) -> f64 {
        let (mut same, mut total) = (0usize, 0usize);
        for (u, v) in self.edges() {
            if let (Some(a), Some(b)) = (self.labels[u], self.labels[v]) {
                total += 1;
                if a == b {
                    same += 1;
                }
            }
        }
        if total == 0 {
            0.0
        } else {
            same as f64 / total as f64
        }
    }

    /// Replaces the split masks. Masks must be pairwise disjoint and every
    /// training node must be labeled.
    pub fn with_masks(mut self, train: Vec<bool>, val: Vec<bool>, test: Vec<bool>) -> Result<Self> {
        let n = self.num_nodes();
        if train.len() != n || val.len() != n || test.len() != n {
            return Err(Error::Dimension(format!("masks must have length {n}")));
        }
        for v in 0..n {
            let k = train[v] as u8 + val[v] as u8 + test[v] as u8;
            if k > 1 {
                return Err(Error::Value(format!("node {v} is in more than one split")));
            }
            if train[v] && self.labels[v].is_none() {
                return Err(Error::Value(format!("training node {v} has no label")));
            }
        }
        self.train = train;
        self.val = val;
        self.test = test;
        Ok(self)
    }

    /// Subgraph induced by `nodes`, in the order given. Labels, masks and
    /// global ids are carried over.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Graph {
        let mut local = vec![usize::MAX; self.num_nodes()];
        for (i, &v) in nodes.iter().enumerate() {
            local[v] = i;
        }
        let neighbors = nodes
            .iter()
            .map(|&v| {
                let mut l: Vec<usize> = self.neighbors[v]
                    .iter()
                    .filter_map(|&u| (local[u] != usize::MAX).then_some(local[u]))
                    .collect();
                l.sort_unstable();
                l
            })
            .collect();
        let mut features = Matrix::zeros(nodes.len(), self.feature_dim());
        for (i, &v) in nodes.iter().enumerate() {
            features.row_mut(i).copy_from_slice(self.features.row(v));
        }
        let pick = |m: &[bool]| nodes.iter().map(|&v| m[v]).collect::<Vec<_>>();
        Graph {
            neighbors,
            features,
            labels: nodes.iter().map(|&v| self.labels[v]).collect(),
            num_classes: self.num_classes,
            train: pick(&self.train),
            val: pick(&self.val),
            test: pick(&self.test),
            global_ids: nodes.iter().map(|&v| self.global_ids[v]).collect(),
        }
    }

    /// Hop distance from `source` to every node; `usize::MAX` if unreachable.
    pub fn bfs_distances(&self, source: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.num_nodes()];
        dist[source] = 0;
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            for &w in &self.neighbors[u] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }
}

/// Nodes at shortest-path distance exactly `k` from `v`, sorted.
/// Only `k ∈ {1, 2}` is supported.
pub fn k_hop_sets(g: &Graph, v: usize, k: usize) -> Result<Vec<usize>> {
    if v >= g.num_nodes() {
        return Err(Error::Value(format!("node {v} outside 0..{}", g.num_nodes())));
    }
    match k {
        1 => Ok(g.neighbors(v).to_vec()),
        2 => {
            let mut out: Vec<usize> = g
                .neighbors(v)
                .iter()
                .flat_map(|&u| g.neighbors(u).iter().copied())
                .filter(|&w| w != v && g.neighbors(v).binary_search(&w).is_err())
                .collect();
            out.sort_unstable();
            out.dedup();
            Ok(out)
        }
        _ => Err(Error::Parameter(format!("k-hop sets support k = 1 or 2, got {k}"))),
    }
}

pub const DEFAULT_SPLIT: [f64; 3] = [0.2, 0.4, 0.4];

/// Stratified train/val/test split of the labeled nodes.
///
/// Per class, counts are assigned by largest-remainder rounding of
/// `ratios` (plus the unused share `1 - Σ ratios`); nodes within a class are
/// shuffled with a seeded RNG first.
pub fn split_masks(g: Graph, ratios: [f64; 3], seed: u64) -> Result<Graph> {
    if ratios.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) || ratios.iter().all(|&r| r == 0.0) {
        return Err(Error::Parameter(format!("invalid split ratios {ratios:?}")));
    }
    let total: f64 = ratios.iter().sum();
    if total > 1.0 + 1e-12 {
        return Err(Error::Parameter(format!("split ratios sum to {total} > 1")));
    }
    let shares = [ratios[0], ratios[1], ratios[2], (1.0 - total).max(0.0)];

    let n = g.num_nodes();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); g.num_classes()];
    for v in 0..n {
        if let Some(c) = g.label(v) {
            by_class[c].push(v);
        }
    }
    let mut rng = seeded_rng(seed, &[0x5_911]);
    let mut masks = [vec![false; n], vec![false; n], vec![false; n]];
    for members in &mut by_class {
        members.shuffle(&mut rng);
        let counts = largest_remainder(members.len(), &shares);
        let mut start = 0;
        for (mask, &count) in masks.iter_mut().zip(&counts[..3]) {
            for &v in &members[start..start + count] {
                mask[v] = true;
            }
            start += count;
        }
    }
    let [train, val, test] = masks;
    g.with_masks(train, val, test)
}

/// Integer apportionment of `total` by `shares` (Hamilton's method); ties
/// in the remainder go to the earlier bucket.
pub(crate) fn largest_remainder(total: usize, shares: &[f64]) -> Vec<usize> {
    let sum: f64 = shares.iter().sum();
    let quotas: Vec<f64> = shares.iter().map(|s| s / sum * total as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    pub(crate) fn path_graph(n: usize) -> Graph {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Graph::new(Matrix::zeros(n, 1), &edges, vec![Some(0); n], 1).unwrap()
    }

    #[test]
    fn construction_normalizes_edges() {
        let g = Graph::new(
            Matrix::zeros(3, 1),
            &[(0, 1), (1, 0), (1, 1), (2, 1)],
            vec![None; 3],
            1,
        )
        .unwrap();
        assert_eq!(g.neighbors(1), &[0, 2]);
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.num_edges(), 2);
        assert!(Graph::new(Matrix::zeros(2, 1), &[(0, 5)], vec![None; 2], 1).is_err());
        assert!(Graph::new(Matrix::zeros(2, 1), &[], vec![Some(3), None], 2).is_err());
    }

    #[test]
    fn khop_path_and_triangle() {
        let g = path_graph(3);
        assert_eq!(k_hop_sets(&g, 0, 1).unwrap(), vec![1]);
        assert_eq!(k_hop_sets(&g, 0, 2).unwrap(), vec![2]);
        let tri = Graph::new(Matrix::zeros(3, 1), &[(0, 1), (1, 2), (0, 2)], vec![None; 3], 1).unwrap();
        for v in 0..3 {
            assert!(k_hop_sets(&tri, v, 2).unwrap().is_empty());
        }
        assert!(k_hop_sets(&tri, 0, 3).is_err());
        assert!(k_hop_sets(&tri, 7, 1).is_err());
    }

    #[test]
    fn khop_matches_bfs_levels() {
        let mut rng = seeded_rng(3, &[]);
        let n = 40;
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.gen::<f64>() < 0.08 {
                    edges.push((u, v));
                }
            }
        }
        let g = Graph::new(Matrix::zeros(n, 1), &edges, vec![None; n], 1).unwrap();
        for v in 0..n {
            // independent oracle: plain BFS level sets
            let dist = g.bfs_distances(v);
            for k in 1..=2 {
                let oracle: Vec<usize> = (0..n).filter(|&u| dist[u] == k).collect();
                assert_eq!(k_hop_sets(&g, v, k).unwrap(), oracle);
            }
            let one = k_hop_sets(&g, v, 1).unwrap();
            let two = k_hop_sets(&g, v, 2).unwrap();
            assert!(two.iter().all(|u| *u != v && !one.contains(u)));
        }
    }

    #[test]
    fn split_default_ratios_on_100_nodes() {
        let n = 100;
        let labels = (0..n).map(|v| Some(v % 2)).collect();
        let g = Graph::new(Matrix::zeros(n, 1), &[], labels, 2).unwrap();
        let g = split_masks(g, DEFAULT_SPLIT, 1).unwrap();
        let count = |s| g.mask(s).iter().filter(|&&b| b).count();
        assert_eq!(count(Split::Train), 20);
        assert_eq!(count(Split::Val), 40);
        assert_eq!(count(Split::Test), 40);
        for v in 0..n {
            let k = [Split::Train, Split::Val, Split::Test]
                .iter()
                .filter(|&&s| g.mask(s)[v])
                .count();
            assert_eq!(k, 1);
        }
    }

    #[test]
    fn split_all_train_and_determinism() {
        let n = 37;
        let labels = (0..n).map(|v| if v % 5 == 0 { None } else { Some(v % 3) }).collect();
        let g = Graph::new(Matrix::zeros(n, 1), &[], labels, 3).unwrap();
        let all = split_masks(g.clone(), [1.0, 0.0, 0.0], 4).unwrap();
        assert_eq!(all.split_nodes(Split::Train).len(), n - 8);
        assert!(all.split_nodes(Split::Val).is_empty());
        let a = split_masks(g.clone(), DEFAULT_SPLIT, 9).unwrap();
        let b = split_masks(g.clone(), DEFAULT_SPLIT, 9).unwrap();
        assert_eq!(a, b);
        assert!(split_masks(g.clone(), [0.6, 0.6, 0.0], 1).is_err());
        assert!(split_masks(g, [-0.1, 0.5, 0.5], 1).is_err());
    }

    #[test]
    fn largest_remainder_sums() {
        assert_eq!(largest_remainder(50, &[0.2, 0.4, 0.4, 0.0]), vec![10, 20, 20, 0]);
        assert_eq!(largest_remainder(7, &[0.2, 0.4, 0.4, 0.0]).iter().sum::<usize>(), 7);
        assert_eq!(largest_remainder(3, &[1.0, 1.0, 1.0]), vec![1, 1, 1]);
    }

    #[test]
    fn induced_subgraph_is_symmetric() {
        let g = path_graph(6);
        let sub = g.induced_subgraph(&[1, 2, 4, 5]);
        assert_eq!(sub.num_nodes(), 4);
        assert_eq!(sub.neighbors(0), &[1]);
        assert_eq!(sub.neighbors(1), &[0]);
        assert_eq!(sub.neighbors(2), &[3]);
        assert_eq!(sub.global_ids(), &[1, 2, 4, 5]);
        for u in 0..4 {
            for &w in sub.neighbors(u) {
                assert!(sub.neighbors(w).contains(&u));
            }
        }
    }
}
