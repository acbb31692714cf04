use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{largest_remainder, Graph};
use crate::error::{Error, Result};
use crate::numerics::seeded_rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionMode {
    NonOverlapping,
    Overlapping,
}

impl std::str::FromStr for PartitionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "non-overlapping" => Ok(PartitionMode::NonOverlapping),
            "overlapping" => Ok(PartitionMode::Overlapping),
            other => Err(Error::Parameter(format!("unknown partition mode '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub num_clients: usize,
    pub mode: PartitionMode,
    pub seed: u64,
}

impl PartitionSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_clients < 2 {
            return Err(Error::Parameter(format!(
                "need at least 2 clients, got {}",
                self.num_clients
            )));
        }
        if self.mode == PartitionMode::Overlapping && self.num_clients % 5 != 0 {
            return Err(Error::Parameter(format!(
                "overlapping partitioning needs a multiple of 5 clients, got {}",
                self.num_clients
            )));
        }
        Ok(())
    }
}

/// Splits `g` into `spec.num_clients` disjoint induced subgraphs.
pub fn partition_nonoverlapping(g: &Graph, spec: &PartitionSpec) -> Result<Vec<Graph>> {
    spec.validate()?;
    if spec.num_clients > g.num_nodes() {
        return Err(Error::Parameter(format!(
            "{} clients for {} nodes",
            spec.num_clients,
            g.num_nodes()
        )));
    }
    let parts = region_grow(g, spec.num_clients, spec.seed);
    Ok(parts.iter().map(|nodes| g.induced_subgraph(nodes)).collect())
}

/// Five random half-size induced samples from each of `M / 5` coarse parts.
pub fn partition_overlapping(g: &Graph, spec: &PartitionSpec) -> Result<Vec<Graph>> {
    spec.validate()?;
    if spec.mode != PartitionMode::Overlapping {
        return Err(Error::Parameter("partition_overlapping called with non-overlapping spec".into()));
    }
    let coarse = spec.num_clients / 5;
    if coarse > g.num_nodes() {
        return Err(Error::Parameter(format!(
            "{coarse} coarse parts for {} nodes",
            g.num_nodes()
        )));
    }
    let parts = region_grow(g, coarse, spec.seed);
    let mut out = Vec::with_capacity(spec.num_clients);
    for (t, part) in parts.iter().enumerate() {
        let half = part.len().div_ceil(2);
        for s in 0..5u64 {
            let mut rng = seeded_rng(spec.seed, &[0x0_FE1A, t as u64, s]);
            let mut sample: Vec<usize> = part.choose_multiple(&mut rng, half).copied().collect();
            sample.sort_unstable();
            out.push(g.induced_subgraph(&sample));
        }
    }
    Ok(out)
}

/// Balanced BFS region growing with farthest-point seeds and one greedy
/// boundary pass. Returns `k` sorted node lists covering every node once.
pub(crate) fn region_grow(g: &Graph, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let n = g.num_nodes();
    assert!(k >= 1 && k <= n.max(1));
    if k == 1 {
        return vec![(0..n).collect()];
    }
    let targets = largest_remainder(n, &vec![1.0; k]);

    let mut rng = seeded_rng(seed, &[0x0_9A27]);
    let mut seeds = vec![rng.gen_range(0..n)];
    let mut min_dist = g.bfs_distances(seeds[0]);
    while seeds.len() < k {
        let next = (0..n)
            .filter(|v| !seeds.contains(v))
            .max_by(|&a, &b| min_dist[a].cmp(&min_dist[b]).then(b.cmp(&a)))
            .expect("k <= n leaves an unchosen node");
        seeds.push(next);
        for (m, d) in min_dist.iter_mut().zip(g.bfs_distances(next)) {
            *m = (*m).min(d);
        }
    }

    const NONE: usize = usize::MAX;
    let mut part = vec![NONE; n];
    let mut sizes = vec![0usize; k];
    let mut queues: Vec<std::collections::VecDeque<usize>> = vec![Default::default(); k];
    for (p, &s) in seeds.iter().enumerate() {
        queues[p].push_back(s);
    }
    let mut remaining = n;
    let mut scan = 0usize;
    while remaining > 0 {
        for p in 0..k {
            if sizes[p] >= targets[p] {
                continue;
            }
            let mut picked = None;
            while let Some(v) = queues[p].pop_front() {
                if part[v] == NONE {
                    picked = Some(v);
                    break;
                }
            }
            let v = match picked {
                Some(v) => v,
                None => {
                    // front exhausted (disconnected graph): jump to the
                    // lowest-index unassigned node
                    while part[scan] != NONE {
                        scan += 1;
                    }
                    scan
                }
            };
            part[v] = p;
            sizes[p] += 1;
            remaining -= 1;
            queues[p].extend(g.neighbors(v).iter().filter(|&&u| part[u] == NONE));
            if remaining == 0 {
                break;
            }
        }
    }

    let ideal = n as f64 / k as f64;
    let tol = (0.1 * ideal).floor() as usize;
    let lo = (ideal.floor() as usize).saturating_sub(tol).max(1);
    let hi = ideal.ceil() as usize + tol;
    let mut counts = vec![0usize; k];
    for v in 0..n {
        let p = part[v];
        counts.iter_mut().for_each(|c| *c = 0);
        for &u in g.neighbors(v) {
            counts[part[u]] += 1;
        }
        let mut best = p;
        for q in 0..k {
            if q != p && counts[q] > counts[best] && sizes[q] < hi {
                best = q;
            }
        }
        if best != p && sizes[p] > lo {
            part[v] = best;
            sizes[p] -= 1;
            sizes[best] += 1;
        }
    }

    let mut out = vec![Vec::new(); k];
    for (v, &p) in part.iter().enumerate() {
        out[p].push(v);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_sbm, SbmParams};
    use crate::numerics::Matrix;
    use std::collections::HashSet;

    fn path(n: usize) -> Graph {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Graph::new(Matrix::zeros(n, 1), &edges, vec![None; n], 1).unwrap()
    }

    fn spec(m: usize, mode: PartitionMode, seed: u64) -> PartitionSpec {
        PartitionSpec {
            num_clients: m,
            mode,
            seed,
        }
    }

    fn sbm(seed: u64) -> Graph {
        generate_sbm(&SbmParams {
            num_nodes: 600,
            num_classes: 2,
            p_in: 0.03,
            p_out: 0.01,
            feature_dim: 4,
            feature_sep: 1.0,
            seed,
        })
        .unwrap()
    }

    fn assert_disjoint_cover(g: &Graph, parts: &[Graph]) {
        let mut seen = HashSet::new();
        for p in parts {
            for &id in p.global_ids() {
                assert!(seen.insert(id), "node {id} appears twice");
            }
        }
        assert_eq!(seen.len(), g.num_nodes());
    }

    #[test]
    fn path_splits_in_half() {
        let g = path(10);
        let parts = partition_nonoverlapping(&g, &spec(2, PartitionMode::NonOverlapping, 0)).unwrap();
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].num_nodes(), 5);
        assert_eq!(parts[1].num_nodes(), 5);
        assert_disjoint_cover(&g, &parts);
    }

    #[test]
    fn singleton_partition() {
        let g = path(7);
        let parts = partition_nonoverlapping(&g, &spec(7, PartitionMode::NonOverlapping, 3)).unwrap();
        assert!(parts.iter().all(|p| p.num_nodes() == 1));
        assert_disjoint_cover(&g, &parts);
        assert!(partition_nonoverlapping(&g, &spec(8, PartitionMode::NonOverlapping, 3)).is_err());
        assert!(partition_nonoverlapping(&g, &spec(1, PartitionMode::NonOverlapping, 3)).is_err());
    }

    #[test]
    fn sbm_partitions_cover_disjointly_and_balance() {
        for seed in 0..4 {
            let g = sbm(seed);
            for m in [2, 5, 10] {
                let parts =
                    partition_nonoverlapping(&g, &spec(m, PartitionMode::NonOverlapping, seed)).unwrap();
                assert_eq!(parts.len(), m);
                assert_disjoint_cover(&g, &parts);
                let ideal = 600.0 / m as f64;
                for p in &parts {
                    let s = p.num_nodes() as f64;
                    assert!((s - ideal).abs() <= 0.2 * ideal, "size {s} vs {ideal}");
                    for u in 0..p.num_nodes() {
                        for &w in p.neighbors(u) {
                            assert!(p.neighbors(w).contains(&u));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn disconnected_graph_still_covered() {
        let g = Graph::new(Matrix::zeros(9, 1), &[(0, 1), (3, 4)], vec![None; 9], 1).unwrap();
        let parts = partition_nonoverlapping(&g, &spec(3, PartitionMode::NonOverlapping, 1)).unwrap();
        assert_disjoint_cover(&g, &parts);
    }

    #[test]
    fn overlapping_five_clients_sample_half() {
        let g = sbm(1);
        let parts = partition_overlapping(&g, &spec(5, PartitionMode::Overlapping, 2)).unwrap();
        assert_eq!(parts.len(), 5);
        for p in &parts {
            assert_eq!(p.num_nodes(), 300);
        }
        let parts10 = partition_overlapping(&g, &spec(10, PartitionMode::Overlapping, 2)).unwrap();
        assert_eq!(parts10.len(), 10);
        // clients 0..5 come from the first coarse part, 5..10 from the second
        let coarse = region_grow(&g, 2, 2);
        for (c, client) in parts10.iter().enumerate() {
            let temp: HashSet<usize> = coarse[c / 5].iter().copied().collect();
            assert!(client.global_ids().iter().all(|id| temp.contains(id)));
            assert_eq!(client.num_nodes(), coarse[c / 5].len().div_ceil(2));
        }
        assert!(partition_overlapping(&g, &spec(7, PartitionMode::Overlapping, 2)).is_err());
    }

    #[test]
    fn overlap_matches_hypergeometric_expectation() {
        // Two independent uniform k-subsets of an N-set share k²/N nodes on average.
        let g = path(101);
        let n = 101.0;
        let k = 51.0;
        let expected = k * k / n;
        let mut total = 0.0;
        let trials = 100;
        for seed in 0..trials {
            let parts = partition_overlapping(&g, &spec(5, PartitionMode::Overlapping, seed)).unwrap();
            let a: HashSet<_> = parts[0].global_ids().iter().copied().collect();
            let shared = parts[1].global_ids().iter().filter(|id| a.contains(id)).count();
            total += shared as f64;
        }
        let mean = total / trials as f64;
        assert!((mean - expected).abs() <= 0.1 * expected, "{mean} vs {expected}");
    }
}
