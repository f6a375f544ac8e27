//! Communities from post-flow edge surgery, and partition quality scores.
//!
//! After the flow, edges between communities have been stretched. Removing
//! every edge heavier than a cut threshold and taking connected components
//! yields the partition. By default the threshold is picked among the final
//! edge weights by maximizing Newman modularity.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::flow::FlowState;
use crate::graph::WeightedGraph;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdStrategy {
    #[default]
    ModularityScan,
    Fixed(f64),
}

impl FromStr for ThresholdStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "modularity" || s == "modularity_scan" {
            return Ok(Self::ModularityScan);
        }
        s.parse::<f64>()
            .map(Self::Fixed)
            .map_err(|_| Error::InvalidParameter(format!("threshold `{s}` is neither `modularity` nor a number")))
    }
}

impl fmt::Display for ThresholdStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ModularityScan => f.write_str("modularity_scan"),
            Self::Fixed(t) => write!(f, "fixed:{t}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityAssignment {
    /// Community per node, numbered from 0 in order of first appearance.
    pub labels: Vec<usize>,
    pub cut_threshold: f64,
    pub n_communities: usize,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller root wins so labels do not depend on union order
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }

    fn labels(&mut self) -> Vec<usize> {
        let n = self.parent.len();
        let roots: Vec<usize> = (0..n).map(|x| self.find(x)).collect();
        canonical_labels(&roots)
    }
}

/// Renumbers arbitrary labels as 0, 1, .. in order of first appearance.
pub fn canonical_labels(raw: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    raw.iter()
        .map(|r| {
            let next = map.len();
            *map.entry(*r).or_insert(next)
        })
        .collect()
}

fn n_labels(labels: &[usize]) -> usize {
    labels.iter().max().map_or(0, |m| m + 1)
}

/// Components after dropping edges with weight above `threshold`.
pub fn partition_at(g: &WeightedGraph, weights: &[f64], threshold: f64) -> Vec<usize> {
    let mut uf = UnionFind::new(g.n_nodes());
    for (e, &w) in g.edges().iter().zip(weights) {
        if w <= threshold {
            uf.union(e.u, e.v);
        }
    }
    uf.labels()
}

/// Newman modularity of a partition of the unweighted graph.
pub fn modularity(g: &WeightedGraph, labels: &[usize]) -> f64 {
    let m = g.n_edges() as f64;
    if m == 0.0 {
        return 0.0;
    }
    let k = n_labels(labels);
    let mut inside = vec![0.0; k];
    let mut degree = vec![0.0; k];
    for e in g.edges() {
        if labels[e.u] == labels[e.v] {
            inside[labels[e.u]] += 1.0;
        }
    }
    for x in 0..g.n_nodes() {
        degree[labels[x]] += g.degree(x) as f64;
    }
    inside
        .iter()
        .zip(&degree)
        .map(|(l, d)| l / m - (d / (2.0 * m)) * (d / (2.0 * m)))
        .sum()
}

pub fn detect_communities(
    g: &WeightedGraph,
    state: &FlowState,
    strategy: ThresholdStrategy,
) -> Result<CommunityAssignment> {
    if state.weights.len() != g.n_edges() {
        return Err(Error::Validation(format!(
            "flow state has {} weights for {} edges",
            state.weights.len(),
            g.n_edges()
        )));
    }
    let weights = &state.weights;
    let (labels, cut_threshold) = match strategy {
        ThresholdStrategy::Fixed(t) => (partition_at(g, weights, t), t),
        ThresholdStrategy::ModularityScan => modularity_scan(g, weights),
    };
    let n_communities = n_labels(&labels);
    Ok(CommunityAssignment {
        labels,
        cut_threshold,
        n_communities,
    })
}

/// Best partition over thresholds equal to the distinct edge weights,
/// ties resolved towards the smaller threshold.
fn modularity_scan(g: &WeightedGraph, weights: &[f64]) -> (Vec<usize>, f64) {
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[a].total_cmp(&weights[b]));

    let mut uf = UnionFind::new(g.n_nodes());
    let mut best: Option<(f64, Vec<usize>, f64)> = None;
    let mut pos = 0;
    while pos < order.len() {
        let threshold = weights[order[pos]];
        while pos < order.len() && weights[order[pos]] == threshold {
            let e = g.edges()[order[pos]];
            uf.union(e.u, e.v);
            pos += 1;
        }
        let labels = uf.labels();
        let q = modularity(g, &labels);
        if best.as_ref().map_or(true, |(bq, _, _)| q > *bq) {
            best = Some((q, labels, threshold));
        }
    }
    match best {
        Some((_, labels, threshold)) => (labels, threshold),
        None => ((0..g.n_nodes()).collect(), 0.0),
    }
}

/// Partition quality scores on the unweighted graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommunityMetrics {
    pub n_communities: usize,
    /// Mean over communities of `cut(C) / min(vol(C), vol(V \ C))`.
    pub conductance: f64,
    /// Mean over communities of the fraction of possible internal edges present.
    pub internal_edge_density: f64,
    pub modularity: f64,
    /// Mean closed-neighborhood Jaccard overlap of intra-community edges.
    pub average_embeddedness: f64,
}

pub fn community_metrics(g: &WeightedGraph, labels: &[usize]) -> Result<CommunityMetrics> {
    let n = g.n_nodes();
    if labels.len() != n {
        return Err(Error::Validation(format!("{} labels for {n} nodes", labels.len())));
    }
    let labels = canonical_labels(labels);
    let k = n_labels(&labels);

    let mut size = vec![0usize; k];
    let mut vol = vec![0.0; k];
    let mut cut = vec![0.0; k];
    let mut internal = vec![0.0; k];
    for x in 0..n {
        size[labels[x]] += 1;
        vol[labels[x]] += g.degree(x) as f64;
    }
    let total_vol: f64 = vol.iter().sum();

    let mut overlap_sum = 0.0;
    let mut overlap_count = 0usize;
    for e in g.edges() {
        let (cu, cv) = (labels[e.u], labels[e.v]);
        if cu == cv {
            internal[cu] += 1.0;
            overlap_sum += closed_jaccard(g, e.u, e.v);
            overlap_count += 1;
        } else {
            cut[cu] += 1.0;
            cut[cv] += 1.0;
        }
    }

    let conductance = (0..k)
        .map(|c| {
            let denom = vol[c].min(total_vol - vol[c]);
            if denom > 0.0 {
                cut[c] / denom
            } else {
                0.0
            }
        })
        .sum::<f64>()
        / k as f64;
    let internal_edge_density = (0..k)
        .map(|c| {
            let s = size[c] as f64;
            if size[c] < 2 {
                0.0
            } else {
                internal[c] / (s * (s - 1.0) / 2.0)
            }
        })
        .sum::<f64>()
        / k as f64;
    let average_embeddedness = if overlap_count == 0 {
        0.0
    } else {
        overlap_sum / overlap_count as f64
    };
    Ok(CommunityMetrics {
        n_communities: k,
        conductance,
        internal_edge_density,
        modularity: modularity(g, &labels),
        average_embeddedness,
    })
}

fn closed_jaccard(g: &WeightedGraph, u: usize, v: usize) -> f64 {
    let mut a: Vec<usize> = g.neighbors(u).chain(std::iter::once(u)).collect();
    let mut b: Vec<usize> = g.neighbors(v).chain(std::iter::once(v)).collect();
    a.sort_unstable();
    b.sort_unstable();
    let (mut i, mut j, mut common) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    common as f64 / (a.len() + b.len() - common) as f64
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must cover the same items");
    let a = canonical_labels(a);
    let b = canonical_labels(b);
    let (ka, kb) = (n_labels(&a), n_labels(&b));
    let mut table = vec![0u64; ka * kb];
    for (&x, &y) in a.iter().zip(&b) {
        table[x * kb + y] += 1;
    }
    let pairs = |c: u64| (c * c.saturating_sub(1) / 2) as f64;
    let sum_cells: f64 = table.iter().map(|&c| pairs(c)).sum();
    let sum_rows: f64 = (0..ka)
        .map(|i| pairs(table[i * kb..(i + 1) * kb].iter().sum()))
        .sum();
    let sum_cols: f64 = (0..kb)
        .map(|j| pairs((0..ka).map(|i| table[i * kb + j]).sum()))
        .sum();
    let total = pairs(a.len() as u64);
    let expected = sum_rows * sum_cols / total;
    let max = 0.5 * (sum_rows + sum_cols);
    if max == expected {
        return 1.0;
    }
    (sum_cells - expected) / (max - expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{run_flow, FlowConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cliques(sizes: &[usize], bridges: &[(usize, usize)]) -> WeightedGraph {
        let mut edges = Vec::new();
        let mut base = 0;
        for &s in sizes {
            for i in 0..s {
                for j in (i + 1)..s {
                    edges.push((base + i, base + j, 1.0));
                }
            }
            base += s;
        }
        edges.extend(bridges.iter().map(|&(u, v)| (u, v, 1.0)));
        WeightedGraph::from_edges(base, &edges).unwrap()
    }

    #[test]
    fn two_cliques_split_at_bridge() {
        let g = cliques(&[6, 6], &[(0, 6)]);
        let state = run_flow(&g, &FlowConfig::default()).unwrap();
        let bridge = g.edge_index(0, 6).unwrap();
        let max = state.weights.iter().copied().fold(f64::MIN, f64::max);
        assert_eq!(state.weights[bridge], max);
        let c = detect_communities(&g, &state, ThresholdStrategy::ModularityScan).unwrap();
        assert_eq!(c.n_communities, 2);
        assert_eq!(c.labels, [vec![0; 6], vec![1; 6]].concat());
        assert!(c.cut_threshold < state.weights[bridge]);
    }

    #[test]
    fn complete_graph_is_one_community() {
        let g = cliques(&[7], &[]);
        let state = run_flow(&g, &FlowConfig::default()).unwrap();
        let c = detect_communities(&g, &state, ThresholdStrategy::ModularityScan).unwrap();
        assert_eq!(c.n_communities, 1);
    }

    #[test]
    fn fixed_threshold_bounds() {
        let g = cliques(&[4, 4], &[(0, 4)]);
        let state = run_flow(&g, &FlowConfig::default()).unwrap();
        let max = state.weights.iter().copied().fold(f64::MIN, f64::max);
        let min = state.weights.iter().copied().fold(f64::MAX, f64::min);
        let all = detect_communities(&g, &state, ThresholdStrategy::Fixed(max + 1.0)).unwrap();
        assert_eq!(all.n_communities, 1);
        let none = detect_communities(&g, &state, ThresholdStrategy::Fixed(min / 2.0)).unwrap();
        assert_eq!(none.n_communities, 8);
    }

    #[test]
    fn perfect_structure_scores() {
        let g = cliques(&[5, 4], &[]);
        let labels = [vec![0; 5], vec![1; 4]].concat();
        let m = community_metrics(&g, &labels).unwrap();
        assert_eq!(m.conductance, 0.0);
        assert_eq!(m.internal_edge_density, 1.0);
        assert_eq!(m.average_embeddedness, 1.0);
        assert!(m.modularity > 0.4);
    }

    #[test]
    fn single_community_has_zero_modularity() {
        let g = cliques(&[4, 3], &[(0, 4), (1, 5)]);
        let m = community_metrics(&g, &[0; 7]).unwrap();
        assert_eq!(m.modularity, 0.0);
        assert_eq!(m.conductance, 0.0);
    }

    #[test]
    fn singletons_have_zero_density() {
        let g = cliques(&[3], &[]);
        let m = community_metrics(&g, &[0, 1, 2]).unwrap();
        assert_eq!(m.internal_edge_density, 0.0);
        assert_eq!(m.average_embeddedness, 0.0);
    }

    #[test]
    fn random_partitions_have_small_modularity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = 80;
            let mut edges = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.gen_bool(0.1) {
                        edges.push((i, j, 1.0));
                    }
                }
            }
            let g = WeightedGraph::from_edges(n, &edges).unwrap();
            let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
            assert!(modularity(&g, &labels).abs() < 0.1);
        }
    }

    #[test]
    fn ari_values() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[5, 5, 2, 2]), 1.0);
        assert_eq!(adjusted_rand_index(&[0, 0, 0, 0], &[1, 1, 1, 1]), 1.0);
        // sklearn: adjusted_rand_score([0,0,1,1],[0,0,1,2]) = 0.5714285714285715
        let v = adjusted_rand_index(&[0, 0, 1, 1], &[0, 0, 1, 2]);
        assert!((v - 0.5714285714285715).abs() < 1e-12);
        assert!(adjusted_rand_index(&[0, 1, 0, 1], &[0, 0, 1, 1]) < 0.0);
    }

    #[test]
    fn threshold_parsing() {
        assert_eq!("modularity".parse::<ThresholdStrategy>().unwrap(), ThresholdStrategy::ModularityScan);
        assert_eq!("2.5".parse::<ThresholdStrategy>().unwrap(), ThresholdStrategy::Fixed(2.5));
        assert!("x".parse::<ThresholdStrategy>().is_err());
    }
}
