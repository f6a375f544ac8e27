//! Weighted undirected graphs and adaptive kNN construction.
//!
//! Each point gets a neighbor count between `k_min` and `k_max` from its
//! min-max normalized local density; directed kNN selections are then
//! symmetrized by union.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::io::{DistanceMatrix, Metric};
use crate::{Error, Result};

/// Undirected edge with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

/// Statistic of the distances to the `k_max` nearest neighbors whose
/// inverse is the raw local density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityKernel {
    #[default]
    Mean,
    /// Distance to the k_max-th neighbor.
    KthNeighbor,
}

impl FromStr for DensityKernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Self::Mean),
            "kth" | "kth_neighbor" => Ok(Self::KthNeighbor),
            other => Err(Error::InvalidParameter(format!("unknown density kernel `{other}`"))),
        }
    }
}

impl fmt::Display for DensityKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Mean => "mean",
            Self::KthNeighbor => "kth_neighbor",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdaptiveKnnParams {
    pub k_min: usize,
    pub k_max: usize,
    #[serde(default)]
    pub kernel: DensityKernel,
}

impl Default for AdaptiveKnnParams {
    fn default() -> Self {
        Self::new(5, 10)
    }
}

impl AdaptiveKnnParams {
    pub fn new(k_min: usize, k_max: usize) -> Self {
        Self {
            k_min,
            k_max,
            kernel: DensityKernel::Mean,
        }
    }

    /// Checks `1 <= k_min <= k_max < n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.k_min == 0 || self.k_min > self.k_max || self.k_max >= n {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= k_min <= k_max < N, got k_min={}, k_max={}, N={n}",
                self.k_min, self.k_max
            )));
        }
        Ok(())
    }
}

/// How a graph was built.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphProvenance {
    pub k_min: usize,
    pub k_max: usize,
    pub metric: Metric,
    #[serde(default)]
    pub kernel: DensityKernel,
}

/// Simple undirected graph with positive finite edge weights.
///
/// Edges are kept sorted by `(u, v)`; an edge's position in that order is
/// its index for per-edge vectors (flow weights, curvatures).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    ids: Vec<String>,
    edges: Vec<Edge>,
    /// Per node, `(neighbor, edge index)` sorted by neighbor.
    adj: Vec<Vec<(usize, usize)>>,
    provenance: Option<GraphProvenance>,
}

impl WeightedGraph {
    pub fn new(ids: Vec<String>, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let n = ids.len();
        let mut seen = BTreeSet::new();
        let mut list = Vec::new();
        for e in edges {
            let (u, v) = if e.u < e.v { (e.u, e.v) } else { (e.v, e.u) };
            if u == v {
                return Err(Error::Validation(format!("self-loop at node {u}")));
            }
            if v >= n {
                return Err(Error::Validation(format!("edge ({u}, {v}) outside {n} nodes")));
            }
            if !(e.weight.is_finite() && e.weight > 0.0) {
                return Err(Error::Validation(format!(
                    "edge ({u}, {v}) has invalid weight {}",
                    e.weight
                )));
            }
            if !seen.insert((u, v)) {
                return Err(Error::Validation(format!("duplicate edge ({u}, {v})")));
            }
            list.push(Edge { u, v, weight: e.weight });
        }
        list.sort_by_key(|e| (e.u, e.v));
        let mut adj = vec![Vec::new(); n];
        for (idx, e) in list.iter().enumerate() {
            adj[e.u].push((e.v, idx));
            adj[e.v].push((e.u, idx));
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        Ok(Self {
            ids,
            edges: list,
            adj,
            provenance: None,
        })
    }

    /// Convenience constructor with generated ids `0..n`.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        Self::new(
            (0..n).map(|i| i.to_string()).collect(),
            edges.iter().map(|&(u, v, weight)| Edge { u, v, weight }),
        )
    }

    pub fn with_provenance(mut self, provenance: GraphProvenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    /// Same topology with per-edge weights replaced (indexed like [`Self::edges`]).
    pub fn with_weights(&self, weights: &[f64]) -> Result<Self> {
        if weights.len() != self.edges.len() {
            return Err(Error::Validation(format!(
                "{} weights for {} edges",
                weights.len(),
                self.edges.len()
            )));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(Error::Validation(format!("edge {i} has invalid weight {w}")));
        }
        let mut g = self.clone();
        for (e, &w) in g.edges.iter_mut().zip(weights) {
            e.weight = w;
        }
        Ok(g)
    }

    pub fn n_nodes(&self) -> usize {
        self.ids.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn weights(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.weight).collect()
    }

    pub fn provenance(&self) -> Option<&GraphProvenance> {
        self.provenance.as_ref()
    }

    /// `(neighbor, edge index)` pairs of `x`, sorted by neighbor.
    pub fn adjacency(&self, x: usize) -> &[(usize, usize)] {
        &self.adj[x]
    }

    pub fn neighbors(&self, x: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[x].iter().map(|&(v, _)| v)
    }

    pub fn degree(&self, x: usize) -> usize {
        self.adj[x].len()
    }

    pub fn edge_index(&self, x: usize, y: usize) -> Option<usize> {
        self.adj[x]
            .binary_search_by_key(&y, |&(v, _)| v)
            .ok()
            .map(|pos| self.adj[x][pos].1)
    }

    /// Component label per node, numbered from 0 in order of lowest node index.
    pub fn component_labels(&self) -> Vec<usize> {
        let n = self.n_nodes();
        let mut labels = vec![usize::MAX; n];
        let mut next = 0;
        let mut stack = Vec::new();
        for s in 0..n {
            if labels[s] != usize::MAX {
                continue;
            }
            labels[s] = next;
            stack.push(s);
            while let Some(x) = stack.pop() {
                for y in self.neighbors(x) {
                    if labels[y] == usize::MAX {
                        labels[y] = next;
                        stack.push(y);
                    }
                }
            }
            next += 1;
        }
        labels
    }

    pub fn n_components(&self) -> usize {
        self.component_labels().into_iter().max().map_or(0, |m| m + 1)
    }

    pub fn ensure_connected(&self) -> Result<()> {
        match self.n_components() {
            0 | 1 => Ok(()),
            components => Err(Error::DisconnectedGraph { components }),
        }
    }
}

/// JSON layout of a graph: node ids, index-based edges, optional provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphDocument {
    pub nodes: Vec<String>,
    pub edges: Vec<Edge>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub provenance: Option<GraphProvenance>,
}

impl From<&WeightedGraph> for GraphDocument {
    fn from(g: &WeightedGraph) -> Self {
        Self {
            nodes: g.ids.clone(),
            edges: g.edges.clone(),
            provenance: g.provenance,
        }
    }
}

impl TryFrom<GraphDocument> for WeightedGraph {
    type Error = Error;

    fn try_from(doc: GraphDocument) -> Result<Self> {
        let g = WeightedGraph::new(doc.nodes, doc.edges)?;
        Ok(match doc.provenance {
            Some(p) => g.with_provenance(p),
            None => g,
        })
    }
}

/// Indices of the `k` nearest other points of `i`, ties broken by index.
fn nearest(d: &DistanceMatrix, i: usize, k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..d.n()).filter(|&j| j != i).collect();
    order.sort_by(|&a, &b| d.get(i, a).total_cmp(&d.get(i, b)).then(a.cmp(&b)));
    order.truncate(k);
    order
}

/// Min-max normalized local density in `[0, 1]`.
///
/// Raw density is the inverse of the kernel statistic over the `k_max`
/// nearest neighbors. When all raw densities coincide every point gets 0.
pub fn local_density(d: &DistanceMatrix, k_max: usize, kernel: DensityKernel) -> Result<Vec<f64>> {
    let n = d.n();
    if k_max == 0 || k_max >= n {
        return Err(Error::InvalidParameter(format!("k_max={k_max} must be in [1, {n})")));
    }
    let raw = (0..n)
        .map(|i| {
            let nn = nearest(d, i, k_max);
            let stat = match kernel {
                DensityKernel::Mean => nn.iter().map(|&j| d.get(i, j)).sum::<f64>() / k_max as f64,
                DensityKernel::KthNeighbor => d.get(i, nn[k_max - 1]),
            };
            if stat <= 0.0 {
                return Err(Error::DegenerateInput(format!(
                    "point {i} has zero distance to its nearest neighbors"
                )));
            }
            Ok(1.0 / stat)
        })
        .collect::<Result<Vec<f64>>>()?;
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return Ok(vec![0.0; n]);
    }
    Ok(raw.iter().map(|&r| (r - lo) / (hi - lo)).collect())
}

/// Neighbor count per point: `round(k_min + density * (k_max - k_min))`,
/// rounding half up.
pub fn assign_k(density: &[f64], params: &AdaptiveKnnParams) -> Vec<usize> {
    let span = (params.k_max - params.k_min) as f64;
    density
        .iter()
        .map(|&rho| {
            let k = (params.k_min as f64 + rho.clamp(0.0, 1.0) * span + 0.5).floor() as usize;
            k.clamp(params.k_min, params.k_max)
        })
        .collect()
}

/// Adaptive kNN graph with union symmetrization and distance weights.
pub fn build_graph(ids: &[String], d: &DistanceMatrix, params: &AdaptiveKnnParams) -> Result<WeightedGraph> {
    let n = d.n();
    if ids.len() != n {
        return Err(Error::Validation(format!("{} ids for {n} points", ids.len())));
    }
    params.validate(n)?;
    let density = local_density(d, params.k_max, params.kernel)?;
    let ks = assign_k(&density, params);
    let mut pairs = BTreeSet::new();
    for (i, &k) in ks.iter().enumerate() {
        for j in nearest(d, i, k) {
            pairs.insert((i.min(j), i.max(j)));
        }
    }
    let mut edges = Vec::with_capacity(pairs.len());
    for (u, v) in pairs {
        let weight = d.get(u, v);
        if weight <= 0.0 {
            return Err(Error::DegenerateInput(format!(
                "points `{}` and `{}` coincide",
                ids[u], ids[v]
            )));
        }
        edges.push(Edge { u, v, weight });
    }
    let g = WeightedGraph::new(ids.to_vec(), edges)?.with_provenance(GraphProvenance {
        k_min: params.k_min,
        k_max: params.k_max,
        metric: d.metric(),
        kernel: params.kernel,
    });
    g.ensure_connected()?;
    Ok(g)
}
