//! Ollivier-Ricci curvature of graph edges.
//!
//! Each node `x` carries the lazy random-walk measure `m_x`: mass `alpha`
//! stays on `x`, the rest is spread uniformly over its neighbors. For an edge
//! `(x, y)` the curvature is `1 - W(m_x, m_y) / d(x, y)` where `W` is the exact
//! 1-Wasserstein distance under the weighted shortest-path metric `d`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::graph::WeightedGraph;
use crate::io::{DistanceMatrix, Metric};
use crate::transport;
use crate::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.5;

/// Identifier of the transport backend recorded alongside curvatures.
pub const TRANSPORT_BACKEND: &str = "exact-transport-simplex";

#[derive(Clone, Copy, PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra(g: &WeightedGraph, source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; g.n_nodes()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(HeapItem(0.0, source));
    while let Some(HeapItem(d, x)) = heap.pop() {
        if d > dist[x] {
            continue;
        }
        for &(y, e) in g.adjacency(x) {
            let nd = d + g.edges()[e].weight;
            if nd < dist[y] {
                dist[y] = nd;
                heap.push(HeapItem(nd, y));
            }
        }
    }
    dist
}

/// All-pairs weighted shortest-path distances.
///
/// Row `i` comes from a Dijkstra run rooted at `i`; the lower triangle is
/// mirrored from the upper one so the result is exactly symmetric.
pub fn shortest_path_matrix(g: &WeightedGraph) -> Result<DistanceMatrix> {
    g.ensure_connected()?;
    let n = g.n_nodes();
    let rows: Vec<Vec<f64>> = (0..n).into_par_iter().map(|s| dijkstra(g, s)).collect();
    // both directions agree up to summation order; take the smaller so the
    // result does not depend on which endpoint has the lower index
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = rows[i][j].min(rows[j][i]);
            values[i * n + j] = d;
            values[j * n + i] = d;
        }
    }
    Ok(DistanceMatrix::from_raw(n, values, Metric::ShortestPath))
}

/// Probability measure attached to a node.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborMeasure {
    pub center: usize,
    /// `(node, mass)`; the center comes first when `alpha > 0`.
    pub atoms: Vec<(usize, f64)>,
    pub alpha: f64,
}

impl NeighborMeasure {
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!("alpha={alpha} must lie in [0, 1)")));
    }
    Ok(())
}

pub fn neighbor_measure(g: &WeightedGraph, x: usize, alpha: f64) -> Result<NeighborMeasure> {
    check_alpha(alpha)?;
    if x >= g.n_nodes() {
        return Err(Error::InvalidParameter(format!("node {x} not in graph")));
    }
    let deg = g.degree(x);
    if deg == 0 {
        return Err(Error::IsolatedNode(x));
    }
    let share = (1.0 - alpha) / deg as f64;
    let mut atoms = Vec::with_capacity(deg + 1);
    if alpha > 0.0 {
        atoms.push((x, alpha));
    }
    atoms.extend(g.neighbors(x).map(|y| (y, share)));
    Ok(NeighborMeasure {
        center: x,
        atoms,
        alpha,
    })
}

/// Exact 1-Wasserstein distance between two node measures under `ground`.
///
/// `ground` must be a metric: mass shared by both measures then stays in
/// place, so only the net surplus is transported.
pub fn wasserstein_graph(mu: &NeighborMeasure, nu: &NeighborMeasure, ground: &DistanceMatrix) -> Result<f64> {
    let mut net: Vec<(usize, f64)> = mu
        .atoms
        .iter()
        .copied()
        .chain(nu.atoms.iter().map(|&(v, m)| (v, -m)))
        .collect();
    net.sort_by_key(|a| a.0);
    net.dedup_by(|next, kept| {
        if next.0 == kept.0 {
            kept.1 += next.1;
            true
        } else {
            false
        }
    });
    let sources: Vec<(usize, f64)> = net.iter().copied().filter(|a| a.1 > 0.0).collect();
    let sinks: Vec<(usize, f64)> = net.iter().filter(|a| a.1 < 0.0).map(|&(v, m)| (v, -m)).collect();
    if sources.is_empty() || sinks.is_empty() {
        return Ok(0.0);
    }
    let supply: Vec<f64> = sources.iter().map(|a| a.1).collect();
    let demand: Vec<f64> = sinks.iter().map(|a| a.1).collect();
    let mut cost = Vec::with_capacity(supply.len() * demand.len());
    for &(a, _) in &sources {
        for &(b, _) in &sinks {
            cost.push(ground.get(a, b));
        }
    }
    Ok(transport::solve(&supply, &demand, &cost)?.cost)
}

/// Curvature of the edge `(x, y)`.
pub fn orc_edge(g: &WeightedGraph, x: usize, y: usize, alpha: f64, ground: &DistanceMatrix) -> Result<f64> {
    if g.edge_index(x, y).is_none() {
        return Err(Error::InvalidParameter(format!("({x}, {y}) is not an edge")));
    }
    let d = ground.get(x, y);
    if !(d > 0.0) {
        return Err(Error::DegenerateInput(format!("zero ground distance on edge ({x}, {y})")));
    }
    let mx = neighbor_measure(g, x, alpha)?;
    let my = neighbor_measure(g, y, alpha)?;
    Ok(1.0 - wasserstein_graph(&mx, &my, ground)? / d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeCurvature {
    pub u: usize,
    pub v: usize,
    pub kappa: f64,
}

/// Per-edge curvature, in the graph's canonical `(u, v)` edge order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureMap {
    pub alpha: f64,
    pub backend: String,
    pub edges: Vec<EdgeCurvature>,
}

impl CurvatureMap {
    pub fn values(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.kappa).collect()
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// Curvature of every edge against a precomputed ground metric.
pub fn orc_with_ground(g: &WeightedGraph, alpha: f64, ground: &DistanceMatrix) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    let measures = (0..g.n_nodes())
        .map(|x| neighbor_measure(g, x, alpha))
        .collect::<Result<Vec<_>>>()?;
    g.edges()
        .par_iter()
        .map(|e| {
            let d = ground.get(e.u, e.v);
            if !(d > 0.0) {
                return Err(Error::DegenerateInput(format!(
                    "zero ground distance on edge ({}, {})",
                    e.u, e.v
                )));
            }
            Ok(1.0 - wasserstein_graph(&measures[e.u], &measures[e.v], ground)? / d)
        })
        .collect()
}

/// Curvature of every edge under the graph's own shortest-path metric.
pub fn orc_all(g: &WeightedGraph, alpha: f64) -> Result<CurvatureMap> {
    check_alpha(alpha)?;
    let ground = shortest_path_matrix(g)?;
    let kappas = orc_with_ground(g, alpha, &ground)?;
    Ok(CurvatureMap {
        alpha,
        backend: TRANSPORT_BACKEND.to_string(),
        edges: g
            .edges()
            .iter()
            .zip(kappas)
            .map(|(e, kappa)| EdgeCurvature { u: e.u, v: e.v, kappa })
            .collect(),
    })
}
