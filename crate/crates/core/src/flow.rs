//! Discrete Ricci flow on edge weights.
//!
//! Starting from unit weights, every iteration recomputes the shortest-path
//! metric `d` and the curvature `kappa` of the current weighted graph and
//! replaces all weights at once by `d(x, y) * (1 - kappa(x, y))`.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::curvature::{orc_with_ground, shortest_path_matrix, DEFAULT_ALPHA};
use crate::graph::WeightedGraph;
use crate::io::Metric;
use crate::rsa::Rdm;
use crate::{Error, Result};

pub const DEFAULT_ITERATIONS: usize = 30;
pub const DEFAULT_WEIGHT_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub iterations: usize,
    pub alpha: f64,
    /// Rescale weights after each step so they sum to the edge count.
    pub normalize: bool,
    pub weight_floor: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            iterations: DEFAULT_ITERATIONS,
            alpha: DEFAULT_ALPHA,
            normalize: false,
            weight_floor: DEFAULT_WEIGHT_FLOOR,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        Some(Self {
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            mean: values.iter().sum::<f64>() / values.len() as f64,
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

/// What one flow step saw and produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Index `i` of the step mapping `w^i` to `w^{i+1}`.
    pub iteration: usize,
    pub curvature: Summary,
    /// Summary of the updated weights `w^{i+1}`.
    pub weights: Summary,
    /// Edges whose update fell to the weight floor.
    pub clamped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    pub iteration: usize,
    /// Current weights, indexed like the graph's edges.
    pub weights: Vec<f64>,
    /// Curvatures that produced `weights` (empty before the first step).
    pub curvatures: Vec<f64>,
    pub history: Vec<IterationRecord>,
}

impl FlowState {
    /// Unit weights on every edge.
    pub fn initial(g: &WeightedGraph) -> Self {
        Self {
            iteration: 0,
            weights: vec![1.0; g.n_edges()],
            curvatures: Vec::new(),
            history: Vec::new(),
        }
    }

    /// The graph carrying the current weights.
    pub fn weighted_graph(&self, g: &WeightedGraph) -> Result<WeightedGraph> {
        g.with_weights(&self.weights)
    }
}

/// Curvature resolution used by the flow.
///
/// Curvatures of edges related by a graph automorphism can differ in the
/// last bits because transport sums run in node-index order. Snapping to a
/// fixed grid keeps such edges exactly equal across iterations.
pub const CURVATURE_GRID: f64 = 1.0 / (1u64 << 32) as f64;

fn quantize(k: f64) -> f64 {
    (k / CURVATURE_GRID).round() * CURVATURE_GRID
}

/// One simultaneous update of all edge weights.
pub fn flow_step(g: &WeightedGraph, state: &FlowState, config: &FlowConfig) -> Result<FlowState> {
    if state.weights.len() != g.n_edges() {
        return Err(Error::Validation(format!(
            "flow state has {} weights for {} edges",
            state.weights.len(),
            g.n_edges()
        )));
    }
    let current = state.weighted_graph(g)?;
    let ground = shortest_path_matrix(&current)?;
    let kappa: Vec<f64> = orc_with_ground(&current, config.alpha, &ground)?
        .into_iter()
        .map(quantize)
        .collect();

    let mut clamped = 0;
    let mut next: Vec<f64> = current
        .edges()
        .iter()
        .zip(&kappa)
        .map(|(e, k)| {
            let d = ground.get(e.u, e.v);
            let w = d - k * d;
            if w <= config.weight_floor {
                clamped += 1;
                config.weight_floor
            } else {
                w
            }
        })
        .collect();
    if config.normalize {
        let total: f64 = next.iter().sum();
        let scale = next.len() as f64 / total;
        for w in &mut next {
            *w = (*w * scale).max(config.weight_floor);
        }
    }
    if next.iter().any(|w| !w.is_finite()) {
        return Err(Error::FlowDiverged {
            iteration: state.iteration,
        });
    }
    if clamped > 0 {
        debug!(
            "flow step {}: {clamped} edge weights clamped to {}",
            state.iteration, config.weight_floor
        );
    }

    let mut history = state.history.clone();
    if let (Some(curvature), Some(weights)) = (Summary::of(&kappa), Summary::of(&next)) {
        history.push(IterationRecord {
            iteration: state.iteration,
            curvature,
            weights,
            clamped,
        });
    }
    Ok(FlowState {
        iteration: state.iteration + 1,
        weights: next,
        curvatures: kappa,
        history,
    })
}

/// Runs `config.iterations` flow steps from unit weights.
pub fn run_flow(g: &WeightedGraph, config: &FlowConfig) -> Result<FlowState> {
    if !(config.weight_floor > 0.0) {
        return Err(Error::InvalidParameter("weight floor must be positive".into()));
    }
    g.ensure_connected()?;
    let mut state = FlowState::initial(g);
    for _ in 0..config.iterations {
        state = flow_step(g, &state, config)?;
    }
    Ok(state)
}

/// Shortest-path distances under the flowed weights.
pub fn flow_metric(state: &FlowState, g: &WeightedGraph) -> Result<Rdm> {
    let weighted = state.weighted_graph(g)?;
    let d = shortest_path_matrix(&weighted)?.retagged(Metric::FlowMetric);
    Ok(Rdm::new(g.ids().to_vec(), d))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize, edges: &[(usize, usize)]) -> WeightedGraph {
        let e: Vec<_> = edges.iter().map(|&(u, v)| (u, v, 1.0)).collect();
        WeightedGraph::from_edges(n, &e).unwrap()
    }

    fn k3() -> WeightedGraph {
        unit(3, &[(0, 1), (1, 2), (0, 2)])
    }

    fn cfg(iterations: usize, alpha: f64) -> FlowConfig {
        FlowConfig {
            iterations,
            alpha,
            ..FlowConfig::default()
        }
    }

    #[test]
    fn k3_one_step() {
        let state = run_flow(&k3(), &cfg(1, 0.0)).unwrap();
        assert_eq!(state.weights, vec![0.5; 3]);
        assert_eq!(state.curvatures, vec![0.5; 3]);
        let rdm = flow_metric(&state, &k3()).unwrap();
        assert_eq!(rdm.get(0, 1), 0.5);
        assert_eq!(rdm.get(0, 2), 0.5);
    }

    #[test]
    fn zero_iterations_is_hop_distance() {
        let g = WeightedGraph::from_edges(3, &[(0, 1, 7.0), (1, 2, 0.1)]).unwrap();
        let state = run_flow(&g, &cfg(0, 0.5)).unwrap();
        assert_eq!(state.weights, vec![1.0, 1.0]);
        assert_eq!(flow_metric(&state, &g).unwrap().get(0, 2), 2.0);
    }

    #[test]
    fn k3_stays_uniform() {
        let state = run_flow(&k3(), &cfg(2, 0.0)).unwrap();
        assert_eq!(state.history.len(), 2);
        assert!(state.weights.iter().all(|&w| w == state.weights[0]));
    }

    #[test]
    fn flat_path_is_fixed_point() {
        // P3 with alpha = 0 has zero curvature, so metric weights are kept
        let p3 = unit(3, &[(0, 1), (1, 2)]);
        let state = run_flow(&p3, &cfg(3, 0.0)).unwrap();
        for w in &state.weights {
            assert!((w - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn negative_curvature_stretches() {
        let mut edges = Vec::new();
        for base in [0, 4] {
            for i in 0..4 {
                for j in (i + 1)..4 {
                    edges.push((base + i, base + j));
                }
            }
        }
        edges.push((0, 4));
        let g = unit(8, &edges);
        let state = run_flow(&g, &cfg(1, 0.5)).unwrap();
        let bridge = g.edge_index(0, 4).unwrap();
        assert!(state.curvatures[bridge] < 0.0);
        assert!(state.weights[bridge] > 1.0);
    }

    #[test]
    fn normalization_preserves_total() {
        let g = unit(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 2)]);
        let state = run_flow(
            &g,
            &FlowConfig {
                iterations: 4,
                normalize: true,
                ..FlowConfig::default()
            },
        )
        .unwrap();
        let total: f64 = state.weights.iter().sum();
        assert!((total - 6.0).abs() < 1e-9);
    }

    #[test]
    fn disconnected_graph_is_rejected() {
        let g = unit(4, &[(0, 1), (2, 3)]);
        assert!(matches!(
            run_flow(&g, &FlowConfig::default()),
            Err(Error::DisconnectedGraph { components: 2 })
        ));
    }
}
