//! Distances between graphs and between curvature distributions.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curvature::CurvatureMap;
use crate::graph::WeightedGraph;
use crate::rng::stream_rng;
use crate::{Error, Result};

/// Which edge weights enter the Laplacian `L = D - W`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightChannel {
    Unit,
    Construction,
    Flow,
}

impl FromStr for WeightChannel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit" => Ok(Self::Unit),
            "construction" => Ok(Self::Construction),
            "flow" => Ok(Self::Flow),
            other => Err(Error::InvalidParameter(format!("unknown weight channel `{other}`"))),
        }
    }
}

impl fmt::Display for WeightChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Unit => "unit",
            Self::Construction => "construction",
            Self::Flow => "flow",
        })
    }
}

/// A graph together with its post-flow weights, when available.
#[derive(Debug, Clone, Copy)]
pub struct HeatOperand<'a> {
    pub graph: &'a WeightedGraph,
    pub flow_weights: Option<&'a [f64]>,
}

impl<'a> HeatOperand<'a> {
    pub fn new(graph: &'a WeightedGraph) -> Self {
        Self {
            graph,
            flow_weights: None,
        }
    }

    pub fn with_flow(graph: &'a WeightedGraph, flow_weights: &'a [f64]) -> Self {
        Self {
            graph,
            flow_weights: Some(flow_weights),
        }
    }

    /// Flow weights when present, construction weights otherwise.
    pub fn default_channel(&self) -> WeightChannel {
        if self.flow_weights.is_some() {
            WeightChannel::Flow
        } else {
            WeightChannel::Construction
        }
    }

    fn edge_weights(&self, channel: WeightChannel) -> Result<Vec<f64>> {
        match channel {
            WeightChannel::Unit => Ok(vec![1.0; self.graph.n_edges()]),
            WeightChannel::Construction => Ok(self.graph.weights()),
            WeightChannel::Flow => self.flow_weights.map(<[f64]>::to_vec).ok_or_else(|| {
                Error::InvalidParameter("flow weights requested but no flow has been run".into())
            }),
        }
    }
}

/// Combinatorial Laplacian `D - W` of the graph under a weight channel.
pub fn laplacian(op: &HeatOperand<'_>, channel: WeightChannel) -> Result<DMatrix<f64>> {
    let g = op.graph;
    let weights = op.edge_weights(channel)?;
    if weights.len() != g.n_edges() {
        return Err(Error::Validation("weight count does not match edge count".into()));
    }
    let n = g.n_nodes();
    let mut l = DMatrix::zeros(n, n);
    for (e, w) in g.edges().iter().zip(weights) {
        l[(e.u, e.v)] -= w;
        l[(e.v, e.u)] -= w;
        l[(e.u, e.u)] += w;
        l[(e.v, e.v)] += w;
    }
    Ok(l)
}

/// `exp(-t L)` evaluations from one eigendecomposition of `L`.
pub struct HeatKernel {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl HeatKernel {
    pub fn new(laplacian: DMatrix<f64>) -> Self {
        let eig = SymmetricEigen::new(laplacian);
        Self {
            eigenvalues: eig.eigenvalues.iter().copied().collect(),
            eigenvectors: eig.eigenvectors,
        }
    }

    pub fn at(&self, t: f64) -> Result<DMatrix<f64>> {
        let mut scaled = self.eigenvectors.clone();
        for (k, &lambda) in self.eigenvalues.iter().enumerate() {
            let f = (-t * lambda).exp();
            if !f.is_finite() {
                return Err(Error::NonFiniteExponential { t });
            }
            scaled.column_mut(k).scale_mut(f);
        }
        Ok(&scaled * self.eigenvectors.transpose())
    }
}

/// Log-spaced grid of `points` values from `10^lo` to `10^hi`.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![10f64.powf(lo)];
    }
    (0..points)
        .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (points - 1) as f64))
        .collect()
}

/// Default time grid: 20 log-spaced points over `[1e-2, 1e1]`.
pub fn default_t_grid() -> Vec<f64> {
    log_grid(-2.0, 1.0, 20)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatDistance {
    pub value: f64,
    pub t_star: f64,
    pub channel: WeightChannel,
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() || t_grid.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::InvalidParameter("time grid must be nonempty with t > 0".into()));
    }
    Ok(())
}

/// `max_t ||exp(-t L1) - exp(-t L2)||_F^2` over `t_grid`, with the maximizing
/// `t` (earliest on ties).
pub fn heat_distance(
    a: &HeatOperand<'_>,
    b: &HeatOperand<'_>,
    channel: WeightChannel,
    t_grid: &[f64],
) -> Result<HeatDistance> {
    check_grid(t_grid)?;
    if a.graph.ids() != b.graph.ids() {
        return Err(Error::NodeSetMismatch(
            "heat distance needs identical node sets in identical order".into(),
        ));
    }
    let ka = HeatKernel::new(laplacian(a, channel)?);
    let kb = HeatKernel::new(laplacian(b, channel)?);
    heat_distance_kernels(&ka, &kb, t_grid).map(|(value, t_star)| HeatDistance {
        value,
        t_star,
        channel,
    })
}

/// Grid maximum of the squared Frobenius distance between two heat kernels.
pub fn heat_distance_kernels(a: &HeatKernel, b: &HeatKernel, t_grid: &[f64]) -> Result<(f64, f64)> {
    check_grid(t_grid)?;
    let values = t_grid
        .par_iter()
        .map(|&t| {
            let diff = a.at(t)? - b.at(t)?;
            Ok(diff.iter().map(|x| x * x).sum::<f64>())
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut best = (values[0], t_grid[0]);
    for (&v, &t) in values.iter().zip(t_grid).skip(1) {
        if v > best.0 {
            best = (v, t);
        }
    }
    Ok(best)
}

fn sorted_finite(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.is_empty() {
        return Err(Error::EmptyCurvatureMap);
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::Validation("non-finite sample value".into()));
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Exact 1-D Wasserstein-1 distance: integral of |F_a - F_b| over the
/// merged support. Handles unequal sample sizes.
pub fn wasserstein_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    let a = sorted_finite(a)?;
    let b = sorted_finite(b)?;
    let mut all: Vec<f64> = a.iter().chain(&b).copied().collect();
    all.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut ia, mut ib) = (0usize, 0usize);
    let mut total = 0.0;
    for w in all.windows(2) {
        let x = w[0];
        while ia < a.len() && a[ia] <= x {
            ia += 1;
        }
        while ib < b.len() && b[ib] <= x {
            ib += 1;
        }
        total += (ia as f64 / na - ib as f64 / nb).abs() * (w[1] - w[0]);
    }
    Ok(total)
}

pub fn curvature_w1(a: &CurvatureMap, b: &CurvatureMap) -> Result<f64> {
    wasserstein_1d(&a.values(), &b.values())
}

/// `KL(P || Q)` between Laplace-smoothed histograms over the joint range.
pub fn histogram_kld(a: &[f64], b: &[f64], bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 bins, got {bins}")));
    }
    let a = sorted_finite(a)?;
    let b = sorted_finite(b)?;
    let lo = a[0].min(b[0]);
    let hi = a[a.len() - 1].max(b[b.len() - 1]);
    let width = (hi - lo) / bins as f64;
    let hist = |xs: &[f64]| {
        let mut counts = vec![1.0; bins];
        for &x in xs {
            let k = if width > 0.0 {
                (((x - lo) / width) as usize).min(bins - 1)
            } else {
                0
            };
            counts[k] += 1.0;
        }
        let total: f64 = counts.iter().sum();
        counts.into_iter().map(|c| c / total).collect::<Vec<f64>>()
    };
    let (p, q) = (hist(&a), hist(&b));
    Ok(p.iter()
        .zip(&q)
        .map(|(pi, qi)| pi * (pi / qi).ln())
        .sum::<f64>()
        .max(0.0))
}

pub fn curvature_kld(a: &CurvatureMap, b: &CurvatureMap, bins: usize) -> Result<f64> {
    histogram_kld(&a.values(), &b.values(), bins)
}

pub const DEFAULT_SUBSET: usize = 70;
pub const DEFAULT_SUBSAMPLE_ITERATIONS: usize = 100;
/// Failed draws tolerated per requested iteration before giving up.
const MAX_REDRAWS_PER_ITER: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsampleStats {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub n_iter: usize,
    pub n_subset: usize,
    pub seed: u64,
    pub redraws: usize,
}

/// The sorted index subset drawn for `draw` under `seed`.
///
/// Draw `k` uses RNG stream `k`; redraws after a failure continue with the
/// next unused stream, so results do not depend on evaluation order.
pub fn subset_for_draw(n_total: usize, n_subset: usize, seed: u64, draw: u64) -> Vec<usize> {
    let mut rng = stream_rng(seed, draw);
    let mut idx = index::sample(&mut rng, n_total, n_subset).into_vec();
    idx.sort_unstable();
    idx
}

/// Mean and population std of `f` over `n_iter` random `n_subset`-subsets
/// of `0..n_total`. Draws on which `f` fails are redrawn and counted.
pub fn subsample_protocol<F>(n_total: usize, n_subset: usize, n_iter: usize, seed: u64, mut f: F) -> Result<SubsampleStats>
where
    F: FnMut(&[usize]) -> Result<f64>,
{
    if n_iter == 0 || n_subset == 0 || n_subset > n_total {
        return Err(Error::InvalidParameter(format!(
            "cannot draw {n_iter} subsets of size {n_subset} from {n_total} items"
        )));
    }
    let mut values = Vec::with_capacity(n_iter);
    let mut draw = 0u64;
    let mut redraws = 0usize;
    let mut last_err = None;
    while values.len() < n_iter {
        if redraws > MAX_REDRAWS_PER_ITER * n_iter {
            return Err(Error::SubsetTooSmall(format!(
                "{redraws} failed draws; last error: {}",
                last_err.map_or_else(String::new, |e: Error| e.to_string())
            )));
        }
        let subset = subset_for_draw(n_total, n_subset, seed, draw);
        draw += 1;
        match f(&subset) {
            Ok(v) => values.push(v),
            Err(e) => {
                log::warn!("subsample draw {} failed: {e}", draw - 1);
                redraws += 1;
                last_err = Some(e);
            }
        }
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok(SubsampleStats {
        mean,
        std: var.sqrt(),
        n_iter,
        n_subset,
        seed,
        redraws,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_graph_has_zero_heat_distance() {
        let g = WeightedGraph::from_edges(4, &[(0, 1, 1.0), (1, 2, 2.0), (2, 3, 0.5), (0, 3, 1.0)]).unwrap();
        let op = HeatOperand::new(&g);
        let d = heat_distance(&op, &op, WeightChannel::Construction, &default_t_grid()).unwrap();
        assert_eq!(d.value, 0.0);
    }

    #[test]
    fn edge_versus_empty() {
        let g1 = WeightedGraph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        let g2 = WeightedGraph::from_edges(2, &[]).unwrap();
        let d = heat_distance(&HeatOperand::new(&g1), &HeatOperand::new(&g2), WeightChannel::Unit, &[1.0]).unwrap();
        // exp(-L1) - I = (e^-2 - 1)/2 * [[1,-1],[-1,1]]
        let c = ((-2f64).exp() - 1.0) / 2.0;
        assert!((d.value - 4.0 * c * c).abs() < 1e-12);
        assert_eq!(d.t_star, 1.0);
    }

    #[test]
    fn heat_rejects_mismatches() {
        let g1 = WeightedGraph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        let g2 = WeightedGraph::from_edges(3, &[(0, 1, 1.0)]).unwrap();
        assert!(matches!(
            heat_distance(&HeatOperand::new(&g1), &HeatOperand::new(&g2), WeightChannel::Unit, &[1.0]),
            Err(Error::NodeSetMismatch(_))
        ));
        assert!(heat_distance(&HeatOperand::new(&g1), &HeatOperand::new(&g1), WeightChannel::Unit, &[]).is_err());
        assert!(heat_distance(&HeatOperand::new(&g1), &HeatOperand::new(&g1), WeightChannel::Flow, &[1.0]).is_err());
    }

    #[test]
    fn grid() {
        let g = default_t_grid();
        assert_eq!(g.len(), 20);
        assert!((g[0] - 0.01).abs() < 1e-15);
        assert!((g[19] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn w1_small_cases() {
        assert_eq!(wasserstein_1d(&[0.3, 0.1], &[0.1, 0.3]).unwrap(), 0.0);
        assert_eq!(wasserstein_1d(&[0.0], &[1.0]).unwrap(), 1.0);
        assert_eq!(wasserstein_1d(&[0.0, 1.0], &[0.0, 2.0]).unwrap(), 0.5);
        // unequal sizes: {0} vs {0, 1}: half the mass moves by 1
        assert_eq!(wasserstein_1d(&[0.0], &[0.0, 1.0]).unwrap(), 0.5);
        assert!(matches!(wasserstein_1d(&[], &[1.0]), Err(Error::EmptyCurvatureMap)));
    }

    #[test]
    fn kld_behaviour() {
        let a: Vec<f64> = (0..1000).map(|i| (i as f64 / 1000.0).sin()).collect();
        assert_eq!(histogram_kld(&a, &a, 20).unwrap(), 0.0);
        let b: Vec<f64> = a.iter().map(|x| x + 5.0).collect();
        assert!(histogram_kld(&a, &b, 20).unwrap() > 0.1);
        assert!(histogram_kld(&a, &b, 1).is_err());
        // zero-width range: everything in bin 0, then +1 smoothing
        let expected = 0.4 * (0.4f64 / 0.5).ln() + 3.0 * 0.2 * (0.2f64 * 6.0).ln();
        assert!((histogram_kld(&[1.0], &[1.0, 1.0], 4).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn constant_closure() {
        let s = subsample_protocol(100, 70, 25, 4, |_| Ok(2.5)).unwrap();
        assert_eq!((s.mean, s.std), (2.5, 0.0));
    }

    #[test]
    fn deterministic_draws_and_redraws() {
        let run = || {
            let mut calls = 0;
            subsample_protocol(30, 10, 8, 77, |s| {
                calls += 1;
                if calls % 3 == 0 {
                    Err(Error::DisconnectedGraph { components: 2 })
                } else {
                    Ok(s.iter().sum::<usize>() as f64)
                }
            })
            .unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a, b);
        assert!(a.redraws > 0);
        let s = subset_for_draw(30, 10, 77, 0);
        assert_eq!(s.len(), 10);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn persistent_failure_is_reported() {
        let r = subsample_protocol(30, 10, 3, 1, |_| Err(Error::DisconnectedGraph { components: 2 }));
        assert!(matches!(r, Err(Error::SubsetTooSmall(_))));
        assert!(subsample_protocol(5, 10, 3, 1, |_| Ok(0.0)).is_err());
    }
}
