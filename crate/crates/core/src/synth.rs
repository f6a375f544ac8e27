//! Synthetic representational spaces: torus and swiss-roll point clouds,
//! their sigmoid-compressed variants, and stochastic block model graphs.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::distances::{heat_distance_kernels, laplacian, HeatKernel, HeatOperand, WeightChannel};
use crate::flow::{run_flow, FlowConfig};
use crate::graph::{build_graph, AdaptiveKnnParams, WeightedGraph};
use crate::io::{to_distance, Metric, PointSet};
use crate::rng::stream_rng;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// Surface of revolution with tube radius `minor` around a circle of radius `major`.
    Torus { major: f64, minor: f64 },
    /// Planar spiral `(t cos t, t sin t)` for `t` in `[t_min, t_max]`.
    SwissRoll { t_min: f64, t_max: f64, jitter: f64 },
    /// Planted partition graph.
    Sbm { block_sizes: Vec<usize>, p_in: f64, p_out: f64 },
}

impl Family {
    pub fn torus() -> Self {
        Self::Torus { major: 2.0, minor: 1.0 }
    }

    pub fn swiss_roll() -> Self {
        Self::SwissRoll {
            t_min: 1.5 * PI,
            t_max: 4.5 * PI,
            jitter: 0.05,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Torus { .. } => "torus",
            Self::SwissRoll { .. } => "swiss_roll",
            Self::Sbm { .. } => "sbm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    #[default]
    None,
    Sigmoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    #[serde(flatten)]
    pub family: Family,
    pub n_points: usize,
    #[serde(default)]
    pub transform: Transform,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(family: Family, n_points: usize, transform: Transform, seed: u64) -> Self {
        Self {
            family,
            n_points,
            transform,
            seed,
        }
    }

    pub fn label(&self) -> String {
        match self.transform {
            Transform::None => self.family.name().to_string(),
            Transform::Sigmoid => format!("{}_sigmoid", self.family.name()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = match &self.family {
            Family::Sbm { block_sizes, .. } => block_sizes.iter().sum(),
            _ => self.n_points,
        };
        if n < 10 {
            return Err(Error::InvalidSpec(format!("need at least 10 points, got {n}")));
        }
        match &self.family {
            Family::Torus { major, minor } => {
                if !(*minor > 0.0 && major > minor) {
                    return Err(Error::InvalidSpec(format!(
                        "torus radii must satisfy major > minor > 0, got {major}, {minor}"
                    )));
                }
            }
            Family::SwissRoll { t_min, t_max, jitter } => {
                if !(t_max > t_min && *jitter >= 0.0 && t_min.is_finite() && t_max.is_finite()) {
                    return Err(Error::InvalidSpec("swiss roll needs t_max > t_min and jitter >= 0".into()));
                }
            }
            Family::Sbm { p_in, p_out, .. } => {
                if !((0.0..=1.0).contains(p_in) && (0.0..=1.0).contains(p_out)) {
                    return Err(Error::InvalidSpec("SBM probabilities must lie in [0, 1]".into()));
                }
                if self.transform != Transform::None {
                    return Err(Error::InvalidSpec("SBM graphs take no coordinate transform".into()));
                }
            }
        }
        Ok(())
    }
}

/// Output of a generator.
#[derive(Debug, Clone, PartialEq)]
pub enum Synthetic {
    Points(PointSet),
    Graph { graph: WeightedGraph, labels: Vec<usize> },
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn point_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("p{i:04}")).collect()
}

pub fn generate(spec: &SynthSpec) -> Result<Synthetic> {
    spec.validate()?;
    let mut rng = stream_rng(spec.seed, 0);
    let n = spec.n_points;
    let rows: Vec<Vec<f64>> = match &spec.family {
        Family::Torus { major, minor } => (0..n)
            .map(|_| {
                let u = rng.gen_range(0.0..2.0 * PI);
                let v = rng.gen_range(0.0..2.0 * PI);
                let ring = major + minor * v.cos();
                vec![ring * u.cos(), ring * u.sin(), minor * v.sin()]
            })
            .collect(),
        Family::SwissRoll { t_min, t_max, jitter } => {
            let noise = Normal::new(0.0, *jitter).map_err(|e| Error::InvalidSpec(e.to_string()))?;
            // evenly spaced along t so random gaps cannot split the spiral
            (0..n)
                .map(|i| {
                    let t = t_min + (t_max - t_min) * (i as f64 + 0.5) / n as f64;
                    vec![
                        t * t.cos() + noise.sample(&mut rng),
                        t * t.sin() + noise.sample(&mut rng),
                    ]
                })
                .collect()
        }
        Family::Sbm {
            block_sizes,
            p_in,
            p_out,
        } => return Ok(sbm(block_sizes, *p_in, *p_out, &mut rng)),
    };
    let rows = match spec.transform {
        Transform::None => rows,
        Transform::Sigmoid => rows
            .into_iter()
            .map(|r| r.into_iter().map(sigmoid).collect())
            .collect(),
    };
    Ok(Synthetic::Points(PointSet::from_embeddings(point_ids(n), rows)?))
}

/// Unit-weight planted partition graph. May be disconnected.
fn sbm(block_sizes: &[usize], p_in: f64, p_out: f64, rng: &mut impl Rng) -> Synthetic {
    let labels: Vec<usize> = block_sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &s)| std::iter::repeat(b).take(s))
        .collect();
    let n = labels.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if labels[i] == labels[j] { p_in } else { p_out };
            if rng.gen_bool(p) {
                edges.push((i, j, 1.0));
            }
        }
    }
    let graph = WeightedGraph::new(
        point_ids(n),
        edges.into_iter().map(|(u, v, weight)| crate::graph::Edge { u, v, weight }),
    )
    .expect("generated edges are valid");
    Synthetic::Graph { graph, labels }
}

/// Settings for comparing synthetic point clouds by heat distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatConfig {
    pub channel: WeightChannel,
    pub t_grid: Vec<f64>,
    /// Only used with [`WeightChannel::Flow`].
    pub flow: FlowConfig,
}

impl Default for HeatConfig {
    fn default() -> Self {
        Self {
            channel: WeightChannel::Flow,
            t_grid: crate::distances::default_t_grid(),
            flow: FlowConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyDistanceReport {
    pub labels: Vec<String>,
    pub families: Vec<String>,
    /// Pairwise heat distances, row-major.
    pub distances: Vec<Vec<f64>>,
    pub t_star: Vec<Vec<f64>>,
    pub within_max: Option<f64>,
    pub cross_min: Option<f64>,
    pub passed: bool,
}

impl FamilyDistanceReport {
    /// Fails with the offending pairs when some within-family distance is
    /// not strictly below every cross-family distance.
    pub fn check(&self) -> Result<()> {
        if self.passed {
            return Ok(());
        }
        let k = self.labels.len();
        let mut within = (0, 0, f64::NEG_INFINITY);
        let mut cross = (0, 0, f64::INFINITY);
        for i in 0..k {
            for j in (i + 1)..k {
                let d = self.distances[i][j];
                if self.families[i] == self.families[j] {
                    if d > within.2 {
                        within = (i, j, d);
                    }
                } else if d < cross.2 {
                    cross = (i, j, d);
                }
            }
        }
        Err(Error::CheckFailed(format!(
            "within-family {} vs {} = {} is not below cross-family {} vs {} = {}",
            self.labels[within.0], self.labels[within.1], within.2,
            self.labels[cross.0], self.labels[cross.1], cross.2
        )))
    }
}

fn synth_graph(spec: &SynthSpec, params: &AdaptiveKnnParams) -> Result<WeightedGraph> {
    match generate(spec)? {
        Synthetic::Points(ps) => {
            let d = to_distance(&ps, Metric::Euclidean)?;
            build_graph(ps.ids(), &d, params)
        }
        Synthetic::Graph { .. } => Err(Error::InvalidSpec("family check needs point-cloud families".into())),
    }
}

/// Pairwise heat distances between the graphs of the given datasets.
pub fn family_distance_matrix(
    specs: &[SynthSpec],
    params: &AdaptiveKnnParams,
    heat: &HeatConfig,
) -> Result<FamilyDistanceReport> {
    if let Some(s) = specs.iter().find(|s| s.n_points != specs[0].n_points) {
        return Err(Error::InvalidSpec(format!(
            "{} has {} points, expected {}",
            s.label(),
            s.n_points,
            specs[0].n_points
        )));
    }
    let kernels = specs
        .iter()
        .map(|spec| {
            let g = synth_graph(spec, params)?;
            let flow = match heat.channel {
                WeightChannel::Flow => Some(run_flow(&g, &heat.flow)?.weights),
                _ => None,
            };
            let op = HeatOperand {
                graph: &g,
                flow_weights: flow.as_deref(),
            };
            Ok(HeatKernel::new(laplacian(&op, heat.channel)?))
        })
        .collect::<Result<Vec<_>>>()?;

    let k = specs.len();
    let mut distances = vec![vec![0.0; k]; k];
    let mut t_star = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in (i + 1)..k {
            let (v, t) = heat_distance_kernels(&kernels[i], &kernels[j], &heat.t_grid)?;
            distances[i][j] = v;
            distances[j][i] = v;
            t_star[i][j] = t;
            t_star[j][i] = t;
        }
    }
    let families: Vec<String> = specs.iter().map(|s| s.family.name().to_string()).collect();
    let mut within_max: Option<f64> = None;
    let mut cross_min: Option<f64> = None;
    for i in 0..k {
        for j in (i + 1)..k {
            let d = distances[i][j];
            if families[i] == families[j] {
                within_max = Some(within_max.map_or(d, |m| m.max(d)));
            } else {
                cross_min = Some(cross_min.map_or(d, |m| m.min(d)));
            }
        }
    }
    let passed = match (within_max, cross_min) {
        (Some(w), Some(c)) => w < c,
        _ => true,
    };
    Ok(FamilyDistanceReport {
        labels: specs.iter().map(SynthSpec::label).collect(),
        families,
        distances,
        t_star,
        within_max,
        cross_min,
        passed,
    })
}

/// [`family_distance_matrix`] followed by the within-below-across check.
pub fn family_distance_check(
    specs: &[SynthSpec],
    params: &AdaptiveKnnParams,
    heat: &HeatConfig,
) -> Result<FamilyDistanceReport> {
    let report = family_distance_matrix(specs, params, heat)?;
    report.check()?;
    Ok(report)
}

/// Torus, sigmoid torus, swiss roll, sigmoid swiss roll, all from `seed`.
pub fn standard_families(n_points: usize, seed: u64) -> Vec<SynthSpec> {
    let mut specs = Vec::new();
    for family in [Family::torus(), Family::swiss_roll()] {
        for transform in [Transform::None, Transform::Sigmoid] {
            specs.push(SynthSpec::new(family.clone(), n_points, transform, seed));
        }
    }
    specs
}

impl Synthetic {
    pub fn points(&self) -> Option<&PointSet> {
        match self {
            Self::Points(p) => Some(p),
            Self::Graph { .. } => None,
        }
    }
}
