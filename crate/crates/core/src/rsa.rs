//! Representational dissimilarity matrices and their comparison.
//!
//! Correlations run over the strict upper triangle only, so the all-zero
//! diagonal never inflates alignment scores.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::curvature::shortest_path_matrix;
use crate::flow::{flow_metric, FlowState};
use crate::graph::WeightedGraph;
use crate::io::{self, to_distance, DistanceMatrix, Metric, PointSet, PointSetKind};
use crate::{Error, Result};

/// Dissimilarity matrix over identified items, tagged with its metric.
#[derive(Debug, Clone, PartialEq)]
pub struct Rdm {
    ids: Vec<String>,
    matrix: DistanceMatrix,
}

impl Rdm {
    pub fn new(ids: Vec<String>, matrix: DistanceMatrix) -> Self {
        assert_eq!(ids.len(), matrix.n(), "one id per RDM row");
        Self { ids, matrix }
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn metric(&self) -> Metric {
        self.matrix.metric()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    pub fn matrix(&self) -> &DistanceMatrix {
        &self.matrix
    }

    /// Strict upper triangle, row by row.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let n = self.n();
        let mut out = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            out.extend_from_slice(&self.matrix.row(i)[i + 1..]);
        }
        out
    }

    /// Items reordered by `perm` (new position `k` holds old item `perm[k]`).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n();
        let ids = perm.iter().map(|&p| self.ids[p].clone()).collect();
        let d = DistanceMatrix::from_upper(n, self.metric(), |i, j| self.get(perm[i], perm[j]));
        Self::new(ids, d)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>, comment: Option<&str>) -> Result<()> {
        io::write_square(std::fs::File::create(path)?, &self.ids, self.matrix.values(), comment)
    }

    pub fn load_csv(path: impl AsRef<Path>, metric: Metric) -> Result<Self> {
        let (ids, matrix) = io::load_distance_matrix(path, metric)?;
        Ok(Self::new(ids, matrix))
    }
}

/// What an RDM can be built from.
#[derive(Debug, Clone, Copy)]
pub enum RdmSource<'a> {
    Points(&'a PointSet),
    Graph(&'a WeightedGraph),
    Flow {
        graph: &'a WeightedGraph,
        state: &'a FlowState,
    },
}

pub fn build_rdm(source: RdmSource<'_>, metric: Metric) -> Result<Rdm> {
    match (source, metric) {
        (RdmSource::Points(ps), Metric::Euclidean | Metric::Cosine | Metric::Minkowski(_)) => {
            if ps.kind() == PointSetKind::Similarity {
                return Err(Error::MetricUnavailable(format!(
                    "{metric} needs embeddings, got a similarity matrix"
                )));
            }
            Ok(Rdm::new(ps.ids().to_vec(), to_distance(ps, metric)?))
        }
        (RdmSource::Graph(g), Metric::ShortestPath) => {
            Ok(Rdm::new(g.ids().to_vec(), shortest_path_matrix(g)?))
        }
        (RdmSource::Flow { graph, state }, Metric::FlowMetric) => flow_metric(state, graph),
        (RdmSource::Flow { graph, .. }, Metric::ShortestPath) => build_rdm(RdmSource::Graph(graph), metric),
        (_, metric) => Err(Error::MetricUnavailable(format!(
            "{metric} cannot be computed from this source"
        ))),
    }
}

/// Pearson correlation, `None` when either side is constant.
///
/// Pairs are summed in sorted order, so any reordering of the pairs (such as
/// an item permutation applied to both RDMs) gives bit-identical results.
pub(crate) fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let mut pairs: Vec<(f64, f64)> = a.iter().copied().zip(b.iter().copied()).collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));
    let n = pairs.len() as f64;
    let ma = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mb = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for &(x, y) in &pairs {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentScore {
    pub r: f64,
    pub n_pairs: usize,
    pub metrics: (Metric, Metric),
}

fn check_items(a: &Rdm, b: &Rdm, min: usize) -> Result<()> {
    if a.ids != b.ids {
        return Err(Error::NodeSetMismatch("RDMs cover different items".into()));
    }
    if a.n() < min {
        return Err(Error::Validation(format!("need at least {min} items, got {}", a.n())));
    }
    Ok(())
}

/// Pearson correlation of the two RDMs' strict upper triangles.
pub fn rsa_score(a: &Rdm, b: &Rdm) -> Result<AlignmentScore> {
    check_items(a, b, 3)?;
    let (ua, ub) = (a.upper_triangle(), b.upper_triangle());
    let r = pearson(&ua, &ub).ok_or_else(|| Error::ZeroVariance("constant RDM".into()))?;
    Ok(AlignmentScore {
        r,
        n_pairs: ua.len(),
        metrics: (a.metric(), b.metric()),
    })
}

/// Per-item correlation of distance profiles, self-entry excluded.
/// `None` marks rows with zero variance in either RDM.
pub fn profile_analysis(a: &Rdm, b: &Rdm) -> Result<Vec<Option<f64>>> {
    check_items(a, b, 4)?;
    let n = a.n();
    Ok((0..n)
        .map(|i| {
            let ra: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| a.get(i, j)).collect();
            let rb: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| b.get(i, j)).collect();
            pearson(&ra, &rb)
        })
        .collect())
}

/// Symmetric matrix of pairwise RSA scores with unit diagonal.
pub fn alignment_matrix(rdms: &[Rdm]) -> Result<Vec<Vec<f64>>> {
    let k = rdms.len();
    let mut out = vec![vec![1.0; k]; k];
    for i in 0..k {
        for j in (i + 1)..k {
            let r = rsa_score(&rdms[i], &rdms[j])?.r;
            out[i][j] = r;
            out[j][i] = r;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i}")).collect()
    }

    fn random_rdm(n: usize, rng: &mut ChaCha8Rng) -> Rdm {
        Rdm::new(
            ids(n),
            DistanceMatrix::from_upper(n, Metric::Euclidean, |_, _| rng.gen::<f64>()),
        )
    }

    fn map_rdm(a: &Rdm, f: impl Fn(f64) -> f64) -> Rdm {
        Rdm::new(
            a.ids().to_vec(),
            DistanceMatrix::from_upper(a.n(), a.metric(), |i, j| f(a.get(i, j))),
        )
    }

    #[test]
    fn self_alignment_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_rdm(30, &mut rng);
        assert_eq!(rsa_score(&a, &a).unwrap().r, 1.0);
        assert_eq!(rsa_score(&a, &a).unwrap().n_pairs, 435);
        let b = map_rdm(&a, |v| 2.0 * v + 3.0);
        assert!((rsa_score(&a, &b).unwrap().r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_rdm_has_no_score() {
        let a = Rdm::new(ids(4), DistanceMatrix::from_upper(4, Metric::Euclidean, |_, _| 1.0));
        assert!(matches!(rsa_score(&a, &a), Err(Error::ZeroVariance(_))));
    }

    #[test]
    fn identical_points_have_zero_entry() {
        let ps = PointSet::from_embeddings(ids(3), vec![vec![1.0, 2.0], vec![1.0, 2.0], vec![0.0, 0.0]]).unwrap();
        let rdm = build_rdm(RdmSource::Points(&ps), Metric::Euclidean).unwrap();
        assert_eq!(rdm.get(0, 1), 0.0);
    }

    #[test]
    fn metric_availability() {
        let sim = PointSet::from_similarity(ids(3), vec![1.0, 0.5, 0.2, 0.5, 1.0, 0.3, 0.2, 0.3, 1.0]).unwrap();
        assert!(matches!(
            build_rdm(RdmSource::Points(&sim), Metric::Cosine),
            Err(Error::MetricUnavailable(_))
        ));
        let p3 = WeightedGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        assert_eq!(build_rdm(RdmSource::Graph(&p3), Metric::ShortestPath).unwrap().get(0, 2), 2.0);
        assert!(matches!(
            build_rdm(RdmSource::Graph(&p3), Metric::FlowMetric),
            Err(Error::MetricUnavailable(_))
        ));
    }

    #[test]
    fn profiles() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_rdm(12, &mut rng);
        for r in profile_analysis(&a, &a).unwrap() {
            assert!((r.unwrap() - 1.0).abs() < 1e-12);
        }
        let b = random_rdm(12, &mut rng);
        let base = profile_analysis(&a, &b).unwrap();
        let perm: Vec<usize> = (0..12).rev().collect();
        let permuted = profile_analysis(&a.permuted(&perm), &b.permuted(&perm)).unwrap();
        for (k, &p) in perm.iter().enumerate() {
            assert!((permuted[k].unwrap() - base[p].unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn preserved_blocks_score_higher() {
        // block structure over 3 groups of 6; the scrambled copy shuffles
        // the third block's items across groups.
        let n = 18;
        let group = |i: usize| i / 6;
        let a = Rdm::new(
            ids(n),
            DistanceMatrix::from_upper(n, Metric::Euclidean, |i, j| {
                if group(i) == group(j) {
                    1.0 + 0.01 * ((i * 7 + j) % 5) as f64
                } else {
                    5.0 + 0.01 * ((i + j * 3) % 7) as f64
                }
            }),
        );
        let scrambled_group = |i: usize| if i >= 12 { i % 3 } else { group(i) };
        let b = Rdm::new(
            ids(n),
            DistanceMatrix::from_upper(n, Metric::Euclidean, |i, j| {
                if scrambled_group(i) == scrambled_group(j) {
                    1.0 + 0.01 * ((i * 7 + j) % 5) as f64
                } else {
                    5.0 + 0.01 * ((i + j * 3) % 7) as f64
                }
            }),
        );
        let r = profile_analysis(&a, &b).unwrap();
        let kept = r[..6].iter().map(|v| v.unwrap()).fold(f64::INFINITY, f64::min);
        let moved = r[12..].iter().map(|v| v.unwrap()).fold(f64::NEG_INFINITY, f64::max);
        assert!(kept > moved, "{kept} <= {moved}");
        assert!(r.iter().all(|v| v.map_or(true, |x| (-1.0..=1.0).contains(&x))));
    }

    #[test]
    fn alignment_matrix_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_rdm(10, &mut rng);
        assert_eq!(alignment_matrix(std::slice::from_ref(&a)).unwrap(), vec![vec![1.0]]);
        let b = map_rdm(&a, |v| 0.5 * v + 1.0);
        let c = random_rdm(10, &mut rng);
        let m = alignment_matrix(&[a, b, c]).unwrap();
        assert!((m[0][1] - 1.0).abs() < 1e-12);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m[i][j], m[j][i]);
            }
        }
    }

    #[test]
    fn mismatched_items() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_rdm(5, &mut rng);
        let b = a.permuted(&[1, 0, 2, 3, 4]);
        assert!(matches!(rsa_score(&a, &b), Err(Error::NodeSetMismatch(_))));
    }
}
