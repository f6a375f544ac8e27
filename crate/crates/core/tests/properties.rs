//! Property tests for the invariants every stage promises.

mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

use curvalign::community::{canonical_labels, detect_communities, ThresholdStrategy};
use curvalign::distances::{
    default_t_grid, heat_distance, subsample_protocol, wasserstein_1d, HeatOperand, WeightChannel,
};
use curvalign::gmm::{fit_gmm, select_gmm};
use curvalign::graph::{assign_k, local_density, DensityKernel};
use curvalign::io::{load_pointset, save_pointset, to_distance};
use curvalign::rsa::{profile_analysis, rsa_score};
use curvalign::synth::{generate, Family, SynthSpec, Transform};
use curvalign::{
    build_graph, orc_all, run_flow, AdaptiveKnnParams, DistanceMatrix, Error, FlowConfig, Metric, PointSet,
    PointSetKind, Rdm, WeightedGraph,
};

use common::{random_connected, rng};

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("x{i}")).collect()
}

fn points(seed: u64, n: usize, dim: usize) -> PointSet {
    let mut r = rng(seed);
    let rows = (0..n).map(|_| (0..dim).map(|_| r.gen_range(-3.0..3.0)).collect()).collect();
    PointSet::from_embeddings(ids(n), rows).unwrap()
}

fn random_graph(seed: u64, n: usize) -> (WeightedGraph, Vec<(usize, usize, f64)>) {
    let edges = random_connected(&mut rng(seed), n, 0.3, (0.1, 5.0));
    (WeightedGraph::from_edges(n, &edges).unwrap(), edges)
}

/// The same graph with node `i` renamed `perm[i]`.
fn relabel(n: usize, edges: &[(usize, usize, f64)], perm: &[usize]) -> WeightedGraph {
    let e: Vec<_> = edges
        .iter()
        .map(|&(u, v, w)| (perm[u].min(perm[v]), perm[u].max(perm[v]), w))
        .collect();
    WeightedGraph::from_edges(n, &e).unwrap()
}

fn random_rdm(seed: u64, n: usize) -> Rdm {
    let mut r = rng(seed);
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let x: f64 = r.gen_range(0.0..10.0);
            v[i * n + j] = x;
            v[j * n + i] = x;
        }
    }
    Rdm::new(ids(n), DistanceMatrix::new(n, v, Metric::Euclidean).unwrap())
}

fn metric_strategy() -> impl Strategy<Value = Metric> {
    prop_oneof![
        Just(Metric::Euclidean),
        Just(Metric::Cosine),
        (1.0f64..5.0).prop_map(Metric::Minkowski),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn distances_are_exactly_symmetric(seed in any::<u64>(), n in 2usize..25, dim in 1usize..6, metric in metric_strategy()) {
        let d = to_distance(&points(seed, n, dim), metric).unwrap();
        for i in 0..n {
            prop_assert_eq!(d.get(i, i), 0.0);
            for j in 0..n {
                prop_assert_eq!(d.get(i, j), d.get(j, i));
            }
        }
    }

    #[test]
    fn similarity_with_unit_diagonal_gives_zero_diagonal(seed in any::<u64>(), n in 2usize..20) {
        let mut r = rng(seed);
        let mut s = vec![1.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let x = r.gen_range(0.0..1.5);
                s[i * n + j] = x;
                s[j * n + i] = x;
            }
        }
        let d = to_distance(&PointSet::from_similarity(ids(n), s).unwrap(), Metric::FromSimilarity).unwrap();
        for i in 0..n {
            prop_assert_eq!(d.get(i, i), 0.0);
            for j in 0..n {
                prop_assert!(d.get(i, j) >= 0.0);
            }
        }
    }

    #[test]
    fn pointset_csv_round_trip(seed in any::<u64>(), n in 2usize..20, dim in 1usize..5) {
        let ps = points(seed, n, dim);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        save_pointset(&path, &ps, Some("round trip")).unwrap();
        let back = load_pointset(&path, PointSetKind::Embeddings).unwrap();
        prop_assert_eq!(back.ids(), ps.ids());
        let (a, b) = (to_distance(&ps, Metric::Euclidean).unwrap(), to_distance(&back, Metric::Euclidean).unwrap());
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn graph_respects_assigned_degrees(seed in any::<u64>(), n in 12usize..40, k_min in 2usize..5, extra in 0usize..5) {
        let ps = points(seed, n, 2);
        let d = to_distance(&ps, Metric::Euclidean).unwrap();
        let params = AdaptiveKnnParams::new(k_min, k_min + extra);
        let g = match build_graph(ps.ids(), &d, &params) {
            Ok(g) => g,
            Err(Error::DisconnectedGraph { .. }) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        let k = assign_k(&local_density(&d, params.k_max, DensityKernel::Mean).unwrap(), &params);
        for i in 0..n {
            prop_assert!(g.degree(i) >= k[i]);
        }
        for e in g.edges() {
            prop_assert_eq!(e.weight, d.get(e.u, e.v));
        }
        prop_assert_eq!(build_graph(ps.ids(), &d, &params).unwrap(), g);
    }

    #[test]
    fn curvature_is_bounded_and_label_free(seed in any::<u64>(), n in 2usize..12) {
        let (g, edges) = random_graph(seed, n);
        let base = orc_all(&g, 0.5).unwrap();
        for e in &base.edges {
            prop_assert!(e.kappa <= 1.0 + 1e-12);
        }
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng(seed ^ 1));
        let moved = orc_all(&relabel(n, &edges, &perm), 0.5).unwrap();
        for e in &base.edges {
            let k = moved.edges.iter().find(|m| (m.u, m.v) == (perm[e.u].min(perm[e.v]), perm[e.u].max(perm[e.v]))).unwrap();
            prop_assert!((k.kappa - e.kappa).abs() <= 1e-12);
        }
    }

    #[test]
    fn communities_ignore_node_names(seed in any::<u64>(), n in 4usize..14) {
        let (g, edges) = random_graph(seed, n);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng(seed ^ 2));
        let h = relabel(n, &edges, &perm);
        let cfg = FlowConfig { iterations: 10, ..FlowConfig::default() };
        let a = detect_communities(&g, &run_flow(&g, &cfg).unwrap(), ThresholdStrategy::ModularityScan).unwrap();
        let b = detect_communities(&h, &run_flow(&h, &cfg).unwrap(), ThresholdStrategy::ModularityScan).unwrap();
        // read b's labels back in g's node order
        let pulled: Vec<usize> = (0..n).map(|i| b.labels[perm[i]]).collect();
        prop_assert_eq!(canonical_labels(&pulled), a.labels);
    }

    #[test]
    fn heat_distance_identity_and_symmetry(sa in any::<u64>(), sb in any::<u64>(), n in 2usize..12) {
        let (a, _) = random_graph(sa, n);
        let (b, _) = random_graph(sb, n);
        let grid = default_t_grid();
        for ch in [WeightChannel::Unit, WeightChannel::Construction] {
            let (oa, ob) = (HeatOperand::new(&a), HeatOperand::new(&b));
            prop_assert_eq!(heat_distance(&oa, &oa, ch, &grid).unwrap().value, 0.0);
            let ab = heat_distance(&oa, &ob, ch, &grid).unwrap();
            let ba = heat_distance(&ob, &oa, ch, &grid).unwrap();
            prop_assert_eq!(ab.value, ba.value);
            prop_assert!(ab.value >= 0.0);
        }
    }

    #[test]
    fn w1_is_a_metric(
        a in prop::collection::vec(-2.0f64..2.0, 1..40),
        b in prop::collection::vec(-2.0f64..2.0, 1..40),
        c in prop::collection::vec(-2.0f64..2.0, 1..40),
    ) {
        let w = |x: &[f64], y: &[f64]| wasserstein_1d(x, y).unwrap();
        prop_assert_eq!(w(&a, &a), 0.0);
        prop_assert!((w(&a, &b) - w(&b, &a)).abs() <= 1e-12);
        prop_assert!(w(&a, &c) <= w(&a, &b) + w(&b, &c) + 1e-9);
    }

    #[test]
    fn gmm_selection_is_minimal_and_repeatable(seed in any::<u64>(), n in 20usize..120) {
        let mut r = rng(seed);
        let xs: Vec<f64> = (0..n).map(|i| r.gen_range(-1.0..1.0) + if i % 3 == 0 { 3.0 } else { 0.0 }).collect();
        let sel = select_gmm(&xs, 4, seed).unwrap();
        for c in &sel.candidates {
            prop_assert!(sel.best.bic <= c.bic);
        }
        prop_assert_eq!(&select_gmm(&xs, 4, seed).unwrap(), &sel);
        let fit = fit_gmm(&xs, 2, seed).unwrap();
        for w in fit.trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-10);
        }
    }

    #[test]
    fn rsa_permutation_and_affine_invariance(sa in any::<u64>(), sb in any::<u64>(), n in 4usize..30, scale in 0.1f64..10.0, shift in 0.0f64..5.0) {
        let (a, b) = (random_rdm(sa, n), random_rdm(sb, n));
        let base = rsa_score(&a, &b).unwrap().r;
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng(sa ^ sb));
        prop_assert_eq!(rsa_score(&a.permuted(&perm), &b.permuted(&perm)).unwrap().r, base);

        let v = (0..n * n).map(|k| if k / n == k % n { 0.0 } else { scale * b.matrix().values()[k] + shift }).collect();
        let moved = Rdm::new(b.ids().to_vec(), DistanceMatrix::new(n, v, Metric::Euclidean).unwrap());
        prop_assert!((rsa_score(&a, &moved).unwrap().r - base).abs() <= 1e-12);

        for r in profile_analysis(&a, &b).unwrap().into_iter().flatten() {
            prop_assert!((-1.0..=1.0).contains(&r));
        }
    }

    #[test]
    fn generators_are_pure(seed in any::<u64>(), n in 10usize..80, sigmoid in any::<bool>(), torus in any::<bool>()) {
        let family = if torus { Family::torus() } else { Family::swiss_roll() };
        let transform = if sigmoid { Transform::Sigmoid } else { Transform::None };
        let spec = SynthSpec::new(family, n, transform, seed);
        let a = generate(&spec).unwrap().points().unwrap().clone();
        prop_assert_eq!(&generate(&spec).unwrap().points().unwrap().clone(), &a);
        prop_assert_eq!(a.len(), n);
        if sigmoid {
            let raw = generate(&SynthSpec::new(spec.family.clone(), n, Transform::None, seed)).unwrap();
            let raw = raw.points().unwrap();
            // the sigmoid is strictly increasing per coordinate: distinct inputs stay distinct
            let (dr, ds) = (to_distance(raw, Metric::Euclidean).unwrap(), to_distance(&a, Metric::Euclidean).unwrap());
            for i in 0..n {
                for j in (i + 1)..n {
                    prop_assert_eq!(dr.get(i, j) > 0.0, ds.get(i, j) > 0.0);
                }
            }
        }
    }

    #[test]
    fn subsample_mean_lies_within_observed_range(seed in any::<u64>(), n_iter in 1usize..30, m in 1usize..20) {
        let data: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let s = subsample_protocol(40, m, n_iter, seed, |idx| Ok(idx.iter().map(|&i| data[i]).sum::<f64>() / idx.len() as f64)).unwrap();
        prop_assert!(s.mean >= -1.0 && s.mean <= 1.0);
        prop_assert!(s.std >= 0.0);
        prop_assert_eq!(s.redraws, 0);
        let again = subsample_protocol(40, m, n_iter, seed, |idx| Ok(idx.iter().map(|&i| data[i]).sum::<f64>() / idx.len() as f64)).unwrap();
        prop_assert_eq!(again, s);
    }
}
