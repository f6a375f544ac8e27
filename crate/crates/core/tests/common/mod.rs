//! Brute-force reference implementations shared by the integration tests.
//!
//! Nothing here calls into the library's numerical code: distances come from
//! Floyd-Warshall and transport costs from a general LP solver.

#![allow(dead_code)]

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random connected graph: random spanning tree plus extra edges.
pub fn random_connected(rng: &mut impl Rng, n: usize, extra_p: f64, weights: (f64, f64)) -> Vec<(usize, usize, f64)> {
    let mut edges = Vec::new();
    let mut present = vec![vec![false; n]; n];
    for i in 1..n {
        let j = rng.gen_range(0..i);
        present[i][j] = true;
        present[j][i] = true;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if !present[i][j] && rng.gen_bool(extra_p) {
                present[i][j] = true;
                present[j][i] = true;
            }
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if present[i][j] {
                let w = if weights.0 == weights.1 {
                    weights.0
                } else {
                    rng.gen_range(weights.0..weights.1)
                };
                edges.push((i, j, w));
            }
        }
    }
    edges
}

pub fn floyd_warshall(n: usize, edges: &[(usize, usize, f64)]) -> Vec<Vec<f64>> {
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for &(u, v, w) in edges {
        d[u][v] = d[u][v].min(w);
        d[v][u] = d[v][u].min(w);
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

/// Minimum-cost transport between two discrete measures, solved as an LP
/// over all `|a| x |b|` plan entries.
pub fn lp_transport(a: &[f64], b: &[f64], cost: impl Fn(usize, usize) -> f64) -> f64 {
    let mut p = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<Vec<_>> = (0..a.len())
        .map(|i| (0..b.len()).map(|j| p.add_var(cost(i, j), (0.0, f64::INFINITY))).collect())
        .collect();
    for (i, &ai) in a.iter().enumerate() {
        let terms: Vec<_> = vars[i].iter().map(|&v| (v, 1.0)).collect();
        p.add_constraint(terms.as_slice(), ComparisonOp::Eq, ai);
    }
    // one column constraint is implied by the others
    for (j, &bj) in b.iter().enumerate().skip(1) {
        let terms: Vec<_> = vars.iter().map(|row| (row[j], 1.0)).collect();
        p.add_constraint(terms.as_slice(), ComparisonOp::Eq, bj);
    }
    let sol = p.solve().expect("transport LP is feasible");
    let mut total = 0.0;
    for (i, row) in vars.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            total += cost(i, j) * sol[v];
        }
    }
    total
}

/// Lazy uniform neighbourhood measure over all nodes.
pub fn lazy_measure(n: usize, edges: &[(usize, usize, f64)], x: usize, alpha: f64) -> Vec<f64> {
    let nbrs: Vec<usize> = edges
        .iter()
        .filter_map(|&(u, v, _)| if u == x { Some(v) } else if v == x { Some(u) } else { None })
        .collect();
    let mut m = vec![0.0; n];
    m[x] = alpha;
    for &y in &nbrs {
        m[y] += (1.0 - alpha) / nbrs.len() as f64;
    }
    m
}

/// Ollivier-Ricci curvature of every edge, by LP.
pub fn lp_orc(n: usize, edges: &[(usize, usize, f64)], alpha: f64) -> Vec<f64> {
    let d = floyd_warshall(n, edges);
    edges
        .iter()
        .map(|&(x, y, _)| {
            let (mx, my) = (lazy_measure(n, edges, x, alpha), lazy_measure(n, edges, y, alpha));
            let sx: Vec<usize> = (0..n).filter(|&i| mx[i] > 0.0).collect();
            let sy: Vec<usize> = (0..n).filter(|&i| my[i] > 0.0).collect();
            let a: Vec<f64> = sx.iter().map(|&i| mx[i]).collect();
            let b: Vec<f64> = sy.iter().map(|&j| my[j]).collect();
            let w = lp_transport(&a, &b, |i, j| d[sx[i]][sy[j]]);
            1.0 - w / d[x][y]
        })
        .collect()
}

/// W1 between two empirical samples with uniform weights, by LP.
pub fn lp_w1(a: &[f64], b: &[f64]) -> f64 {
    let wa = vec![1.0 / a.len() as f64; a.len()];
    let wb = vec![1.0 / b.len() as f64; b.len()];
    lp_transport(&wa, &wb, |i, j| (a[i] - b[j]).abs())
}
