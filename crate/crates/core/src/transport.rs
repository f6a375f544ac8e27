//! Exact discrete optimal transport.
//!
//! Solves the balanced transportation problem
//! `min sum_ij c_ij x_ij  s.t.  sum_j x_ij = a_i, sum_i x_ij = b_j, x >= 0`.
//! The primary solver is the transportation simplex (least-cost start, MODI
//! pricing). Successive shortest augmenting paths serve as a fallback when
//! the simplex exceeds its pivot budget, e.g. on degenerate cycling.

use crate::{Error, Result};

/// Masses below this are treated as exhausted.
const MASS_EPS: f64 = 1e-14;
/// Allowed mismatch between total supply and total demand.
pub const BALANCE_TOL: f64 = 1e-9;

const NONE: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub cost: f64,
    /// Nonzero entries `(source, sink, mass)`, sorted.
    pub flows: Vec<(usize, usize, f64)>,
}

fn validate(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<(f64, f64)> {
    let (m, n) = (supply.len(), demand.len());
    if cost.len() != m * n {
        return Err(Error::InfeasibleTransport(format!(
            "cost matrix has {} entries for a {m}x{n} problem",
            cost.len()
        )));
    }
    if let Some(c) = cost.iter().find(|c| !c.is_finite() || **c < 0.0) {
        return Err(Error::InfeasibleTransport(format!("invalid ground cost {c}")));
    }
    if supply.iter().chain(demand).any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InfeasibleTransport("masses must be finite and nonnegative".into()));
    }
    let total_s: f64 = supply.iter().sum();
    let total_d: f64 = demand.iter().sum();
    if (total_s - total_d).abs() > BALANCE_TOL {
        return Err(Error::InfeasibleTransport(format!(
            "supply {total_s} does not match demand {total_d}"
        )));
    }
    Ok((total_s, total_d))
}

fn plan_from(flows: Vec<(usize, usize, f64)>, n: usize, cost: &[f64]) -> TransportPlan {
    let mut flows: Vec<_> = flows.into_iter().filter(|f| f.2 > 0.0).collect();
    flows.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let cost = flows.iter().map(|&(i, j, x)| x * cost[i * n + j]).sum();
    TransportPlan { cost, flows }
}

/// Optimal plan moving `supply` onto `demand` under row-major `cost`
/// (`supply.len()` rows, `demand.len()` columns).
pub fn solve(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<TransportPlan> {
    let (total_s, total_d) = validate(supply, demand, cost)?;
    let n = demand.len();
    if total_s <= MASS_EPS || total_d <= MASS_EPS {
        return Ok(TransportPlan {
            cost: 0.0,
            flows: Vec::new(),
        });
    }
    // drop empty atoms and rescale demand to the supply total
    let eps = MASS_EPS * total_s.max(1.0);
    let rows: Vec<usize> = (0..supply.len()).filter(|&i| supply[i] > eps).collect();
    let cols: Vec<usize> = (0..n).filter(|&j| demand[j] > eps).collect();
    let a: Vec<f64> = rows.iter().map(|&i| supply[i]).collect();
    let b_total: f64 = cols.iter().map(|&j| demand[j]).sum();
    let a_total: f64 = a.iter().sum();
    let b: Vec<f64> = cols.iter().map(|&j| demand[j] * (a_total / b_total)).collect();
    let mut c = Vec::with_capacity(a.len() * b.len());
    for &i in &rows {
        for &j in &cols {
            c.push(cost[i * n + j]);
        }
    }
    let flows = match simplex(&a, &b, &c) {
        Some(f) => f,
        None => shortest_paths(&a, &b, &c)?,
    };
    let flows = flows.into_iter().map(|(i, j, x)| (rows[i], cols[j], x)).collect();
    Ok(plan_from(flows, n, cost))
}

/// Transportation simplex; `None` when the pivot budget runs out.
///
/// Expects positive, balanced masses.
pub fn simplex(a: &[f64], b: &[f64], c: &[f64]) -> Option<Vec<(usize, usize, f64)>> {
    let (m, n) = (a.len(), b.len());
    let cmax = c.iter().copied().fold(0.0, f64::max);
    let tol = 1e-12 * cmax.max(f64::MIN_POSITIVE);

    // least-cost start; every allocation retires exactly one row or column,
    // so the m + n - 1 allocated cells span a tree
    let (mut ra, mut rb) = (a.to_vec(), b.to_vec());
    let (mut row_on, mut col_on) = (vec![true; m], vec![true; n]);
    let (mut rows_left, mut cols_left) = (m, n);
    let mut basis: Vec<(usize, usize, f64)> = Vec::with_capacity(m + n - 1);
    while basis.len() < m + n - 1 {
        let mut best = (NONE, NONE, f64::INFINITY);
        for i in (0..m).filter(|&i| row_on[i]) {
            for j in (0..n).filter(|&j| col_on[j]) {
                if c[i * n + j] < best.2 {
                    best = (i, j, c[i * n + j]);
                }
            }
        }
        let (i, j, _) = best;
        let row_done = ra[i] <= rb[j];
        let q = ra[i].min(rb[j]);
        ra[i] -= q;
        rb[j] -= q;
        basis.push((i, j, q));
        if (row_done && rows_left > 1) || cols_left == 1 {
            row_on[i] = false;
            rows_left -= 1;
        } else {
            col_on[j] = false;
            cols_left -= 1;
        }
    }

    let nodes = m + n;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    let mut u = vec![0.0; m];
    let mut v = vec![0.0; n];
    let mut seen = vec![false; nodes];
    let mut via = vec![NONE; nodes];
    let mut queue = Vec::with_capacity(nodes);
    let max_pivots = 20 * nodes * nodes;

    for _ in 0..max_pivots {
        for list in &mut adj {
            list.clear();
        }
        for (k, &(i, j, _)) in basis.iter().enumerate() {
            adj[i].push(k);
            adj[m + j].push(k);
        }
        // dual potentials u_i + v_j = c_ij on basic cells
        seen.fill(false);
        queue.clear();
        queue.push(0);
        seen[0] = true;
        u[0] = 0.0;
        let mut head = 0;
        while head < queue.len() {
            let node = queue[head];
            head += 1;
            for &k in &adj[node] {
                let (i, j, _) = basis[k];
                if node < m && !seen[m + j] {
                    v[j] = c[i * n + j] - u[i];
                    seen[m + j] = true;
                    queue.push(m + j);
                } else if node >= m && !seen[i] {
                    u[i] = c[i * n + j] - v[j];
                    seen[i] = true;
                    queue.push(i);
                }
            }
        }

        let mut enter = (NONE, NONE, -tol);
        for i in 0..m {
            for j in 0..n {
                let r = c[i * n + j] - u[i] - v[j];
                if r < enter.2 {
                    enter = (i, j, r);
                }
            }
        }
        let (p, q, _) = enter;
        if p == NONE {
            return Some(basis);
        }

        // tree path from row p to column q; with the entering cell it closes
        // the pivot cycle
        seen.fill(false);
        via.fill(NONE);
        queue.clear();
        queue.push(p);
        seen[p] = true;
        let mut head = 0;
        while head < queue.len() && !seen[m + q] {
            let node = queue[head];
            head += 1;
            for &k in &adj[node] {
                let (i, j, _) = basis[k];
                let other = if node < m { m + j } else { i };
                if !seen[other] {
                    seen[other] = true;
                    via[other] = k;
                    queue.push(other);
                }
            }
        }
        let mut path = Vec::new();
        let mut node = m + q;
        while node != p {
            let k = via[node];
            path.push(k);
            let (i, j, _) = basis[k];
            node = if node >= m { i } else { m + j };
        }
        // path[0] touches column q: cells alternate -, +, -, ... and end on -
        let mut leave = NONE;
        let mut theta = f64::INFINITY;
        for &k in path.iter().step_by(2) {
            if basis[k].2 < theta {
                theta = basis[k].2;
                leave = k;
            }
        }
        for (pos, &k) in path.iter().enumerate() {
            if pos % 2 == 0 {
                basis[k].2 = (basis[k].2 - theta).max(0.0);
            } else {
                basis[k].2 += theta;
            }
        }
        basis[leave] = (p, q, theta);
    }
    None
}

/// Successive shortest augmenting paths with Dijkstra on reduced costs.
///
/// Expects positive, balanced masses.
pub fn shortest_paths(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<Vec<(usize, usize, f64)>> {
    let m = supply.len();
    let n = demand.len();
    let total_s: f64 = supply.iter().sum();
    let eps = MASS_EPS * total_s.max(1.0);
    let mut rem_s = supply.to_vec();
    let mut rem_d = demand.to_vec();

    let mut x = vec![0.0; m * n];
    // nodes 0..m are sources, m..m+n sinks
    let mut pot = vec![0.0; m + n];
    let mut dist = vec![0.0; m + n];
    let mut prev = vec![NONE; m + n];
    let mut done = vec![false; m + n];

    loop {
        if !rem_s.iter().any(|&r| r > eps) || !rem_d.iter().any(|&r| r > eps) {
            break;
        }
        dist.fill(f64::INFINITY);
        prev.fill(NONE);
        done.fill(false);
        for i in 0..m {
            if rem_s[i] > eps {
                dist[i] = 0.0;
            }
        }
        let mut sink = NONE;
        let mut sink_d = f64::INFINITY;
        for _ in 0..(m + n) {
            let mut best = NONE;
            let mut best_d = f64::INFINITY;
            for v in 0..(m + n) {
                if !done[v] && dist[v] < best_d {
                    best_d = dist[v];
                    best = v;
                }
            }
            if best == NONE {
                break;
            }
            done[best] = true;
            // the first settled sink with unmet demand ends the search;
            // nodes beyond it get their potential raised by `sink_d`
            if best >= m && rem_d[best - m] > eps {
                sink = best;
                sink_d = best_d;
                break;
            }
            if best < m {
                let i = best;
                for j in 0..n {
                    let t = m + j;
                    if done[t] {
                        continue;
                    }
                    let rc = (cost[i * n + j] + pot[i] - pot[t]).max(0.0);
                    let nd = best_d + rc;
                    if nd < dist[t] {
                        dist[t] = nd;
                        prev[t] = i;
                    }
                }
            } else {
                let j = best - m;
                for i in 0..m {
                    if done[i] || x[i * n + j] <= eps {
                        continue;
                    }
                    let rc = (-cost[i * n + j] + pot[best] - pot[i]).max(0.0);
                    let nd = best_d + rc;
                    if nd < dist[i] {
                        dist[i] = nd;
                        prev[i] = best;
                    }
                }
            }
        }

        if sink == NONE {
            return Err(Error::InfeasibleTransport("no augmenting path to unmet demand".into()));
        }
        for v in 0..(m + n) {
            pot[v] += dist[v].min(sink_d);
        }

        // bottleneck along the path sink <- source <- sink <- ... <- root source
        let mut delta = rem_d[sink - m];
        let mut v = sink;
        let root = loop {
            let p = prev[v];
            if p == NONE {
                break v;
            }
            if v < m {
                // backward arc p(sink) -> v(source) cancels flow on (v, p)
                delta = delta.min(x[v * n + (p - m)]);
            }
            v = p;
        };
        delta = delta.min(rem_s[root]);

        let mut v = sink;
        while prev[v] != NONE {
            let p = prev[v];
            if v >= m {
                x[p * n + (v - m)] += delta;
            } else {
                let cell = &mut x[v * n + (p - m)];
                *cell -= delta;
                if *cell <= eps {
                    *cell = 0.0;
                }
            }
            v = p;
        }
        rem_s[root] -= delta;
        rem_d[sink - m] -= delta;
    }

    let mut flows = Vec::new();
    for i in 0..m {
        for j in 0..n {
            if x[i * n + j] > 0.0 {
                flows.push((i, j, x[i * n + j]));
            }
        }
    }
    Ok(flows)
}
