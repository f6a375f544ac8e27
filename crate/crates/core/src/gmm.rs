//! One-dimensional Gaussian mixtures fitted by EM, with BIC model selection.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{derive_seed, stream_rng};
use crate::{Error, Result};

pub const VARIANCE_FLOOR: f64 = 1e-6;
pub const TOLERANCE: f64 = 1e-7;
pub const MAX_ITER: usize = 500;
pub const DEFAULT_MAX_COMPONENTS: usize = 5;
pub const RESTARTS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmFit {
    #[serde(rename = "k")]
    pub n_components: usize,
    /// Sorted by descending weight.
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub bic: f64,
    pub log_likelihood: f64,
    pub converged: bool,
    pub n_iter: usize,
    /// Set when all samples coincide and the fit collapsed to the floor.
    #[serde(default)]
    pub degenerate: bool,
    /// Log-likelihood after each E-step.
    #[serde(skip)]
    pub trace: Vec<f64>,
}

/// Number of free parameters of a k-component 1-D mixture.
pub fn n_parameters(k: usize) -> usize {
    3 * k - 1
}

pub fn bic(log_likelihood: f64, k: usize, n: usize) -> f64 {
    -2.0 * log_likelihood + n_parameters(k) as f64 * (n as f64).ln()
}

fn log_normal(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((2.0 * PI * var).ln() + (x - mean) * (x - mean) / var)
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

struct Params {
    weights: Vec<f64>,
    means: Vec<f64>,
    variances: Vec<f64>,
}

impl Params {
    /// E-step: responsibilities (row-major n x k) and total log-likelihood.
    fn expectation(&self, xs: &[f64], resp: &mut [f64]) -> f64 {
        let k = self.weights.len();
        let mut ll = 0.0;
        let mut buf = vec![0.0; k];
        for (i, &x) in xs.iter().enumerate() {
            for c in 0..k {
                buf[c] = self.weights[c].ln() + log_normal(x, self.means[c], self.variances[c]);
            }
            let lse = log_sum_exp(&buf);
            ll += lse;
            for c in 0..k {
                resp[i * k + c] = (buf[c] - lse).exp();
            }
        }
        ll
    }

    fn maximization(&mut self, xs: &[f64], resp: &[f64]) {
        let k = self.weights.len();
        let n = xs.len() as f64;
        for c in 0..k {
            let nk: f64 = (0..xs.len()).map(|i| resp[i * k + c]).sum::<f64>().max(f64::MIN_POSITIVE);
            let mean = xs.iter().enumerate().map(|(i, x)| resp[i * k + c] * x).sum::<f64>() / nk;
            let var = xs
                .iter()
                .enumerate()
                .map(|(i, x)| resp[i * k + c] * (x - mean) * (x - mean))
                .sum::<f64>()
                / nk;
            self.weights[c] = nk / n;
            self.means[c] = mean;
            self.variances[c] = var.max(VARIANCE_FLOOR);
        }
    }
}

/// k-means++ seeding followed by one hard assignment.
fn init_params(xs: &[f64], k: usize, rng: &mut impl Rng) -> Params {
    let n = xs.len();
    let mut centers = vec![xs[rng.gen_range(0..n)]];
    while centers.len() < k {
        let d2: Vec<f64> = xs
            .iter()
            .map(|x| centers.iter().map(|c| (x - c) * (x - c)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, d) in d2.iter().enumerate() {
                if target < *d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        centers.push(xs[pick]);
    }
    let mut counts = vec![0.0; k];
    let mut sums = vec![0.0; k];
    let mut sq = vec![0.0; k];
    for &x in xs {
        let c = (0..k)
            .min_by(|&a, &b| (x - centers[a]).abs().total_cmp(&(x - centers[b]).abs()))
            .unwrap_or(0);
        counts[c] += 1.0;
        sums[c] += x;
        sq[c] += x * x;
    }
    let mut p = Params {
        weights: vec![0.0; k],
        means: centers.clone(),
        variances: vec![VARIANCE_FLOOR; k],
    };
    let global_var = {
        let m = xs.iter().sum::<f64>() / n as f64;
        xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64
    };
    for c in 0..k {
        if counts[c] > 0.0 {
            let mean = sums[c] / counts[c];
            p.means[c] = mean;
            p.variances[c] = (sq[c] / counts[c] - mean * mean).max(VARIANCE_FLOOR);
            p.weights[c] = counts[c] / n as f64;
        } else {
            p.variances[c] = global_var.max(VARIANCE_FLOOR);
            p.weights[c] = 1.0 / n as f64;
        }
    }
    let total: f64 = p.weights.iter().sum();
    for w in &mut p.weights {
        *w /= total;
    }
    p
}

fn finish(p: Params, ll: f64, n: usize, converged: bool, n_iter: usize, trace: Vec<f64>) -> GmmFit {
    let k = p.weights.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        p.weights[b]
            .total_cmp(&p.weights[a])
            .then(p.means[a].total_cmp(&p.means[b]))
    });
    GmmFit {
        n_components: k,
        weights: order.iter().map(|&c| p.weights[c]).collect(),
        means: order.iter().map(|&c| p.means[c]).collect(),
        variances: order.iter().map(|&c| p.variances[c]).collect(),
        bic: bic(ll, k, n),
        log_likelihood: ll,
        converged,
        n_iter,
        degenerate: false,
        trace,
    }
}

fn validate(samples: &[f64], k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::InvalidParameter("need at least one component".into()));
    }
    if samples.len() < 2 * k {
        return Err(Error::TooFewSamples {
            needed: 2 * k,
            got: samples.len(),
        });
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Validation("non-finite sample".into()));
    }
    // sorting makes the fit independent of input order
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    Ok(xs)
}

fn closed_form_single(xs: &[f64]) -> GmmFit {
    let n = xs.len() as f64;
    let degenerate = xs[0] == xs[xs.len() - 1];
    let (mean, var) = if degenerate {
        (xs[0], 0.0)
    } else {
        let mean = xs.iter().sum::<f64>() / n;
        (mean, xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n)
    };
    let p = Params {
        weights: vec![1.0],
        means: vec![mean],
        variances: vec![var.max(VARIANCE_FLOOR)],
    };
    let ll: f64 = xs.iter().map(|&x| log_normal(x, mean, p.variances[0])).sum();
    let mut fit = finish(p, ll, xs.len(), true, 0, vec![ll]);
    fit.degenerate = degenerate;
    fit
}

/// EM fit of a `k`-component mixture from a single seeded initialization.
pub fn fit_gmm(samples: &[f64], k: usize, seed: u64) -> Result<GmmFit> {
    let xs = validate(samples, k)?;
    if k == 1 || xs[0] == xs[xs.len() - 1] {
        return Ok(closed_form_single(&xs));
    }
    let mut rng = stream_rng(seed, k as u64);
    let mut p = init_params(&xs, k, &mut rng);
    let mut resp = vec![0.0; xs.len() * k];
    let mut trace = Vec::new();
    let mut ll = p.expectation(&xs, &mut resp);
    trace.push(ll);
    let mut converged = false;
    let mut n_iter = 0;
    while n_iter < MAX_ITER {
        p.maximization(&xs, &resp);
        let next = p.expectation(&xs, &mut resp);
        trace.push(next);
        n_iter += 1;
        let gain = next - ll;
        ll = next;
        if gain.abs() < TOLERANCE {
            converged = true;
            break;
        }
    }
    Ok(finish(p, ll, xs.len(), converged, n_iter, trace))
}

/// Best-of-restarts fit for each `k` in `1..=k_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmSelection {
    pub best: GmmFit,
    pub candidates: Vec<GmmFit>,
}

/// Fits k = 1..=k_max (best of [`RESTARTS`] by likelihood) and keeps the
/// lowest BIC, preferring fewer components on ties. `k_max` is truncated to
/// `samples / 2`.
pub fn select_gmm(samples: &[f64], k_max: usize, seed: u64) -> Result<GmmSelection> {
    let k_max = k_max.min(samples.len() / 2);
    if k_max == 0 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    let candidates = (1..=k_max)
        .map(|k| {
            let restarts = if k == 1 { 1 } else { RESTARTS };
            let mut best: Option<GmmFit> = None;
            for r in 0..restarts {
                let fit = fit_gmm(samples, k, derive_seed(seed, (k * RESTARTS + r) as u64))?;
                if best.as_ref().map_or(true, |b| fit.log_likelihood > b.log_likelihood) {
                    best = Some(fit);
                }
            }
            Ok(best.expect("at least one restart"))
        })
        .collect::<Result<Vec<GmmFit>>>()?;
    let mut best = 0;
    for (i, c) in candidates.iter().enumerate() {
        if c.bic < candidates[best].bic {
            best = i;
        }
    }
    Ok(GmmSelection {
        best: candidates[best].clone(),
        candidates,
    })
}
