//! Diagonal-covariance Gaussian mixture fit by EM.
//!
//! Means are seeded with k-means++; initial weights and variances come from the
//! hard assignment of each row to its nearest seed. Every EM iteration records
//! the log-likelihood of the parameters it started from, so the recorded trace
//! is non-decreasing. Variances are floored at [`VAR_FLOOR`], which is also the
//! constrained maximizer of the M-step, so flooring keeps EM monotone.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::logreg::argmax;
use crate::rng::RngSeed;
use crate::tensor::Matrix;

pub const VAR_FLOOR: f64 = 1e-6;

/// Component mass below which a component keeps its previous mean and variance.
const DEAD_MASS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub k: usize,
    pub weights: Vec<f64>,
    pub means: Matrix,
    pub variances: Matrix,
    /// Log-likelihood (summed over rows) at each EM iteration.
    pub log_likelihood: Vec<f64>,
    pub converged: bool,
}

impl GmmModel {
    /// Per-row, per-component `log(w_k) + log N(x | mu_k, diag(var_k))`.
    fn weighted_log_density(&self, x: &Matrix) -> Matrix {
        let d = x.cols();
        let consts: Vec<f64> = (0..self.k)
            .map(|c| {
                let log_det: f64 = (0..d).map(|j| self.variances.get(c, j).ln()).sum();
                self.weights[c].ln() - 0.5 * (d as f64 * (2.0 * PI).ln() + log_det)
            })
            .collect();
        Matrix::from_fn(x.rows(), self.k, |i, c| {
            let row = x.row(i);
            let quad: f64 = (0..d)
                .map(|j| {
                    let diff = row[j] - self.means.get(c, j);
                    diff * diff / self.variances.get(c, j)
                })
                .sum();
            consts[c] - 0.5 * quad
        })
    }

    /// Posterior responsibilities and the total log-likelihood.
    fn e_step(&self, x: &Matrix) -> (Matrix, f64) {
        let mut r = self.weighted_log_density(x);
        let k = self.k;
        let mut ll = 0.0;
        for row in r.values_mut().chunks_mut(k) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let total: f64 = row.iter().map(|v| (v - max).exp()).sum();
            let lse = max + total.ln();
            ll += lse;
            for v in row.iter_mut() {
                *v = (*v - lse).exp();
            }
        }
        (r, ll)
    }

    fn m_step(&mut self, x: &Matrix, resp: &Matrix) {
        let (n, d) = x.shape();
        for c in 0..self.k {
            let mass: f64 = (0..n).map(|i| resp.get(i, c)).sum();
            self.weights[c] = mass / n as f64;
            if mass < DEAD_MASS {
                continue;
            }
            for j in 0..d {
                let mean = (0..n).map(|i| resp.get(i, c) * x.get(i, j)).sum::<f64>() / mass;
                let var = (0..n)
                    .map(|i| resp.get(i, c) * (x.get(i, j) - mean).powi(2))
                    .sum::<f64>()
                    / mass;
                self.means.set(c, j, mean);
                self.variances.set(c, j, var.max(VAR_FLOOR));
            }
        }
    }

    /// Most responsible component per row.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        if x.cols() != self.means.cols() {
            return Err(Error::shape(format!(
                "mixture is {}-dimensional, input has {} columns",
                self.means.cols(),
                x.cols()
            )));
        }
        let dens = self.weighted_log_density(x);
        Ok(dens.row_iter().map(argmax).collect())
    }

    pub fn log_likelihood_of(&self, x: &Matrix) -> f64 {
        self.e_step(x).1
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding: first center uniform, later ones drawn proportional to
/// squared distance from the nearest chosen center.
fn kmeans_pp(x: &Matrix, k: usize, seed: RngSeed) -> Vec<usize> {
    let n = x.rows();
    let mut rng = seed.rng();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut nearest: Vec<f64> = (0..n)
        .map(|i| sq_dist(x.row(i), x.row(chosen[0])))
        .collect();
    while chosen.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut pick = n - 1;
            for (i, &w) in nearest.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            // all rows coincide with a center
            rng.random_range(0..n)
        };
        chosen.push(next);
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(sq_dist(x.row(i), x.row(next)));
        }
    }
    chosen
}

fn initial_model(x: &Matrix, k: usize, seed: RngSeed) -> GmmModel {
    let (n, d) = x.shape();
    let centers = kmeans_pp(x, k, seed);
    let means = x.select_rows(&centers);
    // hard responsibilities from nearest seed
    let mut resp = Matrix::zeros(n, k);
    for i in 0..n {
        let c = (0..k)
            .min_by(|&a, &b| {
                sq_dist(x.row(i), means.row(a)).total_cmp(&sq_dist(x.row(i), means.row(b)))
            })
            .expect("k >= 1");
        resp.set(i, c, 1.0);
    }
    let mut global_var = vec![0.0; d];
    for (j, gv) in global_var.iter_mut().enumerate() {
        let mean = (0..n).map(|i| x.get(i, j)).sum::<f64>() / n as f64;
        *gv = ((0..n).map(|i| (x.get(i, j) - mean).powi(2)).sum::<f64>() / n as f64).max(VAR_FLOOR);
    }
    let mut model = GmmModel {
        k,
        weights: vec![1.0 / k as f64; k],
        means,
        variances: Matrix::from_fn(k, d, |_, j| global_var[j]),
        log_likelihood: Vec::new(),
        converged: false,
    };
    model.m_step(x, &resp);
    // components that got no rows keep the uniform weight share small but nonzero
    let empty: Vec<usize> = (0..k).filter(|&c| model.weights[c] == 0.0).collect();
    if !empty.is_empty() {
        for c in 0..k {
            model.weights[c] = (model.weights[c] * n as f64 + 1.0) / (n + k) as f64;
        }
    }
    model
}

/// Fits a `k`-component diagonal GMM; stops once an iteration improves the
/// log-likelihood by less than `tol` or after `max_iters` iterations.
pub fn fit_gmm(
    x: &Matrix,
    k: usize,
    seed: RngSeed,
    max_iters: usize,
    tol: f64,
) -> Result<GmmModel> {
    if k == 0 {
        return Err(Error::arg("a mixture needs at least one component"));
    }
    if x.rows() < k {
        return Err(Error::arg(format!(
            "{} rows cannot support {k} components",
            x.rows()
        )));
    }
    let mut model = initial_model(x, k, seed);
    for _ in 0..max_iters {
        let (resp, ll) = model.e_step(x);
        let prev = model.log_likelihood.last().copied();
        model.log_likelihood.push(ll);
        if let Some(prev) = prev {
            if ll - prev < tol {
                model.converged = true;
                break;
            }
        }
        model.m_step(x, &resp);
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::metrics::nmi;
    use rand_distr::{Distribution, Normal};

    fn two_blobs(per: usize, seed: u64) -> (Matrix, Vec<usize>) {
        let mut rng = RngSeed(seed).rng();
        let noise = Normal::new(0.0, 0.3).unwrap();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (k, c) in [[-4.0, 0.0, 1.0], [4.0, 2.0, -1.0]].iter().enumerate() {
            for _ in 0..per {
                rows.push(c.iter().map(|&m| m + noise.sample(&mut rng)).collect());
                labels.push(k);
            }
        }
        (Matrix::from_rows(&rows).unwrap(), labels)
    }

    #[test]
    fn recovers_blobs_monotonically() {
        let (x, y) = two_blobs(60, 5);
        let m = fit_gmm(&x, 2, RngSeed(1), 100, 1e-8).unwrap();
        for w in m.log_likelihood.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "{} -> {}", w[0], w[1]);
        }
        assert!(nmi(&m.predict(&x).unwrap(), &y).unwrap() >= 0.95);
        assert!((m.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_component_is_closed_form() {
        let (x, _) = two_blobs(20, 6);
        let m = fit_gmm(&x, 1, RngSeed(0), 10, 1e-12).unwrap();
        let n = x.rows() as f64;
        for j in 0..3 {
            let mean = (0..x.rows()).map(|i| x.get(i, j)).sum::<f64>() / n;
            let var = (0..x.rows())
                .map(|i| (x.get(i, j) - mean).powi(2))
                .sum::<f64>()
                / n;
            assert!((m.means.get(0, j) - mean).abs() < 1e-12);
            assert!((m.variances.get(0, j) - var).abs() < 1e-12);
        }
        assert_eq!(m.weights, vec![1.0]);
    }

    #[test]
    fn deterministic() {
        let (x, _) = two_blobs(30, 7);
        assert_eq!(
            fit_gmm(&x, 3, RngSeed(2), 50, 1e-9).unwrap(),
            fit_gmm(&x, 3, RngSeed(2), 50, 1e-9).unwrap()
        );
    }

    #[test]
    fn too_few_rows() {
        let x = Matrix::zeros(2, 3);
        assert!(matches!(
            fit_gmm(&x, 3, RngSeed(0), 10, 1e-6),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn degenerate_data_floors_variance() {
        // two identical points per cluster, one constant feature
        let x = Matrix::from_rows(&[
            vec![0.0, 1.0],
            vec![0.0, 1.0],
            vec![5.0, 1.0],
            vec![5.0, 1.0],
        ])
        .unwrap();
        let m = fit_gmm(&x, 2, RngSeed(3), 50, 1e-9).unwrap();
        assert!(m.variances.values().iter().all(|&v| v >= VAR_FLOOR));
        assert!(m.log_likelihood.iter().all(|v| v.is_finite()));
        let p = m.predict(&x).unwrap();
        assert_eq!(p[0], p[1]);
        assert_eq!(p[2], p[3]);
        assert_ne!(p[0], p[2]);
    }
}
