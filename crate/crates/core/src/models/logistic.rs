//! L2-regularized logistic regression fitted by accelerated gradient descent.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
}

impl LogisticModel {
    pub fn zeros(d: usize) -> Self {
        Self {
            weights: vec![0.0; d],
            intercept: 0.0,
            iterations: 0,
            gradient_norm: f64::NAN,
            converged: false,
        }
    }

    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        sigmoid(dot(&self.weights, row) + self.intercept)
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mean negative log-likelihood plus (λ/2n)‖w‖². `params` holds the
/// weights followed by the (unpenalized) intercept.
pub fn logistic_loss(params: &[f64], rows: &[Vec<f64>], labels: &[bool], lambda: f64) -> f64 {
    let (w, b) = params.split_at(params.len() - 1);
    let n = rows.len() as f64;
    let nll: f64 = rows
        .iter()
        .zip(labels)
        .map(|(x, &y)| {
            let z = dot(w, x) + b[0];
            softplus(z) - if y { z } else { 0.0 }
        })
        .sum();
    (nll + 0.5 * lambda * dot(w, w)) / n
}

/// Gradient of [`logistic_loss`] with respect to `params`.
pub fn logistic_gradient(
    params: &[f64],
    rows: &[Vec<f64>],
    labels: &[bool],
    lambda: f64,
) -> Vec<f64> {
    let d = params.len() - 1;
    let (w, b) = params.split_at(d);
    let n = rows.len() as f64;
    let mut g = vec![0.0; d + 1];
    for (x, &y) in rows.iter().zip(labels) {
        let r = sigmoid(dot(w, x) + b[0]) - if y { 1.0 } else { 0.0 };
        for (gj, xj) in g.iter_mut().zip(x) {
            *gj += r * xj;
        }
        g[d] += r;
    }
    for j in 0..d {
        g[j] = (g[j] + lambda * w[j]) / n;
    }
    g[d] /= n;
    g
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Nesterov-accelerated gradient descent with gradient-based restarts.
/// The step is 1/L with L bounded through the Frobenius norm of the design.
pub fn fit_logistic(
    rows: &[Vec<f64>],
    labels: &[bool],
    lambda: f64,
    tolerance: f64,
    max_iter: usize,
) -> LogisticModel {
    let d = rows.first().map_or(0, Vec::len);
    let n = rows.len() as f64;
    let frob: f64 = rows.iter().map(|r| dot(r, r) + 1.0).sum();
    let lipschitz = (0.25 * frob + lambda) / n;
    let step = 1.0 / lipschitz;

    let mut x = vec![0.0; d + 1];
    let mut prev = x.clone();
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut grad = logistic_gradient(&x, rows, labels, lambda);
    let mut iterations = 0;
    while norm(&grad) >= tolerance && iterations < max_iter {
        iterations += 1;
        let gy = logistic_gradient(&y, rows, labels, lambda);
        let next: Vec<f64> = y.iter().zip(&gy).map(|(a, g)| a - step * g).collect();
        // restart momentum when it points uphill
        let uphill: f64 = gy
            .iter()
            .zip(next.iter().zip(&x))
            .map(|(g, (a, b))| g * (a - b))
            .sum();
        let t_next = if uphill > 0.0 {
            1.0
        } else {
            (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0
        };
        let momentum = if uphill > 0.0 {
            0.0
        } else {
            (t - 1.0) / t_next
        };
        prev.clone_from(&x);
        x = next;
        y = x
            .iter()
            .zip(&prev)
            .map(|(a, b)| a + momentum * (a - b))
            .collect();
        t = t_next;
        grad = logistic_gradient(&x, rows, labels, lambda);
    }
    let gradient_norm = norm(&grad);
    let converged = gradient_norm < tolerance;
    if !converged {
        log::warn!("logistic fit stopped after {iterations} iterations with gradient norm {gradient_norm:e}");
    }
    let intercept = x.pop().unwrap_or(0.0);
    LogisticModel {
        weights: x,
        intercept,
        iterations,
        gradient_norm,
        converged,
    }
}
