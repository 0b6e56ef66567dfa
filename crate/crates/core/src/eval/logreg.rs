//! Binary logistic regression fit by full-batch gradient descent.
//!
//! Minimizes `mean(log(1 + e^z) - y z) + l2/2 |w|^2` with `z = w.x + b`;
//! the bias is not penalized. Steps are `1/L` with `L` an upper bound on
//! the Hessian's largest eigenvalue, accelerated with Nesterov momentum
//! and restarted whenever the objective's gradient opposes the momentum.

use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegConfig {
    pub l2: f64,
    pub max_iters: usize,
    /// Stop once the gradient norm falls below this.
    pub tolerance: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            l2: 1e-4,
            max_iters: 20_000,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl LogisticModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }

    /// Probability of the positive class.
    pub fn predict(&self, x: &[f64]) -> f64 {
        sigmoid(self.decision(x))
    }
}

/// Gradient of the penalized objective at `(weights, bias)`; the bias
/// component is last.
pub fn objective_gradient(features: &[Vec<f64>], labels: &[bool], l2: f64, weights: &[f64], bias: f64) -> Vec<f64> {
    let n = features.len() as f64;
    let d = weights.len();
    let mut grad = vec![0.0; d + 1];
    for (x, &y) in features.iter().zip(labels) {
        let z = weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + bias;
        let r = sigmoid(z) - if y { 1.0 } else { 0.0 };
        for (g, v) in grad.iter_mut().zip(x) {
            *g += r * v;
        }
        grad[d] += r;
    }
    for g in grad.iter_mut() {
        *g /= n;
    }
    for (g, w) in grad.iter_mut().zip(weights) {
        *g += l2 * w;
    }
    grad
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn train_logreg(features: &[Vec<f64>], labels: &[bool], cfg: &LogRegConfig) -> Result<LogisticModel, EvalError> {
    assert_eq!(features.len(), labels.len(), "one label per row");
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(EvalError::SingleClass { positives, negatives });
    }
    if cfg.l2.is_nan() || cfg.l2 < 0.0 {
        return Err(EvalError::Invalid(format!("l2 must be non-negative, got {}", cfg.l2)));
    }
    let d = features[0].len();
    if features.iter().any(|x| x.len() != d) {
        return Err(EvalError::Invalid("feature rows differ in length".into()));
    }

    let n = features.len() as f64;
    let mean_sq = features
        .iter()
        .map(|x| x.iter().map(|v| v * v).sum::<f64>() + 1.0)
        .sum::<f64>()
        / n;
    let step = 1.0 / (0.25 * mean_sq + cfg.l2);

    // theta = (weights, bias); y is the extrapolated point.
    let mut theta = vec![0.0; d + 1];
    let mut y = theta.clone();
    let mut momentum = 1.0f64;
    let grad_at = |p: &[f64]| objective_gradient(features, labels, cfg.l2, &p[..d], p[d]);

    let mut iterations = 0;
    let mut grad_norm = norm(&grad_at(&theta));
    while iterations < cfg.max_iters && grad_norm >= cfg.tolerance {
        let g = grad_at(&y);
        let next: Vec<f64> = y.iter().zip(&g).map(|(p, gi)| p - step * gi).collect();
        let next_momentum = (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt()) / 2.0;
        let moving: Vec<f64> = next.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let restart = g.iter().zip(&moving).map(|(a, b)| a * b).sum::<f64>() > 0.0;
        if restart {
            momentum = 1.0;
            y = next.clone();
        } else {
            let beta = (momentum - 1.0) / next_momentum;
            y = next.iter().zip(&moving).map(|(p, m)| p + beta * m).collect();
            momentum = next_momentum;
        }
        theta = next;
        iterations += 1;
        grad_norm = norm(&grad_at(&theta));
    }

    Ok(LogisticModel {
        bias: theta[d],
        weights: theta[..d].to_vec(),
        iterations,
        gradient_norm: grad_norm,
    })
}
