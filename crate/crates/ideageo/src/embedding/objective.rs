//! Negative-sampling objective shared by training and inference.
//!
//! For a composed hidden vector `h`, a positive output vector `u_o`, and
//! sampled negative output vectors `u_k`, the per-example loss is the
//! negative log likelihood
//!
//! ```text
//! -log sigmoid(u_o . h) - sum_k log sigmoid(-u_k . h)
//! ```
//!
//! In PV-DM, `h` is the mean of the document vector and the in-window
//! context word vectors; in PV-DBOW it is the document vector alone.

use crate::linalg::dot;

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `log(sigmoid(x))`, stable for large negative `x`.
pub fn log_sigmoid(x: f64) -> f64 {
    if x < -30.0 {
        x
    } else {
        -(-x).exp().ln_1p()
    }
}

/// Mean of the given vectors; the PV-DM hidden-layer composition.
pub fn compose_mean(parts: &[&[f64]]) -> Vec<f64> {
    assert!(!parts.is_empty());
    let dim = parts[0].len();
    let mut h = vec![0.0; dim];
    for part in parts {
        for (acc, x) in h.iter_mut().zip(*part) {
            *acc += x;
        }
    }
    let m = parts.len() as f64;
    for acc in &mut h {
        *acc /= m;
    }
    h
}

/// Negative log likelihood of one training example.
pub fn nll(h: &[f64], target: &[f64], negatives: &[&[f64]]) -> f64 {
    let mut loss = -log_sigmoid(dot(target, h));
    for neg in negatives {
        loss -= log_sigmoid(-dot(neg, h));
    }
    loss
}

/// Analytic gradients of [`nll`] with respect to `h`, the target output
/// vector, and each negative output vector.
#[derive(Debug, Clone)]
pub struct NllGradients {
    pub h: Vec<f64>,
    pub target: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

pub fn nll_gradients(h: &[f64], target: &[f64], negatives: &[&[f64]]) -> NllGradients {
    let dim = h.len();
    let g_target = sigmoid(dot(target, h)) - 1.0;
    let mut grad_h: Vec<f64> = target.iter().map(|&u| g_target * u).collect();
    let grad_target: Vec<f64> = h.iter().map(|&x| g_target * x).collect();

    let mut grad_negatives = Vec::with_capacity(negatives.len());
    for neg in negatives {
        let g_neg = sigmoid(dot(neg, h));
        for c in 0..dim {
            grad_h[c] += g_neg * neg[c];
        }
        grad_negatives.push(h.iter().map(|&x| g_neg * x).collect());
    }

    NllGradients {
        h: grad_h,
        target: grad_target,
        negatives: grad_negatives,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_midpoint_and_tails() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(40.0) > 1.0 - 1e-12);
        assert!(sigmoid(-40.0) < 1e-12);
    }

    #[test]
    fn log_sigmoid_is_stable() {
        assert!((log_sigmoid(0.0) - 0.5f64.ln()).abs() < 1e-12);
        assert!((log_sigmoid(-100.0) + 100.0).abs() < 1e-9);
        assert!(log_sigmoid(100.0).abs() < 1e-12);
    }

    #[test]
    fn compose_mean_averages() {
        let a = [1.0, 3.0];
        let b = [3.0, 5.0];
        assert_eq!(compose_mean(&[&a, &b]), vec![2.0, 4.0]);
        assert_eq!(compose_mean(&[&a]), vec![1.0, 3.0]);
    }

    #[test]
    fn gradients_match_finite_differences_smoke() {
        // Fuller randomized coverage lives in the acceptance suite; this is a
        // single fixed instance for fast feedback.
        let h = vec![0.3, -0.2, 0.1];
        let target = vec![0.5, 0.4, -0.1];
        let neg0 = vec![-0.3, 0.2, 0.6];
        let neg1 = vec![0.1, 0.1, -0.4];
        let negatives: Vec<&[f64]> = vec![&neg0, &neg1];
        let grads = nll_gradients(&h, &target, &negatives);

        let eps = 1e-6;
        for c in 0..3 {
            let mut hp = h.clone();
            let mut hm = h.clone();
            hp[c] += eps;
            hm[c] -= eps;
            let fd = (nll(&hp, &target, &negatives) - nll(&hm, &target, &negatives)) / (2.0 * eps);
            assert!((grads.h[c] - fd).abs() < 1e-8, "h[{c}]: {} vs {}", grads.h[c], fd);
        }
        for c in 0..3 {
            let mut tp = target.clone();
            let mut tm = target.clone();
            tp[c] += eps;
            tm[c] -= eps;
            let fd = (nll(&h, &tp, &negatives) - nll(&h, &tm, &negatives)) / (2.0 * eps);
            assert!((grads.target[c] - fd).abs() < 1e-8);
        }
    }
}
