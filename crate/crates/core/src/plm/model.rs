use serde::{Deserialize, Serialize};

use crate::features::{WINDOW_H, WINDOW_W};

/// Value of the implicit constant feature that carries the bias.
pub const BIAS_FEATURE: f64 = 1.0;

/// Linear root template: `score(v) = weights . v + bias`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub window_w: usize,
    pub window_h: usize,
    pub training_iteration: usize,
}

impl LatentModel {
    pub fn zeros(dim: usize, window_w: usize, window_h: usize) -> Self {
        LatentModel {
            weights: vec![0.0; dim],
            bias: 0.0,
            window_w,
            window_h,
            training_iteration: 0,
        }
    }

    /// Zero model over the canonical HOG window.
    pub fn zeros_for(dim: usize) -> Self {
        Self::zeros(dim, WINDOW_W, WINDOW_H)
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    #[inline]
    pub fn score(&self, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), self.weights.len());
        dot(&self.weights, v) + self.bias * BIAS_FEATURE
    }

    /// Squared norm of the full parameter vector, bias included.
    pub fn norm_sq(&self) -> f64 {
        dot(&self.weights, &self.weights) + self.bias * self.bias
    }

    pub fn is_finite(&self) -> bool {
        self.bias.is_finite() && self.weights.iter().all(|w| w.is_finite())
    }

    pub fn scaled(&self, c: f64) -> Self {
        LatentModel {
            weights: self.weights.iter().map(|w| w * c).collect(),
            bias: self.bias * c,
            ..self.clone()
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators in a fixed order keep results reproducible and fast.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
