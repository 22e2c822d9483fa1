//! Proposal ranking by a weighted mix of detector, motion and objectness
//! scores, with the weights refit each iteration as a one-class margin.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Proposal;

/// Fraction of samples allowed inside the margin.
pub const NU: f64 = 0.1;
const SMO_TOL: f64 = 1e-12;
const SMO_MAX_STEPS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankWeights {
    /// Weights for (detection, motion, objectness).
    pub alpha: [f64; 3],
}

impl RankWeights {
    pub const UNIFORM: RankWeights = RankWeights {
        alpha: [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
    };

    /// Weights used before any detector exists.
    pub fn initial() -> Self {
        RankWeights { alpha: [0.0, 0.5, 0.5] }
    }

    /// Clamp negatives to zero and L1-normalize; all-zero becomes uniform.
    pub fn normalized(alpha: [f64; 3]) -> Self {
        let clamped = alpha.map(|a| if a.is_finite() { a.max(0.0) } else { 0.0 });
        let sum: f64 = clamped.iter().sum();
        if sum <= 0.0 {
            return Self::UNIFORM;
        }
        RankWeights {
            alpha: clamped.map(|a| a / sum),
        }
    }

    pub fn is_valid(&self) -> bool {
        self.alpha.iter().all(|&a| a >= 0.0 && a.is_finite()) && (self.alpha.iter().sum::<f64>() - 1.0).abs() <= 1e-9
    }
}

impl Default for RankWeights {
    fn default() -> Self {
        Self::initial()
    }
}

pub fn logistic(s: f64) -> f64 {
    1.0 / (1.0 + (-s).exp())
}

/// `(logistic(detection), motion, objectness)`.
pub fn score_triplet(p: &Proposal) -> [f64; 3] {
    [logistic(p.detection_score), p.motion_score, p.objectness_score]
}

pub fn combinatorial_score(weights: &RankWeights, p: &Proposal) -> f64 {
    let t = score_triplet(p);
    weights.alpha.iter().zip(t).map(|(a, s)| a * s).sum()
}

/// Fit `alpha` as the normal of the one-class hyperplane that separates
/// the triplets from the origin with the largest margin.
///
/// The dual, `min 1/2 |sum a_i s_i|^2` over `0 <= a_i <= 1/(nu n)`,
/// `sum a_i = 1`, is solved exactly by pairwise coordinate steps;
/// `alpha = sum a_i s_i` is then non-negative for non-negative triplets.
pub fn update_rank_weights(triplets: &[[f64; 3]]) -> Result<RankWeights> {
    let n = triplets.len();
    if n < 3 {
        return Err(Error::TooFewSamples { need: 3, got: n });
    }
    if triplets.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateFeatures);
    }
    let cap = (1.0 / (NU * n as f64)).min(1.0);
    let mut a = vec![1.0 / n as f64; n];
    let mut alpha = [0.0; 3];
    for (ai, s) in a.iter().zip(triplets) {
        for k in 0..3 {
            alpha[k] += ai * s[k];
        }
    }
    let dot = |u: &[f64; 3], v: &[f64; 3]| u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    for _ in 0..SMO_MAX_STEPS {
        // Most violating pair: raise the lowest gradient, lower the highest.
        let (mut up, mut down) = (None::<(usize, f64)>, None::<(usize, f64)>);
        for (i, s) in triplets.iter().enumerate() {
            let g = dot(s, &alpha);
            if a[i] < cap && up.is_none_or(|(_, best)| g < best) {
                up = Some((i, g));
            }
            if a[i] > 0.0 && down.is_none_or(|(_, best)| g > best) {
                down = Some((i, g));
            }
        }
        let (Some((i, gi)), Some((j, gj))) = (up, down) else { break };
        if gj - gi <= SMO_TOL {
            break;
        }
        let d = [
            triplets[i][0] - triplets[j][0],
            triplets[i][1] - triplets[j][1],
            triplets[i][2] - triplets[j][2],
        ];
        let curv = dot(&d, &d);
        let mut t = (cap - a[i]).min(a[j]);
        if curv > 0.0 {
            t = t.min((gj - gi) / curv);
        }
        if t <= 0.0 {
            break;
        }
        a[i] += t;
        a[j] -= t;
        for k in 0..3 {
            alpha[k] += t * d[k];
        }
    }
    Ok(RankWeights::normalized(alpha))
}

/// Sort by combinatorial score and cut at the two quantiles. Returns
/// (positives, negatives); the middle band is dropped.
pub fn rank_and_split(
    proposals: &[Proposal],
    weights: &RankWeights,
    pos_quantile: f64,
    neg_quantile: f64,
) -> (Vec<Proposal>, Vec<Proposal>) {
    let mut scored: Vec<(f64, &Proposal)> = proposals.iter().map(|p| (combinatorial_score(weights, p), p)).collect();
    scored.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then(a.1.frame_index.cmp(&b.1.frame_index))
            .then(a.1.bbox.y.total_cmp(&b.1.bbox.y))
            .then(a.1.bbox.x.total_cmp(&b.1.bbox.x))
    });
    let n = scored.len() as f64;
    let n_pos = scored.len() - ((n * pos_quantile - 1e-9).ceil().max(0.0) as usize).min(scored.len());
    let n_neg = ((n * neg_quantile + 1e-9).floor() as usize).min(scored.len() - n_pos);
    let pos = scored[..n_pos].iter().map(|(_, p)| (*p).clone()).collect();
    let neg = scored[scored.len() - n_neg..].iter().map(|(_, p)| (*p).clone()).collect();
    (pos, neg)
}
