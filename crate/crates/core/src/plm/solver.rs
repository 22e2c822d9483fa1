//! Dual coordinate descent for the convex inner problem of one CCCP round:
//!
//! ```text
//! min_beta  1/2 ||beta||^2 - lin . beta
//!           + sum_g cap_g * max(0, max_{r in g} (1 - s_g * beta . x_r))
//! ```
//!
//! `beta` carries the bias as a trailing coordinate paired with the constant
//! feature [`BIAS_FEATURE`]. Each group's dual variables live in a scaled
//! simplex `{alpha >= 0, sum alpha <= cap_g}`; groups are visited in a
//! seeded shuffled order with single-coordinate steps, plus pairwise
//! transfers when a group's budget is exhausted.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{axpy, dot, BIAS_FEATURE};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    pub max_passes: usize,
    /// Stop once the largest projected-gradient violation falls below this.
    pub tol: f64,
    pub seed: u64,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            max_passes: 500,
            tol: 1e-4,
            seed: 0,
        }
    }
}

/// One hinge group: a sign, a loss weight and the rows it maximizes over.
#[derive(Debug, Clone)]
pub struct HingeGroup<'a> {
    pub sign: f64,
    pub cap: f64,
    pub rows: Vec<&'a [f64]>,
}

#[derive(Debug, Clone)]
pub struct InnerProblem<'a> {
    pub dim: usize,
    pub groups: Vec<HingeGroup<'a>>,
    /// Linear reward on the weights (not the bias); empty means zero.
    pub linear: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub passes: usize,
    pub max_violation: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct InnerSolution {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Dual variables per group, aligned with `HingeGroup::rows`.
    pub alphas: Vec<Vec<f64>>,
    pub report: SolverReport,
}

struct Beta {
    w: Vec<f64>,
    b: f64,
}

impl Beta {
    #[inline]
    fn score(&self, x: &[f64]) -> f64 {
        dot(&self.w, x) + self.b * BIAS_FEATURE
    }

    #[inline]
    fn add(&mut self, step: f64, x: &[f64]) {
        axpy(step, x, &mut self.w);
        self.b += step * BIAS_FEATURE;
    }
}

impl<'a> InnerProblem<'a> {
    /// Primal objective at `(weights, bias)`.
    pub fn primal(&self, weights: &[f64], bias: f64) -> f64 {
        let beta = Beta {
            w: weights.to_vec(),
            b: bias,
        };
        let reg = 0.5 * (dot(weights, weights) + bias * bias);
        let lin = if self.linear.is_empty() { 0.0 } else { dot(&self.linear, weights) };
        let loss: f64 = self
            .groups
            .iter()
            .map(|g| {
                let worst = g
                    .rows
                    .iter()
                    .map(|x| 1.0 - g.sign * beta.score(x))
                    .fold(f64::NEG_INFINITY, f64::max);
                g.cap * worst.max(0.0)
            })
            .sum();
        reg - lin + loss
    }
}

/// Solve from `warm` dual variables (or zero).
pub fn solve_inner(problem: &InnerProblem<'_>, params: &SolverParams, warm: Option<Vec<Vec<f64>>>) -> InnerSolution {
    let dim = problem.dim;
    let mut alphas: Vec<Vec<f64>> = match warm {
        Some(a)
            if a.len() == problem.groups.len()
                && a.iter().zip(&problem.groups).all(|(a, g)| a.len() == g.rows.len()) =>
        {
            a
        }
        _ => problem.groups.iter().map(|g| vec![0.0; g.rows.len()]).collect(),
    };
    let mut beta = Beta {
        w: if problem.linear.is_empty() {
            vec![0.0; dim]
        } else {
            problem.linear.clone()
        },
        b: 0.0,
    };
    let mut sums = Vec::with_capacity(problem.groups.len());
    for (g, a) in problem.groups.iter().zip(alphas.iter_mut()) {
        // Repair infeasible warm starts by rescaling into the simplex.
        a.iter_mut().for_each(|v| *v = v.max(0.0));
        let total: f64 = a.iter().sum();
        if total > g.cap {
            let s = g.cap / total;
            a.iter_mut().for_each(|v| *v *= s);
        }
        for (x, &v) in g.rows.iter().zip(a.iter()) {
            if v != 0.0 {
                beta.add(v * g.sign, x);
            }
        }
        sums.push(a.iter().sum::<f64>());
    }
    let diag: Vec<Vec<f64>> = problem
        .groups
        .iter()
        .map(|g| g.rows.iter().map(|x| dot(x, x) + BIAS_FEATURE * BIAS_FEATURE).collect())
        .collect();

    let mut order: Vec<usize> = (0..problem.groups.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut grads: Vec<f64> = Vec::new();
    let mut report = SolverReport {
        passes: 0,
        max_violation: f64::INFINITY,
        converged: false,
    };
    for pass in 0..params.max_passes {
        order.shuffle(&mut rng);
        let mut max_violation: f64 = 0.0;
        for &gi in &order {
            let g = &problem.groups[gi];
            let a = &mut alphas[gi];
            let eps = 1e-12 * g.cap.max(1.0);

            grads.clear();
            grads.extend(g.rows.iter().map(|x| g.sign * beta.score(x) - 1.0));
            max_violation = max_violation.max(group_violation(&grads, a, g.cap - sums[gi] > eps));

            for (r, x) in g.rows.iter().enumerate() {
                let grad = g.sign * beta.score(x) - 1.0;
                let slack = (g.cap - sums[gi]).max(0.0);
                let q = diag[gi][r];
                if q <= 0.0 {
                    continue;
                }
                let new = (a[r] - grad / q).clamp(0.0, a[r] + slack);
                let d = new - a[r];
                if d != 0.0 {
                    a[r] = new;
                    sums[gi] += d;
                    beta.add(d * g.sign, x);
                }
            }

            if g.rows.len() > 1 && g.cap - sums[gi] <= eps {
                for _ in 0..g.rows.len() {
                    grads.clear();
                    grads.extend(g.rows.iter().map(|x| g.sign * beta.score(x) - 1.0));
                    let (lo, _) = argmin(&grads, |_| true);
                    let (hi, _) = argmax(&grads, |r| a[r] > 0.0);
                    let (Some(lo), Some(hi)) = (lo, hi) else { break };
                    let gap = grads[hi] - grads[lo];
                    if lo == hi || gap <= params.tol * 0.1 {
                        break;
                    }
                    let (xl, xh) = (g.rows[lo], g.rows[hi]);
                    let curv: f64 = xl.iter().zip(xh).map(|(p, q)| (p - q) * (p - q)).sum();
                    if curv <= 0.0 {
                        break;
                    }
                    let t = (gap / curv).min(a[hi]);
                    a[hi] -= t;
                    a[lo] += t;
                    beta.add(t * g.sign, xl);
                    beta.add(-t * g.sign, xh);
                }
            }
        }
        report.passes = pass + 1;
        report.max_violation = max_violation;
        if max_violation < params.tol {
            report.converged = true;
            break;
        }
    }
    InnerSolution {
        weights: beta.w,
        bias: beta.b,
        alphas,
        report,
    }
}

fn argmin(v: &[f64], ok: impl Fn(usize) -> bool) -> (Option<usize>, f64) {
    let mut best = (None, f64::INFINITY);
    for (i, &x) in v.iter().enumerate() {
        if ok(i) && x < best.1 {
            best = (Some(i), x);
        }
    }
    best
}

fn argmax(v: &[f64], ok: impl Fn(usize) -> bool) -> (Option<usize>, f64) {
    let mut best = (None, f64::NEG_INFINITY);
    for (i, &x) in v.iter().enumerate() {
        if ok(i) && x > best.1 {
            best = (Some(i), x);
        }
    }
    best
}

/// Largest projected-gradient violation of a group's KKT conditions.
fn group_violation(grads: &[f64], alpha: &[f64], has_slack: bool) -> f64 {
    let mut v: f64 = 0.0;
    let min_g = grads.iter().copied().fold(f64::INFINITY, f64::min);
    let max_active = grads
        .iter()
        .zip(alpha)
        .filter(|(_, &a)| a > 0.0)
        .map(|(&g, _)| g)
        .fold(f64::NEG_INFINITY, f64::max);
    if max_active.is_finite() {
        v = v.max(max_active);
    }
    if has_slack {
        v = v.max(-min_g);
    } else if max_active.is_finite() {
        v = v.max(max_active - min_g);
    }
    v.max(0.0)
}
