use log::debug;

use super::loss::{objective_fl, spatial_reg_fs, TrainingInstance};
use super::model::{axpy, dot, LatentModel};
use super::solver::{solve_inner, HingeGroup, InnerProblem, SolverParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CccpParams {
    pub c: f64,
    /// Requested spatial-regularization weight; may be halved, see
    /// [`CccpReport::lambda_effective`].
    pub lambda: f64,
    pub max_outer: usize,
    /// Stop when the objective improves by less than this, relatively.
    pub rel_tol: f64,
    pub solver: SolverParams,
    /// `lambda * top_eigenvalue(sum d d^T)` is kept at or below this bound
    /// (the objective is unbounded below past 0.5).
    pub curvature_bound: f64,
}

impl Default for CccpParams {
    fn default() -> Self {
        CccpParams {
            c: 1.0,
            lambda: 0.1,
            max_outer: 20,
            rel_tol: 1e-6,
            solver: SolverParams::default(),
            curvature_bound: 0.25,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CccpReport {
    pub model: LatentModel,
    /// Full objective before the first round and after every round.
    pub objectives: Vec<f64>,
    pub lambda_effective: f64,
    pub outer_rounds: usize,
    /// Chosen candidate per instance under the final model.
    pub latent: Vec<usize>,
    pub events: Vec<String>,
}

/// `F_l(beta) - lambda * F_s(beta)`.
pub fn full_objective(
    model: &LatentModel,
    instances: &[TrainingInstance],
    pairs: &[(Vec<f64>, Vec<f64>)],
    c: f64,
    lambda: f64,
) -> Result<f64> {
    let mut f = objective_fl(model, instances, c)?;
    if lambda > 0.0 && !pairs.is_empty() {
        f -= lambda * spatial_reg_fs(model, pairs)?;
    }
    Ok(f)
}

fn top_eigenvalue(diffs: &[Vec<f64>], dim: usize) -> f64 {
    if diffs.is_empty() {
        return 0.0;
    }
    let mut v = vec![1.0 / (dim as f64).sqrt(); dim];
    let mut lambda = 0.0;
    for _ in 0..200 {
        let mut next = vec![0.0; dim];
        for d in diffs {
            axpy(dot(d, &v), d, &mut next);
        }
        let norm = dot(&next, &next).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        next.iter_mut().for_each(|x| *x /= norm);
        let converged = (norm - lambda).abs() <= 1e-10 * norm;
        lambda = norm;
        v = next;
        if converged {
            break;
        }
    }
    lambda
}

fn argmax_candidate(model: &LatentModel, inst: &TrainingInstance) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in inst.candidates.iter().enumerate() {
        let s = model.score(v);
        if s > best.1 {
            best = (i, s);
        }
    }
    best.0
}

/// Concave-convex procedure on `F_l - lambda F_s`.
///
/// Each round fixes the latent window of every positive instance at its
/// current argmax and linearizes `-lambda F_s` at the current weights; the
/// remaining convex problem goes to the dual solver. A round is accepted
/// only if it lowers the convex surrogate, so the full objective never
/// increases.
pub fn cccp_train(
    instances: &[TrainingInstance],
    pairs: &[(Vec<f64>, Vec<f64>)],
    params: &CccpParams,
    init: Option<&LatentModel>,
) -> Result<CccpReport> {
    if !instances.iter().any(|i| i.label == 1) {
        return Err(Error::NoPositives);
    }
    if !instances.iter().any(|i| i.label == 0) {
        return Err(Error::NoNegatives);
    }
    let dim = instances[0].candidates[0].len();
    for inst in instances {
        if inst.candidates.is_empty() {
            return Err(Error::EmptyCandidates);
        }
        if let Some(v) = inst.candidates.iter().find(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: v.len(),
            });
        }
        if inst.candidates.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::DegenerateFeatures);
        }
    }
    let mut events = Vec::new();
    let mut model = match init {
        Some(m) if m.dim() == dim => {
            let mut m = m.clone();
            m.training_iteration = 0;
            m
        }
        Some(m) => {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: m.dim(),
            })
        }
        None => LatentModel::zeros_for(dim),
    };

    let diffs: Vec<Vec<f64>> = pairs
        .iter()
        .map(|(a, b)| a.iter().zip(b).map(|(p, q)| p - q).collect())
        .collect();
    if diffs.iter().any(|d| d.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: diffs.iter().map(|d| d.len()).find(|&l| l != dim).unwrap_or(0),
        });
    }
    let mut lambda = if diffs.is_empty() { 0.0 } else { params.lambda };
    if lambda > 0.0 {
        let top = top_eigenvalue(&diffs, dim);
        let mut halvings = 0;
        while lambda * top > params.curvature_bound {
            lambda /= 2.0;
            halvings += 1;
        }
        if halvings > 0 {
            events.push(format!(
                "lambda halved {halvings}x to {lambda:.3e} (top curvature {top:.3e})"
            ));
        }
    }

    let mut objective = full_objective(&model, instances, pairs, params.c, lambda)?;
    if !objective.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    let mut objectives = vec![objective];
    // Dual variables per instance; positives keep a single entry that
    // follows the imputed window.
    let mut alphas: Vec<Vec<f64>> = instances
        .iter()
        .map(|i| vec![0.0; if i.label == 1 { 1 } else { i.candidates.len() }])
        .collect();
    let mut rounds = 0;
    for round in 0..params.max_outer {
        let chosen: Vec<usize> = instances
            .iter()
            .map(|i| if i.label == 1 { argmax_candidate(&model, i) } else { 0 })
            .collect();
        let mut linear = vec![0.0; dim];
        if lambda > 0.0 {
            for d in &diffs {
                axpy(2.0 * lambda * dot(&model.weights, d), d, &mut linear);
            }
        }
        let groups: Vec<HingeGroup<'_>> = instances
            .iter()
            .zip(&chosen)
            .map(|(inst, &h)| HingeGroup {
                sign: if inst.label == 1 { 1.0 } else { -1.0 },
                cap: params.c * inst.weight,
                rows: if inst.label == 1 {
                    vec![inst.candidates[h].as_slice()]
                } else {
                    inst.candidates.iter().map(|v| v.as_slice()).collect()
                },
            })
            .collect();
        let problem = InnerProblem { dim, groups, linear };
        let before = problem.primal(&model.weights, model.bias);
        let sol = solve_inner(&problem, &params.solver, Some(alphas.clone()));
        let after = problem.primal(&sol.weights, sol.bias);
        rounds = round + 1;
        debug!(
            "cccp round {round}: surrogate {before:.6} -> {after:.6} ({} passes, violation {:.2e})",
            sol.report.passes, sol.report.max_violation
        );
        if !after.is_finite() || sol.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFiniteObjective);
        }
        if after >= before {
            // The solver could not improve on the current point.
            objectives.push(objective);
            break;
        }
        alphas = sol.alphas;
        let candidate = LatentModel {
            weights: sol.weights,
            bias: sol.bias,
            ..model.clone()
        };
        let next = full_objective(&candidate, instances, pairs, params.c, lambda)?;
        if !next.is_finite() {
            return Err(Error::NonFiniteObjective);
        }
        let improvement = objective - next;
        model = candidate;
        objective = next;
        objectives.push(objective);
        if improvement < params.rel_tol * objective.abs().max(1.0) {
            break;
        }
    }
    model.training_iteration = rounds;
    let latent = instances.iter().map(|i| argmax_candidate(&model, i)).collect();
    Ok(CccpReport {
        model,
        objectives,
        lambda_effective: lambda,
        outer_rounds: rounds,
        latent,
        events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Vec<TrainingInstance> {
        // Positives hold one object-like candidate (large first coordinate)
        // and one clutter candidate; negatives only clutter.
        vec![
            TrainingInstance::new(0, 1, vec![vec![0.1, 0.9, 0.0, 0.2], vec![2.0, 0.1, 0.3, 0.0]], 1.0).unwrap(),
            TrainingInstance::new(1, 1, vec![vec![1.8, 0.0, 0.1, 0.2], vec![0.2, 0.8, 0.1, 0.1]], 1.0).unwrap(),
            TrainingInstance::new(2, 0, vec![vec![0.0, 1.0, 0.2, 0.1], vec![0.1, 0.7, 0.0, 0.3]], 1.0).unwrap(),
            TrainingInstance::new(3, 0, vec![vec![0.2, 0.9, 0.1, 0.0], vec![0.0, 0.8, 0.3, 0.2]], 1.0).unwrap(),
        ]
    }

    #[test]
    fn separable_toy_reaches_zero_loss() {
        let params = CccpParams {
            c: 10.0,
            solver: SolverParams { tol: 1e-9, max_passes: 20_000, seed: 0 },
            ..CccpParams::default()
        };
        let rep = cccp_train(&toy(), &[], &params, None).unwrap();
        for inst in toy() {
            assert!(super::super::dc_loss(&rep.model, &inst).unwrap() < 1e-6);
        }
        assert_eq!(rep.latent[0], 1);
        assert_eq!(rep.latent[1], 0);
        for w in rep.objectives.windows(2) {
            assert!(w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0));
        }
    }

    #[test]
    fn requires_both_labels() {
        let pos: Vec<_> = toy().into_iter().filter(|i| i.label == 1).collect();
        let neg: Vec<_> = toy().into_iter().filter(|i| i.label == 0).collect();
        assert!(matches!(cccp_train(&pos, &[], &CccpParams::default(), None), Err(Error::NoPositives) | Err(Error::NoNegatives)));
        assert!(matches!(cccp_train(&neg, &[], &CccpParams::default(), None), Err(Error::NoPositives)));
    }

    #[test]
    fn lambda_is_halved_for_strong_pairs() {
        let pairs = vec![(vec![10.0, 0.0, 0.0, 0.0], vec![0.0; 4])];
        let rep = cccp_train(&toy(), &pairs, &CccpParams { lambda: 0.1, ..CccpParams::default() }, None).unwrap();
        // top eigenvalue 100: lambda must drop to <= 0.0025
        assert!(rep.lambda_effective <= 0.0025 + 1e-15);
        assert!(!rep.events.is_empty());
        assert!(rep.model.is_finite());
    }
}
