//! Harmonic label propagation on a kNN feature graph and the error-rate
//! controlled choice of how many propagated labels to accept.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plm::{cccp_train, infer_latent, CccpParams, LatentModel, TrainingInstance};
use crate::ranking::logistic;
use crate::types::{LabeledSample, Proposal, Provenance};

pub const SIGMA_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SampleGraph {
    /// Vertices `0..labeled` are labeled.
    pub labeled: usize,
    pub sigma: f64,
    /// Symmetric adjacency, each list sorted by neighbour index.
    pub neighbors: Vec<Vec<(usize, f64)>>,
}

impl SampleGraph {
    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn unlabeled(&self) -> usize {
        self.len() - self.labeled
    }

    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        self.neighbors[i]
            .binary_search_by_key(&j, |&(n, _)| n)
            .ok()
            .map(|p| self.neighbors[i][p].1)
    }

    /// Edges `(i, j, w)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (i, ns) in self.neighbors.iter().enumerate() {
            out.extend(ns.iter().filter(|&&(j, _)| j > i).map(|&(j, w)| (i, j, w)));
        }
        out
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// kNN graph, symmetrized with the "or" rule, with Gaussian weights whose
/// bandwidth is the median kNN distance. Distance ties go to the lower index.
pub fn build_graph(features: &[Vec<f64>], labeled: usize, k: usize) -> Result<SampleGraph> {
    if labeled == 0 {
        return Err(Error::NoLabeledVertices);
    }
    let n = features.len();
    if n < labeled + 1 {
        return Err(Error::TooFewSamples { need: labeled + 1, got: n });
    }
    if k == 0 {
        return Err(Error::Config("k_nn must be at least 1".into()));
    }
    let dim = features[0].len();
    if let Some(f) = features.iter().find(|f| f.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: f.len() });
    }
    if features.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateFeatures);
    }
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = sq_dist(&features[i], &features[j]).sqrt();
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let k = k.min(n - 1);
    let mut adjacent = vec![false; n * n];
    let mut knn_dists = Vec::with_capacity(n * k);
    for i in 0..n {
        let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| dist[i * n + a].total_cmp(&dist[i * n + b]).then(a.cmp(&b)));
        for &j in &order[..k] {
            adjacent[i * n + j] = true;
            adjacent[j * n + i] = true;
            knn_dists.push(dist[i * n + j]);
        }
    }
    knn_dists.sort_by(f64::total_cmp);
    let m = knn_dists.len();
    let median = if m % 2 == 1 {
        knn_dists[m / 2]
    } else {
        0.5 * (knn_dists[m / 2 - 1] + knn_dists[m / 2])
    };
    let sigma = median.max(SIGMA_FLOOR);
    let neighbors = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| adjacent[i * n + j])
                .map(|j| {
                    let d = dist[i * n + j];
                    (j, (-d * d / (2.0 * sigma * sigma)).exp().max(f64::MIN_POSITIVE))
                })
                .collect()
        })
        .collect();
    Ok(SampleGraph { labeled, sigma, neighbors })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationResult {
    /// Score per unlabeled vertex, in vertex order.
    pub scores: Vec<f64>,
    pub converged: bool,
    pub sweeps: usize,
    /// Unlabeled vertices with no path to a labeled one; their score is 0.
    pub unreachable: Vec<usize>,
}

pub const PROPAGATION_SWEEP_TOL: f64 = 1e-8;
pub const PROPAGATION_MAX_SWEEPS: usize = 10_000;
pub const PROPAGATION_RESIDUAL_TOL: f64 = 1e-14;

/// Harmonic extension of `labels` to the unlabeled vertices by in-order
/// Jacobi-preconditioned conjugate gradient on L_uu g = W_ul y, starting from
/// the current values. Returns whether the relative residual reached the tolerance.
fn conjugate_gradient(graph: &SampleGraph, free: &[usize], degree: &[f64], g: &mut [f64]) -> bool {
    let m = free.len();
    if m == 0 {
        return true;
    }
    let n = graph.len();
    // Residual of vertex v: sum_j w g_j - d_v g_v.
    let residual = |g: &[f64], v: usize| -> f64 {
        graph.neighbors[v].iter().map(|&(j, w)| w * g[j]).sum::<f64>() - degree[v] * g[v]
    };
    let scale = free.iter().map(|&v| degree[v]).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut r: Vec<f64> = free.iter().map(|&v| residual(g, v)).collect();
    let mut z: Vec<f64> = free.iter().zip(&r).map(|(&v, ri)| ri / degree[v]).collect();
    let mut dir = vec![0.0; n];
    for (&v, zi) in free.iter().zip(&z) {
        dir[v] = *zi;
    }
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    for _ in 0..(4 * m).max(100) {
        if r.iter().fold(0.0_f64, |a, x| a.max(x.abs())) <= PROPAGATION_RESIDUAL_TOL * scale {
            return true;
        }
        // A p with labeled and unreached entries of dir held at zero.
        let ap: Vec<f64> = free
            .iter()
            .map(|&v| degree[v] * dir[v] - graph.neighbors[v].iter().map(|&(j, w)| w * dir[j]).sum::<f64>())
            .collect();
        let pap: f64 = free.iter().zip(&ap).map(|(&v, a)| dir[v] * a).sum();
        if pap <= 0.0 {
            break;
        }
        let step = rz / pap;
        for (k, &v) in free.iter().enumerate() {
            g[v] += step * dir[v];
            r[k] -= step * ap[k];
        }
        for (k, &v) in free.iter().enumerate() {
            z[k] = r[k] / degree[v];
        }
        let next: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = next / rz;
        rz = next;
        for (k, &v) in free.iter().enumerate() {
            dir[v] = z[k] + beta * dir[v];
        }
    }
    r.iter().fold(0.0_f64, |a, x| a.max(x.abs())) <= PROPAGATION_RESIDUAL_TOL * scale
}

/// Gauss-Seidel sweeps of neighbourhood averaging, polished by conjugate gradient.
pub fn propagate(graph: &SampleGraph, labels: &[f64]) -> Result<PropagationResult> {
    if graph.labeled == 0 || labels.is_empty() {
        return Err(Error::NoLabeledVertices);
    }
    if labels.len() != graph.labeled {
        return Err(Error::DimensionMismatch {
            expected: graph.labeled,
            got: labels.len(),
        });
    }
    let n = graph.len();
    let mut reached = vec![false; n];
    let mut queue: std::collections::VecDeque<usize> = (0..graph.labeled).collect();
    reached[..graph.labeled].iter_mut().for_each(|r| *r = true);
    while let Some(v) = queue.pop_front() {
        for &(j, _) in &graph.neighbors[v] {
            if !reached[j] {
                reached[j] = true;
                queue.push_back(j);
            }
        }
    }
    let unreachable: Vec<usize> = (graph.labeled..n).filter(|&v| !reached[v]).collect();

    let lo = labels.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = labels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut g = vec![0.0; n];
    g[..graph.labeled].copy_from_slice(labels);
    let free: Vec<usize> = (graph.labeled..n).filter(|&v| reached[v]).collect();
    let degree: Vec<f64> = (0..n).map(|v| graph.neighbors[v].iter().map(|&(_, w)| w).sum()).collect();
    let mut sweeps = 0;
    while sweeps < PROPAGATION_MAX_SWEEPS {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for &v in &free {
            let num: f64 = graph.neighbors[v].iter().map(|&(j, w)| w * g[j]).sum();
            let next = num / degree[v];
            max_change = max_change.max((next - g[v]).abs());
            g[v] = next;
        }
        if max_change < PROPAGATION_SWEEP_TOL {
            break;
        }
    }
    // Near-zero bridging weights stall the sweeps; preconditioned CG on the
    // unlabeled block finishes the solve.
    let converged = conjugate_gradient(graph, &free, &degree, &mut g);
    for &v in &free {
        // Clamped so rounding cannot leave the label range.
        g[v] = g[v].clamp(lo, hi);
    }
    Ok(PropagationResult {
        scores: g.split_off(graph.labeled),
        converged,
        sweeps,
        unreachable,
    })
}

/// Number of labels accepted at control value `gamma`.
pub fn label_budget(labeled: usize, r: f64, gamma: f64) -> usize {
    (gamma * labeled as f64 * (r - 1.0)).round().max(0.0) as usize
}

/// Indices of the `u` highest scores, ties to the lower index.
pub fn top_scores(scores: &[f64], u: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(u);
    order
}

/// The `round(l (r - 1))` highest-scoring pool entries as new samples,
/// positive when `g >= 0.5`.
pub fn select_new_labels(
    result: &PropagationResult,
    labeled: usize,
    r: f64,
    pool: &[Proposal],
    iteration: usize,
) -> Result<Vec<LabeledSample>> {
    let n = result.scores.len().min(pool.len());
    let u = label_budget(labeled, r, 1.0);
    top_scores(&result.scores[..n], u)
        .into_iter()
        .map(|i| {
            let g = result.scores[i];
            LabeledSample::new(pool[i].clone(), (g >= 0.5) as u8, Provenance::Propagated, iteration, g)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRateEstimate {
    pub xi_l: f64,
    pub xi_u: f64,
    pub gamma: f64,
    pub u: usize,
}

/// Mean absolute and mean signed gap between logistic scores and targets.
pub fn error_rates_from_scores(scores: &[f64], targets: &[f64]) -> Result<(f64, f64)> {
    if scores.is_empty() {
        return Err(Error::EmptySamples);
    }
    if scores.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            got: targets.len(),
        });
    }
    let (mut abs, mut signed) = (0.0, 0.0);
    for (&s, &t) in scores.iter().zip(targets) {
        let d = logistic(s).clamp(0.0, 1.0) - t;
        abs += d.abs();
        signed += d;
    }
    let n = scores.len() as f64;
    Ok((abs / n, signed / n))
}

/// Mean `|logistic(f(h)) - y|` over `(features, target)` samples.
pub fn estimate_error_rate(model: &LatentModel, samples: &[(Vec<f64>, f64)]) -> Result<f64> {
    let scores: Vec<f64> = samples.iter().map(|(v, _)| model.score(v)).collect();
    let targets: Vec<f64> = samples.iter().map(|(_, t)| *t).collect();
    Ok(error_rates_from_scores(&scores, &targets)?.0)
}

/// Error rate of training instances under `model`, each scored by its
/// best candidate against its stored label.
pub fn instance_error_rate(model: &LatentModel, instances: &[TrainingInstance]) -> Result<(f64, f64)> {
    let mut scores = Vec::with_capacity(instances.len());
    for inst in instances {
        scores.push(infer_latent(model, inst)?.score);
    }
    let targets: Vec<f64> = instances.iter().map(|i| i.label as f64).collect();
    error_rates_from_scores(&scores, &targets)
}

/// Error rate of the instances reweighted so that positives make up
/// `positive_share` of the total. Falls back to the plain rate when one
/// class is absent.
pub fn matched_error_rate(model: &LatentModel, instances: &[TrainingInstance], positive_share: f64) -> Result<f64> {
    let mut sums = [0.0; 2];
    let mut counts = [0usize; 2];
    for inst in instances {
        let s = infer_latent(model, inst)?.score;
        let y = inst.label as usize;
        sums[y] += (logistic(s) - y as f64).abs();
        counts[y] += 1;
    }
    if counts.contains(&0) {
        return Ok((sums[0] + sums[1]) / instances.len().max(1) as f64);
    }
    let (neg, pos) = (sums[0] / counts[0] as f64, sums[1] / counts[1] as f64);
    Ok(positive_share * pos + (1.0 - positive_share) * neg)
}

/// A propagated candidate: its features and propagated score.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolEntry {
    pub features: Vec<f64>,
    pub g: f64,
}

impl PoolEntry {
    pub fn label(&self) -> u8 {
        (self.g >= 0.5) as u8
    }

    /// Instance weight: confidence in the assigned label.
    pub fn weight(&self) -> f64 {
        let w = if self.label() == 1 { self.g } else { 1.0 - self.g };
        w.max(1e-3)
    }
}

pub struct LineSearchInput<'a> {
    pub existing: &'a [TrainingInstance],
    pub pairs: &'a [(Vec<f64>, Vec<f64>)],
    /// Candidates in acceptance order (highest `g` first).
    pub pool: &'a [PoolEntry],
    /// Number of existing labeled samples `l` driving the budget.
    pub labeled: usize,
    pub r: f64,
    pub gamma_max: f64,
    pub incumbent: &'a LatentModel,
    pub cccp: CccpParams,
}

#[derive(Debug, Clone)]
pub struct LineSearchOutcome {
    pub estimate: ErrorRateEstimate,
    /// Every trial in ascending `gamma`.
    pub trials: Vec<ErrorRateEstimate>,
    /// Provisional model at the accepted `gamma` (the incumbent at 0).
    pub model: LatentModel,
}

/// Grid `0.0, 0.1, ...` up to `gamma_max`.
pub fn gamma_grid(gamma_max: f64) -> Vec<f64> {
    (0..=10).map(|k| k as f64 / 10.0).filter(|g| *g <= gamma_max + 1e-12).collect()
}

/// Largest `gamma` on the grid whose newly labeled samples have an error
/// rate no larger than the existing samples', both measured under a model
/// retrained with those samples. New samples are scored against the
/// retrained model's own thresholded decision.
pub fn gamma_line_search(input: &LineSearchInput<'_>) -> Result<LineSearchOutcome> {
    if input.existing.is_empty() {
        return Err(Error::EmptySamples);
    }
    let (xi0, _) = instance_error_rate(input.incumbent, input.existing)?;
    let base = ErrorRateEstimate {
        xi_l: xi0,
        xi_u: 0.0,
        gamma: 0.0,
        u: 0,
    };
    let mut best = (base, input.incumbent.clone());
    let mut trials = vec![base];
    let mut warm = input.incumbent.clone();
    let mut last_u = 0;
    for gamma in gamma_grid(input.gamma_max).into_iter().skip(1) {
        let u = label_budget(input.labeled, input.r, gamma).min(input.pool.len());
        if u == 0 {
            let est = ErrorRateEstimate { gamma, ..base };
            trials.push(est);
            best = (est, input.incumbent.clone());
            continue;
        }
        if u == last_u {
            // Same sample set as the previous trial; same verdict.
            let prev = *trials.last().unwrap();
            let est = ErrorRateEstimate { gamma, ..prev };
            trials.push(est);
            if est.xi_u <= est.xi_l {
                best.0 = est;
            }
            continue;
        }
        last_u = u;
        let new = &input.pool[..u];
        let mut instances = input.existing.to_vec();
        for (i, e) in new.iter().enumerate() {
            instances.push(TrainingInstance::single(
                input.existing.len() + i,
                e.label(),
                e.features.clone(),
                e.weight(),
            )?);
        }
        let report = match cccp_train(&instances, input.pairs, &input.cccp, Some(&warm)) {
            Ok(r) => r,
            Err(Error::NoPositives) | Err(Error::NoNegatives) => {
                trials.push(ErrorRateEstimate {
                    xi_l: xi0,
                    xi_u: f64::INFINITY,
                    gamma,
                    u,
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        let model = report.model;
        let positive_share = new.iter().filter(|e| e.label() == 1).count() as f64 / u as f64;
        let xi_l = matched_error_rate(&model, input.existing, positive_share)?;
        let scores: Vec<f64> = new.iter().map(|e| model.score(&e.features)).collect();
        let targets: Vec<f64> = scores.iter().map(|&s| (s > 0.0) as u8 as f64).collect();
        let (xi_u, _) = error_rates_from_scores(&scores, &targets)?;
        let est = ErrorRateEstimate { xi_l, xi_u, gamma, u };
        trials.push(est);
        if xi_u <= xi_l {
            best = (est, model.clone());
        }
        warm = model;
    }
    Ok(LineSearchOutcome {
        estimate: best.0,
        trials,
        model: best.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equidistant_triangle() {
        let f = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let g = build_graph(&f, 1, 1).unwrap();
        assert!(g.weight(0, 1).is_some());
        assert!(g.weight(0, 2).is_some());
        assert!(g.weight(1, 2).is_none());
        assert_eq!(g.weight(2, 0), g.weight(0, 2));
    }

    #[test]
    fn identical_features_have_unit_weight() {
        let g = build_graph(&vec![vec![1.0, 2.0]; 4], 1, 2).unwrap();
        assert!(g.edges().iter().all(|e| e.2 == 1.0));
    }

    #[test]
    fn single_neighbour_and_symmetric_cases() {
        let one = SampleGraph {
            labeled: 1,
            sigma: 1.0,
            neighbors: vec![vec![(1, 0.3)], vec![(0, 0.3)]],
        };
        assert_eq!(propagate(&one, &[1.0]).unwrap().scores, vec![1.0]);
        let mid = SampleGraph {
            labeled: 2,
            sigma: 1.0,
            neighbors: vec![vec![(2, 0.5)], vec![(2, 0.5)], vec![(0, 0.5), (1, 0.5)]],
        };
        assert_eq!(propagate(&mid, &[0.0, 1.0]).unwrap().scores, vec![0.5]);
    }

    #[test]
    fn unreachable_vertices_score_zero() {
        let g = SampleGraph {
            labeled: 1,
            sigma: 1.0,
            neighbors: vec![vec![], vec![(2, 1.0)], vec![(1, 1.0)]],
        };
        let r = propagate(&g, &[1.0]).unwrap();
        assert_eq!(r.scores, vec![0.0, 0.0]);
        assert_eq!(r.unreachable, vec![1, 2]);
    }

    #[test]
    fn budget() {
        assert_eq!(label_budget(10, 1.5, 1.0), 5);
        assert_eq!(label_budget(10, 1.0 + 1e-9, 1.0), 0);
        let r = PropagationResult {
            scores: vec![0.2, 0.9, 0.6],
            converged: true,
            sweeps: 1,
            unreachable: vec![],
        };
        let pool: Vec<Proposal> = (0..3)
            .map(|i| Proposal::new(i, crate::geometry::BBox::new(0.0, 0.0, 8.0, 16.0), crate::types::ProposalSource::Objectness))
            .collect();
        let sel = select_new_labels(&r, 10, 1.5, &pool, 2).unwrap();
        assert_eq!(sel.len(), 3);
        assert_eq!(sel[0].proposal.frame_index, 1);
        assert_eq!(sel.iter().map(|s| s.label).collect::<Vec<_>>(), vec![1, 1, 0]);
    }

    #[test]
    fn error_rate_arithmetic() {
        let (xi, _) = error_rates_from_scores(&[0.0, 0.0], &[1.0, 0.0]).unwrap();
        assert_eq!(xi, 0.5);
        let s = [2.0, -1.0, 0.5, -3.0];
        let t = [1.0, 0.0, 0.0, 1.0];
        let want = ((1.0 - logistic(2.0)) + logistic(-1.0) + logistic(0.5) + (1.0 - logistic(-3.0))) / 4.0;
        assert!((error_rates_from_scores(&s, &t).unwrap().0 - want).abs() < 1e-12);
        assert!(matches!(error_rates_from_scores(&[], &[]), Err(Error::EmptySamples)));
    }

    #[test]
    fn grid() {
        assert_eq!(gamma_grid(0.5), vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5]);
        assert_eq!(gamma_grid(1.0).len(), 11);
    }
}
