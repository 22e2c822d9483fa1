//! Fixtures and oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use scenedet::plm::{cccp_train, CccpParams, LatentModel, TrainingInstance};
use scenedet::propagation::{LineSearchInput, PoolEntry, SampleGraph};

/// Harmonic solution by a dense solve of `L_uu g_u = W_ul y_l` over the
/// unlabeled vertices that can reach a label.
pub fn dense_harmonic(graph: &SampleGraph, labels: &[f64], unreachable: &[usize]) -> Vec<f64> {
    let n = graph.len();
    let l = graph.labeled;
    let free: Vec<usize> = (l..n).filter(|v| !unreachable.contains(v)).collect();
    let mut out = vec![0.0; n - l];
    if free.is_empty() {
        return out;
    }
    let pos = |v: usize| free.iter().position(|&f| f == v);
    let m = free.len();
    let mut a = DMatrix::<f64>::zeros(m, m);
    let mut b = DVector::<f64>::zeros(m);
    for (r, &v) in free.iter().enumerate() {
        for (j, w) in graph.edges().into_iter().filter_map(|(i, j, w)| match (i == v, j == v) {
            (true, _) => Some((j, w)),
            (_, true) => Some((i, w)),
            _ => None,
        }) {
            a[(r, r)] += w;
            if j < l {
                b[r] += w * labels[j];
            } else if let Some(c) = pos(j) {
                a[(r, c)] -= w;
            }
        }
    }
    let g = a.lu().solve(&b).expect("reachable block is non-singular");
    for (r, &v) in free.iter().enumerate() {
        out[v - l] = g[r];
    }
    out
}

pub fn random_graph_case(rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, usize, usize, Vec<f64>) {
    let n = rng.random_range(3..=50);
    let labeled = rng.random_range(1..=10.min(n - 1));
    let k = rng.random_range(1..=6);
    let dim = rng.random_range(1..=4);
    let features = (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
    let labels = (0..labeled)
        .map(|_| if rng.random_bool(0.7) { rng.random_range(0..2) as f64 } else { rng.random() })
        .collect();
    (features, labeled, k, labels)
}

pub type Pairs = Vec<(Vec<f64>, Vec<f64>)>;

pub fn random_set(rng: &mut ChaCha8Rng) -> (Vec<TrainingInstance>, Pairs) {
    let n = rng.random_range(2..=30);
    let dim = rng.random_range(1..=64);
    let mut instances = Vec::new();
    for i in 0..n {
        // First two instances pin down both classes.
        let label = match i {
            0 => 1,
            1 => 0,
            _ => rng.random_range(0..2),
        };
        let shift = if label == 1 { 0.3 } else { -0.3 };
        let m = rng.random_range(1..=5);
        let candidates = (0..m)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0) + shift).collect())
            .collect();
        let weight = rng.random_range(0.2..=1.0);
        instances.push(TrainingInstance::new(i, label, candidates, weight).unwrap());
    }
    let pairs = (0..rng.random_range(0..6))
        .map(|_| {
            let a: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            (a, b)
        })
        .collect();
    (instances, pairs)
}

/// Hinge on the best candidate, written out per label.
pub fn brute_objective(model: &LatentModel, instances: &[TrainingInstance], c: f64) -> f64 {
    let mut total = 0.5 * model.norm_sq();
    for inst in instances {
        let best = inst
            .candidates
            .iter()
            .map(|v| v.iter().zip(&model.weights).map(|(a, b)| a * b).sum::<f64>() + model.bias)
            .fold(f64::NEG_INFINITY, f64::max);
        let hinge = if inst.label == 1 { (1.0 - best).max(0.0) } else { (1.0 + best).max(0.0) };
        total += c * inst.weight * hinge;
    }
    total
}


fn cluster_point(rng: &mut ChaCha8Rng, label: u8, dist: f64, dim: usize) -> Vec<f64> {
    let s = if label == 1 { dist } else { -dist };
    (0..dim).map(|_| s + rng.random_range(-0.3..0.3)).collect()
}

/// Labeled instances from two well-separated clusters.
pub fn clean_instances(rng: &mut ChaCha8Rng, per_class: usize, dim: usize) -> Vec<TrainingInstance> {
    (0..2 * per_class)
        .map(|i| {
            let label = (i % 2 == 0) as u8;
            TrainingInstance::single(i, label, cluster_point(rng, label, 1.0, dim), 1.0).unwrap()
        })
        .collect()
}

/// Pool entries deep inside the existing clusters with confident scores.
pub fn separable_pool(rng: &mut ChaCha8Rng, size: usize, dim: usize) -> Vec<PoolEntry> {
    (0..size)
        .map(|i| {
            let label = (i % 2 == 0) as u8;
            PoolEntry {
                features: cluster_point(rng, label, 3.0, dim),
                g: if label == 1 { 0.95 } else { 0.05 },
            }
        })
        .collect()
}

/// Pool entries with features and labels drawn independently of each other.
pub fn noise_pool(rng: &mut ChaCha8Rng, size: usize, dim: usize) -> Vec<PoolEntry> {
    (0..size)
        .map(|_| PoolEntry {
            features: (0..dim).map(|_| rng.random_range(-0.5..0.5)).collect(),
            g: if rng.random_bool(0.5) { rng.random_range(0.5..0.7) } else { rng.random_range(0.3..0.5) },
        })
        .collect()
}

pub fn line_search_params() -> CccpParams {
    CccpParams {
        c: 1.0,
        lambda: 0.0,
        max_outer: 5,
        ..CccpParams::default()
    }
}

pub fn incumbent(existing: &[TrainingInstance]) -> LatentModel {
    cccp_train(existing, &[], &line_search_params(), None).unwrap().model
}

pub fn line_search_input<'a>(
    existing: &'a [TrainingInstance],
    pool: &'a [PoolEntry],
    incumbent: &'a LatentModel,
    gamma_max: f64,
) -> LineSearchInput<'a> {
    LineSearchInput {
        existing,
        pairs: &[],
        pool,
        labeled: existing.len(),
        r: 2.0,
        gamma_max,
        incumbent,
        cccp: line_search_params(),
    }
}
