use super::model::{dot, LatentModel};
use crate::error::{Error, Result};

/// One image for the latent SVM: its label and the features of its
/// candidate windows.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingInstance {
    pub image_id: usize,
    pub label: u8,
    pub candidates: Vec<Vec<f64>>,
    /// Multiplies the instance's loss; in `(0, 1]`.
    pub weight: f64,
}

impl TrainingInstance {
    pub fn new(image_id: usize, label: u8, candidates: Vec<Vec<f64>>, weight: f64) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::EmptyCandidates);
        }
        if label > 1 {
            return Err(Error::Config(format!("label must be 0 or 1, got {label}")));
        }
        if !(weight > 0.0 && weight <= 1.0) {
            return Err(Error::Config(format!("instance weight must lie in (0, 1], got {weight}")));
        }
        Ok(TrainingInstance {
            image_id,
            label,
            candidates,
            weight,
        })
    }

    pub fn single(image_id: usize, label: u8, features: Vec<f64>, weight: f64) -> Result<Self> {
        Self::new(image_id, label, vec![features], weight)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatentChoice {
    pub label: u8,
    pub index: usize,
    pub score: f64,
}

fn best_candidate(model: &LatentModel, inst: &TrainingInstance) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in inst.candidates.iter().enumerate() {
        if v.len() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                got: v.len(),
            });
        }
        let s = model.score(v);
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.ok_or(Error::EmptyCandidates)
}

/// Highest-scoring candidate (lowest index on ties) and the label it
/// implies; the label-0 configuration always scores 0.
pub fn infer_latent(model: &LatentModel, inst: &TrainingInstance) -> Result<LatentChoice> {
    let (index, score) = best_candidate(model, inst)?;
    Ok(LatentChoice {
        label: (score > 0.0) as u8,
        index,
        score,
    })
}

/// Margin-rescaled latent loss: best (label, window) score plus the 0/1
/// label loss, minus the best score under the true label.
pub fn dc_loss(model: &LatentModel, inst: &TrainingInstance) -> Result<f64> {
    let (_, best) = best_candidate(model, inst)?;
    let delta = |y: u8| -> f64 { if y == inst.label { 0.0 } else { 1.0 } };
    let outer = delta(0).max(best + delta(1));
    let inner = if inst.label == 1 { best } else { 0.0 };
    Ok((outer - inner).max(0.0))
}

/// `1/2 ||beta||^2 + C * sum_i weight_i * loss_i`.
pub fn objective_fl(model: &LatentModel, instances: &[TrainingInstance], c: f64) -> Result<f64> {
    let mut loss = 0.0;
    for inst in instances {
        loss += inst.weight * dc_loss(model, inst)?;
    }
    Ok(0.5 * model.norm_sq() + c * loss)
}

/// Sum over pairs of the squared score difference between an object
/// window and one of its spatial neighbours. The bias cancels.
pub fn spatial_reg_fs(model: &LatentModel, pairs: &[(Vec<f64>, Vec<f64>)]) -> Result<f64> {
    let mut total = 0.0;
    for (a, b) in pairs {
        if a.len() != model.dim() || b.len() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                got: if a.len() != model.dim() { a.len() } else { b.len() },
            });
        }
        let s = dot(&model.weights, a) - dot(&model.weights, b);
        total += s * s;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(w: &[f64], b: f64) -> LatentModel {
        LatentModel {
            weights: w.to_vec(),
            bias: b,
            ..LatentModel::zeros(w.len(), 32, 64)
        }
    }

    #[test]
    fn zero_model_picks_first() {
        let inst = TrainingInstance::new(0, 1, vec![vec![1.0, 0.0], vec![0.0, 1.0]], 1.0).unwrap();
        let c = infer_latent(&model(&[0.0, 0.0], 0.0), &inst).unwrap();
        assert_eq!(c, LatentChoice { label: 0, index: 0, score: 0.0 });
    }

    #[test]
    fn picks_brute_force_max() {
        let inst = TrainingInstance::new(0, 1, vec![vec![-1.0], vec![2.0], vec![0.5]], 1.0).unwrap();
        let c = infer_latent(&model(&[1.0], 0.0), &inst).unwrap();
        assert_eq!((c.index, c.label, c.score), (1, 1, 2.0));
        let n = infer_latent(&model(&[-1.0], 0.0), &inst).unwrap();
        assert_eq!(n.index, 0);
    }

    #[test]
    fn loss_cases() {
        let m = model(&[1.0], 0.0);
        let pos = TrainingInstance::single(0, 1, vec![0.2], 1.0).unwrap();
        assert!((dc_loss(&m, &pos).unwrap() - 0.8).abs() < 1e-15);
        let sure = TrainingInstance::single(0, 1, vec![3.0], 1.0).unwrap();
        assert_eq!(dc_loss(&m, &sure).unwrap(), 0.0);
        let neg = TrainingInstance::single(0, 0, vec![-3.0], 1.0).unwrap();
        assert_eq!(dc_loss(&m, &neg).unwrap(), 0.0);
        let bad_neg = TrainingInstance::single(0, 0, vec![0.5], 1.0).unwrap();
        assert_eq!(dc_loss(&m, &bad_neg).unwrap(), 1.5);
    }

    #[test]
    fn zero_model_objective_counts_instances() {
        let m = model(&[0.0, 0.0], 0.0);
        let insts = vec![
            TrainingInstance::single(0, 1, vec![1.0, 2.0], 1.0).unwrap(),
            TrainingInstance::single(1, 0, vec![3.0, 1.0], 1.0).unwrap(),
            TrainingInstance::single(2, 1, vec![0.0, 1.0], 1.0).unwrap(),
        ];
        assert_eq!(objective_fl(&m, &insts, 1.0).unwrap(), 3.0);
        assert_eq!(objective_fl(&m, &insts, 2.0).unwrap(), 6.0);
    }

    #[test]
    fn spatial_cases() {
        let d = [0.5, -1.0, 2.0];
        let pair = (vec![1.0, 0.0, 3.0], vec![0.5, 1.0, 1.0]);
        assert_eq!(spatial_reg_fs(&model(&[0.0; 3], 0.0), &[pair.clone()]).unwrap(), 0.0);
        let same = (pair.0.clone(), pair.0.clone());
        assert_eq!(spatial_reg_fs(&model(&[3.0, 1.0, -2.0], 7.0), &[same]).unwrap(), 0.0);
        let n2: f64 = d.iter().map(|x| x * x).sum();
        let v = spatial_reg_fs(&model(&d, 0.0), &[pair]).unwrap();
        assert!((v - n2 * n2).abs() < 1e-12);
    }

    #[test]
    fn empty_candidates_rejected() {
        assert!(matches!(TrainingInstance::new(0, 1, vec![], 1.0), Err(Error::EmptyCandidates)));
    }
}
