//! Domain values shared across the pipeline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{mean_aspect, reshape_to_aspect, BBox};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalSource {
    Objectness,
    SlidingWindow,
    Tracked,
}

/// A candidate object window together with its three ranking cues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub bbox: BBox,
    pub frame_index: usize,
    /// Mean foreground score inside the box, in `[0, 1]`.
    pub motion_score: f64,
    /// Contour-density objectness, in `[0, 1]`.
    pub objectness_score: f64,
    /// Raw detector score; zero until a detector exists.
    pub detection_score: f64,
    pub track_id: Option<u64>,
    pub source: ProposalSource,
}

impl Proposal {
    pub fn new(frame_index: usize, bbox: BBox, source: ProposalSource) -> Self {
        Proposal {
            bbox,
            frame_index,
            motion_score: 0.0,
            objectness_score: 0.0,
            detection_score: 0.0,
            track_id: None,
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Discovered,
    Propagated,
    HardNegative,
    NegativeImage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub proposal: Proposal,
    pub label: u8,
    pub provenance: Provenance,
    pub iteration: usize,
    /// Propagated score `g`; 1 for discovered positives, 0 for mined negatives.
    pub soft_score: f64,
}

impl LabeledSample {
    pub fn new(
        proposal: Proposal,
        label: u8,
        provenance: Provenance,
        iteration: usize,
        soft_score: f64,
    ) -> Result<Self> {
        if label > 1 {
            return Err(Error::Config(format!("label must be 0 or 1, got {label}")));
        }
        if provenance == Provenance::HardNegative && label != 0 {
            return Err(Error::Config("hard negatives must carry label 0".into()));
        }
        Ok(LabeledSample {
            proposal,
            label,
            provenance,
            iteration,
            soft_score: soft_score.clamp(0.0, 1.0),
        })
    }

    pub fn is_positive(&self) -> bool {
        self.label == 1
    }
}

/// Learning hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    /// Loss weight of the latent SVM objective.
    pub c: f64,
    /// Weight of the spatial (object enforcement) regularizer.
    pub lambda: f64,
    /// Upper bound for the propagation weight line search.
    pub gamma_max: f64,
    /// Learning rate; `l * (r - 1)` unlabeled samples are considered per iteration.
    pub r: f64,
    /// Tracking horizon in frames.
    pub tau: usize,
    pub k_nn: usize,
    pub bg_threshold: f64,
    pub nms_iou: f64,
    pub stop_epsilon: f64,
    pub max_iterations: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            c: 1.0,
            lambda: 0.1,
            gamma_max: 0.5,
            r: 1.5,
            tau: 10,
            k_nn: 5,
            bg_threshold: 0.20,
            nms_iou: 0.5,
            stop_epsilon: 1e-3,
            max_iterations: 20,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if !(self.c > 0.0 && self.c.is_finite()) {
            return bad("c must be > 0");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be >= 0");
        }
        if !(0.0..=1.0).contains(&self.gamma_max) {
            return bad("gamma_max must lie in [0, 1]");
        }
        if !(self.r > 1.0 && self.r.is_finite()) {
            return bad("r must be > 1");
        }
        if self.k_nn < 1 {
            return bad("k_nn must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.bg_threshold) {
            return bad("bg_threshold must lie in [0, 1]");
        }
        if !(self.nms_iou > 0.0 && self.nms_iou < 1.0) {
            return bad("nms_iou must lie in (0, 1)");
        }
        if !(self.stop_epsilon > 0.0) {
            return bad("stop_epsilon must be > 0");
        }
        if self.max_iterations < 1 {
            return bad("max_iterations must be >= 1");
        }
        Ok(())
    }
}

/// Reshape every proposal about its center to the mean aspect ratio of
/// the set, keeping heights, then clamp into the frame. Order is preserved.
pub fn normalize_aspect(
    proposals: &[Proposal],
    frame_width: usize,
    frame_height: usize,
) -> Result<Vec<Proposal>> {
    let aspect = mean_aspect(proposals.iter().map(|p| &p.bbox))
        .ok_or(Error::EmptyInput("normalize_aspect needs at least one proposal"))?;
    Ok(normalize_to_aspect(proposals, aspect, frame_width, frame_height))
}

/// As [`normalize_aspect`] with an externally fixed target ratio.
pub fn normalize_to_aspect(
    proposals: &[Proposal],
    aspect: f64,
    frame_width: usize,
    frame_height: usize,
) -> Vec<Proposal> {
    proposals
        .iter()
        .map(|p| {
            let mut q = p.clone();
            q.bbox = reshape_to_aspect(&p.bbox, aspect).clamp_to(frame_width, frame_height);
            q
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prop(b: BBox) -> Proposal {
        Proposal::new(0, b, ProposalSource::Objectness)
    }

    #[test]
    fn single_box_is_unchanged() {
        let p = prop(BBox::new(0.0, 0.0, 10.0, 20.0));
        let out = normalize_aspect(&[p.clone()], 64, 64).unwrap();
        assert_eq!(out[0].bbox, p.bbox);
    }

    #[test]
    fn two_ratios_meet_at_mean() {
        let ps = [
            prop(BBox::new(10.0, 10.0, 8.0, 20.0)),
            prop(BBox::new(30.0, 10.0, 12.0, 20.0)),
        ];
        let out = normalize_aspect(&ps, 64, 64).unwrap();
        for (o, p) in out.iter().zip(&ps) {
            assert!((o.bbox.aspect() - 0.5).abs() < 1e-9);
            assert_eq!(o.bbox.center(), p.bbox.center());
            assert_eq!(o.bbox.h, p.bbox.h);
        }
    }

    #[test]
    fn edge_box_is_clamped() {
        let ps = [
            prop(BBox::new(0.0, 0.0, 4.0, 20.0)),
            prop(BBox::new(30.0, 0.0, 36.0, 20.0)),
        ];
        let out = normalize_aspect(&ps, 64, 64).unwrap();
        // mean aspect 1.0: the first box grows to 20 wide about x=2 and is cut at 0.
        assert_eq!(out[0].bbox, BBox::new(0.0, 0.0, 12.0, 20.0));
        for o in &out {
            assert!(o.bbox.within(64, 64));
        }
    }

    #[test]
    fn empty_is_an_error() {
        assert!(matches!(normalize_aspect(&[], 10, 10), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn hard_negative_must_be_negative() {
        let p = prop(BBox::new(0.0, 0.0, 4.0, 8.0));
        assert!(LabeledSample::new(p.clone(), 1, Provenance::HardNegative, 1, 0.0).is_err());
        assert!(LabeledSample::new(p, 0, Provenance::HardNegative, 1, 0.0).is_ok());
    }

    #[test]
    fn default_hyperparams_validate() {
        Hyperparams::default().validate().unwrap();
        let bad = Hyperparams { r: 1.0, ..Hyperparams::default() };
        assert!(bad.validate().is_err());
    }
}
