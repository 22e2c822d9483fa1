//! Sliding-window detection with greedy non-maximum suppression.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{DenseHog, CELL, FEATURE_DIM, WINDOW_H, WINDOW_W};
use crate::geometry::{iou, BBox};
use crate::plm::LatentModel;
use crate::scene::Frame;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BBox,
    pub score: f64,
    pub frame_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectParams {
    /// Window heights in pixels.
    pub scales: Vec<f64>,
    /// Window width over height; the model's window aspect when `None`.
    pub aspect: Option<f64>,
    /// Sub-cell grid phases per axis; the window step is one HOG cell
    /// divided by this.
    pub phases: usize,
    /// Raw score a window must exceed.
    pub threshold: f64,
    pub nms_iou: f64,
}

impl Default for DetectParams {
    fn default() -> Self {
        DetectParams {
            scales: vec![28.0, 32.0, 36.0, 40.0, 44.0, 48.0, 54.0, 60.0],
            aspect: None,
            phases: 2,
            threshold: 0.0,
            nms_iou: 0.5,
        }
    }
}

impl DetectParams {
    pub fn validate(&self) -> Result<()> {
        if self.scales.is_empty() || self.scales.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Config("detection scales must be positive and non-empty".into()));
        }
        if self.phases == 0 {
            return Err(Error::Config("phases must be at least 1".into()));
        }
        if !(self.nms_iou > 0.0 && self.nms_iou < 1.0) {
            return Err(Error::Config("nms_iou must be in (0, 1)".into()));
        }
        if let Some(a) = self.aspect {
            if !(a > 0.0) {
                return Err(Error::Config("aspect must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Score every window of the multi-scale grid. Windows are enumerated
/// by scale, grid phase, then row and column.
pub fn score_windows(model: &LatentModel, frame: &Frame, params: &DetectParams) -> Result<Vec<Detection>> {
    if model.dim() != FEATURE_DIM {
        return Err(Error::DimensionMismatch {
            expected: FEATURE_DIM,
            got: model.dim(),
        });
    }
    params.validate()?;
    let aspect = params
        .aspect
        .unwrap_or(model.window_w as f64 / model.window_h as f64);
    let mut out = Vec::new();
    for &h in &params.scales {
        let sy = h / WINDOW_H as f64;
        let sx = h * aspect / WINDOW_W as f64;
        for py in 0..params.phases {
            for px in 0..params.phases {
                let ox = (px * CELL) as f64 * sx / params.phases as f64;
                let oy = (py * CELL) as f64 * sy / params.phases as f64;
                let dense = DenseHog::new(frame, sx, sy, ox, oy);
                for (cx, cy) in dense.positions() {
                    out.push(Detection {
                        bbox: dense.window_box(cx, cy),
                        score: model.score(&dense.window_features(cx, cy)),
                        frame_index: frame.index,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Windows scoring above the threshold, after suppression, highest first.
pub fn detect(model: &LatentModel, frame: &Frame, params: &DetectParams) -> Result<Vec<Detection>> {
    let mut dets = score_windows(model, frame, params)?;
    dets.retain(|d| d.score > params.threshold);
    Ok(nms(&dets, params.nms_iou))
}

/// Greedy suppression: keep the best remaining detection, drop everything
/// overlapping it by `iou_thr` or more. Equal scores keep input order.
pub fn nms(dets: &[Detection], iou_thr: f64) -> Vec<Detection> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score).then(a.cmp(&b)));
    let mut kept: Vec<Detection> = Vec::new();
    for i in order {
        let d = &dets[i];
        if kept
            .iter()
            .all(|k| k.frame_index != d.frame_index || iou(&k.bbox, &d.bbox) < iou_thr)
        {
            kept.push(*d);
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(x: f64, score: f64) -> Detection {
        Detection {
            bbox: BBox::new(x, 0.0, 10.0, 10.0),
            score,
            frame_index: 0,
        }
    }

    #[test]
    fn identical_boxes_keep_best() {
        let kept = nms(&[det(0.0, 1.0), det(0.0, 2.0)], 0.5);
        assert_eq!(kept, vec![det(0.0, 2.0)]);
    }

    #[test]
    fn chain_keeps_ends() {
        // A-B and B-C overlap with IoU 0.6/1.4, A and C are disjoint.
        let (a, b, c) = (det(0.0, 3.0), det(4.0, 2.0), det(8.0, 1.0));
        assert!(iou(&a.bbox, &b.bbox) >= 0.4);
        let kept = nms(&[c, b, a], 0.4);
        assert_eq!(kept, vec![a, c]);
    }

    #[test]
    fn zero_model_detects_nothing() {
        let f = Frame::filled(0, 64, 96, 90);
        let m = LatentModel::zeros_for(FEATURE_DIM);
        assert!(detect(&m, &f, &DetectParams::default()).unwrap().is_empty());
    }
}
