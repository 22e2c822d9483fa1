//! Precision/recall, average precision and FPPI against ground truth.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::detect::Detection;
use crate::geometry::iou;
use crate::scene::GroundTruth;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub fppi: f64,
    pub tp: usize,
    pub fp: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalCurve {
    /// One point per distinct score, in decreasing threshold order.
    pub points: Vec<CurvePoint>,
    pub ap: f64,
    pub ground_truth: usize,
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub ap: f64,
    pub max_recall: f64,
    pub ground_truth: usize,
    pub detections: usize,
    pub frames: usize,
}

impl EvalCurve {
    pub fn max_recall(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.recall)
    }

    /// Best precision among operating points reaching `recall`; 0 when the
    /// curve never gets there.
    pub fn precision_at_recall(&self, recall: f64) -> f64 {
        self.points
            .iter()
            .filter(|p| p.recall + 1e-12 >= recall)
            .map(|p| p.precision)
            .fold(0.0, f64::max)
    }

    pub fn summary(&self) -> EvalSummary {
        EvalSummary {
            ap: self.ap,
            max_recall: self.max_recall(),
            ground_truth: self.ground_truth,
            detections: self.points.last().map_or(0, |p| p.tp + p.fp),
            frames: self.frames,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("threshold,precision,recall,fppi\n");
        for p in &self.points {
            let _ = writeln!(s, "{},{},{},{}", p.threshold, p.precision, p.recall, p.fppi);
        }
        s
    }
}

/// Greedy matching in decreasing score order: each detection takes the
/// unmatched ground-truth box in its frame with the highest IoU, if that
/// IoU reaches `iou_match`. Detections in frames outside the ground truth
/// count as false positives.
pub fn evaluate(dets: &[Detection], gt: &GroundTruth, iou_match: f64) -> EvalCurve {
    let mut order: Vec<&Detection> = dets.iter().collect();
    order.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.frame_index.cmp(&b.frame_index))
            .then(a.bbox.y.total_cmp(&b.bbox.y))
            .then(a.bbox.x.total_cmp(&b.bbox.x))
            .then(a.bbox.h.total_cmp(&b.bbox.h))
            .then(a.bbox.w.total_cmp(&b.bbox.w))
    });
    let total: usize = gt.frames.iter().map(Vec::len).sum();
    let frames = gt.len().max(1) as f64;
    let mut matched: Vec<Vec<bool>> = gt.frames.iter().map(|f| vec![false; f.len()]).collect();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut points: Vec<CurvePoint> = Vec::new();
    for (k, d) in order.iter().enumerate() {
        let mut hit = None;
        if let Some(boxes) = gt.frames.get(d.frame_index) {
            let mut best = iou_match;
            for (j, g) in boxes.iter().enumerate() {
                if matched[d.frame_index][j] {
                    continue;
                }
                let o = iou(&d.bbox, &g.bbox);
                if o >= best && hit.is_none_or(|(_, b)| o > b) {
                    hit = Some((j, o));
                    best = o;
                }
            }
        }
        match hit {
            Some((j, _)) => {
                matched[d.frame_index][j] = true;
                tp += 1;
            }
            None => fp += 1,
        }
        let last_of_score = order.get(k + 1).is_none_or(|n| n.score != d.score);
        if last_of_score {
            points.push(CurvePoint {
                threshold: d.score,
                precision: tp as f64 / (tp + fp) as f64,
                recall: if total > 0 { tp as f64 / total as f64 } else { 0.0 },
                fppi: fp as f64 / frames,
                tp,
                fp,
            });
        }
    }
    let ap = average_precision(&points);
    EvalCurve {
        points,
        ap,
        ground_truth: total,
        frames: gt.len(),
    }
}

/// All-points interpolated area under the precision/recall curve.
fn average_precision(points: &[CurvePoint]) -> f64 {
    let mut envelope: Vec<f64> = points.iter().map(|p| p.precision).collect();
    for i in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[i] = envelope[i].max(envelope[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (p, e) in points.iter().zip(envelope) {
        ap += (p.recall - prev_recall) * e;
        prev_recall = p.recall;
    }
    ap
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox;
    use crate::scene::GtBox;

    fn gt_one() -> GroundTruth {
        GroundTruth {
            frames: vec![vec![GtBox {
                bbox: BBox::new(10.0, 10.0, 10.0, 20.0),
                id: 0,
            }]],
        }
    }

    #[test]
    fn hit_then_miss() {
        let dets = [
            Detection {
                bbox: BBox::new(10.0, 10.0, 10.0, 20.0),
                score: 2.0,
                frame_index: 0,
            },
            Detection {
                bbox: BBox::new(40.0, 10.0, 10.0, 20.0),
                score: 1.0,
                frame_index: 0,
            },
        ];
        let c = evaluate(&dets, &gt_one(), 0.5);
        let pr: Vec<(f64, f64)> = c.points.iter().map(|p| (p.precision, p.recall)).collect();
        assert_eq!(pr, vec![(1.0, 1.0), (0.5, 1.0)]);
        assert_eq!(c.ap, 1.0);
        assert_eq!(c.points[1].fppi, 1.0);
    }

    #[test]
    fn no_detections() {
        let c = evaluate(&[], &gt_one(), 0.5);
        assert_eq!((c.ap, c.max_recall()), (0.0, 0.0));
        assert!(c.to_csv().starts_with("threshold,precision,recall,fppi"));
    }
}
