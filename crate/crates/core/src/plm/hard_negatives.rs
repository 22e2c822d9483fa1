use super::model::LatentModel;
use crate::error::Result;
use crate::features::extract_features;
use crate::geometry::{iou, BBox};
use crate::scene::Frame;
use crate::types::{Proposal, ProposalSource};

/// Members must overlap the anchor with IoU strictly inside `(0, this)`.
pub const HARD_NEGATIVE_IOU_MAX: f64 = 0.25;
/// Side ratio of part windows. An exact half-scale window nested in the
/// anchor has IoU 0.25, which the open interval excludes.
pub const PART_SCALE: f64 = 0.48;
/// Offset of the surrounding windows in units of the anchor size.
const SURROUND_SHIFT: f64 = 0.8;

#[derive(Debug, Clone, PartialEq)]
pub struct HardNegativeSet {
    pub anchor: Proposal,
    pub members: Vec<Proposal>,
    pub k: usize,
}

impl HardNegativeSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Sub-windows of `anchor` on a 3x3 placement grid, row-major.
pub fn part_windows(anchor: &BBox) -> Vec<BBox> {
    let (w, h) = (anchor.w * PART_SCALE, anchor.h * PART_SCALE);
    let mut out = Vec::with_capacity(9);
    for iy in 0..3 {
        for ix in 0..3 {
            let x = anchor.x + (anchor.w - w) * ix as f64 / 2.0;
            let y = anchor.y + (anchor.h - h) * iy as f64 / 2.0;
            out.push(BBox::new(x, y, w, h));
        }
    }
    out
}

fn surround_windows(anchor: &BBox) -> Vec<BBox> {
    let (dx, dy) = (anchor.w * SURROUND_SHIFT, anchor.h * SURROUND_SHIFT);
    [(-dx, 0.0), (dx, 0.0), (0.0, -dy), (0.0, dy)]
        .iter()
        .map(|&(x, y)| anchor.translate(x, y))
        .collect()
}

/// Keep the `k` highest-scoring candidates whose IoU with the anchor lies
/// in `(0, HARD_NEGATIVE_IOU_MAX)`. Ties keep input order.
pub fn select_hard_negatives(anchor: &Proposal, candidates: &[Proposal], k: usize) -> HardNegativeSet {
    let mut kept: Vec<(usize, &Proposal)> = candidates
        .iter()
        .enumerate()
        .filter(|(_, p)| {
            let o = iou(&anchor.bbox, &p.bbox);
            o > 0.0 && o < HARD_NEGATIVE_IOU_MAX
        })
        .collect();
    kept.sort_by(|a, b| b.1.detection_score.total_cmp(&a.1.detection_score).then(a.0.cmp(&b.0)));
    let mut members: Vec<Proposal> = Vec::with_capacity(k);
    for (_, p) in kept {
        if members.len() == k {
            break;
        }
        if !members.iter().any(|m| m.bbox == p.bbox) {
            members.push(p.clone());
        }
    }
    HardNegativeSet {
        anchor: anchor.clone(),
        members,
        k,
    }
}

/// Hard negatives around `anchor`: the frame's proposals plus the anchor's
/// part windows and shifted surroundings, scored by `model`.
pub fn mine_hard_negatives(
    frame: &Frame,
    proposals: &[Proposal],
    anchor: &Proposal,
    model: &LatentModel,
    k: usize,
) -> Result<HardNegativeSet> {
    let mut candidates: Vec<Proposal> = Vec::with_capacity(proposals.len() + 13);
    for p in proposals {
        let o = iou(&anchor.bbox, &p.bbox);
        if o > 0.0 && o < HARD_NEGATIVE_IOU_MAX {
            candidates.push(p.clone());
        }
    }
    for b in part_windows(&anchor.bbox).into_iter().chain(surround_windows(&anchor.bbox)) {
        if !b.within(frame.width, frame.height) {
            continue;
        }
        candidates.push(Proposal::new(frame.index, b, ProposalSource::SlidingWindow));
    }
    for c in &mut candidates {
        c.detection_score = model.score(&extract_features(frame, &c.bbox)?.values);
    }
    Ok(select_hard_negatives(anchor, &candidates, k))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prop(b: BBox, score: f64) -> Proposal {
        let mut p = Proposal::new(0, b, ProposalSource::Objectness);
        p.detection_score = score;
        p
    }

    #[test]
    fn parts_are_inside_the_interval() {
        let a = BBox::new(10.0, 10.0, 20.0, 40.0);
        for p in part_windows(&a).iter().chain(surround_windows(&a).iter()) {
            let o = iou(&a, p);
            assert!(o > 0.0 && o < HARD_NEGATIVE_IOU_MAX, "{o}");
        }
        let half = BBox::new(10.0, 10.0, 10.0, 20.0);
        assert!((iou(&a, &half) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn disjoint_candidates_give_empty_set() {
        let anchor = prop(BBox::new(0.0, 0.0, 10.0, 20.0), 1.0);
        let far = vec![prop(BBox::new(50.0, 50.0, 10.0, 20.0), 5.0)];
        assert!(select_hard_negatives(&anchor, &far, 5).is_empty());
    }

    #[test]
    fn best_part_comes_first() {
        let a = BBox::new(0.0, 0.0, 20.0, 40.0);
        let anchor = prop(a, 1.0);
        let parts = part_windows(&a);
        let cands = vec![
            prop(a.translate(16.0, 0.0), 0.5),
            prop(parts[1], 3.0),
            prop(a, 10.0),
            prop(parts[7], 0.1),
        ];
        let set = select_hard_negatives(&anchor, &cands, 2);
        assert_eq!(set.members.len(), 2);
        assert_eq!(set.members[0].bbox, parts[1]);
        assert_eq!(set.members[1].bbox, a.translate(16.0, 0.0));
    }
}
