//! Window proposals: contour-density objectness on edge maps, detector
//! driven local search, and block-matching temporal extension.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract_features, gradients};
use crate::geometry::{BBox, PixelRect};
use crate::integral::IntegralImage;
use crate::motion::{motion_score_integral, MotionMap};
use crate::plm::LatentModel;
use crate::scene::Frame;
use crate::types::{Proposal, ProposalSource};

/// Half-saturation constant of the edge-density squashing `t / (t + c)`.
pub const OBJECTNESS_C: f64 = 8.0;
/// Block-matching search radius in pixels.
pub const TRACK_RADIUS: i64 = 4;
/// Tracking stops once the best mean absolute difference exceeds this.
pub const TRACK_MAX_MAD: f64 = 20.0;

/// Gradient magnitude per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMap {
    pub frame_index: usize,
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl EdgeMap {
    pub fn integral(&self) -> IntegralImage {
        IntegralImage::new(self.width, self.height, &self.values)
    }
}

pub fn edge_map(frame: &Frame) -> EdgeMap {
    let values: Vec<f64> = frame.pixels.iter().map(|&p| p as f64).collect();
    let (gx, gy) = gradients(&values, frame.width, frame.height);
    EdgeMap {
        frame_index: frame.index,
        width: frame.width,
        height: frame.height,
        values: gx.iter().zip(&gy).map(|(a, b)| (a * a + b * b).sqrt()).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProposalParams {
    /// Window heights in pixels.
    pub scales: Vec<f64>,
    /// Width / height ratios.
    pub aspects: Vec<f64>,
    /// Grid step as a fraction of the window side.
    pub stride_fraction: f64,
    pub max_proposals_per_frame: usize,
    /// Inner region is the box shrunk by this fraction on every side.
    pub border_margin_fraction: f64,
    /// Roots searched around per frame once a detector exists.
    pub detector_roots: usize,
}

impl Default for ProposalParams {
    fn default() -> Self {
        ProposalParams {
            scales: vec![32.0, 36.0, 40.0, 44.0, 48.0, 52.0],
            aspects: vec![0.5],
            stride_fraction: 0.25,
            max_proposals_per_frame: 200,
            border_margin_fraction: 0.15,
            detector_roots: 40,
        }
    }
}

impl ProposalParams {
    pub fn validate(&self) -> Result<()> {
        if self.scales.is_empty() || self.aspects.is_empty() {
            return Err(Error::Config("proposal scales and aspects must be non-empty".into()));
        }
        if self.scales.iter().chain(&self.aspects).any(|v| !(*v > 0.0)) {
            return Err(Error::Config("proposal scales and aspects must be positive".into()));
        }
        if !(self.stride_fraction > 0.0 && self.stride_fraction <= 1.0) {
            return Err(Error::Config("stride_fraction must lie in (0, 1]".into()));
        }
        if !(self.border_margin_fraction > 0.0 && self.border_margin_fraction < 0.5) {
            return Err(Error::Config("border_margin_fraction must lie in (0, 0.5)".into()));
        }
        Ok(())
    }
}

/// A grid window with its enumeration key.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridWindow {
    pub bbox: BBox,
    pub scale_index: usize,
    pub aspect_index: usize,
}

/// All windows of the (scale, aspect, stride) grid that fit in the frame,
/// ordered by (y, x, scale index, aspect index).
pub fn grid_windows(width: usize, height: usize, params: &ProposalParams) -> Vec<GridWindow> {
    let mut out = Vec::new();
    for (si, &h) in params.scales.iter().enumerate() {
        for (ai, &a) in params.aspects.iter().enumerate() {
            let w = h * a;
            if w > width as f64 || h > height as f64 {
                continue;
            }
            let sx = (w * params.stride_fraction).max(1.0);
            let sy = (h * params.stride_fraction).max(1.0);
            let nx = ((width as f64 - w) / sx).floor() as usize + 1;
            let ny = ((height as f64 - h) / sy).floor() as usize + 1;
            for iy in 0..ny {
                for ix in 0..nx {
                    out.push(GridWindow {
                        bbox: BBox::new(ix as f64 * sx, iy as f64 * sy, w, h),
                        scale_index: si,
                        aspect_index: ai,
                    });
                }
            }
        }
    }
    out.sort_by(|a, b| {
        (a.bbox.y, a.bbox.x)
            .partial_cmp(&(b.bbox.y, b.bbox.x))
            .unwrap()
            .then(a.scale_index.cmp(&b.scale_index))
            .then(a.aspect_index.cmp(&b.aspect_index))
    });
    out
}

#[inline]
fn squash(t: f64) -> f64 {
    t / (t + OBJECTNESS_C)
}

fn inner_rect(bbox: &BBox, margin: f64, width: usize, height: usize) -> PixelRect {
    BBox::new(
        bbox.x + margin * bbox.w,
        bbox.y + margin * bbox.h,
        bbox.w * (1.0 - 2.0 * margin),
        bbox.h * (1.0 - 2.0 * margin),
    )
    .rasterize(width, height)
}

/// Interior edge density times one minus the border-ring edge density.
pub fn objectness_score(em: &EdgeMap, bbox: &BBox, border_margin_fraction: f64) -> Result<f64> {
    objectness_score_integral(&em.integral(), bbox, border_margin_fraction)
}

pub fn objectness_score_integral(ii: &IntegralImage, bbox: &BBox, margin: f64) -> Result<f64> {
    let outer = bbox.rasterize_nonempty(ii.width(), ii.height())?;
    let inner = inner_rect(bbox, margin, ii.width(), ii.height());
    let (outer_sum, outer_area) = (ii.sum(&outer), outer.area() as f64);
    let (inner_sum, inner_area) = if inner.area() > 0 {
        (ii.sum(&inner), inner.area() as f64)
    } else {
        (0.0, 0.0)
    };
    let inner_mean = if inner_area > 0.0 { inner_sum / inner_area } else { 0.0 };
    let ring_area = outer_area - inner_area;
    let ring_mean = if ring_area > 0.0 {
        ((outer_sum - inner_sum) / ring_area).max(0.0)
    } else {
        0.0
    };
    Ok((squash(inner_mean) * (1.0 - squash(ring_mean))).clamp(0.0, 1.0))
}

/// Per-frame inputs for proposal generation.
pub struct FrameCues<'a> {
    pub frame: &'a Frame,
    pub motion: &'a IntegralImage,
    pub edges: &'a IntegralImage,
}

impl<'a> FrameCues<'a> {
    pub fn score(&self, p: &mut Proposal, margin: f64) -> Result<()> {
        p.motion_score = motion_score_integral(self.motion, &p.bbox)?;
        p.objectness_score = objectness_score_integral(self.edges, &p.bbox, margin)?;
        Ok(())
    }
}

fn rank_desc(ps: &mut [(Proposal, usize)], key: impl Fn(&Proposal) -> f64) {
    ps.sort_by(|a, b| key(&b.0).total_cmp(&key(&a.0)).then(a.1.cmp(&b.1)));
}

/// Enumerate the window grid, keep windows whose mean motion reaches
/// `bg_threshold`, and rank them. Without a model the ranking is by
/// objectness. With a model, the best objectness windows become roots
/// around which a local sliding window keeps the highest detector score,
/// and everything is ranked by detector score.
pub fn generate_proposals(
    frame: &Frame,
    motion: &MotionMap,
    edges: &EdgeMap,
    params: &ProposalParams,
    bg_threshold: f64,
    model: Option<&LatentModel>,
) -> Result<Vec<Proposal>> {
    if motion.width != frame.width || motion.height != frame.height {
        return Err(Error::DimensionMismatch {
            expected: frame.width * frame.height,
            got: motion.width * motion.height,
        });
    }
    if edges.width != frame.width || edges.height != frame.height {
        return Err(Error::DimensionMismatch {
            expected: frame.width * frame.height,
            got: edges.width * edges.height,
        });
    }
    let mi = motion.integral();
    let ei = edges.integral();
    let cues = FrameCues {
        frame,
        motion: &mi,
        edges: &ei,
    };
    generate_with_cues(&cues, params, bg_threshold, model)
}

pub fn generate_with_cues(
    cues: &FrameCues<'_>,
    params: &ProposalParams,
    bg_threshold: f64,
    model: Option<&LatentModel>,
) -> Result<Vec<Proposal>> {
    let frame = cues.frame;
    let mut gated: Vec<(Proposal, usize)> = Vec::new();
    for (order, gw) in grid_windows(frame.width, frame.height, params).into_iter().enumerate() {
        let motion = motion_score_integral(cues.motion, &gw.bbox)?;
        if motion < bg_threshold {
            continue;
        }
        let mut p = Proposal::new(frame.index, gw.bbox, ProposalSource::Objectness);
        p.motion_score = motion;
        p.objectness_score = objectness_score_integral(cues.edges, &gw.bbox, params.border_margin_fraction)?;
        gated.push((p, order));
    }
    rank_desc(&mut gated, |p| p.objectness_score);
    let Some(model) = model else {
        gated.truncate(params.max_proposals_per_frame);
        return Ok(gated.into_iter().map(|(p, _)| p).collect());
    };

    gated.truncate(params.max_proposals_per_frame.max(params.detector_roots));
    let mut out: Vec<(Proposal, usize)> = Vec::with_capacity(gated.len() * 2);
    let mut next_order = usize::MAX / 2;
    for (rank, (root, order)) in gated.iter().enumerate() {
        let mut root = root.clone();
        root.detection_score = model.score(&extract_features(frame, &root.bbox)?.values);
        if rank < params.detector_roots {
            if let Some(best) = local_search(cues, params, bg_threshold, model, &root)? {
                if best.bbox != root.bbox {
                    out.push((best, next_order));
                    next_order += 1;
                }
            }
        }
        out.push((root, *order));
    }
    rank_desc(&mut out, |p| p.detection_score);
    // Drop exact duplicates produced by neighbouring roots.
    let mut seen: Vec<BBox> = Vec::new();
    out.retain(|(p, _)| {
        if seen.contains(&p.bbox) {
            false
        } else {
            seen.push(p.bbox);
            true
        }
    });
    out.truncate(params.max_proposals_per_frame);
    Ok(out.into_iter().map(|(p, _)| p).collect())
}

/// Highest-scoring window among shifted and rescaled copies of `root`.
fn local_search(
    cues: &FrameCues<'_>,
    params: &ProposalParams,
    bg_threshold: f64,
    model: &LatentModel,
    root: &Proposal,
) -> Result<Option<Proposal>> {
    let frame = cues.frame;
    let (cx, cy) = root.bbox.center();
    let aspect = root.bbox.aspect();
    let mut heights = vec![root.bbox.h];
    if let Some(pos) = params.scales.iter().position(|&s| (s - root.bbox.h).abs() < 1e-9) {
        if pos > 0 {
            heights.push(params.scales[pos - 1]);
        }
        if pos + 1 < params.scales.len() {
            heights.push(params.scales[pos + 1]);
        }
    }
    let mut best: Option<Proposal> = None;
    for (hi, &h) in heights.iter().enumerate() {
        let w = h * aspect;
        let step = (h * params.stride_fraction / 2.0).max(1.0);
        let offsets: &[i32] = if hi == 0 { &[-1, 0, 1] } else { &[0] };
        for &oy in offsets {
            for &ox in offsets {
                let b = BBox::from_center(cx + ox as f64 * step, cy + oy as f64 * step, w, h);
                if !b.within(frame.width, frame.height) {
                    continue;
                }
                let motion = motion_score_integral(cues.motion, &b)?;
                if motion < bg_threshold {
                    continue;
                }
                let score = model.score(&extract_features(frame, &b)?.values);
                if best.as_ref().is_none_or(|p| score > p.detection_score) {
                    let mut p = Proposal::new(frame.index, b, ProposalSource::SlidingWindow);
                    p.motion_score = motion;
                    p.objectness_score = objectness_score_integral(cues.edges, &b, params.border_margin_fraction)?;
                    p.detection_score = score;
                    best = Some(p);
                }
            }
        }
    }
    Ok(best)
}

fn sad(a: &Frame, ra: &PixelRect, b: &Frame, dx: i64, dy: i64) -> f64 {
    let mut total = 0u64;
    for y in ra.y0..ra.y1 {
        let yb = (y as i64 + dy) as usize;
        let row_a = &a.pixels[y * a.width + ra.x0..y * a.width + ra.x1];
        let start_b = yb * b.width + (ra.x0 as i64 + dx) as usize;
        let row_b = &b.pixels[start_b..start_b + row_a.len()];
        total += row_a.iter().zip(row_b).map(|(&p, &q)| (p as i64 - q as i64).unsigned_abs()).sum::<u64>();
    }
    total as f64
}

/// Follow `seed` forward for up to `tau` frames by exhaustive block matching.
/// The first element is the seed itself; later elements are `Tracked`.
pub fn track_proposals(frames: &[Frame], seed: &Proposal, tau: usize, track_id: u64) -> Result<Vec<Proposal>> {
    let start = seed.frame_index;
    if start >= frames.len() {
        return Err(Error::FrameOutOfRange {
            index: start,
            len: frames.len(),
        });
    }
    let mut first = seed.clone();
    first.track_id = Some(track_id);
    let mut out = vec![first];
    let mut current = seed.bbox;
    for t in start + 1..=(start + tau).min(frames.len() - 1) {
        let (prev, next) = (&frames[t - 1], &frames[t]);
        let rect = current.rasterize(prev.width, prev.height);
        if rect.area() == 0 {
            break;
        }
        let mut best: Option<((i64, i64), f64)> = None;
        for dy in -TRACK_RADIUS..=TRACK_RADIUS {
            for dx in -TRACK_RADIUS..=TRACK_RADIUS {
                let fits = rect.x0 as i64 + dx >= 0
                    && rect.y0 as i64 + dy >= 0
                    && rect.x1 as i64 + dx <= next.width as i64
                    && rect.y1 as i64 + dy <= next.height as i64;
                if !fits {
                    continue;
                }
                let cost = sad(prev, &rect, next, dx, dy);
                let better = match best {
                    None => true,
                    Some(((bx, by), c)) => {
                        cost < c || (cost == c && dx.abs() + dy.abs() < bx.abs() + by.abs())
                    }
                };
                if better {
                    best = Some(((dx, dy), cost));
                }
            }
        }
        let Some(((dx, dy), cost)) = best else { break };
        if cost / rect.area() as f64 > TRACK_MAX_MAD {
            break;
        }
        current = current.translate(dx as f64, dy as f64);
        let mut p = Proposal::new(t, current, ProposalSource::Tracked);
        p.track_id = Some(track_id);
        out.push(p);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_frame_has_no_edges() {
        let em = edge_map(&Frame::filled(0, 10, 10, 42));
        assert!(em.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn step_edge_is_half_height() {
        // columns 0-1 at 0, columns 2-4 at delta
        let delta = 60u8;
        let px = (0..25).map(|k| if k % 5 >= 2 { delta } else { 0 }).collect();
        let em = edge_map(&Frame::new(0, 5, 5, px).unwrap());
        for y in 0..5 {
            assert_eq!(em.values[y * 5 + 1], delta as f64 / 2.0);
            assert_eq!(em.values[y * 5 + 2], delta as f64 / 2.0);
            assert_eq!(em.values[y * 5 + 3], 0.0);
        }
        assert!(em.values.iter().all(|&v| v >= 0.0));
    }

    fn map_with(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> EdgeMap {
        let values = (0..width * height).map(|k| f(k % width, k / width)).collect();
        EdgeMap {
            frame_index: 0,
            width,
            height,
            values,
        }
    }

    #[test]
    fn objectness_cases() {
        let zero = map_with(40, 40, |_, _| 0.0);
        let b = BBox::new(0.0, 0.0, 20.0, 20.0);
        assert_eq!(objectness_score(&zero, &b, 0.15).unwrap(), 0.0);

        // 20x20 box, margin 0.15 -> inner [3, 17)
        let inner_only = map_with(40, 40, |x, y| if (3..17).contains(&x) && (3..17).contains(&y) { OBJECTNESS_C } else { 0.0 });
        assert!((objectness_score(&inner_only, &b, 0.15).unwrap() - 0.5).abs() < 1e-12);

        let uniform = map_with(40, 40, |_, _| 50.0);
        let s = objectness_score(&uniform, &b, 0.15).unwrap();
        let t = 50.0 / (50.0 + OBJECTNESS_C);
        assert!((s - t * (1.0 - t)).abs() < 1e-12);
        assert!(s < 0.25);
    }

    #[test]
    fn grid_order_and_fit() {
        let params = ProposalParams::default();
        let grid = grid_windows(64, 64, &params);
        assert!(grid.iter().all(|g| g.bbox.within(64, 64)));
        for pair in grid.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            assert!((a.bbox.y, a.bbox.x, a.scale_index) <= (b.bbox.y, b.bbox.x, b.scale_index));
        }
    }

    #[test]
    fn no_motion_no_proposals() {
        let frame = Frame::filled(0, 64, 64, 10);
        let mm = MotionMap::from_scores(0, 64, 64, vec![0.0; 64 * 64]).unwrap();
        let em = edge_map(&frame);
        let out = generate_proposals(&frame, &mm, &em, &ProposalParams::default(), 0.2, None).unwrap();
        assert!(out.is_empty());
    }

    fn shifted_frames(n: usize, step: i64) -> Vec<Frame> {
        (0..n)
            .map(|t| {
                let mut f = Frame::filled(t, 64, 48, 100);
                for y in 10..30 {
                    for x in 0..10 {
                        let xx = 8 + x + step * t as i64;
                        f.set(xx as usize, y, ((x as usize * 37 + y * 11) % 200 + 20) as u8);
                    }
                }
                f
            })
            .collect()
    }

    #[test]
    fn tracks_pure_translation() {
        let frames = shifted_frames(6, 2);
        let seed = Proposal::new(0, BBox::new(8.0, 10.0, 10.0, 20.0), ProposalSource::Objectness);
        let track = track_proposals(&frames, &seed, 5, 3).unwrap();
        assert_eq!(track.len(), 6);
        for (k, p) in track.iter().enumerate() {
            assert_eq!(p.bbox, BBox::new(8.0 + 2.0 * k as f64, 10.0, 10.0, 20.0));
            assert_eq!(p.track_id, Some(3));
            assert_eq!(p.frame_index, k);
        }
        assert!(track[1..].iter().all(|p| p.source == ProposalSource::Tracked));
    }

    #[test]
    fn tau_zero_and_static() {
        let frames = shifted_frames(4, 0);
        let seed = Proposal::new(1, BBox::new(8.0, 10.0, 10.0, 20.0), ProposalSource::Objectness);
        assert_eq!(track_proposals(&frames, &seed, 0, 0).unwrap().len(), 1);
        let t = track_proposals(&frames, &seed, 10, 0).unwrap();
        assert_eq!(t.len(), 3);
        assert!(t.iter().all(|p| p.bbox == seed.bbox));
        let bad = Proposal::new(9, seed.bbox, ProposalSource::Objectness);
        assert!(matches!(track_proposals(&frames, &bad, 2, 0), Err(Error::FrameOutOfRange { .. })));
    }

    #[test]
    fn vanishing_object_stops_track() {
        let mut frames = shifted_frames(6, 0);
        // From frame 3 on the object region turns into a flat bright patch.
        for f in frames.iter_mut().skip(3) {
            for y in 0..48 {
                for x in 0..64 {
                    f.set(x, y, 250);
                }
            }
        }
        let seed = Proposal::new(0, BBox::new(8.0, 10.0, 10.0, 20.0), ProposalSource::Objectness);
        let t = track_proposals(&frames, &seed, 5, 0).unwrap();
        assert_eq!(t.len(), 3);
    }
}
