//! Histogram-of-oriented-gradients descriptor over a canonical window.

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::scene::Frame;

pub const WINDOW_W: usize = 32;
pub const WINDOW_H: usize = 64;
pub const CELL: usize = 8;
pub const BINS: usize = 9;
const CELLS_X: usize = WINDOW_W / CELL;
const CELLS_Y: usize = WINDOW_H / CELL;
pub const BLOCKS_X: usize = CELLS_X - 1;
pub const BLOCKS_Y: usize = CELLS_Y - 1;
pub const BLOCK_LEN: usize = 4 * BINS;
/// Descriptor length for the canonical window: 3 x 7 blocks of 36 values.
pub const FEATURE_DIM: usize = BLOCKS_X * BLOCKS_Y * BLOCK_LEN;

const HYS_CLIP: f64 = 0.2;
const NORM_EPS: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub window_w: usize,
    pub window_h: usize,
}

impl FeatureVector {
    pub fn zeros() -> Self {
        FeatureVector {
            values: vec![0.0; FEATURE_DIM],
            window_w: WINDOW_W,
            window_h: WINDOW_H,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn block(&self, index: usize) -> &[f64] {
        &self.values[index * BLOCK_LEN..(index + 1) * BLOCK_LEN]
    }
}

/// Side lengths of a resampled patch: the canonical window plus a
/// one-pixel ring so that every window pixel has a central difference.
pub const PATCH_W: usize = WINDOW_W + 2;
pub const PATCH_H: usize = WINDOW_H + 2;

/// Bilinear sample with coordinates clamped to the image.
#[inline]
fn sample(frame: &Frame, x: f64, y: f64) -> f64 {
    let x = x.clamp(0.0, (frame.width - 1) as f64);
    let y = y.clamp(0.0, (frame.height - 1) as f64);
    let x0 = x as usize;
    let y0 = y as usize;
    let x1 = (x0 + 1).min(frame.width - 1);
    let y1 = (y0 + 1).min(frame.height - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let r0 = &frame.pixels[y0 * frame.width..];
    let r1 = &frame.pixels[y1 * frame.width..];
    let (a, b, c, d) = (r0[x0] as f64, r0[x1] as f64, r1[x0] as f64, r1[x1] as f64);
    let top = a + fx * (b - a);
    let bot = c + fx * (d - c);
    top + fy * (bot - top)
}

/// Resample a `cols x rows` grid whose pixel `(i, j)` (from -1) has its
/// centre at `(x0 + (i + 0.5) sx - 0.5, y0 + (j + 0.5) sy - 0.5)`.
fn resample_grid(frame: &Frame, x0: f64, y0: f64, sx: f64, sy: f64, cols: usize, rows: usize) -> Vec<f64> {
    let xs: Vec<f64> = (0..cols).map(|i| x0 + (i as f64 - 0.5) * sx - 0.5).collect();
    let mut out = Vec::with_capacity(cols * rows);
    for j in 0..rows {
        let y = y0 + (j as f64 - 0.5) * sy - 0.5;
        out.extend(xs.iter().map(|&x| sample(frame, x, y)));
    }
    out
}

/// Resample the box region to the canonical window with a one-pixel
/// context ring, row-major `PATCH_W x PATCH_H`.
pub fn resample_patch(frame: &Frame, bbox: &BBox) -> Result<Vec<f64>> {
    if !(bbox.w > 0.0 && bbox.h > 0.0) {
        return Err(Error::ZeroAreaBox);
    }
    bbox.rasterize_nonempty(frame.width, frame.height)?;
    let sx = bbox.w / WINDOW_W as f64;
    let sy = bbox.h / WINDOW_H as f64;
    Ok(resample_grid(frame, bbox.x, bbox.y, sx, sy, PATCH_W, PATCH_H))
}

/// Central-difference gradients (halved), one-sided at the borders.
pub(crate) fn gradients(values: &[f64], width: usize, height: usize) -> (Vec<f64>, Vec<f64>) {
    let mut gx = vec![0.0; width * height];
    let mut gy = vec![0.0; width * height];
    let at = |x: usize, y: usize| values[y * width + x];
    for y in 0..height {
        for x in 0..width {
            gx[y * width + x] = if width < 2 {
                0.0
            } else if x == 0 {
                at(1, y) - at(0, y)
            } else if x == width - 1 {
                at(x, y) - at(x - 1, y)
            } else {
                (at(x + 1, y) - at(x - 1, y)) / 2.0
            };
            gy[y * width + x] = if height < 2 {
                0.0
            } else if y == 0 {
                at(x, 1) - at(x, 0)
            } else if y == height - 1 {
                at(x, y) - at(x, y - 1)
            } else {
                (at(x, y + 1) - at(x, y - 1)) / 2.0
            };
        }
    }
    (gx, gy)
}

/// Unsigned orientation of `(dx, dy)` in `[0, pi)`.
#[inline]
fn unsigned_angle(dx: f64, dy: f64) -> f64 {
    use std::f64::consts::PI;
    let mut a = dy.atan2(dx);
    if a < 0.0 {
        a += PI;
    }
    if a >= PI {
        a -= PI;
    }
    a
}

/// Orientation histograms of `cells_x x cells_y` cells over an image that
/// carries a one-pixel context ring (`(8 cells_x + 2)` columns).
fn cell_histograms(img: &[f64], cells_x: usize, cells_y: usize) -> Vec<f64> {
    let (w, h) = (cells_x * CELL, cells_y * CELL);
    let stride = w + 2;
    debug_assert_eq!(img.len(), stride * (h + 2));
    let bins_per_radian = BINS as f64 / std::f64::consts::PI;
    let mut cells = vec![0.0; cells_x * cells_y * BINS];
    for y in 0..h {
        let up = &img[y * stride..(y + 1) * stride];
        let row = &img[(y + 1) * stride..(y + 2) * stride];
        let down = &img[(y + 2) * stride..(y + 3) * stride];
        let cell_row = (y / CELL) * cells_x;
        for x in 0..w {
            let dx = (row[x + 2] - row[x]) / 2.0;
            let dy = (down[x + 1] - up[x + 1]) / 2.0;
            let mag = (dx * dx + dy * dy).sqrt();
            if mag == 0.0 {
                continue;
            }
            // Bin centres sit at k + 0.5 in bin units.
            let pos = unsigned_angle(dx, dy) * bins_per_radian - 0.5;
            let lower = pos.floor();
            let frac = pos - lower;
            let b0 = if lower < 0.0 { BINS - 1 } else { (lower as usize).min(BINS - 1) };
            let b1 = if b0 + 1 == BINS { 0 } else { b0 + 1 };
            let base = (cell_row + x / CELL) * BINS;
            cells[base + b0] += (1.0 - frac) * mag;
            cells[base + b1] += frac * mag;
        }
    }
    cells
}

fn l2_normalize(block: &mut [f64]) {
    let norm = (block.iter().map(|v| v * v).sum::<f64>() + NORM_EPS * NORM_EPS).sqrt();
    block.iter_mut().for_each(|v| *v /= norm);
}

/// L2-hys normalized 2x2-cell block with top-left cell `(cx, cy)`.
fn block_at(cells: &[f64], cells_x: usize, cx: usize, cy: usize, out: &mut Vec<f64>) {
    let start = out.len();
    for (y, x) in [(cy, cx), (cy, cx + 1), (cy + 1, cx), (cy + 1, cx + 1)] {
        let base = (y * cells_x + x) * BINS;
        out.extend_from_slice(&cells[base..base + BINS]);
    }
    let block = &mut out[start..];
    l2_normalize(block);
    block.iter_mut().for_each(|v| *v = v.min(HYS_CLIP));
    l2_normalize(block);
}

/// HOG over a resampled `PATCH_W x PATCH_H` patch.
pub fn hog_from_patch(patch: &[f64]) -> FeatureVector {
    assert_eq!(patch.len(), PATCH_W * PATCH_H, "patch must include the context ring");
    let cells = cell_histograms(patch, CELLS_X, CELLS_Y);
    let mut values = Vec::with_capacity(FEATURE_DIM);
    for by in 0..BLOCKS_Y {
        for bx in 0..BLOCKS_X {
            block_at(&cells, CELLS_X, bx, by, &mut values);
        }
    }
    FeatureVector {
        values,
        window_w: WINDOW_W,
        window_h: WINDOW_H,
    }
}

/// Block descriptors for every cell-aligned window at one sampling scale.
///
/// The frame is resampled once with steps `(sx, sy)` from origin
/// `(ox, oy)`; the window whose top-left cell is `(cx, cy)` covers
/// `window_box(cx, cy)` and its descriptor matches `extract_features` on
/// that box up to rounding.
#[derive(Debug, Clone)]
pub struct DenseHog {
    pub sx: f64,
    pub sy: f64,
    pub ox: f64,
    pub oy: f64,
    pub cells_x: usize,
    pub cells_y: usize,
    /// Normalized blocks, row-major over `(cells_x - 1) x (cells_y - 1)`.
    blocks: Vec<f64>,
}

impl DenseHog {
    pub fn new(frame: &Frame, sx: f64, sy: f64, ox: f64, oy: f64) -> Self {
        let fit = |len: usize, o: f64, s: f64| (((len as f64 - o) / (CELL as f64 * s)) + 1e-9).floor().max(0.0) as usize;
        let cells_x = fit(frame.width, ox, sx);
        let cells_y = fit(frame.height, oy, sy);
        let mut blocks = Vec::new();
        if cells_x >= 2 && cells_y >= 2 {
            let img = resample_grid(frame, ox, oy, sx, sy, cells_x * CELL + 2, cells_y * CELL + 2);
            let cells = cell_histograms(&img, cells_x, cells_y);
            blocks.reserve((cells_x - 1) * (cells_y - 1) * BLOCK_LEN);
            for cy in 0..cells_y - 1 {
                for cx in 0..cells_x - 1 {
                    block_at(&cells, cells_x, cx, cy, &mut blocks);
                }
            }
        }
        DenseHog { sx, sy, ox, oy, cells_x, cells_y, blocks }
    }

    /// Window positions `(cx, cy)` that fit, row-major.
    pub fn positions(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let nx = (self.cells_x + 1).saturating_sub(CELLS_X);
        let ny = (self.cells_y + 1).saturating_sub(CELLS_Y);
        (0..ny).flat_map(move |cy| (0..nx).map(move |cx| (cx, cy)))
    }

    pub fn window_box(&self, cx: usize, cy: usize) -> BBox {
        BBox::new(
            self.ox + (cx * CELL) as f64 * self.sx,
            self.oy + (cy * CELL) as f64 * self.sy,
            WINDOW_W as f64 * self.sx,
            WINDOW_H as f64 * self.sy,
        )
    }

    pub fn window_features(&self, cx: usize, cy: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(FEATURE_DIM);
        let bw = self.cells_x - 1;
        for by in 0..BLOCKS_Y {
            let start = ((cy + by) * bw + cx) * BLOCK_LEN;
            out.extend_from_slice(&self.blocks[start..start + BLOCKS_X * BLOCK_LEN]);
        }
        out
    }
}

/// Normalized HOG descriptor of the box region.
pub fn extract_features(frame: &Frame, bbox: &BBox) -> Result<FeatureVector> {
    Ok(hog_from_patch(&resample_patch(frame, bbox)?))
}

/// Joint label/feature map: the label-0 map is identically zero, so the
/// label-0 score is 0 for every model.
pub fn label_feature(v: &FeatureVector, label: u8) -> FeatureVector {
    if label == 1 {
        v.clone()
    } else {
        FeatureVector {
            values: vec![0.0; v.values.len()],
            ..v.clone()
        }
    }
}

/// Index permutation that maps a descriptor onto the descriptor of the
/// horizontally mirrored patch.
pub fn mirror_permutation() -> Vec<usize> {
    let mut perm = vec![0; FEATURE_DIM];
    for by in 0..BLOCKS_Y {
        for bx in 0..BLOCKS_X {
            for r in 0..2 {
                for c in 0..2 {
                    for k in 0..BINS {
                        let src = ((by * BLOCKS_X + bx) * 4 + r * 2 + c) * BINS + k;
                        let dst = ((by * BLOCKS_X + (BLOCKS_X - 1 - bx)) * 4 + r * 2 + (1 - c)) * BINS
                            + (BINS - 1 - k);
                        perm[src] = dst;
                    }
                }
            }
        }
    }
    perm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured(w: usize, h: usize) -> Frame {
        let px = (0..w * h)
            .map(|k| {
                let (x, y) = ((k % w) as f64, (k / w) as f64);
                (100.0 + 40.0 * (x * 0.37).sin() + 30.0 * (y * 0.21 + x * 0.05).cos()) as u8
            })
            .collect();
        Frame::new(0, w, h, px).unwrap()
    }

    #[test]
    fn dimension_is_756() {
        assert_eq!(FEATURE_DIM, 3 * 7 * 2 * 2 * 9);
        assert_eq!(FEATURE_DIM, 756);
        let v = extract_features(&textured(64, 80), &BBox::new(3.0, 5.0, 20.0, 40.0)).unwrap();
        assert_eq!(v.dim(), 756);
    }

    #[test]
    fn constant_patch_is_zero() {
        let f = Frame::filled(0, 40, 70, 90);
        let v = extract_features(&f, &BBox::new(0.0, 0.0, 40.0, 70.0)).unwrap();
        assert!(v.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn block_norms_bounded() {
        let v = extract_features(&textured(64, 96), &BBox::new(7.3, 9.1, 30.5, 61.0)).unwrap();
        for b in 0..BLOCKS_X * BLOCKS_Y {
            let n: f64 = v.block(b).iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(n <= 1.0 + 1e-6);
        }
        assert!(v.values.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn zero_area_rejected() {
        assert!(matches!(
            extract_features(&textured(40, 40), &BBox::new(1.0, 1.0, 0.0, 5.0)),
            Err(Error::ZeroAreaBox)
        ));
    }

    #[test]
    fn label_zero_is_zero_vector() {
        let v = extract_features(&textured(64, 96), &BBox::new(0.0, 0.0, 32.0, 64.0)).unwrap();
        assert_eq!(label_feature(&v, 1), v);
        assert!(label_feature(&v, 0).values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn dense_matches_per_window() {
        let f = textured(90, 110);
        let d = DenseHog::new(&f, 0.7, 0.7, 2.0, 3.5);
        let mut n = 0;
        for (cx, cy) in d.positions() {
            let b = d.window_box(cx, cy);
            assert!(b.within(f.width, f.height));
            let want = extract_features(&f, &b).unwrap().values;
            let got = d.window_features(cx, cy);
            let err = want.iter().zip(&got).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-9, "{err}");
            n += 1;
        }
        assert!(n > 10);
    }

    #[test]
    fn mirror_permutation_is_a_bijection() {
        let mut p = mirror_permutation();
        p.sort_unstable();
        assert!(p.iter().enumerate().all(|(i, &v)| i == v));
    }
}
