//! Axis-aligned box geometry.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned window in pixel coordinates. Geometry is real-valued;
/// [`BBox::rasterize`] maps it onto the pixel grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

/// Half-open pixel rectangle `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelRect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl PixelRect {
    pub fn area(&self) -> usize {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

#[inline]
pub(crate) fn round_half_up(v: f64) -> f64 {
    (v + 0.5).floor()
}

impl BBox {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        BBox { x, y, w, h }
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        BBox::new(cx - w / 2.0, cy - h / 2.0, w, h)
    }

    pub fn is_valid(&self) -> bool {
        self.w > 0.0 && self.h > 0.0 && self.x.is_finite() && self.y.is_finite()
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn aspect(&self) -> f64 {
        self.w / self.h
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        BBox::new(self.x + dx, self.y + dy, self.w, self.h)
    }

    /// Intersect with the frame `[0, width] x [0, height]`. A box lying
    /// entirely outside is shifted back inside instead, keeping its size
    /// (shrunk to the frame if larger).
    pub fn clamp_to(&self, width: usize, height: usize) -> Self {
        let (fw, fh) = (width as f64, height as f64);
        let (x, w) = clamp_axis(self.x, self.w, fw);
        let (y, h) = clamp_axis(self.y, self.h, fh);
        BBox::new(x, y, w, h)
    }

    pub fn within(&self, width: usize, height: usize) -> bool {
        self.x >= 0.0 && self.y >= 0.0 && self.right() <= width as f64 && self.bottom() <= height as f64
    }

    /// Rasterize with half-up rounding of both edges, clipped to the frame.
    pub fn rasterize(&self, width: usize, height: usize) -> PixelRect {
        let snap = |v: f64, max: usize| round_half_up(v).clamp(0.0, max as f64) as usize;
        let x0 = snap(self.x, width);
        let x1 = snap(self.right(), width).max(x0);
        let y0 = snap(self.y, height);
        let y1 = snap(self.bottom(), height).max(y0);
        PixelRect { x0, y0, x1, y1 }
    }

    /// Non-empty rasterization or [`Error::ZeroAreaBox`].
    pub fn rasterize_nonempty(&self, width: usize, height: usize) -> Result<PixelRect> {
        let r = self.rasterize(width, height);
        if r.area() == 0 {
            return Err(Error::ZeroAreaBox);
        }
        Ok(r)
    }
}

fn clamp_axis(start: f64, len: f64, limit: f64) -> (f64, f64) {
    let lo = start.max(0.0);
    let hi = (start + len).min(limit);
    if hi > lo {
        (lo, hi - lo)
    } else {
        let len = len.min(limit);
        ((start).clamp(0.0, limit - len), len)
    }
}

/// Intersection over union of two boxes, computed analytically.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.right().min(b.right()) - a.x.max(b.x)).max(0.0);
    let ih = (a.bottom().min(b.bottom()) - a.y.max(b.y)).max(0.0);
    let inter = iw * ih;
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Mean aspect ratio (w/h) of a set of boxes.
pub fn mean_aspect<'a>(boxes: impl IntoIterator<Item = &'a BBox>) -> Option<f64> {
    let (sum, n) = boxes
        .into_iter()
        .fold((0.0, 0usize), |(s, n), b| (s + b.aspect(), n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Reshape a box about its center to `aspect`, keeping its height.
pub fn reshape_to_aspect(b: &BBox, aspect: f64) -> BBox {
    let (cx, cy) = b.center();
    BBox::from_center(cx, cy, b.h * aspect, b.h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iou_identity_and_disjoint() {
        let b = BBox::new(3.0, 4.0, 10.0, 7.0);
        assert_eq!(iou(&b, &b), 1.0);
        assert_eq!(iou(&BBox::new(0.0, 0.0, 10.0, 10.0), &BBox::new(20.0, 20.0, 5.0, 5.0)), 0.0);
    }

    #[test]
    fn iou_matches_pixel_enumeration() {
        // Count unit cells covered by each box on an integer grid.
        let a = BBox::new(0.0, 0.0, 10.0, 10.0);
        let b = BBox::new(5.0, 0.0, 10.0, 10.0);
        let covers = |bx: &BBox, px: usize, py: usize| {
            let (cx, cy) = (px as f64 + 0.5, py as f64 + 0.5);
            cx > bx.x && cx < bx.right() && cy > bx.y && cy < bx.bottom()
        };
        let (mut inter, mut union) = (0usize, 0usize);
        for py in 0..20 {
            for px in 0..20 {
                let (ia, ib) = (covers(&a, px, py), covers(&b, px, py));
                inter += (ia && ib) as usize;
                union += (ia || ib) as usize;
            }
        }
        assert_eq!((inter, union), (50, 150));
        assert!((iou(&a, &b) - inter as f64 / union as f64).abs() < 1e-15);
    }

    #[test]
    fn clamp_is_idempotent_and_inside() {
        let b = BBox::new(-5.0, 50.0, 30.0, 40.0);
        let c = b.clamp_to(64, 64);
        assert!(c.within(64, 64));
        assert_eq!(c, BBox::new(0.0, 50.0, 25.0, 14.0));
        assert_eq!(c.clamp_to(64, 64), c);
        let far = BBox::new(100.0, 100.0, 10.0, 10.0).clamp_to(64, 64);
        assert!(far.within(64, 64));
        assert_eq!((far.w, far.h), (10.0, 10.0));
    }

    #[test]
    fn rasterize_rounds_half_up() {
        let r = BBox::new(0.5, 1.49, 2.0, 2.0).rasterize(10, 10);
        assert_eq!(r, PixelRect { x0: 1, y0: 1, x1: 3, y1: 3 });
        assert!(BBox::new(3.2, 3.2, 0.2, 0.2).rasterize_nonempty(10, 10).is_err());
    }
}
