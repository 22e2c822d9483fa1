//! Running single-Gaussian background model and per-pixel motion maps.

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::integral::IntegralImage;
use crate::scene::Frame;

pub const DEFAULT_RHO: f64 = 0.05;
pub const DEFAULT_SIGMA_FLOOR: f64 = 2.0;
pub const DEFAULT_WARMUP: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundModel {
    width: usize,
    height: usize,
    mean: Vec<f64>,
    var: Vec<f64>,
    rho: f64,
    sigma_floor: f64,
    warmup: usize,
    frames_observed: usize,
    initialized: bool,
}

impl BackgroundModel {
    pub fn new(width: usize, height: usize) -> Self {
        Self::with_params(width, height, DEFAULT_RHO, DEFAULT_SIGMA_FLOOR, DEFAULT_WARMUP)
    }

    pub fn with_params(width: usize, height: usize, rho: f64, sigma_floor: f64, warmup: usize) -> Self {
        assert!(rho > 0.0 && rho < 1.0, "update rate must lie in (0, 1)");
        assert!(sigma_floor > 0.0, "sigma floor must be positive");
        BackgroundModel {
            width,
            height,
            mean: vec![0.0; width * height],
            var: vec![sigma_floor * sigma_floor; width * height],
            rho,
            sigma_floor,
            warmup,
            frames_observed: 0,
            initialized: false,
        }
    }

    /// Seed the mean with the per-pixel median of `frames`, which removes
    /// moving objects present in the first frame from the initial estimate.
    pub fn seeded_with_median(frames: &[&Frame]) -> Result<Self> {
        let first = frames.first().ok_or(Error::EmptyInput("median seed needs frames"))?;
        let mut model = Self::new(first.width, first.height);
        let mut column = Vec::with_capacity(frames.len());
        for p in 0..model.mean.len() {
            column.clear();
            for f in frames {
                if f.dims() != first.dims() {
                    return Err(Error::DimensionMismatch {
                        expected: first.width * first.height,
                        got: f.width * f.height,
                    });
                }
                column.push(f.pixels[p]);
            }
            column.sort_unstable();
            model.mean[p] = column[column.len() / 2] as f64;
        }
        model.initialized = true;
        Ok(model)
    }

    pub fn frames_observed(&self) -> usize {
        self.frames_observed
    }

    pub fn sigma_floor(&self) -> f64 {
        self.sigma_floor
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn variance(&self) -> &[f64] {
        &self.var
    }

    /// Score `frame` against the current model, then fold it into the model.
    /// An unseeded model adopts the first frame as its mean and reports an
    /// all-zero map for it.
    pub fn observe_frame(&mut self, frame: &Frame) -> Result<MotionMap> {
        if frame.dims() != (self.width, self.height) {
            return Err(Error::DimensionMismatch {
                expected: self.width * self.height,
                got: frame.width * frame.height,
            });
        }
        let floor2 = self.sigma_floor * self.sigma_floor;
        let mut scores = vec![0.0; self.mean.len()];
        if !self.initialized {
            for (m, &p) in self.mean.iter_mut().zip(&frame.pixels) {
                *m = p as f64;
            }
            self.initialized = true;
        } else {
            for (i, &p) in frame.pixels.iter().enumerate() {
                let v = p as f64;
                let diff = v - self.mean[i];
                let sigma = self.var[i].sqrt().max(self.sigma_floor);
                scores[i] = (diff.abs() / (3.0 * sigma)).min(1.0);
                self.mean[i] += self.rho * diff;
                self.var[i] = ((1.0 - self.rho) * self.var[i] + self.rho * diff * diff).max(floor2);
            }
        }
        self.frames_observed += 1;
        Ok(MotionMap {
            frame_index: frame.index,
            width: self.width,
            height: self.height,
            scores,
            reliable: self.frames_observed > self.warmup,
        })
    }
}

/// Per-pixel foreground probability in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionMap {
    pub frame_index: usize,
    pub width: usize,
    pub height: usize,
    pub scores: Vec<f64>,
    /// False while the background model is still warming up.
    pub reliable: bool,
}

impl MotionMap {
    pub fn from_scores(frame_index: usize, width: usize, height: usize, scores: Vec<f64>) -> Result<Self> {
        if scores.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                got: scores.len(),
            });
        }
        if scores.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(Error::Config("motion scores must lie in [0, 1]".into()));
        }
        Ok(MotionMap {
            frame_index,
            width,
            height,
            scores,
            reliable: true,
        })
    }

    pub fn integral(&self) -> IntegralImage {
        IntegralImage::new(self.width, self.height, &self.scores)
    }

    pub fn mean(&self) -> f64 {
        self.scores.iter().sum::<f64>() / self.scores.len() as f64
    }

    /// Debug dump: scores scaled to 0..=255.
    pub fn to_frame(&self) -> Frame {
        Frame {
            index: self.frame_index,
            width: self.width,
            height: self.height,
            pixels: self.scores.iter().map(|s| (s * 255.0).round() as u8).collect(),
        }
    }
}

/// Mean motion score over the rasterized box.
pub fn motion_score(map: &MotionMap, bbox: &BBox) -> Result<f64> {
    let r = bbox.rasterize_nonempty(map.width, map.height)?;
    let mut sum = 0.0;
    for y in r.y0..r.y1 {
        sum += map.scores[y * map.width + r.x0..y * map.width + r.x1].iter().sum::<f64>();
    }
    Ok(sum / r.area() as f64)
}

/// [`motion_score`] through a precomputed summed-area table.
pub fn motion_score_integral(ii: &IntegralImage, bbox: &BBox) -> Result<f64> {
    let r = bbox.rasterize_nonempty(ii.width(), ii.height())?;
    Ok(ii.mean(&r).clamp(0.0, 1.0))
}

/// Run a background model over a whole sequence, returning one map per frame.
pub fn motion_maps(frames: &[Frame], seed_median: bool) -> Result<Vec<MotionMap>> {
    let first = frames.first().ok_or(Error::EmptyInput("no frames"))?;
    let mut model = if seed_median {
        let step = (frames.len() / 50).max(1);
        let sample: Vec<&Frame> = frames.iter().step_by(step).collect();
        BackgroundModel::seeded_with_median(&sample)?
    } else {
        BackgroundModel::new(first.width, first.height)
    };
    frames.iter().map(|f| model.observe_frame(f)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noisy(index: usize, rng: &mut ChaCha8Rng) -> Frame {
        let px = (0..32 * 32).map(|_| 100 + rng.random_range(0..5u8)).collect();
        Frame::new(index, 32, 32, px).unwrap()
    }

    #[test]
    fn constant_video_settles() {
        let f = Frame::filled(0, 32, 32, 77);
        let mut m = BackgroundModel::new(32, 32);
        for i in 0..20 {
            let map = m.observe_frame(&Frame { index: i, ..f.clone() }).unwrap();
            if i >= 10 {
                assert!(map.reliable);
                assert!(map.scores.iter().all(|&s| s <= 0.05));
            }
        }
    }

    #[test]
    fn big_jump_saturates() {
        let mut m = BackgroundModel::new(32, 32);
        let f = Frame::filled(0, 32, 32, 100);
        for _ in 0..12 {
            m.observe_frame(&f).unwrap();
        }
        let mut g = f.clone();
        // sigma sits at the floor (2.0), so +20 is a 10-sigma jump
        g.set(5, 5, 120);
        let map = m.observe_frame(&g).unwrap();
        assert_eq!(map.scores[5 * 32 + 5], 1.0);
        assert_eq!(map.scores[0], 0.0);
    }

    #[test]
    fn static_noise_scores_decrease() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut m = BackgroundModel::new(32, 32);
        let means: Vec<f64> = (0..60).map(|i| m.observe_frame(&noisy(i, &mut rng)).unwrap().mean()).collect();
        let early: f64 = means[1..11].iter().sum::<f64>() / 10.0;
        let late: f64 = means[50..60].iter().sum::<f64>() / 10.0;
        assert!(late < early, "early {early} late {late}");
        assert!(means.iter().all(|&s| (0.0..=1.0).contains(&s)));
    }

    #[test]
    fn dimension_mismatch() {
        let mut m = BackgroundModel::new(32, 32);
        assert!(matches!(
            m.observe_frame(&Frame::filled(0, 33, 32, 0)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn box_means() {
        let mut scores = vec![0.0; 16 * 16];
        for y in 0..16 {
            for x in 8..16 {
                scores[y * 16 + x] = 1.0;
            }
        }
        let map = MotionMap::from_scores(0, 16, 16, scores).unwrap();
        let ii = map.integral();
        for (b, want) in [
            (BBox::new(0.0, 0.0, 8.0, 16.0), 0.0),
            (BBox::new(8.0, 0.0, 8.0, 16.0), 1.0),
            (BBox::new(4.0, 2.0, 8.0, 8.0), 0.5),
        ] {
            assert_eq!(motion_score(&map, &b).unwrap(), want);
            assert!((motion_score_integral(&ii, &b).unwrap() - want).abs() < 1e-12);
        }
        assert!(matches!(
            motion_score(&map, &BBox::new(3.0, 3.0, 0.2, 0.2)),
            Err(Error::ZeroAreaBox)
        ));
    }

    #[test]
    fn deterministic_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let frames: Vec<Frame> = (0..8).map(|i| noisy(i, &mut rng)).collect();
        assert_eq!(motion_maps(&frames, true).unwrap(), motion_maps(&frames, true).unwrap());
    }
}
