use crate::geometry::PixelRect;

/// Summed-area table over a row-major grid of values.
#[derive(Debug, Clone)]
pub struct IntegralImage {
    width: usize,
    height: usize,
    sums: Vec<f64>,
}

impl IntegralImage {
    pub fn new(width: usize, height: usize, values: &[f64]) -> Self {
        let stride = width + 1;
        let mut sums = vec![0.0; stride * (height + 1)];
        for y in 0..height {
            let mut row = 0.0;
            for x in 0..width {
                row += values[y * width + x];
                sums[(y + 1) * stride + x + 1] = sums[y * stride + x + 1] + row;
            }
        }
        IntegralImage { width, height, sums }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn sum(&self, r: &PixelRect) -> f64 {
        let s = self.width + 1;
        self.sums[r.y1 * s + r.x1] - self.sums[r.y0 * s + r.x1] - self.sums[r.y1 * s + r.x0]
            + self.sums[r.y0 * s + r.x0]
    }

    pub fn mean(&self, r: &PixelRect) -> f64 {
        self.sum(r) / r.area() as f64
    }
}
