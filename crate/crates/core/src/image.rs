//! Minimal real-valued grayscale image used by alignment and rendering.

use alloc::vec;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Row-major `f64` image. Integer coordinates address pixel centers,
/// origin top-left, x right, y down.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), width * height, "image buffer size");
        Self { width, height, data }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Bilinear sample; `None` outside `[0, w-1] x [0, h-1]`.
    #[inline]
    pub fn sample(&self, x: f64, y: f64) -> Option<f64> {
        let (w, h) = (self.width, self.height);
        if w == 0 || h == 0 || !(x >= 0.0 && y >= 0.0) {
            return None;
        }
        let max_x = (w - 1) as f64;
        let max_y = (h - 1) as f64;
        if x > max_x || y > max_y {
            return None;
        }
        let x0 = (x.floor() as usize).min(w.saturating_sub(2));
        let y0 = (y.floor() as usize).min(h.saturating_sub(2));
        let x1 = (x0 + 1).min(w - 1);
        let y1 = (y0 + 1).min(h - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let v00 = self.get(x0, y0);
        if fx == 0.0 && fy == 0.0 {
            return Some(v00);
        }
        let v10 = self.get(x1, y0);
        let v01 = self.get(x0, y1);
        let v11 = self.get(x1, y1);
        Some((v00 * (1.0 - fx) + v10 * fx) * (1.0 - fy) + (v01 * (1.0 - fx) + v11 * fx) * fy)
    }

    /// Bilinear sample with coordinates clamped into the image.
    #[inline]
    pub fn sample_clamped(&self, x: f64, y: f64) -> f64 {
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        self.sample(x, y).unwrap_or(0.0)
    }

    /// Separable Gaussian blur with replicated borders.
    pub fn gaussian_blur(&self, sigma: f64) -> Image {
        let radius = (3.0 * sigma).ceil().max(1.0) as isize;
        let mut kernel: Vec<f64> = (-radius..=radius)
            .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
            .collect();
        let sum: f64 = kernel.iter().sum();
        kernel.iter_mut().for_each(|k| *k /= sum);

        let (w, h) = (self.width as isize, self.height as isize);
        let mut tmp = Image::zeros(self.width, self.height);
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (k, i) in kernel.iter().zip(-radius..=radius) {
                    let xs = (x + i).clamp(0, w - 1);
                    acc += k * self.data[(y * w + xs) as usize];
                }
                tmp.data[(y * w + x) as usize] = acc;
            }
        }
        let mut out = Image::zeros(self.width, self.height);
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (k, i) in kernel.iter().zip(-radius..=radius) {
                    let ys = (y + i).clamp(0, h - 1);
                    acc += k * tmp.data[(ys * w + x) as usize];
                }
                out.data[(y * w + x) as usize] = acc;
            }
        }
        out
    }

    /// Central-difference gradients (one-sided at the borders).
    pub fn gradients(&self) -> (Image, Image) {
        let (w, h) = (self.width, self.height);
        let mut gx = Image::zeros(w, h);
        let mut gy = Image::zeros(w, h);
        for y in 0..h {
            for x in 0..w {
                let (xl, xr) = (x.saturating_sub(1), (x + 1).min(w - 1));
                let (yu, yd) = (y.saturating_sub(1), (y + 1).min(h - 1));
                if xr > xl {
                    gx.set(x, y, (self.get(xr, y) - self.get(xl, y)) / (xr - xl) as f64);
                }
                if yd > yu {
                    gy.set(x, y, (self.get(x, yd) - self.get(x, yu)) / (yd - yu) as f64);
                }
            }
        }
        (gx, gy)
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn variance(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        let m = self.mean();
        self.data.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.data.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Mean absolute difference over pixels where `mask` (if given) is true.
    pub fn mean_abs_diff(&self, other: &Image, mask: Option<&[bool]>) -> f64 {
        let mut acc = 0.0;
        let mut n = 0usize;
        for (i, (a, b)) in self.data.iter().zip(&other.data).enumerate() {
            if mask.is_none_or(|m| m[i]) {
                acc += (a - b).abs();
                n += 1;
            }
        }
        if n == 0 {
            0.0
        } else {
            acc / n as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_hits_pixel_centers_exactly() {
        let img = Image::from_fn(4, 3, |x, y| (x * 10 + y) as f64 * 0.37);
        for y in 0..3 {
            for x in 0..4 {
                assert_eq!(img.sample(x as f64, y as f64), Some(img.get(x, y)));
            }
        }
        assert_eq!(img.sample(-0.01, 0.0), None);
        assert_eq!(img.sample(3.01, 0.0), None);
        let v = img.sample(1.5, 0.5).unwrap();
        let expect = (img.get(1, 0) + img.get(2, 0) + img.get(1, 1) + img.get(2, 1)) / 4.0;
        assert!((v - expect).abs() < 1e-12);
    }

    #[test]
    fn blur_preserves_mass_and_constants() {
        let c = Image::from_fn(9, 7, |_, _| 2.5);
        let b = c.gaussian_blur(1.5);
        assert!(b.data.iter().all(|v| (v - 2.5).abs() < 1e-12));
        let mut imp = Image::zeros(31, 31);
        imp.set(15, 15, 1.0);
        let b = imp.gaussian_blur(2.0);
        assert!((b.data.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(b.get(15, 15) > b.get(16, 15));
    }

    #[test]
    fn gradients_of_ramp() {
        let img = Image::from_fn(5, 5, |x, y| 2.0 * x as f64 - y as f64);
        let (gx, gy) = img.gradients();
        assert!(gx.data.iter().all(|v| (v - 2.0).abs() < 1e-12));
        assert!(gy.data.iter().all(|v| (v + 1.0).abs() < 1e-12));
    }
}
