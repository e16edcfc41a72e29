//! Direct homography estimation by enhanced correlation coefficient (ECC)
//! maximization.
//!
//! Both images are Gaussian-smoothed, then the eight free homography entries
//! are refined by forward-additive Gauss-Newton steps on the zero-mean
//! normalized correlation between the template and the warped target.
//! A step that lowers the correlation is halved up to [`MAX_HALVINGS`] times
//! and dropped if it still does not help, so the correlation never decreases
//! between accepted iterations.

use alloc::vec::Vec;
use nalgebra::{Point2, SMatrix, SVector};
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::events::Frame;
use crate::homography::Homography;
use crate::image::Image;

pub const MAX_HALVINGS: usize = 8;

type Mat8 = SMatrix<f64, 8, 8>;
type Vec8 = SVector<f64, 8>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EccConfig {
    pub max_iterations: usize,
    /// Stop once an accepted step raises the correlation by less than this.
    pub eps: f64,
    /// Gaussian pre-smoothing in pixels. Must be positive: binary event
    /// frames have no usable gradients without it.
    pub smooth_sigma: f64,
    pub init: Homography,
}

impl Default for EccConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            eps: 1e-7,
            smooth_sigma: 2.0,
            init: Homography::identity(),
        }
    }
}

impl EccConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.smooth_sigma > 0.0) || !self.smooth_sigma.is_finite() {
            return Err(Error::InvalidConfig("smooth_sigma must be a positive finite number"));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be at least 1"));
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidConfig("eps must be positive"));
        }
        Ok(())
    }

    pub fn with_init(mut self, init: Homography) -> Self {
        self.init = init;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EccResult {
    /// Maps template coordinates to target coordinates.
    pub homography: Homography,
    pub ecc_value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Estimates the homography taking `template` (frame t) onto `target`
/// (frame t+1). Multi-channel frames are merged first.
pub fn estimate_ecc(template: &Frame, target: &Frame, cfg: &EccConfig) -> Result<EccResult> {
    if template.width != target.width || template.height != target.height {
        return Err(Error::DimensionMismatch(
            template.width,
            template.height,
            target.width,
            target.height,
        ));
    }
    align_images(&template.to_image(), &target.to_image(), cfg)
}

/// Runs [`align_images`] on each polarity channel and averages the
/// resulting parameters. Single-channel frames fall back to
/// [`estimate_ecc`].
pub fn estimate_ecc_per_channel(template: &Frame, target: &Frame, cfg: &EccConfig) -> Result<EccResult> {
    if template.channels != target.channels || template.channels == 1 {
        return estimate_ecc(template, target, cfg);
    }
    let mut params = [0.0; 8];
    let mut ecc_value = 0.0;
    let mut iterations = 0;
    let mut converged = true;
    for c in 0..template.channels {
        let r = align_images(&template.channel_image(c), &target.channel_image(c), cfg)?;
        for (acc, p) in params.iter_mut().zip(r.homography.params()) {
            *acc += p;
        }
        ecc_value += r.ecc_value;
        iterations = iterations.max(r.iterations);
        converged &= r.converged;
    }
    let n = template.channels as f64;
    params.iter_mut().for_each(|p| *p /= n);
    Ok(EccResult {
        homography: Homography::from_params(&params)?,
        ecc_value: ecc_value / n,
        iterations,
        converged,
    })
}

/// ECC alignment of two real-valued images.
pub fn align_images(template: &Image, target: &Image, cfg: &EccConfig) -> Result<EccResult> {
    cfg.validate()?;
    if template.width != target.width || template.height != target.height {
        return Err(Error::DimensionMismatch(
            template.width,
            template.height,
            target.width,
            target.height,
        ));
    }
    if template.is_empty() {
        return Err(Error::DegenerateInput("empty image"));
    }
    let tmpl = template.gaussian_blur(cfg.smooth_sigma);
    let img = target.gaussian_blur(cfg.smooth_sigma);
    if tmpl.variance() < 1e-18 || img.variance() < 1e-18 {
        return Err(Error::DegenerateInput("image is constant after smoothing"));
    }
    let (gx, gy) = img.gradients();
    let mut h = cfg.init;
    let margin = ((3.0 * cfg.smooth_sigma).ceil() as usize).min(tmpl.width.min(tmpl.height) / 4);
    let pixels = overlap(&tmpl, &h, margin);
    if pixels.len() < (tmpl.data.len() / 20).max(16) {
        return Err(Error::DegenerateInput("initial warp leaves no usable overlap"));
    }
    let aligner = Aligner {
        tmpl: &tmpl,
        img: &img,
        gx: &gx,
        gy: &gy,
        pixels,
    };
    let mut state = aligner.evaluate(&h).ok_or(Error::DegenerateInput(
        "template or target has no contrast in the overlap",
    ))?;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iterations {
        iterations += 1;
        let delta = aligner.step(&state);
        if !delta.iter().all(|d| d.is_finite()) {
            return Err(Error::Divergence { iteration: iterations });
        }
        let base = h.params();
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let mut p = base;
            for (pi, di) in p.iter_mut().zip(delta.iter()) {
                *pi += scale * di;
            }
            if let Ok(candidate) = Homography::from_params(&p) {
                if let Some(next) = aligner.evaluate(&candidate) {
                    if next.rho >= state.rho {
                        accepted = Some((candidate, next));
                        break;
                    }
                }
            }
            scale *= 0.5;
        }
        let Some((candidate, next)) = accepted else {
            // No ascent direction left.
            converged = true;
            break;
        };
        let gain = next.rho - state.rho;
        h = candidate;
        state = next;
        if gain < cfg.eps {
            converged = true;
            break;
        }
    }
    Ok(EccResult {
        homography: h,
        ecc_value: state.rho.clamp(-1.0, 1.0),
        iterations,
        converged,
    })
}

/// Template pixels at least `margin` from the border whose initial warp
/// lands at least `margin` inside the target; smoothing near the border
/// replicates edge values and biases the correlation peak. The set stays
/// fixed for the whole run so correlations of different iterates compare
/// like with like; pixels that later leave the image sample the clamped
/// border.
fn overlap(tmpl: &Image, h: &Homography, margin: usize) -> Vec<usize> {
    let lo = margin as f64;
    let hi_x = (tmpl.width - 1 - margin) as f64;
    let hi_y = (tmpl.height - 1 - margin) as f64;
    let mut pixels = Vec::with_capacity(tmpl.data.len());
    for y in margin..tmpl.height - margin {
        for x in margin..tmpl.width - margin {
            if let Ok(p) = h.apply_point(Point2::new(x as f64, y as f64)) {
                if p.x >= lo && p.x <= hi_x && p.y >= lo && p.y <= hi_y {
                    pixels.push(y * tmpl.width + x);
                }
            }
        }
    }
    pixels
}

struct Aligner<'a> {
    tmpl: &'a Image,
    img: &'a Image,
    gx: &'a Image,
    gy: &'a Image,
    pixels: Vec<usize>,
}

/// Per-pixel data of one warp evaluation over the fixed pixel set.
struct Evaluation {
    rho: f64,
    warped: Vec<Point2<f64>>,
    denom: Vec<f64>,
    t_zm: Vec<f64>,
    i_zm: Vec<f64>,
}

impl Aligner<'_> {
    fn evaluate(&self, h: &Homography) -> Option<Evaluation> {
        let w = self.tmpl.width;
        let n = self.pixels.len();
        let m = h.matrix();
        let mut warped = Vec::with_capacity(n);
        let mut denom = Vec::with_capacity(n);
        let mut t_zm = Vec::with_capacity(n);
        let mut i_zm = Vec::with_capacity(n);
        for &i in &self.pixels {
            let (xf, yf) = ((i % w) as f64, (i / w) as f64);
            let d = m[(2, 0)] * xf + m[(2, 1)] * yf + 1.0;
            if d.abs() < 1e-12 {
                return None;
            }
            let u = (m[(0, 0)] * xf + m[(0, 1)] * yf + m[(0, 2)]) / d;
            let v = (m[(1, 0)] * xf + m[(1, 1)] * yf + m[(1, 2)]) / d;
            if !(u.is_finite() && v.is_finite()) {
                return None;
            }
            warped.push(Point2::new(u, v));
            denom.push(d);
            t_zm.push(self.tmpl.data[i]);
            i_zm.push(self.img.sample_clamped(u, v));
        }
        let count = n as f64;
        let t_mean = t_zm.iter().sum::<f64>() / count;
        let i_mean = i_zm.iter().sum::<f64>() / count;
        t_zm.iter_mut().for_each(|v| *v -= t_mean);
        i_zm.iter_mut().for_each(|v| *v -= i_mean);
        let t_norm = t_zm.iter().map(|v| v * v).sum::<f64>().sqrt();
        let i_norm = i_zm.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(t_norm > 1e-12 && i_norm > 1e-12) {
            return None;
        }
        let corr: f64 = t_zm.iter().zip(&i_zm).map(|(a, b)| a * b).sum();
        let rho = corr / (t_norm * i_norm);
        if !rho.is_finite() {
            return None;
        }
        Some(Evaluation {
            rho,
            warped,
            denom,
            t_zm,
            i_zm,
        })
    }

    /// Closed-form ECC update for the current linearization.
    fn step(&self, e: &Evaluation) -> Vec8 {
        let w = self.tmpl.width;
        let mut hess = Mat8::zeros();
        let mut t_proj = Vec8::zeros();
        let mut i_proj = Vec8::zeros();
        let mut rows = Vec::with_capacity(self.pixels.len());
        for (k, &i) in self.pixels.iter().enumerate() {
            let (x, y) = ((i % w) as f64, (i / w) as f64);
            let p = e.warped[k];
            let gx = self.gx.sample_clamped(p.x, p.y);
            let gy = self.gy.sample_clamped(p.x, p.y);
            let inv_d = 1.0 / e.denom[k];
            let gxd = gx * inv_d;
            let gyd = gy * inv_d;
            let g = Vec8::from([
                gxd * x,
                gxd * y,
                gxd,
                gyd * x,
                gyd * y,
                gyd,
                -(gxd * p.x + gyd * p.y) * x,
                -(gxd * p.x + gyd * p.y) * y,
            ]);
            hess.syger(1.0, &g, &g, 1.0);
            t_proj += g * e.t_zm[k];
            i_proj += g * e.i_zm[k];
            rows.push(g);
        }
        hess.fill_upper_triangle_with_lower_triangle();
        let solve = |rhs: &Vec8| -> Vec8 {
            if let Some(ch) = hess.cholesky() {
                ch.solve(rhs)
            } else {
                hess.lu().solve(rhs).unwrap_or_else(|| Vec8::repeat(f64::NAN))
            }
        };

        let i_proj_h = solve(&i_proj);
        let t_norm2: f64 = e.t_zm.iter().map(|v| v * v).sum();
        let i_norm2: f64 = e.i_zm.iter().map(|v| v * v).sum();
        let corr: f64 = e.t_zm.iter().zip(&e.i_zm).map(|(a, b)| a * b).sum();
        let lambda_n = i_norm2 - i_proj.dot(&i_proj_h);
        let lambda_d = corr - t_proj.dot(&i_proj_h);
        let lambda = if lambda_d > 0.0 {
            lambda_n / lambda_d
        } else {
            // Correlation of the projected residuals is not positive; use the
            // norm ratio of the parts orthogonal to the warp Jacobian.
            let t_orth = t_norm2 - t_proj.dot(&solve(&t_proj));
            (lambda_n.max(0.0) / t_orth.max(1e-300)).sqrt()
        };
        let mut err_proj = Vec8::zeros();
        for (k, g) in rows.iter().enumerate() {
            err_proj += g * (lambda * e.t_zm[k] - e.i_zm[k]);
        }
        solve(&err_proj)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texture(w: usize, h: usize) -> Image {
        Image::from_fn(w, h, |x, y| {
            let (x, y) = (x as f64, y as f64);
            (0.21 * x).sin() * (0.17 * y).cos() + 0.5 * (0.05 * x + 0.11 * y).sin()
        })
    }

    #[test]
    fn zero_sigma_is_a_configuration_error() {
        let cfg = EccConfig {
            smooth_sigma: 0.0,
            ..EccConfig::default()
        };
        let img = texture(32, 32);
        assert!(matches!(align_images(&img, &img, &cfg), Err(Error::InvalidConfig(_))));
        let cfg = EccConfig {
            smooth_sigma: -1.0,
            ..EccConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn blank_frame_is_degenerate() {
        let blank = Frame::new(0, 10, 16, 16, 1);
        let mut lit = Frame::new(10, 20, 16, 16, 1);
        lit.set(0, 5, 5);
        assert!(matches!(
            estimate_ecc(&blank, &lit, &EccConfig::default()),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn mismatched_dimensions() {
        let a = Frame::new(0, 10, 16, 16, 1);
        let b = Frame::new(0, 10, 16, 8, 1);
        assert!(matches!(
            estimate_ecc(&a, &b, &EccConfig::default()),
            Err(Error::DimensionMismatch(..))
        ));
    }

    #[test]
    fn self_alignment() {
        let img = texture(64, 64);
        let r = align_images(&img, &img, &EccConfig::default()).unwrap();
        assert!(r.ecc_value >= 0.999);
        assert!(r.homography.max_abs_diff(&Homography::identity()) < 1e-6);
        assert!(r.converged);
    }

    #[test]
    fn recovers_subpixel_translation() {
        let w = 64;
        let (tx, ty) = (1.3, -0.7);
        let tmpl = texture(w, w);
        let target = Image::from_fn(w, w, |x, y| {
            let (x, y) = (x as f64 - tx, y as f64 - ty);
            (0.21 * x).sin() * (0.17 * y).cos() + 0.5 * (0.05 * x + 0.11 * y).sin()
        });
        let r = align_images(&tmpl, &target, &EccConfig::default()).unwrap();
        let truth = Homography::from_translation(tx, ty);
        assert!(
            r.homography.corner_transfer_error(&truth, w, w).unwrap() < 0.05,
            "{r:?}"
        );
    }

    #[test]
    fn max_iterations_caps_work() {
        let tmpl = texture(48, 48);
        let target = Image::from_fn(48, 48, |x, y| {
            let (x, y) = (x as f64 - 2.0, y as f64);
            (0.21 * x).sin() * (0.17 * y).cos() + 0.5 * (0.05 * x + 0.11 * y).sin()
        });
        let cfg = EccConfig {
            max_iterations: 1,
            ..EccConfig::default()
        };
        let r = align_images(&tmpl, &target, &cfg).unwrap();
        assert_eq!(r.iterations, 1);
    }
}
