//! Planar homographies: point mapping, local Jacobians, and image warping.

use alloc::vec::Vec;
use nalgebra::{Matrix2, Matrix3, Point2, Vector3};

use crate::error::{Error, Result};
use crate::image::Image;

const DEGENERATE: f64 = 1e-12;

/// 3x3 projective map normalized so that `h[(2, 2)] == 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography(Matrix3<f64>);

impl Default for Homography {
    fn default() -> Self {
        Self::identity()
    }
}

impl Homography {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Normalizes `m` and checks it is invertible.
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        if !m.iter().all(|v| v.is_finite()) || m[(2, 2)].abs() < DEGENERATE {
            return Err(Error::Singular);
        }
        let m = m / m[(2, 2)];
        if m.determinant().abs() < DEGENERATE {
            return Err(Error::Singular);
        }
        Ok(Self(m))
    }

    pub fn from_translation(tx: f64, ty: f64) -> Self {
        Self(Matrix3::new(1.0, 0.0, tx, 0.0, 1.0, ty, 0.0, 0.0, 1.0))
    }

    pub fn from_scale(s: f64) -> Result<Self> {
        Self::new(Matrix3::new(s, 0.0, 0.0, 0.0, s, 0.0, 0.0, 0.0, 1.0))
    }

    /// The eight free entries in row-major order (h33 excluded).
    pub fn params(&self) -> [f64; 8] {
        let m = &self.0;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
        ]
    }

    pub fn from_params(p: &[f64; 8]) -> Result<Self> {
        Self::new(Matrix3::new(p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7], 1.0))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn apply_point(&self, u: Point2<f64>) -> Result<Point2<f64>> {
        let m = &self.0;
        let w = m[(2, 0)] * u.x + m[(2, 1)] * u.y + m[(2, 2)];
        if w.abs() < DEGENERATE || !w.is_finite() {
            return Err(Error::SingularProjection { x: u.x, y: u.y });
        }
        Ok(Point2::new(
            (m[(0, 0)] * u.x + m[(0, 1)] * u.y + m[(0, 2)]) / w,
            (m[(1, 0)] * u.x + m[(1, 1)] * u.y + m[(1, 2)]) / w,
        ))
    }

    /// Derivative of [`Homography::apply_point`] with respect to the input point.
    pub fn jacobian_at(&self, u: Point2<f64>) -> Result<Matrix2<f64>> {
        let m = &self.0;
        let w = m[(2, 0)] * u.x + m[(2, 1)] * u.y + m[(2, 2)];
        if w.abs() < DEGENERATE || !w.is_finite() {
            return Err(Error::SingularProjection { x: u.x, y: u.y });
        }
        let p = self.apply_point(u)?;
        Ok(Matrix2::new(
            (m[(0, 0)] - p.x * m[(2, 0)]) / w,
            (m[(0, 1)] - p.x * m[(2, 1)]) / w,
            (m[(1, 0)] - p.y * m[(2, 0)]) / w,
            (m[(1, 1)] - p.y * m[(2, 1)]) / w,
        ))
    }

    /// `self · other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Homography) -> Result<Homography> {
        Homography::new(self.0 * other.0)
    }

    pub fn inverse(&self) -> Result<Homography> {
        let inv = self.0.try_inverse().ok_or(Error::Singular)?;
        Homography::new(inv)
    }

    /// Largest displacement of the four image corners when mapped by `self`
    /// versus `other`.
    pub fn corner_transfer_error(&self, other: &Homography, width: usize, height: usize) -> Result<f64> {
        let (w, h) = ((width - 1) as f64, (height - 1) as f64);
        let mut worst = 0.0f64;
        for c in [
            Point2::new(0.0, 0.0),
            Point2::new(w, 0.0),
            Point2::new(0.0, h),
            Point2::new(w, h),
        ] {
            let d = self.apply_point(c)? - other.apply_point(c)?;
            worst = worst.max(d.norm());
        }
        Ok(worst)
    }

    pub fn max_abs_diff(&self, other: &Homography) -> f64 {
        (self.0 - other.0).amax()
    }

    /// Maps a homogeneous vector without dehomogenizing.
    pub fn apply_homogeneous(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }
}

/// Output of [`warp_image`].
#[derive(Debug, Clone, PartialEq)]
pub struct WarpedImage {
    pub image: Image,
    /// True where the output sampled inside the source.
    pub valid: Vec<bool>,
}

/// Moves `src` by `h`: `out(u) = src(h⁻¹(u))`, bilinear, zero outside.
pub fn warp_image(src: &Image, h: &Homography) -> Result<WarpedImage> {
    if src.is_empty() {
        return Err(Error::DegenerateInput("cannot warp an empty image"));
    }
    let inv = h.inverse()?;
    let mut image = Image::zeros(src.width, src.height);
    let mut valid = alloc::vec![false; src.width * src.height];
    for y in 0..src.height {
        for x in 0..src.width {
            let p = match inv.apply_point(Point2::new(x as f64, y as f64)) {
                Ok(p) => p,
                Err(_) => continue,
            };
            if let Some(v) = src.sample(p.x, p.y) {
                image.set(x, y, v);
                valid[y * src.width + x] = true;
            }
        }
    }
    Ok(WarpedImage { image, valid })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_h() -> Homography {
        Homography::new(Matrix3::new(1.02, 0.01, 3.0, -0.015, 0.99, -2.0, 1e-4, -2e-4, 1.0)).unwrap()
    }

    #[test]
    fn identity_and_translation_mapping() {
        let p = Homography::identity().apply_point(Point2::new(10.0, 20.0)).unwrap();
        assert_eq!(p, Point2::new(10.0, 20.0));
        let p = Homography::from_translation(2.0, 3.0)
            .apply_point(Point2::origin())
            .unwrap();
        assert_eq!(p, Point2::new(2.0, 3.0));
    }

    #[test]
    fn degenerate_denominator() {
        let h = Homography(Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0));
        assert!(matches!(
            h.apply_point(Point2::new(-1.0, 5.0)),
            Err(Error::SingularProjection { .. })
        ));
        assert!(h.jacobian_at(Point2::new(-1.0, 0.0)).is_err());
    }

    #[test]
    fn jacobian_of_identity_and_scale() {
        let j = Homography::identity().jacobian_at(Point2::new(4.0, -7.0)).unwrap();
        assert_eq!(j, Matrix2::identity());
        let j = Homography::from_scale(1.3)
            .unwrap()
            .jacobian_at(Point2::new(40.0, 9.0))
            .unwrap();
        assert!((j - Matrix2::identity() * 1.3).amax() < 1e-15);
        assert!((j.determinant() - 1.69).abs() < 1e-12);
    }

    #[test]
    fn group_axioms() {
        let h = sample_h();
        assert!(h.compose(&Homography::identity()).unwrap().max_abs_diff(&h) < 1e-15);
        let i = h.compose(&h.inverse().unwrap()).unwrap();
        assert!(i.max_abs_diff(&Homography::identity()) < 1e-9);
        let t = Homography::from_translation(1.5, -2.0)
            .compose(&Homography::from_translation(0.5, 4.0))
            .unwrap();
        assert!(t.max_abs_diff(&Homography::from_translation(2.0, 2.0)) < 1e-15);
        let half = Homography::from_scale(2.0).unwrap().inverse().unwrap();
        assert!(
            half.max_abs_diff(&Homography::new(Matrix3::from_diagonal(&Vector3::new(0.5, 0.5, 1.0))).unwrap()) < 1e-15
        );
        assert_eq!(Homography::identity().inverse().unwrap(), Homography::identity());
    }

    #[test]
    fn singular_matrix_rejected() {
        assert_eq!(Homography::new(Matrix3::zeros()), Err(Error::Singular));
        let rank2 = Matrix3::new(1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 0.0, 1.0);
        assert_eq!(Homography::new(rank2), Err(Error::Singular));
    }

    #[test]
    fn warp_identity_is_exact() {
        let img = Image::from_fn(9, 6, |x, y| ((x * 7 + y * 3) % 5) as f64 / 3.0);
        let w = warp_image(&img, &Homography::identity()).unwrap();
        assert_eq!(w.image, img);
        assert!(w.valid.iter().all(|&v| v));
    }

    #[test]
    fn warp_integer_shift() {
        let img = Image::from_fn(8, 4, |x, y| (1 + x + 10 * y) as f64);
        let w = warp_image(&img, &Homography::from_translation(2.0, 0.0)).unwrap();
        for y in 0..4 {
            for x in 0..8 {
                if x < 2 {
                    assert_eq!(w.image.get(x, y), 0.0);
                    assert!(!w.valid[y * 8 + x]);
                } else {
                    assert_eq!(w.image.get(x, y), img.get(x - 2, y));
                }
            }
        }
    }

    #[test]
    fn warp_rejects_empty() {
        assert!(warp_image(&Image::zeros(0, 0), &Homography::identity()).is_err());
    }
}
