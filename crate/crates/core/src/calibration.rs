//! Per-axis scale calibration and trajectory comparison metrics.

use alloc::vec::Vec;
use nalgebra::Vector3;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};

/// Axis standard deviation below which a series counts as constant.
pub const CONSTANT_STD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationResult {
    /// Multiplicative factor per world axis.
    pub factors: Vector3<f64>,
    /// RMS of the scaled residual over all samples and axes, m/s.
    pub residual_rms: f64,
    pub n_samples: usize,
}

/// Least-squares scale per axis, `f_a = Σ est·truth / Σ est²`, with no
/// bias term. `estimated[i]` and `truth[i]` must refer to the same instant.
pub fn fit_scale_factors(estimated: &[Vector3<f64>], truth: &[Vector3<f64>]) -> Result<CalibrationResult> {
    if estimated.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: estimated.len(),
            right: truth.len(),
        });
    }
    if estimated.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mut num = Vector3::zeros();
    let mut den = Vector3::zeros();
    for (e, t) in estimated.iter().zip(truth) {
        num += e.component_mul(t);
        den += e.component_mul(e);
    }
    let mut factors = Vector3::zeros();
    for axis in 0..3 {
        if den[axis] == 0.0 {
            return Err(Error::DegenerateAxis { axis });
        }
        factors[axis] = num[axis] / den[axis];
    }
    let sq: f64 = estimated
        .iter()
        .zip(truth)
        .map(|(e, t)| (e.component_mul(&factors) - t).norm_squared())
        .sum();
    Ok(CalibrationResult {
        factors,
        residual_rms: (sq / (3 * estimated.len()) as f64).sqrt(),
        n_samples: estimated.len(),
    })
}

pub fn apply_calibration(samples: &[Vector3<f64>], factors: &Vector3<f64>) -> Vec<Vector3<f64>> {
    samples.iter().map(|v| v.component_mul(factors)).collect()
}

/// Surrogate leaderboard score: mean of the per-axis RMSEs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryScore {
    pub rmse_per_axis: Vector3<f64>,
    pub score: f64,
}

pub fn score_trajectory(estimated: &[Vector3<f64>], truth: &[Vector3<f64>]) -> Result<TrajectoryScore> {
    if estimated.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: estimated.len(),
            right: truth.len(),
        });
    }
    if estimated.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mut sq = Vector3::zeros();
    for (e, t) in estimated.iter().zip(truth) {
        let d = e - t;
        sq += d.component_mul(&d);
    }
    let rmse_per_axis = (sq / estimated.len() as f64).map(f64::sqrt);
    Ok(TrajectoryScore {
        rmse_per_axis,
        score: rmse_per_axis.mean(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSeries {
    pub values: Vec<Vector3<f64>>,
    /// Axes whose spread was below [`CONSTANT_STD`]; they are all zeros.
    pub constant_axes: [bool; 3],
}

/// Per-axis standardization `(v - mean) / std` (population std).
pub fn normalize_trajectory(series: &[Vector3<f64>]) -> Result<NormalizedSeries> {
    if series.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: series.len(),
        });
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<Vector3<f64>>() / n;
    let var = series
        .iter()
        .map(|v| (v - mean).component_mul(&(v - mean)))
        .sum::<Vector3<f64>>()
        / n;
    let std = var.map(f64::sqrt);
    let constant_axes = [std[0] < CONSTANT_STD, std[1] < CONSTANT_STD, std[2] < CONSTANT_STD];
    let values = series
        .iter()
        .map(|v| {
            Vector3::from_fn(|a, _| {
                if constant_axes[a] {
                    0.0
                } else {
                    (v[a] - mean[a]) / std[a]
                }
            })
        })
        .collect();
    Ok(NormalizedSeries { values, constant_axes })
}

/// Pearson correlation coefficient of two aligned series.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: a.len(),
        });
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if (saa / n).sqrt() < CONSTANT_STD || (sbb / n).sqrt() < CONSTANT_STD {
        return Err(Error::UndefinedCorrelation);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson correlation per axis; `None` where either side is constant.
pub fn axis_correlations(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> Result<[Option<f64>; 3]> {
    let mut out = [None; 3];
    for (axis, slot) in out.iter_mut().enumerate() {
        let xa: Vec<f64> = a.iter().map(|v| v[axis]).collect();
        let xb: Vec<f64> = b.iter().map(|v| v[axis]).collect();
        *slot = match pearson(&xa, &xb) {
            Ok(r) => Some(r),
            Err(Error::UndefinedCorrelation) => None,
            Err(e) => return Err(e),
        };
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn series() -> Vec<Vector3<f64>> {
        (0..20)
            .map(|i| {
                let t = i as f64 * 0.1;
                Vector3::new(t.sin() + 0.3, 2.0 - t, (3.0 * t).cos() - 1.5)
            })
            .collect()
    }

    #[test]
    fn identity_fit() {
        let s = series();
        let r = fit_scale_factors(&s, &s).unwrap();
        assert_eq!(r.factors, Vector3::repeat(1.0));
        assert_eq!(r.residual_rms, 0.0);
        assert_eq!(r.n_samples, 20);
    }

    #[test]
    fn degenerate_axis() {
        let est = vec![Vector3::new(1.0, 0.0, 1.0); 3];
        assert_eq!(
            fit_scale_factors(&est, &est).unwrap_err(),
            Error::DegenerateAxis { axis: 1 }
        );
        assert!(fit_scale_factors(&est, &est[..2]).is_err());
    }

    #[test]
    fn apply_factors() {
        let s = series();
        assert_eq!(apply_calibration(&s, &Vector3::repeat(1.0)), s);
        let d = apply_calibration(&s, &Vector3::repeat(2.0));
        assert!(d.iter().zip(&s).all(|(a, b)| *a == b * 2.0));
        let f = Vector3::new(0.769, 0.763, 0.832);
        assert_eq!(apply_calibration(&[Vector3::repeat(1.0)], &f), vec![f]);
    }

    #[test]
    fn score_cases() {
        let s = series();
        assert_eq!(score_trajectory(&s, &s).unwrap().score, 0.0);
        let zeros = vec![Vector3::zeros(); 5];
        let ones = vec![Vector3::repeat(1.0); 5];
        let sc = score_trajectory(&ones, &zeros).unwrap();
        assert_eq!(sc.score, 1.0);
        assert_eq!(sc.rmse_per_axis, Vector3::repeat(1.0));
        assert!(matches!(
            score_trajectory(&ones, &zeros[..4]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn normalize_constant_axis() {
        let s: Vec<_> = (0..4).map(|i| Vector3::new(i as f64, 5.0, -(i as f64))).collect();
        let n = normalize_trajectory(&s).unwrap();
        assert_eq!(n.constant_axes, [false, true, false]);
        assert!(n.values.iter().all(|v| v.y == 0.0));
        assert!(normalize_trajectory(&s[..1]).is_err());
    }

    #[test]
    fn normalize_standard_series_is_unchanged() {
        let s = vec![Vector3::repeat(-1.0), Vector3::repeat(1.0)];
        let n = normalize_trajectory(&s).unwrap();
        for (a, b) in n.values.iter().zip(&s) {
            assert!((a - b).amax() < 1e-12);
        }
    }

    #[test]
    fn pearson_cases() {
        let a = [1.0, 2.0, 4.0, 3.0];
        let neg: Vec<f64> = a.iter().map(|v| -v).collect();
        assert!((pearson(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&a, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(pearson(&a, &[2.0; 4]), Err(Error::UndefinedCorrelation));
    }
}
