//! Piecewise-linear interpolation of timestamped series.

use crate::error::{Error, Result};

/// Values that can be blended linearly.
pub trait Lerp: Copy {
    fn lerp(a: Self, b: Self, t: f64) -> Self;
}

impl Lerp for f64 {
    fn lerp(a: f64, b: f64, t: f64) -> f64 {
        a + (b - a) * t
    }
}

impl Lerp for nalgebra::Vector3<f64> {
    fn lerp(a: Self, b: Self, t: f64) -> Self {
        a + (b - a) * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interpolated<T> {
    pub value: T,
    /// The query fell outside the series and was clamped to an endpoint.
    pub clamped: bool,
}

/// Samples a time-sorted series at `t`, clamping outside its span.
pub fn interpolate_series<T: Lerp>(series: &[(f64, T)], t: f64) -> Result<Interpolated<T>> {
    let (first, last) = match (series.first(), series.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::EmptySeries),
    };
    if t < first.0 {
        return Ok(Interpolated {
            value: first.1,
            clamped: true,
        });
    }
    if t > last.0 {
        return Ok(Interpolated {
            value: last.1,
            clamped: true,
        });
    }
    // First sample strictly after t; t >= first.0 so idx >= 1 unless t is past the end.
    let idx = series.partition_point(|(ts, _)| *ts <= t);
    if idx == series.len() {
        return Ok(Interpolated {
            value: last.1,
            clamped: false,
        });
    }
    let (t0, v0) = series[idx - 1];
    let (t1, v1) = series[idx];
    let value = if t1 > t0 {
        T::lerp(v0, v1, (t - t0) / (t1 - t0))
    } else {
        v0
    };
    Ok(Interpolated { value, clamped: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn exact_samples_and_midpoints() {
        let s = vec![(0.0, 1.0), (1.0, 3.0), (3.0, -1.0)];
        assert_eq!(interpolate_series(&s, 1.0).unwrap().value, 3.0);
        assert_eq!(interpolate_series(&s, 3.0).unwrap().value, -1.0);
        assert_eq!(interpolate_series(&s, 0.5).unwrap().value, 2.0);
        assert_eq!(interpolate_series(&s, 2.0).unwrap().value, 1.0);
    }

    #[test]
    fn clamps_outside_span() {
        let s = vec![(1.0, 5.0), (2.0, 6.0)];
        let r = interpolate_series(&s, 0.0).unwrap();
        assert_eq!((r.value, r.clamped), (5.0, true));
        let r = interpolate_series(&s, 9.0).unwrap();
        assert_eq!((r.value, r.clamped), (6.0, true));
        assert!(!interpolate_series(&s, 1.5).unwrap().clamped);
    }

    #[test]
    fn empty_series() {
        let s: [(f64, f64); 0] = [];
        assert_eq!(interpolate_series(&s, 0.0), Err(Error::EmptySeries));
    }

    #[test]
    fn single_sample() {
        let s = [(2.0, 7.0)];
        assert_eq!(interpolate_series(&s, 2.0).unwrap().value, 7.0);
        assert!(interpolate_series(&s, 2.5).unwrap().clamped);
    }
}
