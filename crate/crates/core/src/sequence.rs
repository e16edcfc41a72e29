//! Landing sequence data model: events, trajectory states, range readings.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use nalgebra::Vector3;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::egomotion::EulerAngles;
use crate::error::{Error, Result};
use crate::events::EventStream;

/// Events may not lie further than this outside the trajectory's time span.
pub const EVENT_SPAN_TOLERANCE_S: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// Lander state sample. Position and velocity are NaN in test sequences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanderState {
    /// Seconds since sequence start.
    pub t: f64,
    pub pos: Vector3<f64>,
    pub vel: Vector3<f64>,
    pub euler: EulerAngles,
    /// Body angular rates (p, q, r) in rad/s.
    pub omega: Vector3<f64>,
}

impl LanderState {
    pub fn has_velocity(&self) -> bool {
        self.vel.iter().all(|v| v.is_finite())
    }

    /// Copy with position and velocity hidden.
    pub fn redacted(&self) -> Self {
        Self {
            pos: Vector3::repeat(f64::NAN),
            vel: Vector3::repeat(f64::NAN),
            ..*self
        }
    }
}

/// Rangefinder distance to the surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeReading {
    /// Seconds since sequence start.
    pub t: f64,
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub id: String,
    pub split: Split,
    pub stream: EventStream,
    pub trajectory: Vec<LanderState>,
    pub ranges: Vec<RangeReading>,
}

impl Sequence {
    /// Checks every cross-field invariant of the container.
    pub fn validate(&self) -> Result<()> {
        self.stream.validate()?;
        let fail = |msg: String| Err(Error::InvalidSequence(msg));
        for (i, w) in self.trajectory.windows(2).enumerate() {
            if !(w[1].t >= w[0].t) {
                return fail(format!("trajectory state {} goes back in time", i + 1));
            }
        }
        for (i, s) in self.trajectory.iter().enumerate() {
            if !s.t.is_finite() || !s.euler.is_finite() || !s.omega.iter().all(|v| v.is_finite()) {
                return fail(format!("trajectory state {i} has non-finite time, attitude or rates"));
            }
            let has_vel = s.has_velocity();
            match self.split {
                Split::Train if !has_vel => {
                    return fail(format!("train sequence state {i} lacks a velocity"));
                }
                Split::Test if s.vel.iter().any(|v| !v.is_nan()) => {
                    return fail(format!("test sequence state {i} exposes a velocity"));
                }
                _ => {}
            }
        }
        for (i, r) in self.ranges.iter().enumerate() {
            if !(r.d > 0.0) || !r.d.is_finite() || !r.t.is_finite() {
                return fail(format!("range reading {i} is not a positive distance"));
            }
            if i > 0 && r.t < self.ranges[i - 1].t {
                return fail(format!("range reading {i} goes back in time"));
            }
        }
        if let (Some(first), Some(last), Some(t_last_us)) =
            (self.trajectory.first(), self.trajectory.last(), self.stream.last_t_us())
        {
            let t_first_s = self.stream.events[0].t_us as f64 * 1e-6;
            let t_last_s = t_last_us as f64 * 1e-6;
            if t_first_s < first.t - EVENT_SPAN_TOLERANCE_S || t_last_s > last.t + EVENT_SPAN_TOLERANCE_S {
                return fail(format!(
                    "event timestamps span {t_first_s} s to {t_last_s} s but the trajectory covers {} s to {} s; \
                     event times must be integer microseconds",
                    first.t, last.t
                ));
            }
        }
        Ok(())
    }

    /// End of the recording in microseconds, taken from the trajectory.
    pub fn end_us(&self) -> Option<u64> {
        self.trajectory.last().map(|s| (s.t * 1e6).round().max(0.0) as u64)
    }
}
