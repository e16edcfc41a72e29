//! Event-camera ego-velocity estimation for descents over a planar surface.
//!
//! The pipeline accumulates events into binary frames, aligns consecutive
//! frames with a direct ECC homography fit, reads the camera translation off
//! the homography at the principal point, scales it by the rangefinder
//! distance, rotates it into the world frame, and finally applies per-axis
//! scale factors fitted on training data. A planar-scene event simulator
//! provides ground truth.
//!
//! The crate is `no_std` + `alloc`; the `std` feature only switches the math
//! backend.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod calibration;
pub mod ecc;
pub mod egomotion;
pub mod error;
pub mod events;
pub mod homography;
pub mod image;
pub mod interp;
pub mod sequence;
pub mod sim;

pub use calibration::{
    apply_calibration, axis_correlations, fit_scale_factors, normalize_trajectory, pearson, score_trajectory,
    CalibrationResult, NormalizedSeries, TrajectoryScore,
};
pub use ecc::{align_images, estimate_ecc, EccConfig, EccResult};
pub use egomotion::{
    camera_translation, estimate_for_sequence, estimate_sequence, nadir_mount, rotation_matrix, to_world_velocity,
    CameraModel, EulerAngles, EulerConvention, PipelineConfig, VelocitySample,
};
pub use error::{Error, Result};
pub use events::{accumulate, accumulate_until, frame_density, Event, EventStream, Frame, Polarity, WindowingPolicy};
pub use homography::{warp_image, Homography};
pub use image::Image;
pub use interp::interpolate_series;
pub use sequence::{LanderState, RangeReading, Sequence, Split};
