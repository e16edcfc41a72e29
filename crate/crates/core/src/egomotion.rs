//! From frame-to-frame homographies to world-frame velocities.
//!
//! The principal point is pushed through each homography: its image shift,
//! scaled by the rangefinder distance, gives the in-plane translation, and
//! the square root of the local Jacobian determinant gives the expansion
//! that maps to motion along the optical axis.

use alloc::vec::Vec;
use nalgebra::{Matrix3, Point2, Vector3};
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::ecc::{estimate_ecc, estimate_ecc_per_channel, EccConfig, EccResult};
use crate::error::{Error, Result};
use crate::events::{accumulate_until, EventStream, Frame, WindowingPolicy};
use crate::homography::Homography;
use crate::interp::{interpolate_series, Lerp};
use crate::sequence::Sequence;

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraModel {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        let cam = Self { fx, fy, cx, cy };
        cam.validate()?;
        Ok(cam)
    }

    /// Unit focal length with the principal point at the sensor center.
    pub fn identity(width: usize, height: usize) -> Self {
        Self {
            fx: 1.0,
            fy: 1.0,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) || !self.fx.is_finite() || !self.fy.is_finite() {
            return Err(Error::InvalidConfig("focal lengths must be positive"));
        }
        if !self.cx.is_finite() || !self.cy.is_finite() {
            return Err(Error::InvalidConfig("principal point must be finite"));
        }
        Ok(())
    }

    pub fn principal_point(&self) -> Point2<f64> {
        Point2::new(self.cx, self.cy)
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }
}

/// Roll, pitch, yaw in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EulerAngles {
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
}

impl EulerAngles {
    pub fn new(phi: f64, theta: f64, psi: f64) -> Self {
        Self { phi, theta, psi }
    }

    pub fn is_finite(&self) -> bool {
        self.phi.is_finite() && self.theta.is_finite() && self.psi.is_finite()
    }

    /// Body-to-world rotation under `convention`.
    pub fn rotation(&self, convention: EulerConvention) -> Matrix3<f64> {
        let (rx, ry, rz) = (rot_x(self.phi), rot_y(self.theta), rot_z(self.psi));
        match convention {
            EulerConvention::Zyx => rz * ry * rx,
            EulerConvention::Xyz => rx * ry * rz,
        }
    }
}

impl Lerp for EulerAngles {
    fn lerp(a: Self, b: Self, t: f64) -> Self {
        Self {
            phi: f64::lerp(a.phi, b.phi, t),
            theta: f64::lerp(a.theta, b.theta, t),
            psi: f64::lerp(a.psi, b.psi, t),
        }
    }
}

/// Order in which the Euler angles compose into a rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EulerConvention {
    /// Intrinsic yaw-pitch-roll, `R = Rz(psi) Ry(theta) Rx(phi)`.
    #[default]
    Zyx,
    /// `R = Rx(phi) Ry(theta) Rz(psi)`.
    Xyz,
}

fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// `Rz(psi) Ry(theta) Rx(phi)`.
pub fn rotation_matrix(angles: &EulerAngles) -> Matrix3<f64> {
    angles.rotation(EulerConvention::Zyx)
}

/// Camera-to-body rotation of a downward-looking camera (optical axis along
/// body -z), applied to the output of [`camera_translation`].
///
/// The physical camera has image x along body x and image y along body -y.
/// [`camera_translation`] reports how the scene moved in the image, which is
/// the opposite of the camera's own in-plane motion, so this mount also
/// folds in that half-turn about the optical axis: image x maps to body -x,
/// image y to body +y, and the optical axis to body -z.
pub fn nadir_mount() -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::new(-1.0, 1.0, -1.0))
}

/// Camera-to-body rotation of the physical downward camera, without the
/// image-motion sign fold of [`nadir_mount`].
pub fn nadir_camera_to_body() -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0))
}

/// Translation recovered from one frame-pair homography.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraMotion {
    /// (dx, dy, dz) in meters in the camera frame. dz > 0 is approach.
    pub translation: Vector3<f64>,
    /// `translation / dt`.
    pub velocity: Vector3<f64>,
    /// Isotropic expansion at the principal point.
    pub scale: f64,
}

/// Reads the translation between two frames off their homography.
///
/// `dx = (u' - cx) * range / fx`, `dy = (v' - cy) * range / fy` where
/// `(u', v')` is the principal point mapped by `h`, and
/// `dz = (s - 1) * range` with `s = sqrt(det J)` at the principal point.
pub fn camera_translation(h: &Homography, cam: &CameraModel, range_m: f64, dt_s: f64) -> Result<CameraMotion> {
    if !(dt_s > 0.0) || !dt_s.is_finite() {
        return Err(Error::InvalidConfig("frame interval must be positive"));
    }
    if !(range_m > 0.0) || !range_m.is_finite() {
        return Err(Error::InvalidConfig("range must be positive"));
    }
    let c = cam.principal_point();
    let moved = h.apply_point(c)?;
    let det = h.jacobian_at(c)?.determinant();
    if !(det > 0.0) {
        return Err(Error::Reflection { det });
    }
    let scale = det.sqrt();
    let translation = Vector3::new(
        (moved.x - c.x) * range_m / cam.fx,
        (moved.y - c.y) * range_m / cam.fy,
        (scale - 1.0) * range_m,
    );
    Ok(CameraMotion {
        translation,
        velocity: translation / dt_s,
        scale,
    })
}

/// `R(angles) · mount · v_cam` with the default yaw-pitch-roll convention.
pub fn to_world_velocity(v_cam: &Vector3<f64>, angles: &EulerAngles, mount: &Matrix3<f64>) -> Vector3<f64> {
    to_world_velocity_with(v_cam, angles, mount, EulerConvention::Zyx)
}

pub fn to_world_velocity_with(
    v_cam: &Vector3<f64>,
    angles: &EulerAngles,
    mount: &Matrix3<f64>,
    convention: EulerConvention,
) -> Vector3<f64> {
    angles.rotation(convention) * (mount * v_cam)
}

/// How two-channel frames are aligned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PolarityHandling {
    /// OR the channels into one frame.
    #[default]
    Merge,
    /// Align each channel separately and average the parameters.
    PerChannelMean,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub windowing: WindowingPolicy,
    pub ecc: EccConfig,
    /// `None` uses [`CameraModel::identity`] for the sensor size.
    pub camera: Option<CameraModel>,
    pub mount: Matrix3<f64>,
    pub convention: EulerConvention,
    pub polarity: PolarityHandling,
    /// Initialize each pair with the previous pair's homography.
    pub warm_start: bool,
    pub include_partial: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            windowing: WindowingPolicy::default(),
            ecc: EccConfig::default(),
            camera: None,
            mount: nadir_mount(),
            convention: EulerConvention::Zyx,
            polarity: PolarityHandling::Merge,
            warm_start: true,
            include_partial: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SampleFlags {
    /// Alignment failed; velocity held from the previous good sample.
    pub gap_filled: bool,
    /// Neither frame had events; taken as no motion.
    pub no_events: bool,
    pub range_clamped: bool,
    pub attitude_clamped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocitySample {
    /// Midpoint between the two frame centers, microseconds.
    pub t_us: u64,
    /// World frame, m/s.
    pub v: Vector3<f64>,
    /// Camera frame, m/s.
    pub v_cam: Vector3<f64>,
    pub ecc_value: f64,
    pub scale: f64,
    pub flags: SampleFlags,
}

/// Outcome of aligning one consecutive frame pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairAlignment {
    pub result: Result<EccResult>,
    pub no_events: bool,
    /// Homography the solver started from.
    pub init: Homography,
}

/// Aligns every consecutive pair of `frames`, warm-starting when enabled.
pub fn align_frame_pairs(frames: &[Frame], cfg: &PipelineConfig) -> Result<Vec<PairAlignment>> {
    cfg.ecc.validate()?;
    let mut out = Vec::with_capacity(frames.len().saturating_sub(1));
    let mut previous: Option<Homography> = None;
    for pair in frames.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let init = if cfg.warm_start {
            previous.unwrap_or(cfg.ecc.init)
        } else {
            cfg.ecc.init
        };
        if a.event_count == 0 && b.event_count == 0 {
            out.push(PairAlignment {
                result: Ok(EccResult {
                    homography: Homography::identity(),
                    ecc_value: 1.0,
                    iterations: 0,
                    converged: true,
                }),
                no_events: true,
                init,
            });
            previous = None;
            continue;
        }
        let ecc = cfg.ecc.with_init(init);
        let result = match cfg.polarity {
            PolarityHandling::Merge => estimate_ecc(a, b, &ecc),
            PolarityHandling::PerChannelMean => estimate_ecc_per_channel(a, b, &ecc),
        };
        previous = result.as_ref().ok().map(|r| r.homography);
        out.push(PairAlignment {
            result,
            no_events: false,
            init,
        });
    }
    Ok(out)
}

/// Frames used for velocity estimation (partial windows dropped unless
/// requested).
pub fn estimation_frames(stream: &EventStream, end_us: Option<u64>, cfg: &PipelineConfig) -> Result<Vec<Frame>> {
    let mut frames = accumulate_until(stream, &cfg.windowing, end_us)?;
    if !cfg.include_partial {
        frames.retain(|f| !f.partial);
    }
    Ok(frames)
}

/// Estimates one world-frame velocity per consecutive frame pair.
///
/// `ranges` and `orientations` are `(seconds, value)` series, sampled by
/// linear interpolation at each pair's midpoint. Pairs whose alignment
/// fails keep the previous good velocity and are flagged, so the output
/// always has one sample per pair.
pub fn estimate_sequence(
    stream: &EventStream,
    ranges: &[(f64, f64)],
    orientations: &[(f64, EulerAngles)],
    end_us: Option<u64>,
    cfg: &PipelineConfig,
) -> Result<Vec<VelocitySample>> {
    if ranges.is_empty() {
        return Err(Error::MissingInput("range series is empty"));
    }
    if orientations.is_empty() {
        return Err(Error::MissingInput("orientation series is empty"));
    }
    let cam = match cfg.camera {
        Some(c) => {
            c.validate()?;
            c
        }
        None => CameraModel::identity(usize::from(stream.width), usize::from(stream.height)),
    };
    let frames = estimation_frames(stream, end_us, cfg)?;
    if frames.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: frames.len(),
        });
    }
    let pairs = align_frame_pairs(&frames, cfg)?;

    let mut samples: Vec<VelocitySample> = Vec::with_capacity(pairs.len());
    let mut last_good: Option<(Vector3<f64>, Vector3<f64>)> = None;
    for (k, pair) in pairs.iter().enumerate() {
        let (ta, tb) = (frames[k].t_mid_us(), frames[k + 1].t_mid_us());
        let t_us = ta + (tb - ta) / 2;
        let t_s = t_us as f64 * 1e-6;
        let dt_s = (tb - ta) as f64 * 1e-6;
        let range = interpolate_series(ranges, t_s)?;
        let attitude = interpolate_series(orientations, t_s)?;
        let mut flags = SampleFlags {
            no_events: pair.no_events,
            range_clamped: range.clamped,
            attitude_clamped: attitude.clamped,
            ..SampleFlags::default()
        };
        let motion = pair
            .result
            .as_ref()
            .map_err(Clone::clone)
            .and_then(|r| camera_translation(&r.homography, &cam, range.value, dt_s).map(|m| (m, r.ecc_value)));
        let sample = match motion {
            Ok((m, ecc_value)) => {
                let v = to_world_velocity_with(&m.velocity, &attitude.value, &cfg.mount, cfg.convention);
                last_good = Some((v, m.velocity));
                VelocitySample {
                    t_us,
                    v,
                    v_cam: m.velocity,
                    ecc_value,
                    scale: m.scale,
                    flags,
                }
            }
            Err(_) => {
                flags.gap_filled = true;
                let (v, v_cam) = last_good.unwrap_or((Vector3::zeros(), Vector3::zeros()));
                VelocitySample {
                    t_us,
                    v,
                    v_cam,
                    ecc_value: f64::NAN,
                    scale: f64::NAN,
                    flags,
                }
            }
        };
        samples.push(sample);
    }
    Ok(samples)
}

/// [`estimate_sequence`] on a loaded sequence, using its range readings,
/// trajectory attitudes, and trajectory end time.
pub fn estimate_for_sequence(seq: &Sequence, cfg: &PipelineConfig) -> Result<Vec<VelocitySample>> {
    let ranges: Vec<(f64, f64)> = seq.ranges.iter().map(|r| (r.t, r.d)).collect();
    let orientations: Vec<(f64, EulerAngles)> = seq.trajectory.iter().map(|s| (s.t, s.euler)).collect();
    estimate_sequence(&seq.stream, &ranges, &orientations, seq.end_us(), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::FRAC_PI_2;

    #[test]
    fn identity_homography_means_no_motion() {
        let cam = CameraModel::identity(64, 48);
        let m = camera_translation(&Homography::identity(), &cam, 37.0, 0.05).unwrap();
        assert_eq!(m.translation, Vector3::zeros());
        assert_eq!(m.scale, 1.0);
    }

    #[test]
    fn pure_scale_about_origin() {
        let cam = CameraModel::identity(128, 96);
        let h = Homography::from_scale(1.01).unwrap();
        let m = camera_translation(&h, &cam, 100.0, 0.5).unwrap();
        assert!((m.scale - 1.01).abs() < 1e-12);
        assert!((m.translation.z - 1.0).abs() < 1e-9);
        // (u' - cx) = 0.01 * cx
        assert!((m.translation.x - 0.01 * 64.0 * 100.0).abs() < 1e-9);
        assert!((m.translation.y - 0.01 * 48.0 * 100.0).abs() < 1e-9);
        assert!((m.velocity.z - 2.0).abs() < 1e-9);
    }

    #[test]
    fn range_linearity() {
        let cam = CameraModel::new(120.0, 110.0, 60.0, 50.0).unwrap();
        let h = Homography::new(Matrix3::new(1.01, 0.002, 0.7, -0.001, 1.012, -0.4, 1e-5, 2e-5, 1.0)).unwrap();
        let a = camera_translation(&h, &cam, 20.0, 0.1).unwrap();
        let b = camera_translation(&h, &cam, 40.0, 0.1).unwrap();
        assert!((b.translation - a.translation * 2.0).amax() < 1e-12);
    }

    #[test]
    fn reflection_rejected() {
        let cam = CameraModel::identity(10, 10);
        let h = Homography::new(Matrix3::new(-1.0, 0.0, 10.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0)).unwrap();
        assert!(matches!(
            camera_translation(&h, &cam, 1.0, 1.0),
            Err(Error::Reflection { .. })
        ));
        assert!(camera_translation(&Homography::identity(), &cam, 1.0, 0.0).is_err());
    }

    #[test]
    fn rotation_basics() {
        assert_eq!(rotation_matrix(&EulerAngles::default()), Matrix3::identity());
        let r = rotation_matrix(&EulerAngles::new(0.0, 0.0, FRAC_PI_2));
        assert!((r * Vector3::x() - Vector3::y()).amax() < 1e-15);
        let r = EulerAngles::new(0.3, -0.2, 1.1).rotation(EulerConvention::Xyz);
        assert!((r.transpose() * r - Matrix3::identity()).amax() < 1e-12);
        assert!((r.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn world_velocity() {
        let v = to_world_velocity(&Vector3::x(), &EulerAngles::default(), &Matrix3::identity());
        assert_eq!(v, Vector3::x());
        let v = to_world_velocity(&Vector3::zeros(), &EulerAngles::new(0.4, 0.1, -2.0), &nadir_mount());
        assert_eq!(v, Vector3::zeros());
        // approach along the optical axis is downward motion
        let v = to_world_velocity(&Vector3::z(), &EulerAngles::default(), &nadir_mount());
        assert_eq!(v, -Vector3::z());
    }

    #[test]
    fn mounts_are_rotations() {
        for m in [nadir_mount(), nadir_camera_to_body()] {
            assert!((m.determinant() - 1.0).abs() < 1e-15);
            assert_eq!(m * Vector3::z(), -Vector3::z());
        }
    }

    #[test]
    fn sequence_needs_inputs() {
        let stream = EventStream::empty(8, 8);
        let att = [(0.0, EulerAngles::default())];
        let cfg = PipelineConfig::default();
        assert!(matches!(
            estimate_sequence(&stream, &[], &att, None, &cfg),
            Err(Error::MissingInput(_))
        ));
        assert!(matches!(
            estimate_sequence(&stream, &[(0.0, 10.0)], &att, None, &cfg),
            Err(Error::InsufficientData { .. })
        ));
    }
}
