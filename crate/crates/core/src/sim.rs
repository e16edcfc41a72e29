//! Synthetic descents over a textured ground plane with exact ground truth.
//!
//! The world frame has z up and the ground at z = 0. A nadir camera (see
//! [`nadir_camera_to_body`]) renders a seeded value-noise albedo texture;
//! per-pixel log intensities feed a contrast-threshold event generator with
//! timestamps interpolated linearly between internal renders.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use nalgebra::{Matrix3, Vector3};
#[cfg(not(feature = "std"))]
use num_traits::Float;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::egomotion::{nadir_camera_to_body, CameraModel, EulerAngles, EulerConvention};
use crate::error::{Error, Result};
use crate::events::{Event, EventStream, Polarity};
use crate::homography::Homography;
use crate::image::Image;
use crate::interp::interpolate_series;
use crate::sequence::{LanderState, RangeReading, Sequence, Split};

/// Seeded band-limited albedo pattern on the ground plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneConfig {
    pub texture_seed: u64,
    /// Size of the finest texture cell in meters.
    pub texture_scale: f64,
    pub albedo_min: f64,
    pub albedo_max: f64,
    pub octaves: u32,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            texture_seed: 7,
            texture_scale: 0.5,
            albedo_min: 0.05,
            albedo_max: 0.95,
            octaves: 3,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.albedo_min > 0.0 && self.albedo_max > self.albedo_min && self.albedo_max.is_finite()) {
            return Err(Error::InvalidProfile("albedo range must satisfy 0 < min < max".into()));
        }
        if !(self.texture_scale > 0.0) || !self.texture_scale.is_finite() {
            return Err(Error::InvalidProfile("texture_scale must be positive".into()));
        }
        if self.octaves == 0 {
            return Err(Error::InvalidProfile("texture needs at least one octave".into()));
        }
        Ok(())
    }

    pub fn texture(&self) -> Texture {
        Texture { cfg: *self }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

// `f64::floor` is a libm call on baseline x86-64 and dominates rendering.
fn floor_i64(v: f64) -> i64 {
    let i = v as i64;
    if (i as f64) > v {
        i - 1
    } else {
        i
    }
}

fn fade(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

/// Multi-octave value noise mapped into the albedo range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Texture {
    cfg: SceneConfig,
}

impl Texture {
    fn lattice(&self, octave: u32, ix: i64, iy: i64) -> f64 {
        let key = (ix as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
            ^ (iy as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
            ^ u64::from(octave).wrapping_mul(0x1656_67B1_9E37_79F9);
        let h = splitmix(self.cfg.texture_seed.rotate_left(17) ^ key);
        (h >> 11) as f64 / (1u64 << 53) as f64
    }

    fn cell_size(&self, octave: u32) -> f64 {
        self.cfg.texture_scale * (1u64 << (self.cfg.octaves - 1 - octave)) as f64
    }

    fn noise(&self, x: f64, y: f64, lattice: impl Fn(u32, i64, i64) -> f64) -> f64 {
        let mut acc = 0.0;
        let mut total = 0.0;
        let mut weight = 1.0;
        for octave in 0..self.cfg.octaves {
            let cell = self.cell_size(octave);
            let (x, y) = (x / cell, y / cell);
            let (ix, iy) = (floor_i64(x), floor_i64(y));
            let (tx, ty) = (fade(x - ix as f64), fade(y - iy as f64));
            let v00 = lattice(octave, ix, iy);
            let v10 = lattice(octave, ix + 1, iy);
            let v01 = lattice(octave, ix, iy + 1);
            let v11 = lattice(octave, ix + 1, iy + 1);
            let top = v00 + (v10 - v00) * tx;
            let bottom = v01 + (v11 - v01) * tx;
            acc += weight * (top + (bottom - top) * ty);
            total += weight;
            weight *= 0.6;
        }
        let n = acc / total;
        self.cfg.albedo_min + (self.cfg.albedo_max - self.cfg.albedo_min) * n
    }

    /// Albedo at ground point (x, y) in meters.
    pub fn albedo(&self, x: f64, y: f64) -> f64 {
        self.noise(x, y, |o, ix, iy| self.lattice(o, ix, iy))
    }
}

/// Intrinsics plus sensor size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimCamera {
    pub model: CameraModel,
    pub width: usize,
    pub height: usize,
}

impl Default for SimCamera {
    fn default() -> Self {
        Self::square(256, 230.0)
    }
}

impl SimCamera {
    /// Square sensor with the principal point at its center.
    pub fn square(size: usize, focal: f64) -> Self {
        Self {
            model: CameraModel {
                fx: focal,
                fy: focal,
                cx: size as f64 / 2.0,
                cy: size as f64 / 2.0,
            },
            width: size,
            height: size,
        }
    }
}

/// Lander position (world, meters) and attitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub attitude: EulerAngles,
}

impl Pose {
    pub fn new(position: Vector3<f64>, attitude: EulerAngles) -> Self {
        Self { position, attitude }
    }

    /// Camera-to-world rotation.
    pub fn camera_to_world(&self) -> Matrix3<f64> {
        self.attitude.rotation(EulerConvention::Zyx) * nadir_camera_to_body()
    }

    /// Distance along the body -z axis to the ground.
    pub fn range_to_ground(&self) -> Option<f64> {
        let down = self.attitude.rotation(EulerConvention::Zyx) * -Vector3::z();
        if down.z >= 0.0 || self.position.z <= 0.0 {
            None
        } else {
            Some(self.position.z / -down.z)
        }
    }
}

/// Maps ground-plane coordinates `(X, Y, 1)` to homogeneous pixels.
pub fn plane_to_image(cam: &SimCamera, pose: &Pose) -> Result<Matrix3<f64>> {
    if pose.position.z <= 0.0 {
        return Err(Error::PlaneNotVisible("camera is not above the plane"));
    }
    let r_cw = pose.camera_to_world().transpose();
    let t = -(r_cw * pose.position);
    let m = Matrix3::from_columns(&[r_cw.column(0).into_owned(), r_cw.column(1).into_owned(), t]);
    Ok(cam.model.matrix() * m)
}

/// Exact plane-induced homography taking pixels of `from` to pixels of `to`.
pub fn ground_truth_homography(cam: &SimCamera, from: &Pose, to: &Pose) -> Result<Homography> {
    let a = plane_to_image(cam, from)?;
    let b = plane_to_image(cam, to)?;
    let a_inv = a.try_inverse().ok_or(Error::Singular)?;
    Homography::new(b * a_inv)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedView {
    /// Albedo seen at each pixel center.
    pub image: Image,
    /// Maps pixels of the reference view to pixels of this view.
    pub homography: Homography,
}

/// Renders the ground albedo seen from `pose`.
pub fn render_image(texture: &Texture, cam: &SimCamera, pose: &Pose) -> Result<Image> {
    if pose.position.z <= 0.0 {
        return Err(Error::PlaneNotVisible("camera is not above the plane"));
    }
    let r_wc = pose.camera_to_world();
    let k = &cam.model;
    let ray = |u: f64, v: f64| r_wc * Vector3::new((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
    let (w, h) = ((cam.width - 1) as f64, (cam.height - 1) as f64);
    for (u, v) in [(0.0, 0.0), (w, 0.0), (0.0, h), (w, h)] {
        if ray(u, v).z >= -1e-9 {
            return Err(Error::PlaneNotVisible("a sensor corner sees above the horizon"));
        }
    }
    let c = pose.position;
    let col_step = r_wc.column(0) / k.fx;
    let mut data = Vec::with_capacity(cam.width * cam.height);
    for y in 0..cam.height {
        let mut d = ray(0.0, y as f64);
        for _ in 0..cam.width {
            let lambda = -c.z / d.z;
            data.push(texture.albedo(c.x + lambda * d.x, c.y + lambda * d.y));
            d += col_step;
        }
    }
    Ok(Image::from_vec(cam.width, cam.height, data))
}

/// Renders `pose` and the homography from `reference` to it.
pub fn render_view(scene: &SceneConfig, cam: &SimCamera, pose: &Pose, reference: &Pose) -> Result<RenderedView> {
    scene.validate()?;
    Ok(RenderedView {
        image: render_image(&scene.texture(), cam, pose)?,
        homography: ground_truth_homography(cam, reference, pose)?,
    })
}

/// Piecewise-linear velocity and attitude schedule of a descent.
#[derive(Debug, Clone, PartialEq)]
pub struct DescentProfile {
    /// World position at t = 0, meters (z is altitude).
    pub initial_pos: Vector3<f64>,
    /// `(t seconds, velocity m/s)` control points; held constant outside.
    pub velocity_points: Vec<(f64, Vector3<f64>)>,
    /// `(t seconds, attitude)` control points; held constant outside.
    pub attitude_points: Vec<(f64, EulerAngles)>,
    pub duration: f64,
    /// Log-intensity change that triggers an event.
    pub contrast_threshold: f64,
    /// Internal render rate, Hz.
    pub frame_rate_internal: f64,
    /// Trajectory state sampling rate, Hz.
    pub state_rate: f64,
    /// Rangefinder sampling rate, Hz.
    pub range_rate: f64,
}

impl Default for DescentProfile {
    fn default() -> Self {
        Self {
            initial_pos: Vector3::new(0.0, 0.0, 40.0),
            velocity_points: alloc::vec![
                (0.0, Vector3::new(3.0, -2.0, -4.0)),
                (1.5, Vector3::new(-1.0, 2.0, -2.5)),
                (3.0, Vector3::new(2.0, 1.0, -1.5)),
            ],
            attitude_points: alloc::vec![
                (0.0, EulerAngles::new(0.03, -0.02, 0.1)),
                (3.0, EulerAngles::new(0.035, -0.025, 0.11)),
            ],
            duration: 3.0,
            contrast_threshold: 0.15,
            frame_rate_internal: 1000.0,
            state_rate: 20.0,
            range_rate: 20.0,
        }
    }
}

impl DescentProfile {
    /// Hovering profile: no motion, constant attitude.
    pub fn stationary(position: Vector3<f64>, attitude: EulerAngles, duration: f64) -> Self {
        Self {
            initial_pos: position,
            velocity_points: alloc::vec![(0.0, Vector3::zeros())],
            attitude_points: alloc::vec![(0.0, attitude)],
            duration,
            ..Self::default()
        }
    }

    /// Random 6-DoF descent: a lateral velocity whose heading sweeps
    /// steadily while its speed stays well above zero, a sink rate alternating
    /// between gentle and fast, a fixed random tilt and heading with a slow
    /// attitude drift. Same seed, same profile.
    pub fn seeded(seed: u64) -> Self {
        use core::f64::consts::PI;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let duration = 3.0;
        let knots = 4;
        let mut heading = rng.gen_range(-PI..PI);
        let turn = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let slow_first = rng.gen_bool(0.5);
        let velocity_points = (0..knots)
            .map(|i| {
                let t = duration * i as f64 / (knots - 1) as f64;
                let speed = rng.gen_range(2.5..4.0);
                let sink = if (i % 2 == 0) == slow_first {
                    rng.gen_range(0.5..1.5)
                } else {
                    rng.gen_range(3.0..4.5)
                };
                let v = Vector3::new(speed * heading.cos(), speed * heading.sin(), -sink);
                heading += turn * rng.gen_range(0.35 * PI..0.5 * PI);
                (t, v)
            })
            .collect();
        let start = EulerAngles::new(
            rng.gen_range(-0.12..0.12),
            rng.gen_range(-0.12..0.12),
            rng.gen_range(-PI..PI),
        );
        let drift = |rng: &mut ChaCha8Rng| rng.gen_range(-0.01..0.01);
        let end = EulerAngles::new(
            start.phi + drift(&mut rng),
            start.theta + drift(&mut rng),
            start.psi + drift(&mut rng),
        );
        Self {
            initial_pos: Vector3::new(
                rng.gen_range(-50.0..50.0),
                rng.gen_range(-50.0..50.0),
                rng.gen_range(20.0..24.0),
            ),
            velocity_points,
            attitude_points: alloc::vec![(0.0, start), (duration, end)],
            duration,
            ..Self::default()
        }
    }

    pub fn velocity_at(&self, t: f64) -> Vector3<f64> {
        interpolate_series(&self.velocity_points, t)
            .map(|r| r.value)
            .unwrap_or_else(|_| Vector3::zeros())
    }

    pub fn attitude_at(&self, t: f64) -> EulerAngles {
        interpolate_series(&self.attitude_points, t)
            .map(|r| r.value)
            .unwrap_or_default()
    }

    /// Exact integral of the piecewise-linear velocity.
    pub fn position_at(&self, t: f64) -> Vector3<f64> {
        let mut knots: Vec<f64> = alloc::vec![0.0];
        knots.extend(self.velocity_points.iter().map(|p| p.0).filter(|&k| k > 0.0 && k < t));
        knots.push(t);
        let mut pos = self.initial_pos;
        for w in knots.windows(2) {
            pos += (self.velocity_at(w[0]) + self.velocity_at(w[1])) * (0.5 * (w[1] - w[0]));
        }
        pos
    }

    pub fn pose_at(&self, t: f64) -> Pose {
        Pose::new(self.position_at(t), self.attitude_at(t))
    }

    /// Time derivative of the attitude (right-hand derivative at knots).
    pub fn attitude_rate_at(&self, t: f64) -> EulerAngles {
        let pts = &self.attitude_points;
        let idx = pts.partition_point(|p| p.0 <= t);
        if idx == 0 || idx == pts.len() {
            return EulerAngles::default();
        }
        let (t0, a) = pts[idx - 1];
        let (t1, b) = pts[idx];
        let dt = t1 - t0;
        if dt <= 0.0 {
            return EulerAngles::default();
        }
        EulerAngles::new((b.phi - a.phi) / dt, (b.theta - a.theta) / dt, (b.psi - a.psi) / dt)
    }

    /// Body angular rates (p, q, r) for yaw-pitch-roll angles.
    pub fn body_rates_at(&self, t: f64) -> Vector3<f64> {
        let e = self.attitude_at(t);
        let d = self.attitude_rate_at(t);
        let (sp, cp) = e.phi.sin_cos();
        let (st, ct) = e.theta.sin_cos();
        Vector3::new(
            d.phi - d.psi * st,
            d.theta * cp + d.psi * sp * ct,
            -d.theta * sp + d.psi * cp * ct,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidProfile(msg));
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return bad("duration must be positive".into());
        }
        if !(self.contrast_threshold > 0.0) {
            return bad("contrast_threshold must be positive".into());
        }
        for (name, rate) in [
            ("frame_rate_internal", self.frame_rate_internal),
            ("state_rate", self.state_rate),
            ("range_rate", self.range_rate),
        ] {
            if !(rate > 0.0) || !rate.is_finite() {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.velocity_points.is_empty() || self.attitude_points.is_empty() {
            return bad("velocity and attitude need at least one control point".into());
        }
        if self.velocity_points.windows(2).any(|w| !(w[1].0 > w[0].0))
            || self.attitude_points.windows(2).any(|w| !(w[1].0 > w[0].0))
        {
            return bad("control point times must increase strictly".into());
        }
        let finite = self.initial_pos.iter().all(|v| v.is_finite())
            && self
                .velocity_points
                .iter()
                .all(|(t, v)| t.is_finite() && v.iter().all(|c| c.is_finite()))
            && self.attitude_points.iter().all(|(t, a)| t.is_finite() && a.is_finite());
        if !finite {
            return bad("profile contains non-finite values".into());
        }
        let steps = (self.duration * 1000.0).ceil() as usize;
        for i in 0..=steps {
            let t = (i as f64 * 1e-3).min(self.duration);
            if self.position_at(t).z <= 0.0 {
                return bad(format!("altitude reaches the ground at t = {t} s"));
            }
            if self.pose_at(t).range_to_ground().is_none() {
                return bad(format!("rangefinder points above the horizon at t = {t} s"));
            }
        }
        Ok(())
    }

    /// Internal render times in microseconds.
    pub fn render_times_us(&self) -> Vec<f64> {
        let n = (self.duration * self.frame_rate_internal).floor() as usize;
        (0..=n)
            .map(|i| ((i as f64 / self.frame_rate_internal).min(self.duration)) * 1e6)
            .collect()
    }
}

/// Contrast-threshold event generator over a sequence of log-intensity
/// images.
///
/// Each pixel keeps the log intensity at its last event. Between two
/// renders the log intensity is taken to vary linearly; every crossing of
/// `reference ± threshold` emits one event at the interpolated time.
#[derive(Debug, Clone)]
pub struct EventSynthesizer {
    width: usize,
    height: usize,
    threshold: f64,
    reference: Vec<f64>,
    last: Vec<f64>,
    last_t_us: f64,
    events: Vec<Event>,
}

impl EventSynthesizer {
    pub fn new(first: &Image, t_us: f64, threshold: f64) -> Self {
        Self {
            width: first.width,
            height: first.height,
            threshold,
            reference: first.data.clone(),
            last: first.data.clone(),
            last_t_us: t_us,
            events: Vec::new(),
        }
    }

    pub fn push(&mut self, log_image: &Image, t_us: f64) {
        let span = t_us - self.last_t_us;
        let c = self.threshold;
        for (i, &b) in log_image.data.iter().enumerate() {
            let a = self.last[i];
            let r = &mut self.reference[i];
            if b != a {
                let (x, y) = ((i % self.width) as u16, (i / self.width) as u16);
                while b - *r >= c || *r - b >= c {
                    let sign = if b > *r { 1.0 } else { -1.0 };
                    *r += sign * c;
                    let frac = ((*r - a) / (b - a)).clamp(0.0, 1.0);
                    let t = self.last_t_us + frac * span;
                    self.events
                        .push(Event::new(t.round() as u64, x, y, Polarity::from_sign(sign)));
                }
            }
            self.last[i] = b;
        }
        self.last_t_us = t_us;
    }

    pub fn event_count(&self) -> usize {
        self.events.len()
    }

    /// Sorted stream, ordered by (t, y, x).
    pub fn finish(mut self) -> EventStream {
        self.events.sort_by_key(|e| (e.t_us, e.y, e.x));
        EventStream {
            width: self.width as u16,
            height: self.height as u16,
            events: self.events,
        }
    }
}

fn log_image(img: &Image) -> Image {
    Image::from_vec(img.width, img.height, img.data.iter().map(|v| v.ln()).collect())
}

/// Simulates the event stream of a descent.
pub fn generate_events(scene: &SceneConfig, profile: &DescentProfile, cam: &SimCamera) -> Result<EventStream> {
    scene.validate()?;
    profile.validate()?;
    if cam.width > usize::from(u16::MAX) || cam.height > usize::from(u16::MAX) {
        return Err(Error::InvalidProfile("sensor is too large".into()));
    }
    let texture = scene.texture();
    let times = profile.render_times_us();
    let first = log_image(&render_image(&texture, cam, &profile.pose_at(0.0))?);
    let mut synth = EventSynthesizer::new(&first, times[0], profile.contrast_threshold);
    for &t_us in &times[1..] {
        let img = render_image(&texture, cam, &profile.pose_at(t_us * 1e-6))?;
        synth.push(&log_image(&img), t_us);
    }
    Ok(synth.finish())
}

/// Exact lander state at `t` seconds.
pub fn state_at(profile: &DescentProfile, t: f64) -> LanderState {
    LanderState {
        t,
        pos: profile.position_at(t),
        vel: profile.velocity_at(t),
        euler: profile.attitude_at(t),
        omega: profile.body_rates_at(t),
    }
}

fn sample_times(duration: f64, rate: f64) -> Vec<f64> {
    let n = (duration * rate + 1e-9).floor() as usize;
    (0..=n).map(|i| i as f64 / rate).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedSequence {
    pub sequence: Sequence,
    /// Unredacted trajectory of a test-split sequence.
    pub truth: Option<Vec<LanderState>>,
}

/// Simulates a complete sequence. Test splits hide position and velocity
/// and return the truth separately.
pub fn generate_sequence(
    id: &str,
    scene: &SceneConfig,
    profile: &DescentProfile,
    cam: &SimCamera,
    split: Split,
) -> Result<GeneratedSequence> {
    let stream = generate_events(scene, profile, cam)?;
    let states: Vec<LanderState> = sample_times(profile.duration, profile.state_rate)
        .into_iter()
        .map(|t| state_at(profile, t))
        .collect();
    let ranges = sample_times(profile.duration, profile.range_rate)
        .into_iter()
        .map(|t| {
            let d = profile
                .pose_at(t)
                .range_to_ground()
                .ok_or_else(|| Error::InvalidProfile(format!("no ground range at t = {t} s")))?;
            Ok(RangeReading { t, d })
        })
        .collect::<Result<Vec<_>>>()?;
    let (trajectory, truth) = match split {
        Split::Train => (states, None),
        Split::Test => (states.iter().map(LanderState::redacted).collect(), Some(states)),
    };
    let sequence = Sequence {
        id: id.into(),
        split,
        stream,
        trajectory,
        ranges,
    };
    sequence.validate()?;
    Ok(GeneratedSequence { sequence, truth })
}

/// Ground-truth homographies between consecutive `times` (seconds).
pub fn pairwise_homographies(cam: &SimCamera, profile: &DescentProfile, times: &[f64]) -> Result<Vec<Homography>> {
    times
        .windows(2)
        .map(|w| ground_truth_homography(cam, &profile.pose_at(w[0]), &profile.pose_at(w[1])))
        .collect()
}

/// Image displacement of the principal point between two poses.
pub fn center_motion_px(cam: &SimCamera, from: &Pose, to: &Pose) -> Result<f64> {
    let h = ground_truth_homography(cam, from, to)?;
    let c = cam.model.principal_point();
    Ok((h.apply_point(c)? - c).norm())
}

/// Largest image displacement over the four sensor corners.
pub fn max_corner_motion_px(cam: &SimCamera, from: &Pose, to: &Pose) -> Result<f64> {
    let h = ground_truth_homography(cam, from, to)?;
    h.corner_transfer_error(&Homography::identity(), cam.width, cam.height)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn small_cam() -> SimCamera {
        SimCamera::square(32, 30.0)
    }

    #[test]
    fn texture_is_deterministic_and_in_range() {
        let t = SceneConfig::default().texture();
        let t2 = SceneConfig::default().texture();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..500 {
            let (x, y) = (i as f64 * 0.37 - 50.0, i as f64 * -0.21 + 3.0);
            let a = t.albedo(x, y);
            assert_eq!(a, t2.albedo(x, y));
            lo = lo.min(a);
            hi = hi.max(a);
        }
        assert!(lo >= 0.05 && hi <= 0.95 && hi - lo > 0.2);
        let other = SceneConfig {
            texture_seed: 8,
            ..SceneConfig::default()
        }
        .texture();
        assert_ne!(other.albedo(1.3, 2.7), t.albedo(1.3, 2.7));
    }

    #[test]
    fn identical_poses() {
        let pose = Pose::new(Vector3::new(1.0, 2.0, 20.0), EulerAngles::new(0.05, -0.03, 0.4));
        let scene = SceneConfig::default();
        let a = render_view(&scene, &small_cam(), &pose, &pose).unwrap();
        let b = render_view(&scene, &small_cam(), &pose, &pose).unwrap();
        assert_eq!(a.image, b.image);
        assert!(a.homography.max_abs_diff(&Homography::identity()) < 1e-12);
    }

    #[test]
    fn halving_altitude_doubles_scale() {
        let cam = small_cam();
        let high = Pose::new(Vector3::new(0.0, 0.0, 40.0), EulerAngles::default());
        let low = Pose::new(Vector3::new(0.0, 0.0, 20.0), EulerAngles::default());
        let h = ground_truth_homography(&cam, &high, &low).unwrap();
        let j = h.jacobian_at(cam.model.principal_point()).unwrap();
        assert!((j.determinant().sqrt() - 2.0).abs() < 1e-12);
        let c = cam.model.principal_point();
        assert!((h.apply_point(c).unwrap() - c).norm() < 1e-12);
    }

    #[test]
    fn plane_not_visible() {
        let cam = small_cam();
        let below = Pose::new(Vector3::new(0.0, 0.0, -1.0), EulerAngles::default());
        assert!(render_image(&SceneConfig::default().texture(), &cam, &below).is_err());
        let sideways = Pose::new(Vector3::new(0.0, 0.0, 10.0), EulerAngles::new(1.4, 0.0, 0.0));
        assert!(matches!(
            render_image(&SceneConfig::default().texture(), &cam, &sideways),
            Err(Error::PlaneNotVisible(_))
        ));
    }

    #[test]
    fn static_profile_has_no_events() {
        let p = DescentProfile {
            frame_rate_internal: 200.0,
            ..DescentProfile::stationary(Vector3::new(0.0, 0.0, 30.0), EulerAngles::default(), 0.2)
        };
        let s = generate_events(&SceneConfig::default(), &p, &small_cam()).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn single_step_gives_one_event() {
        let a = Image::from_vec(2, 1, vec![0.0, 0.0]);
        let b = Image::from_vec(2, 1, vec![0.2, 0.05]);
        let mut s = EventSynthesizer::new(&a, 0.0, 0.15);
        s.push(&b, 1000.0);
        let stream = s.finish();
        assert_eq!(stream.events.len(), 1);
        let e = stream.events[0];
        assert_eq!((e.x, e.y, e.polarity), (0, 0, Polarity::Positive));
        assert_eq!(e.t_us, 750);
        let mut s = EventSynthesizer::new(&a, 0.0, 0.15);
        s.push(&Image::from_vec(2, 1, vec![0.0, -0.31]), 100.0);
        let stream = s.finish();
        assert_eq!(stream.events.len(), 2);
        assert!(stream
            .events
            .iter()
            .all(|e| e.polarity == Polarity::Negative && e.x == 1));
    }

    #[test]
    fn body_rates_match_pure_yaw() {
        let p = DescentProfile {
            attitude_points: vec![(0.0, EulerAngles::default()), (2.0, EulerAngles::new(0.0, 0.0, 0.4))],
            ..DescentProfile::default()
        };
        let w = p.body_rates_at(1.0);
        assert!((w - Vector3::new(0.0, 0.0, 0.2)).amax() < 1e-15);
        assert_eq!(p.body_rates_at(2.5), Vector3::zeros());
    }

    #[test]
    fn position_integrates_velocity() {
        let p = DescentProfile::default();
        // 0..1.5 s: mean of (3,-2,-4) and (-1,2,-2.5) over 1.5 s
        let expect = p.initial_pos + Vector3::new(1.0, 0.0, -3.25) * 1.5;
        assert!((p.position_at(1.5) - expect).amax() < 1e-12);
        let h = 1e-6;
        let fd = (p.position_at(2.0 + h) - p.position_at(2.0 - h)) / (2.0 * h);
        assert!((fd - p.velocity_at(2.0)).amax() < 1e-6);
    }

    #[test]
    fn profile_validation() {
        let p = DescentProfile {
            contrast_threshold: 0.0,
            ..DescentProfile::default()
        };
        assert!(p.validate().is_err());
        let crash = DescentProfile {
            velocity_points: vec![(0.0, Vector3::new(0.0, 0.0, -30.0))],
            ..DescentProfile::default()
        };
        assert!(crash.validate().is_err());
        assert!(DescentProfile::default().validate().is_ok());
    }
}
