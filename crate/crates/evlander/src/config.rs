//! Run configuration: built-in defaults, a JSON config file, and command-line
//! flags, merged in that order of increasing precedence.

use std::path::{Path, PathBuf};

use evlander_core::ecc::EccConfig;
use evlander_core::egomotion::{nadir_mount, PolarityHandling};
use evlander_core::events::WindowMode;
use evlander_core::sim::{DescentProfile, SceneConfig, SimCamera};
use evlander_core::{CameraModel, EulerAngles, EulerConvention, PipelineConfig, WindowingPolicy};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::dataio::read_json;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraDoc {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl From<CameraModel> for CameraDoc {
    fn from(c: CameraModel) -> Self {
        Self {
            fx: c.fx,
            fy: c.fy,
            cx: c.cx,
            cy: c.cy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConventionDoc {
    Zyx,
    Xyz,
}

impl From<ConventionDoc> for EulerConvention {
    fn from(c: ConventionDoc) -> Self {
        match c {
            ConventionDoc::Zyx => EulerConvention::Zyx,
            ConventionDoc::Xyz => EulerConvention::Xyz,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolarityDoc {
    Merge,
    PerChannelMean,
}

/// Settings that may come from the config file or from flags. Every field
/// is optional; unset fields fall through to the next source.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub dt_us: Option<u64>,
    pub window_count: Option<usize>,
    pub polarity_split: Option<bool>,
    pub polarity_handling: Option<PolarityDoc>,
    pub sigma: Option<f64>,
    pub max_iter: Option<usize>,
    pub eps: Option<f64>,
    pub euler_convention: Option<ConventionDoc>,
    pub camera: Option<CameraDoc>,
    /// Camera-to-body rotation, row-major.
    pub mount: Option<[[f64; 3]; 3]>,
    pub warm_start: Option<bool>,
    pub include_partial: Option<bool>,
    pub calibration: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

impl Settings {
    pub fn from_file(path: &Path) -> CliResult<Self> {
        Ok(read_json(path)?)
    }

    /// Fields of `over` win; the window mode is taken as a unit so a flag
    /// `--dt-us` replaces a file `window_count` and vice versa.
    pub fn overlay(self, over: Settings) -> Settings {
        let window_from_over = over.dt_us.is_some() || over.window_count.is_some();
        Settings {
            dt_us: if window_from_over { over.dt_us } else { self.dt_us },
            window_count: if window_from_over {
                over.window_count
            } else {
                self.window_count
            },
            polarity_split: over.polarity_split.or(self.polarity_split),
            polarity_handling: over.polarity_handling.or(self.polarity_handling),
            sigma: over.sigma.or(self.sigma),
            max_iter: over.max_iter.or(self.max_iter),
            eps: over.eps.or(self.eps),
            euler_convention: over.euler_convention.or(self.euler_convention),
            camera: over.camera.or(self.camera),
            mount: over.mount.or(self.mount),
            warm_start: over.warm_start.or(self.warm_start),
            include_partial: over.include_partial.or(self.include_partial),
            calibration: over.calibration.or(self.calibration),
            seed: over.seed.or(self.seed),
            jobs: over.jobs.or(self.jobs),
        }
    }

    /// Merges defaults, an optional config file, and flags.
    pub fn resolve(config_path: Option<&Path>, flags: Settings) -> CliResult<RunConfig> {
        let file = match config_path {
            Some(p) => Settings::from_file(p)?,
            None => Settings::default(),
        };
        file.overlay(flags).into_run_config()
    }

    fn into_run_config(self) -> CliResult<RunConfig> {
        let mode = match (self.dt_us, self.window_count) {
            (Some(_), Some(_)) => {
                return Err(CliError::Validation(
                    "choose either a time window (dt_us) or an event-count window (window_count), not both".into(),
                ))
            }
            (None, Some(count)) => WindowMode::FixedCount { count },
            (Some(dt_us), None) => WindowMode::FixedTime { dt_us },
            (None, None) => WindowingPolicy::default().mode,
        };
        let defaults = PipelineConfig::default();
        let windowing = WindowingPolicy {
            mode,
            polarity_split: self.polarity_split.unwrap_or(false),
        };
        windowing.validate()?;
        let ecc = EccConfig {
            max_iterations: self.max_iter.unwrap_or(defaults.ecc.max_iterations),
            eps: self.eps.unwrap_or(defaults.ecc.eps),
            smooth_sigma: self.sigma.unwrap_or(defaults.ecc.smooth_sigma),
            ..EccConfig::default()
        };
        ecc.validate()?;
        let camera = match self.camera {
            Some(c) => Some(CameraModel::new(c.fx, c.fy, c.cx, c.cy)?),
            None => None,
        };
        let mount = match self.mount {
            Some(m) => {
                let m = Matrix3::from_fn(|r, c| m[r][c]);
                if (m.transpose() * m - Matrix3::identity()).amax() > 1e-9 || (m.determinant() - 1.0).abs() > 1e-9 {
                    return Err(CliError::Validation("mount must be a rotation matrix".into()));
                }
                m
            }
            None => nadir_mount(),
        };
        let jobs = self.jobs.unwrap_or(1);
        if jobs == 0 {
            return Err(CliError::Validation("jobs must be at least 1".into()));
        }
        Ok(RunConfig {
            pipeline: PipelineConfig {
                windowing,
                ecc,
                camera,
                mount,
                convention: self.euler_convention.map_or(EulerConvention::Zyx, Into::into),
                polarity: match self.polarity_handling {
                    Some(PolarityDoc::PerChannelMean) => PolarityHandling::PerChannelMean,
                    _ => PolarityHandling::Merge,
                },
                warm_start: self.warm_start.unwrap_or(defaults.warm_start),
                include_partial: self.include_partial.unwrap_or(defaults.include_partial),
            },
            calibration: self.calibration,
            seed: self.seed,
            jobs,
        })
    }
}

/// Effective configuration of one command invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub pipeline: PipelineConfig,
    pub calibration: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Settings::default().into_run_config().expect("defaults are valid")
    }
}

/// `run_config.json` contents.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfigEcho {
    pub command: String,
    pub window_mode: &'static str,
    pub dt_us: Option<u64>,
    pub window_count: Option<usize>,
    pub polarity_split: bool,
    pub polarity_handling: PolarityDoc,
    pub sigma: f64,
    pub max_iter: usize,
    pub eps: f64,
    pub euler_convention: ConventionDoc,
    /// `None` means the identity camera for the sensor size.
    pub camera: Option<CameraDoc>,
    pub mount: [[f64; 3]; 3],
    pub warm_start: bool,
    pub include_partial: bool,
    pub calibration: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulation: Option<ProfileDoc>,
}

impl RunConfig {
    pub fn echo(&self, command: &str) -> RunConfigEcho {
        let p = &self.pipeline;
        let (window_mode, dt_us, window_count) = match p.windowing.mode {
            WindowMode::FixedTime { dt_us } => ("fixed_time", Some(dt_us), None),
            WindowMode::FixedCount { count } => ("fixed_count", None, Some(count)),
        };
        RunConfigEcho {
            command: command.into(),
            window_mode,
            dt_us,
            window_count,
            polarity_split: p.windowing.polarity_split,
            polarity_handling: match p.polarity {
                PolarityHandling::Merge => PolarityDoc::Merge,
                PolarityHandling::PerChannelMean => PolarityDoc::PerChannelMean,
            },
            sigma: p.ecc.smooth_sigma,
            max_iter: p.ecc.max_iterations,
            eps: p.ecc.eps,
            euler_convention: match p.convention {
                EulerConvention::Zyx => ConventionDoc::Zyx,
                EulerConvention::Xyz => ConventionDoc::Xyz,
            },
            camera: p.camera.map(Into::into),
            mount: [0, 1, 2].map(|r| [0, 1, 2].map(|c| p.mount[(r, c)])),
            warm_start: p.warm_start,
            include_partial: p.include_partial,
            calibration: self.calibration.clone(),
            seed: self.seed,
            jobs: self.jobs,
            simulation: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDoc {
    pub texture_seed: u64,
    pub texture_scale: f64,
    pub albedo_min: f64,
    pub albedo_max: f64,
    pub octaves: u32,
}

impl From<SceneConfig> for SceneDoc {
    fn from(s: SceneConfig) -> Self {
        Self {
            texture_seed: s.texture_seed,
            texture_scale: s.texture_scale,
            albedo_min: s.albedo_min,
            albedo_max: s.albedo_max,
            octaves: s.octaves,
        }
    }
}

impl From<SceneDoc> for SceneConfig {
    fn from(s: SceneDoc) -> Self {
        Self {
            texture_seed: s.texture_seed,
            texture_scale: s.texture_scale,
            albedo_min: s.albedo_min,
            albedo_max: s.albedo_max,
            octaves: s.octaves,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorDoc {
    pub width: usize,
    pub height: usize,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl From<SimCamera> for SensorDoc {
    fn from(c: SimCamera) -> Self {
        Self {
            width: c.width,
            height: c.height,
            fx: c.model.fx,
            fy: c.model.fy,
            cx: c.model.cx,
            cy: c.model.cy,
        }
    }
}

impl SensorDoc {
    pub fn camera(&self) -> CliResult<SimCamera> {
        Ok(SimCamera {
            model: CameraModel::new(self.fx, self.fy, self.cx, self.cy)?,
            width: self.width,
            height: self.height,
        })
    }
}

/// Simulation document: the descent profile fields plus optional scene and
/// sensor sections. Missing fields take the built-in defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileDoc {
    #[serde(default)]
    pub id: Option<String>,
    pub initial_pos: [f64; 3],
    /// `[t, [vx, vy, vz]]` control points.
    pub velocity_points: Vec<(f64, [f64; 3])>,
    /// `[t, [phi, theta, psi]]` control points.
    pub attitude_points: Vec<(f64, [f64; 3])>,
    pub duration: f64,
    pub contrast_threshold: f64,
    pub frame_rate_internal: f64,
    pub state_rate: f64,
    pub range_rate: f64,
    pub scene: SceneDoc,
    pub sensor: SensorDoc,
}

/// Partial form of [`ProfileDoc`] as read from disk.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileFile {
    id: Option<String>,
    initial_pos: Option<[f64; 3]>,
    velocity_points: Option<Vec<(f64, [f64; 3])>>,
    attitude_points: Option<Vec<(f64, [f64; 3])>>,
    duration: Option<f64>,
    contrast_threshold: Option<f64>,
    frame_rate_internal: Option<f64>,
    state_rate: Option<f64>,
    range_rate: Option<f64>,
    scene: Option<SceneDoc>,
    sensor: Option<SensorDoc>,
}

impl ProfileDoc {
    pub fn new(profile: &DescentProfile, scene: &SceneConfig, cam: &SimCamera) -> Self {
        Self {
            id: None,
            initial_pos: profile.initial_pos.into(),
            velocity_points: profile.velocity_points.iter().map(|(t, v)| (*t, (*v).into())).collect(),
            attitude_points: profile
                .attitude_points
                .iter()
                .map(|(t, a)| (*t, [a.phi, a.theta, a.psi]))
                .collect(),
            duration: profile.duration,
            contrast_threshold: profile.contrast_threshold,
            frame_rate_internal: profile.frame_rate_internal,
            state_rate: profile.state_rate,
            range_rate: profile.range_rate,
            scene: (*scene).into(),
            sensor: (*cam).into(),
        }
    }

    /// Reads a profile file over `base`, field by field.
    pub fn read_over(path: &Path, base: ProfileDoc) -> CliResult<Self> {
        let f: ProfileFile = read_json(path)?;
        Ok(Self {
            id: f.id.or(base.id),
            initial_pos: f.initial_pos.unwrap_or(base.initial_pos),
            velocity_points: f.velocity_points.unwrap_or(base.velocity_points),
            attitude_points: f.attitude_points.unwrap_or(base.attitude_points),
            duration: f.duration.unwrap_or(base.duration),
            contrast_threshold: f.contrast_threshold.unwrap_or(base.contrast_threshold),
            frame_rate_internal: f.frame_rate_internal.unwrap_or(base.frame_rate_internal),
            state_rate: f.state_rate.unwrap_or(base.state_rate),
            range_rate: f.range_rate.unwrap_or(base.range_rate),
            scene: f.scene.unwrap_or(base.scene),
            sensor: f.sensor.unwrap_or(base.sensor),
        })
    }

    pub fn profile(&self) -> DescentProfile {
        DescentProfile {
            initial_pos: Vector3::from(self.initial_pos),
            velocity_points: self
                .velocity_points
                .iter()
                .map(|(t, v)| (*t, Vector3::from(*v)))
                .collect(),
            attitude_points: self
                .attitude_points
                .iter()
                .map(|(t, a)| (*t, EulerAngles::new(a[0], a[1], a[2])))
                .collect(),
            duration: self.duration,
            contrast_threshold: self.contrast_threshold,
            frame_rate_internal: self.frame_rate_internal,
            state_rate: self.state_rate,
            range_rate: self.range_rate,
        }
    }
}
