//! Subcommand implementations. Each returns the text to print on stdout and
//! writes its files under the output directory.

use std::path::{Path, PathBuf};

use evlander_core::calibration::{axis_correlations, normalize_trajectory, score_trajectory};
use evlander_core::egomotion::{align_frame_pairs, estimate_for_sequence, estimation_frames};
use evlander_core::sim::{generate_sequence, DescentProfile, SceneConfig, SimCamera};
use evlander_core::{
    accumulate, apply_calibration, fit_scale_factors, interpolate_series, warp_image, Image, LanderState, Sequence,
    Split, VelocitySample,
};
use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ProfileDoc, RunConfig};
use crate::dataio::{
    self, group_rows, read_json, read_sequence, read_submission, read_truth, write_atomic, write_json, write_sequence,
    write_submission, SequenceEstimate, SubmissionRow,
};
use crate::error::{CliError, CliResult};
use crate::render::{self, Series, EST_COLOR, TRUTH_COLOR};

pub const RUN_CONFIG: &str = "run_config.json";
pub const CALIBRATION: &str = "calibration.json";
pub const SUBMISSION: &str = "submission.csv";

/// `calibration.json` contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationDoc {
    pub f: [f64; 3],
    pub residual_rms: f64,
    pub n_samples: usize,
}

impl CalibrationDoc {
    pub fn factors(&self) -> Vector3<f64> {
        Vector3::from(self.f)
    }
}

fn require_out(out: Option<&Path>, command: &str) -> CliResult<PathBuf> {
    out.map(Path::to_path_buf)
        .ok_or_else(|| CliError::Validation(format!("{command} writes files; pass --out DIR")))
}

fn echo_config(out: &Path, cfg: &RunConfig, command: &str) -> CliResult<()> {
    Ok(write_json(&out.join(RUN_CONFIG), &cfg.echo(command))?)
}

fn json_text<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn with_dir(dir: &Path, e: CliError) -> CliError {
    match e {
        CliError::Validation(m) => CliError::Validation(format!("sequence {}: {m}", dir.display())),
        CliError::Internal(m) => CliError::Internal(format!("sequence {}: {m}", dir.display())),
    }
}

fn pool(jobs: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Internal(format!("cannot start worker threads: {e}")))
}

/// Runs `f` on every directory with up to `jobs` threads, keeping input
/// order in the results.
fn per_sequence<T: Send>(dirs: &[PathBuf], jobs: usize, f: impl Fn(&Path) -> CliResult<T> + Sync) -> CliResult<Vec<T>> {
    pool(jobs)?.install(|| {
        dirs.par_iter()
            .map(|d| f(d).map_err(|e| with_dir(d, e)))
            .collect::<Vec<_>>()
            .into_iter()
            .collect()
    })
}

pub fn summarize(seq_dir: &Path, out: Option<&Path>, cfg: &RunConfig) -> CliResult<String> {
    let seq = read_sequence(seq_dir)?;
    let summary = dataio::summarize(&seq, &cfg.pipeline)?;
    if let Some(out) = out {
        write_json(&out.join("summary.json"), &summary)?;
        echo_config(out, cfg, "summarize")?;
    }
    Ok(json_text(&summary))
}

/// Writes one PNG per accumulated frame, up to the last event.
pub fn view_events(seq_dir: &Path, out: Option<&Path>, cfg: &RunConfig) -> CliResult<String> {
    let out = require_out(out, "view-events")?;
    let seq = read_sequence(seq_dir)?;
    let frames = accumulate(&seq.stream, &cfg.pipeline.windowing)?;
    for (k, f) in frames.iter().enumerate() {
        render::write_png(&out.join(format!("frame_{k:06}.png")), &render::frame_image(f))?;
    }
    echo_config(&out, cfg, "view-events")?;
    Ok(format!("wrote {} frame images to {}\n", frames.len(), out.display()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WarpReportEntry {
    pub pair: usize,
    pub t_from_us: u64,
    pub t_to_us: u64,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub no_events: bool,
    pub ecc_value: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    /// Row-major homography used for the middle panel.
    pub homography: [f64; 9],
    pub mean_abs_diff: f64,
    pub file: String,
}

/// Triptych per frame pair: frame t, frame t warped by the estimate, and
/// the absolute difference to frame t+1 inside the warped footprint.
pub fn viz_warp(seq_dir: &Path, out: Option<&Path>, cfg: &RunConfig) -> CliResult<String> {
    let out = require_out(out, "viz-warp")?;
    let seq = read_sequence(seq_dir)?;
    let frames = estimation_frames(&seq.stream, seq.end_us(), &cfg.pipeline)?;
    let pairs = align_frame_pairs(&frames, &cfg.pipeline)?;
    let mut report = Vec::with_capacity(pairs.len());
    for (k, pair) in pairs.iter().enumerate() {
        let (a, b) = (frames[k].to_image(), frames[k + 1].to_image());
        let h = pair.result.as_ref().map_or(pair.init, |r| r.homography);
        let warped = warp_image(&a, &h)?;
        let diff = Image::from_fn(a.width, a.height, |x, y| {
            if warped.valid[y * a.width + x] {
                (warped.image.get(x, y) - b.get(x, y)).abs()
            } else {
                0.0
            }
        });
        let mad = warped.image.mean_abs_diff(&b, Some(&warped.valid));
        let file = format!("pair_{k:06}_mad{mad:.4}.png");
        let trip = render::side_by_side(&[
            render::frame_image(&frames[k]),
            render::gray_image(&warped.image),
            render::gray_image(&diff),
        ]);
        render::write_png(&out.join(&file), &trip)?;
        let m = h.matrix();
        report.push(WarpReportEntry {
            pair: k,
            t_from_us: frames[k].t_mid_us(),
            t_to_us: frames[k + 1].t_mid_us(),
            ok: pair.result.is_ok(),
            error: pair.result.as_ref().err().map(ToString::to_string),
            no_events: pair.no_events,
            ecc_value: pair.result.as_ref().ok().map(|r| r.ecc_value),
            iterations: pair.result.as_ref().ok().map(|r| r.iterations),
            converged: pair.result.as_ref().ok().map(|r| r.converged),
            homography: [
                m[(0, 0)],
                m[(0, 1)],
                m[(0, 2)],
                m[(1, 0)],
                m[(1, 1)],
                m[(1, 2)],
                m[(2, 0)],
                m[(2, 1)],
                m[(2, 2)],
            ],
            mean_abs_diff: mad,
            file,
        });
    }
    write_json(&out.join("report.json"), &report)?;
    echo_config(&out, cfg, "viz-warp")?;
    let failed = report.iter().filter(|r| !r.ok).count();
    Ok(format!(
        "wrote {} triptychs to {} ({failed} pairs failed to align)\n",
        report.len(),
        out.display()
    ))
}

/// States carrying velocities: the trajectory for train sequences,
/// `truth.csv` for test sequences that have one.
pub fn truth_states(seq: &Sequence, dir: &Path) -> CliResult<Option<Vec<LanderState>>> {
    match seq.split {
        Split::Train => Ok(Some(seq.trajectory.clone())),
        Split::Test => Ok(read_truth(dir)?),
    }
}

/// Truth velocity at each time, linearly interpolated.
pub fn truth_at(states: &[LanderState], times: &[f64]) -> CliResult<Vec<Vector3<f64>>> {
    let series: Vec<(f64, Vector3<f64>)> = states.iter().map(|s| (s.t, s.vel)).collect();
    times
        .iter()
        .map(|&t| Ok(interpolate_series(&series, t)?.value))
        .collect()
}

fn read_calibration(cfg: &RunConfig) -> CliResult<Option<CalibrationDoc>> {
    match &cfg.calibration {
        Some(p) => Ok(Some(read_json(p)?)),
        None => Ok(None),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Correlations {
    pub id: String,
    pub calibrated: bool,
    /// `None` where a series is constant and the correlation undefined.
    pub pearson: Option<[Option<f64>; 3]>,
    pub samples: usize,
}

/// Estimated against true velocities: aligned CSV, per-axis correlations
/// and raw and normalized plots.
pub fn compare_vel(seq_dir: &Path, out: Option<&Path>, cfg: &RunConfig) -> CliResult<String> {
    let out = require_out(out, "compare-vel")?;
    let seq = read_sequence(seq_dir)?;
    let samples = estimate_for_sequence(&seq, &cfg.pipeline)?;
    let calibration = read_calibration(cfg)?;
    let est: Vec<Vector3<f64>> = {
        let raw: Vec<Vector3<f64>> = samples.iter().map(|s| s.v).collect();
        match &calibration {
            Some(c) => apply_calibration(&raw, &c.factors()),
            None => raw,
        }
    };
    let times: Vec<f64> = samples.iter().map(|s| s.t_us as f64 * 1e-6).collect();
    let mut notes = String::new();
    let truth = match truth_states(&seq, seq_dir)? {
        Some(states) => Some(truth_at(&states, &times)?),
        None => {
            let msg = format!("warning: {} has no ground truth; truth columns omitted\n", seq.id);
            eprint!("{msg}");
            notes.push_str(&msg);
            None
        }
    };
    let norm = |v: &[Vector3<f64>]| normalize_trajectory(v).ok().map(|n| n.values);
    let est_n = norm(&est);
    let truth_n = truth.as_deref().and_then(norm);

    let mut header = vec!["t", "est_vx", "est_vy", "est_vz"];
    if truth.is_some() {
        header.extend([
            "truth_vx",
            "truth_vy",
            "truth_vz",
            "est_norm_vx",
            "est_norm_vy",
            "est_norm_vz",
        ]);
        header.extend(["truth_norm_vx", "truth_norm_vy", "truth_norm_vz"]);
    }
    header.push("gap_filled");
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Internal(e.to_string());
    w.write_record(&header).map_err(io)?;
    for i in 0..samples.len() {
        let mut row = vec![dataio::fmt_real(times[i])];
        row.extend(est[i].iter().map(|v| dataio::fmt_real(*v)));
        if let Some(t) = &truth {
            row.extend(t[i].iter().map(|v| dataio::fmt_real(*v)));
            for n in [&est_n, &truth_n] {
                match n {
                    Some(n) => row.extend(n[i].iter().map(|v| dataio::fmt_real(*v))),
                    None => row.extend(["nan".to_string(), "nan".into(), "nan".into()]),
                }
            }
        }
        row.push(u8::from(samples[i].flags.gap_filled).to_string());
        w.write_record(&row).map_err(io)?;
    }
    write_atomic(
        &out.join("velocity_compare.csv"),
        &w.into_inner().map_err(|e| CliError::Internal(e.to_string()))?,
    )?;

    let pearson = match &truth {
        Some(t) if est.len() >= 2 => Some(axis_correlations(&est, t)?),
        _ => None,
    };
    let corr = Correlations {
        id: seq.id.clone(),
        calibrated: calibration.is_some(),
        pearson,
        samples: samples.len(),
    };
    write_json(&out.join("correlations.json"), &corr)?;

    let axis = |v: &[Vector3<f64>], a: usize| v.iter().map(|x| x[a]).collect::<Vec<f64>>();
    let plot = |e: &[Vector3<f64>], t: Option<&[Vector3<f64>]>| {
        let cols: Vec<(Vec<f64>, Option<Vec<f64>>)> = (0..3).map(|a| (axis(e, a), t.map(|t| axis(t, a)))).collect();
        let panels: Vec<Vec<Series<'_>>> = cols
            .iter()
            .map(|(e, t)| {
                let mut p = vec![Series {
                    t: &times,
                    y: e,
                    color: EST_COLOR,
                }];
                if let Some(t) = t {
                    p.push(Series {
                        t: &times,
                        y: t,
                        color: TRUTH_COLOR,
                    });
                }
                p
            })
            .collect();
        render::line_plot(&panels, 640, 160)
    };
    render::write_png(&out.join("velocity_raw.png"), &plot(&est, truth.as_deref()))?;
    if let Some(e) = &est_n {
        render::write_png(&out.join("velocity_normalized.png"), &plot(e, truth_n.as_deref()))?;
    }
    echo_config(&out, cfg, "compare-vel")?;
    Ok(format!("{notes}{}", json_text(&corr)))
}

/// Estimated and true velocities at the same instants.
type Paired = (Vec<Vector3<f64>>, Vec<Vector3<f64>>);

/// Velocity samples of one sequence with their truth, gap-filled samples
/// dropped.
fn calibration_pairs(dir: &Path, cfg: &RunConfig) -> CliResult<Paired> {
    let seq = read_sequence(dir)?;
    let states = truth_states(&seq, dir)?
        .ok_or_else(|| CliError::Validation(format!("{} has no ground-truth velocities", seq.id)))?;
    let samples: Vec<VelocitySample> = estimate_for_sequence(&seq, &cfg.pipeline)?
        .into_iter()
        .filter(|s| !s.flags.gap_filled)
        .collect();
    let times: Vec<f64> = samples.iter().map(|s| s.t_us as f64 * 1e-6).collect();
    let truth = truth_at(&states, &times)?;
    Ok((samples.iter().map(|s| s.v).collect(), truth))
}

pub fn calibrate(train_dirs: &[PathBuf], out: Option<&Path>, cfg: &RunConfig) -> CliResult<String> {
    let out = require_out(out, "calibrate")?;
    if train_dirs.is_empty() {
        return Err(CliError::Validation(
            "calibrate needs at least one sequence directory".into(),
        ));
    }
    let parts = per_sequence(train_dirs, cfg.jobs, |d| calibration_pairs(d, cfg))?;
    let (est, truth): (Vec<_>, Vec<_>) = parts.into_iter().unzip();
    let fit = fit_scale_factors(&est.concat(), &truth.concat())?;
    let doc = CalibrationDoc {
        f: fit.factors.into(),
        residual_rms: fit.residual_rms,
        n_samples: fit.n_samples,
    };
    write_json(&out.join(CALIBRATION), &doc)?;
    echo_config(&out, cfg, "calibrate")?;
    Ok(format!(
        "factors {:?}, residual rms {} m/s over {} samples\n",
        doc.f, doc.residual_rms, doc.n_samples
    ))
}

pub fn estimate(test_dirs: &[PathBuf], out: Option<&Path>, cfg: &RunConfig) -> CliResult<String> {
    let out = require_out(out, "estimate")?;
    if test_dirs.is_empty() {
        return Err(CliError::Validation(
            "estimate needs at least one sequence directory".into(),
        ));
    }
    let cal = read_calibration(cfg)?
        .ok_or_else(|| CliError::Validation("estimate needs a calibration file; pass --calibration PATH".into()))?;
    let factors = cal.factors();
    let estimates = per_sequence(test_dirs, cfg.jobs, |d| {
        let seq = read_sequence(d)?;
        let mut samples = estimate_for_sequence(&seq, &cfg.pipeline)?;
        for s in &mut samples {
            s.v = s.v.component_mul(&factors);
        }
        Ok(SequenceEstimate {
            id: seq.id,
            state_times: seq.trajectory.iter().map(|s| s.t).collect(),
            samples,
        })
    })?;
    let rows = write_submission(&estimates, &out.join(SUBMISSION))?;
    echo_config(&out, cfg, "estimate")?;
    Ok(format!(
        "wrote {} rows for {} sequences to {}\n",
        rows.len(),
        estimates.len(),
        out.join(SUBMISSION).display()
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceScore {
    pub id: String,
    pub rmse: [f64; 3],
    pub score: f64,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreReport {
    /// Always "SURROGATE": the official metric is not public.
    pub label: &'static str,
    pub sequences: Vec<SequenceScore>,
    pub mean_score: f64,
}

/// Truth rows from a sequence directory or a submission-format CSV.
fn truth_rows(path: &Path) -> CliResult<Vec<SubmissionRow>> {
    if path.is_dir() {
        let seq = read_sequence(path)?;
        let states = truth_states(&seq, path)?
            .ok_or_else(|| CliError::Validation(format!("{} has no ground truth", path.display())))?;
        Ok(states
            .iter()
            .map(|s| SubmissionRow {
                sequence_id: seq.id.clone(),
                t: s.t,
                v: s.vel,
            })
            .collect())
    } else {
        Ok(read_submission(path)?)
    }
}

/// Time stamps of matched rows may differ by at most this, seconds.
const TIME_MATCH_S: f64 = 1e-6;

pub fn score_rows(submission: &[SubmissionRow], truth: &[SubmissionRow]) -> CliResult<ScoreReport> {
    let sub = group_rows(submission);
    let tru = group_rows(truth);
    if tru.is_empty() {
        return Err(CliError::Validation("no truth rows to score against".into()));
    }
    let mut sequences = Vec::with_capacity(tru.len());
    for (id, t_rows) in &tru {
        let s_rows = sub
            .get(id)
            .ok_or_else(|| CliError::Validation(format!("submission has no rows for sequence {id}")))?;
        if s_rows.len() != t_rows.len() {
            return Err(CliError::Validation(format!(
                "sequence {id}: submission has {} rows, truth has {}",
                s_rows.len(),
                t_rows.len()
            )));
        }
        if let Some((s, t)) = s_rows
            .iter()
            .zip(t_rows)
            .find(|(s, t)| !((s.t - t.t).abs() <= TIME_MATCH_S))
        {
            return Err(CliError::Validation(format!(
                "sequence {id}: submission time {} does not match truth time {}",
                s.t, t.t
            )));
        }
        let est: Vec<Vector3<f64>> = s_rows.iter().map(|r| r.v).collect();
        let tv: Vec<Vector3<f64>> = t_rows.iter().map(|r| r.v).collect();
        let sc = score_trajectory(&est, &tv)?;
        sequences.push(SequenceScore {
            id: id.clone(),
            rmse: sc.rmse_per_axis.into(),
            score: sc.score,
            rows: est.len(),
        });
    }
    for id in sub.keys() {
        if !tru.contains_key(id) {
            return Err(CliError::Validation(format!("submission sequence {id} has no truth")));
        }
    }
    let mean_score = sequences.iter().map(|s| s.score).sum::<f64>() / sequences.len() as f64;
    Ok(ScoreReport {
        label: "SURROGATE",
        sequences,
        mean_score,
    })
}

pub fn score(submission: &Path, truth: &[PathBuf], out: Option<&Path>, cfg: &RunConfig) -> CliResult<String> {
    if truth.is_empty() {
        return Err(CliError::Validation("score needs at least one truth source".into()));
    }
    let sub = read_submission(submission)?;
    let mut tru = Vec::new();
    for p in truth {
        tru.extend(truth_rows(p)?);
    }
    let report = score_rows(&sub, &tru)?;
    if let Some(out) = out {
        write_json(&out.join("score.json"), &report)?;
        echo_config(out, cfg, "score")?;
    }
    Ok(json_text(&report))
}

/// Simulation document used when no profile file is given.
pub fn default_profile_doc(seed: u64) -> ProfileDoc {
    let scene = SceneConfig {
        texture_seed: seed,
        ..SceneConfig::default()
    };
    ProfileDoc::new(&DescentProfile::seeded(seed), &scene, &SimCamera::default())
}

pub fn simulate(profile: Option<&Path>, split: Split, out: Option<&Path>, cfg: &RunConfig) -> CliResult<String> {
    let out = require_out(out, "simulate")?;
    let seed = cfg.seed.unwrap_or(0);
    let mut doc = default_profile_doc(seed);
    if let Some(p) = profile {
        doc = ProfileDoc::read_over(p, doc)?;
        if let Some(s) = cfg.seed {
            doc.scene.texture_seed = s;
        }
    }
    let id = doc.id.clone().unwrap_or_else(|| format!("sim-{seed}"));
    let scene: SceneConfig = doc.scene.into();
    let cam = doc.sensor.camera()?;
    let generated = generate_sequence(&id, &scene, &doc.profile(), &cam, split)?;
    write_sequence(&generated.sequence, &out, generated.truth.as_deref())?;
    let mut echo = cfg.echo("simulate");
    echo.simulation = Some(ProfileDoc {
        id: Some(id.clone()),
        ..doc
    });
    write_json(&out.join(RUN_CONFIG), &echo)?;
    Ok(format!(
        "wrote {} sequence {id} with {} events to {}\n",
        split.as_str(),
        generated.sequence.stream.len(),
        out.display()
    ))
}
