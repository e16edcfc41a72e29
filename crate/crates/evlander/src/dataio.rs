//! Sequence directories and submission files.
//!
//! A sequence directory holds `manifest.json`, `events.csv`,
//! `trajectory.csv` and `ranges.csv`; test sequences may carry the hidden
//! states in `truth.csv`. Reals are written with 17 significant digits so a
//! write/read cycle is exact.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use evlander_core::egomotion::estimation_frames;
use evlander_core::{
    interpolate_series, EulerAngles, Event, EventStream, LanderState, PipelineConfig, Polarity, RangeReading, Sequence,
    Split, VelocitySample,
};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{DataError, Location};

pub const MANIFEST: &str = "manifest.json";
pub const EVENTS: &str = "events.csv";
pub const TRAJECTORY: &str = "trajectory.csv";
pub const RANGES: &str = "ranges.csv";
pub const TRUTH: &str = "truth.csv";

const EVENTS_HEADER: [&str; 4] = ["t_us", "x", "y", "p"];
const TRAJECTORY_HEADER: [&str; 13] = [
    "t", "x", "y", "z", "vx", "vy", "vz", "phi", "theta", "psi", "p", "q", "r",
];
const RANGES_HEADER: [&str; 2] = ["t", "d"];
const SUBMISSION_HEADER: [&str; 5] = ["sequence_id", "t", "vx", "vy", "vz"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub id: String,
    pub split: String,
    pub sensor_width: u16,
    pub sensor_height: u16,
}

/// Formats a real so that parsing it back gives the same bits.
pub fn fmt_real(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:.16e}")
    }
}

fn parse_split(s: &str, loc: &Location) -> Result<Split, DataError> {
    match s {
        "train" => Ok(Split::Train),
        "test" => Ok(Split::Test),
        other => Err(DataError::malformed(
            loc.clone(),
            format!("split must be \"train\" or \"test\", got {other:?}"),
        )),
    }
}

/// Writes `bytes` to a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), DataError> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| DataError::io(dir, e))?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(DataError::io(path, e));
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), DataError> {
    let mut s =
        serde_json::to_string_pretty(value).map_err(|e| DataError::malformed(Location::file(path), e.to_string()))?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, DataError> {
    let text = fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| DataError::malformed(Location::at(path, e.line() as u64, Some(e.column())), e.to_string()))
}

/// Row reader that checks the header and reports positions.
struct Rows {
    path: PathBuf,
    reader: csv::Reader<fs::File>,
}

impl Rows {
    fn open(path: &Path, header: &[&str]) -> Result<Self, DataError> {
        let file = fs::File::open(path).map_err(|e| DataError::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
        let found = reader
            .headers()
            .map_err(|e| DataError::malformed(Location::at(path, 1, None), e.to_string()))?
            .clone();
        if found.iter().ne(header.iter().copied()) {
            return Err(DataError::malformed(
                Location::at(path, 1, None),
                format!(
                    "expected header {:?}, found {:?}",
                    header.join(","),
                    found.iter().collect::<Vec<_>>().join(",")
                ),
            ));
        }
        Ok(Self {
            path: path.to_path_buf(),
            reader,
        })
    }

    /// Visits each record with its 1-based line number.
    fn for_each(
        mut self,
        mut f: impl FnMut(&Path, u64, &csv::StringRecord) -> Result<(), DataError>,
    ) -> Result<(), DataError> {
        let mut record = csv::StringRecord::new();
        loop {
            match self.reader.read_record(&mut record) {
                Ok(false) => return Ok(()),
                Ok(true) => {
                    let line = record.position().map_or(0, |p| p.line());
                    f(&self.path, line, &record)?;
                }
                Err(e) => {
                    let line = e.position().map_or(0, |p| p.line());
                    return Err(DataError::malformed(
                        Location::at(&self.path, line, None),
                        e.to_string(),
                    ));
                }
            }
        }
    }
}

fn field<'a>(path: &Path, line: u64, rec: &'a csv::StringRecord, col: usize) -> Result<&'a str, DataError> {
    rec.get(col)
        .ok_or_else(|| DataError::malformed(Location::at(path, line, Some(col + 1)), "missing field"))
}

fn parse_int(path: &Path, line: u64, rec: &csv::StringRecord, col: usize, what: &str) -> Result<u64, DataError> {
    let s = field(path, line, rec, col)?;
    s.trim().parse::<u64>().map_err(|_| {
        DataError::malformed(
            Location::at(path, line, Some(col + 1)),
            format!("{what} must be a non-negative integer, got {s:?}"),
        )
    })
}

fn parse_real(path: &Path, line: u64, rec: &csv::StringRecord, col: usize) -> Result<f64, DataError> {
    let s = field(path, line, rec, col)?;
    s.trim()
        .parse::<f64>()
        .map_err(|_| DataError::malformed(Location::at(path, line, Some(col + 1)), format!("not a number: {s:?}")))
}

fn check_width(path: &Path, line: u64, rec: &csv::StringRecord, n: usize) -> Result<(), DataError> {
    if rec.len() != n {
        return Err(DataError::malformed(
            Location::at(path, line, None),
            format!("expected {n} fields, found {}", rec.len()),
        ));
    }
    Ok(())
}

fn read_events(path: &Path, width: u16, height: u16) -> Result<EventStream, DataError> {
    let mut events = Vec::new();
    Rows::open(path, &EVENTS_HEADER)?.for_each(|path, line, rec| {
        check_width(path, line, rec, 4)?;
        let t_us = parse_int(path, line, rec, 0, "t_us (integer microseconds)")?;
        let x = parse_int(path, line, rec, 1, "x")?;
        let y = parse_int(path, line, rec, 2, "y")?;
        if x >= u64::from(width) || y >= u64::from(height) {
            return Err(DataError::OutOfBounds {
                loc: Location::at(path, line, Some(if x >= u64::from(width) { 2 } else { 3 })),
                x,
                y,
                width,
                height,
            });
        }
        let p = match field(path, line, rec, 3)?.trim() {
            "1" | "+1" => Polarity::Positive,
            "-1" | "0" => Polarity::Negative,
            other => {
                return Err(DataError::malformed(
                    Location::at(path, line, Some(4)),
                    format!("polarity must be -1 or +1 (0 or 1 also accepted), got {other:?}"),
                ))
            }
        };
        if events.last().is_some_and(|e: &Event| e.t_us > t_us) {
            return Err(DataError::NonMonotonic {
                loc: Location::at(path, line, Some(1)),
                t: t_us.to_string(),
            });
        }
        events.push(Event::new(t_us, x as u16, y as u16, p));
        Ok(())
    })?;
    EventStream::new(width, height, events).map_err(|source| DataError::Invalid {
        loc: Location::file(path),
        source,
    })
}

/// Reads a trajectory-format CSV (`trajectory.csv` or `truth.csv`).
pub fn read_states(path: &Path) -> Result<Vec<LanderState>, DataError> {
    let mut states: Vec<LanderState> = Vec::new();
    Rows::open(path, &TRAJECTORY_HEADER)?.for_each(|path, line, rec| {
        check_width(path, line, rec, 13)?;
        let mut v = [0.0; 13];
        for (i, slot) in v.iter_mut().enumerate() {
            *slot = parse_real(path, line, rec, i)?;
        }
        if let Some(prev) = states.last() {
            if !(v[0] >= prev.t) {
                return Err(DataError::NonMonotonic {
                    loc: Location::at(path, line, Some(1)),
                    t: fmt_real(v[0]),
                });
            }
        }
        states.push(LanderState {
            t: v[0],
            pos: Vector3::new(v[1], v[2], v[3]),
            vel: Vector3::new(v[4], v[5], v[6]),
            euler: EulerAngles::new(v[7], v[8], v[9]),
            omega: Vector3::new(v[10], v[11], v[12]),
        });
        Ok(())
    })?;
    Ok(states)
}

fn read_ranges(path: &Path) -> Result<Vec<RangeReading>, DataError> {
    let mut out: Vec<RangeReading> = Vec::new();
    Rows::open(path, &RANGES_HEADER)?.for_each(|path, line, rec| {
        check_width(path, line, rec, 2)?;
        let t = parse_real(path, line, rec, 0)?;
        let d = parse_real(path, line, rec, 1)?;
        if out.last().is_some_and(|r| !(t >= r.t)) {
            return Err(DataError::NonMonotonic {
                loc: Location::at(path, line, Some(1)),
                t: fmt_real(t),
            });
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(DataError::malformed(
                Location::at(path, line, Some(2)),
                format!("range must be a positive distance, got {d}"),
            ));
        }
        out.push(RangeReading { t, d });
        Ok(())
    })?;
    Ok(out)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, DataError> {
    read_json(&dir.join(MANIFEST))
}

/// Loads and validates a sequence directory.
pub fn read_sequence(dir: &Path) -> Result<Sequence, DataError> {
    let manifest_path = dir.join(MANIFEST);
    let manifest = read_manifest(dir)?;
    let split = parse_split(&manifest.split, &Location::file(&manifest_path))?;
    let stream = read_events(&dir.join(EVENTS), manifest.sensor_width, manifest.sensor_height)?;
    let trajectory = read_states(&dir.join(TRAJECTORY))?;
    let ranges = read_ranges(&dir.join(RANGES))?;
    let seq = Sequence {
        id: manifest.id,
        split,
        stream,
        trajectory,
        ranges,
    };
    seq.validate().map_err(|source| DataError::Invalid {
        loc: Location::file(dir),
        source,
    })?;
    Ok(seq)
}

/// Hidden states of a test sequence, if its directory has them.
pub fn read_truth(dir: &Path) -> Result<Option<Vec<LanderState>>, DataError> {
    let path = dir.join(TRUTH);
    if !path.exists() {
        return Ok(None);
    }
    read_states(&path).map(Some)
}

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn states_bytes(states: &[LanderState]) -> Vec<u8> {
    csv_bytes(
        &TRAJECTORY_HEADER,
        states.iter().map(|s| {
            [
                s.t,
                s.pos.x,
                s.pos.y,
                s.pos.z,
                s.vel.x,
                s.vel.y,
                s.vel.z,
                s.euler.phi,
                s.euler.theta,
                s.euler.psi,
                s.omega.x,
                s.omega.y,
                s.omega.z,
            ]
            .iter()
            .map(|v| fmt_real(*v))
            .collect()
        }),
    )
}

pub fn write_states(path: &Path, states: &[LanderState]) -> Result<(), DataError> {
    write_atomic(path, &states_bytes(states))
}

fn events_bytes(stream: &EventStream) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 * (stream.len() + 1));
    out.extend_from_slice(EVENTS_HEADER.join(",").as_bytes());
    out.push(b'\n');
    for e in &stream.events {
        writeln!(out, "{},{},{},{}", e.t_us, e.x, e.y, e.polarity.as_i8()).expect("in-memory write");
    }
    out
}

/// Writes `seq` (and, when given, hidden truth states) into `dir`.
pub fn write_sequence(seq: &Sequence, dir: &Path, truth: Option<&[LanderState]>) -> Result<(), DataError> {
    fs::create_dir_all(dir).map_err(|e| DataError::io(dir, e))?;
    let manifest = Manifest {
        id: seq.id.clone(),
        split: seq.split.as_str().into(),
        sensor_width: seq.stream.width,
        sensor_height: seq.stream.height,
    };
    write_json(&dir.join(MANIFEST), &manifest)?;
    write_atomic(&dir.join(EVENTS), &events_bytes(&seq.stream))?;
    write_states(&dir.join(TRAJECTORY), &seq.trajectory)?;
    write_atomic(
        &dir.join(RANGES),
        &csv_bytes(
            &RANGES_HEADER,
            seq.ranges.iter().map(|r| vec![fmt_real(r.t), fmt_real(r.d)]),
        ),
    )?;
    if let Some(t) = truth {
        write_states(&dir.join(TRUTH), t)?;
    }
    Ok(())
}

/// One submission row.
#[derive(Debug, Clone, PartialEq)]
pub struct SubmissionRow {
    pub sequence_id: String,
    pub t: f64,
    pub v: Vector3<f64>,
}

/// Velocity samples of one sequence together with the state times they
/// must be reported at.
#[derive(Debug, Clone)]
pub struct SequenceEstimate {
    pub id: String,
    pub state_times: Vec<f64>,
    pub samples: Vec<VelocitySample>,
}

/// Linear interpolation of the samples at each state time. A state is
/// covered if it lies inside the sample span widened on both ends by 1.5
/// times the largest sample spacing (at least one window either side).
pub fn submission_rows(est: &SequenceEstimate) -> Result<Vec<SubmissionRow>, DataError> {
    let series: Vec<(f64, Vector3<f64>)> = est.samples.iter().map(|s| (s.t_us as f64 * 1e-6, s.v)).collect();
    if series.is_empty() {
        return Err(DataError::CoverageGap {
            id: est.id.clone(),
            times: est.state_times.clone(),
        });
    }
    let spacing = series.windows(2).map(|w| w[1].0 - w[0].0).fold(0.0, f64::max);
    let margin = 1.5 * spacing;
    let (first, last) = (series[0].0, series[series.len() - 1].0);
    let uncovered: Vec<f64> = est
        .state_times
        .iter()
        .copied()
        .filter(|&t| t < first - margin || t > last + margin)
        .collect();
    if !uncovered.is_empty() {
        return Err(DataError::CoverageGap {
            id: est.id.clone(),
            times: uncovered,
        });
    }
    Ok(est
        .state_times
        .iter()
        .map(|&t| SubmissionRow {
            sequence_id: est.id.clone(),
            t,
            v: interpolate_series(&series, t).expect("non-empty series").value,
        })
        .collect())
}

pub fn submission_bytes(rows: &[SubmissionRow]) -> Vec<u8> {
    csv_bytes(
        &SUBMISSION_HEADER,
        rows.iter().map(|r| {
            vec![
                r.sequence_id.clone(),
                fmt_real(r.t),
                fmt_real(r.v.x),
                fmt_real(r.v.y),
                fmt_real(r.v.z),
            ]
        }),
    )
}

/// Interpolates every estimate to its state times and writes the CSV.
pub fn write_submission(estimates: &[SequenceEstimate], path: &Path) -> Result<Vec<SubmissionRow>, DataError> {
    let mut rows = Vec::new();
    for e in estimates {
        rows.extend(submission_rows(e)?);
    }
    write_atomic(path, &submission_bytes(&rows))?;
    Ok(rows)
}

pub fn read_submission(path: &Path) -> Result<Vec<SubmissionRow>, DataError> {
    let mut rows = Vec::new();
    Rows::open(path, &SUBMISSION_HEADER)?.for_each(|path, line, rec| {
        check_width(path, line, rec, 5)?;
        rows.push(SubmissionRow {
            sequence_id: field(path, line, rec, 0)?.to_string(),
            t: parse_real(path, line, rec, 1)?,
            v: Vector3::new(
                parse_real(path, line, rec, 2)?,
                parse_real(path, line, rec, 3)?,
                parse_real(path, line, rec, 4)?,
            ),
        });
        Ok(())
    })?;
    Ok(rows)
}

/// Groups rows by sequence id, keeping file order within each group.
pub fn group_rows(rows: &[SubmissionRow]) -> BTreeMap<String, Vec<SubmissionRow>> {
    let mut out: BTreeMap<String, Vec<SubmissionRow>> = BTreeMap::new();
    for r in rows {
        out.entry(r.sequence_id.clone()).or_default().push(r.clone());
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub id: String,
    pub split: String,
    pub sensor_width: u16,
    pub sensor_height: u16,
    pub event_count: usize,
    pub positive_events: usize,
    pub duration_s: f64,
    pub events_per_second: f64,
    /// Mean speed over states with a velocity; absent for test splits.
    pub mean_speed: Option<f64>,
    pub mean_velocity: Option<[f64; 3]>,
    pub state_count: usize,
    pub range_count: usize,
    pub range_min: Option<f64>,
    pub range_max: Option<f64>,
    pub frame_count: usize,
    pub partial_frames: usize,
    pub mean_frame_density: f64,
}

/// Statistics of a sequence; the frame preview uses `cfg.windowing`.
pub fn summarize(seq: &Sequence, cfg: &PipelineConfig) -> Result<Summary, evlander_core::Error> {
    let times: Vec<f64> = seq.trajectory.iter().map(|s| s.t).collect();
    let duration_s = match (times.first(), times.last()) {
        (Some(a), Some(b)) if b > a => b - a,
        _ => match (seq.stream.events.first(), seq.stream.events.last()) {
            (Some(a), Some(b)) => (b.t_us - a.t_us) as f64 * 1e-6,
            _ => 0.0,
        },
    };
    let with_vel: Vec<&LanderState> = seq.trajectory.iter().filter(|s| s.has_velocity()).collect();
    let (mean_speed, mean_velocity) = if with_vel.is_empty() {
        (None, None)
    } else {
        let n = with_vel.len() as f64;
        let speed = with_vel.iter().map(|s| s.vel.norm()).sum::<f64>() / n;
        let mean = with_vel.iter().map(|s| s.vel).sum::<Vector3<f64>>() / n;
        (Some(speed), Some([mean.x, mean.y, mean.z]))
    };
    let preview = PipelineConfig {
        include_partial: true,
        ..*cfg
    };
    let frames = estimation_frames(&seq.stream, seq.end_us(), &preview)?;
    let density = if frames.is_empty() {
        0.0
    } else {
        frames.iter().map(evlander_core::frame_density).sum::<f64>() / frames.len() as f64
    };
    Ok(Summary {
        id: seq.id.clone(),
        split: seq.split.as_str().into(),
        sensor_width: seq.stream.width,
        sensor_height: seq.stream.height,
        event_count: seq.stream.len(),
        positive_events: seq
            .stream
            .events
            .iter()
            .filter(|e| e.polarity == Polarity::Positive)
            .count(),
        duration_s,
        events_per_second: if duration_s > 0.0 {
            seq.stream.len() as f64 / duration_s
        } else {
            0.0
        },
        mean_speed,
        mean_velocity,
        state_count: seq.trajectory.len(),
        range_count: seq.ranges.len(),
        range_min: seq.ranges.iter().map(|r| r.d).reduce(f64::min),
        range_max: seq.ranges.iter().map(|r| r.d).reduce(f64::max),
        frame_count: frames.len(),
        partial_frames: frames.iter().filter(|f| f.partial).count(),
        mean_frame_density: density,
    })
}
