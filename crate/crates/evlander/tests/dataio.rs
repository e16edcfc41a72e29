use std::fs;
use std::path::Path;

use evlander::dataio::{
    fmt_real, read_sequence, read_submission, read_truth, submission_rows, summarize, write_sequence, write_submission,
    SequenceEstimate, EVENTS, MANIFEST, RANGES, TRAJECTORY,
};
use evlander::error::DataError;
use evlander_core::egomotion::SampleFlags;
use evlander_core::{
    EulerAngles, Event, EventStream, LanderState, PipelineConfig, Polarity, RangeReading, Sequence, Split,
    VelocitySample,
};
use nalgebra::Vector3;

fn state(t: f64, split: Split) -> LanderState {
    let s = LanderState {
        t,
        pos: Vector3::new(1.0 / 3.0, -2.5e-7, 40.0 - t),
        vel: Vector3::new(0.1, -0.2 * t, -1.0),
        euler: EulerAngles::new(0.01, -0.02, 1.0 / 7.0),
        omega: Vector3::new(1e-3, 0.0, -2e-3),
    };
    match split {
        Split::Train => s,
        Split::Test => s.redacted(),
    }
}

fn fixture(split: Split) -> Sequence {
    let events = vec![
        Event::new(0, 0, 0, Polarity::Positive),
        Event::new(250_000, 7, 3, Polarity::Negative),
        Event::new(250_000, 2, 5, Polarity::Positive),
        Event::new(999_999, 7, 5, Polarity::Negative),
    ];
    Sequence {
        id: "fixture-a".into(),
        split,
        stream: EventStream::new(8, 6, events).unwrap(),
        trajectory: (0..=4).map(|k| state(k as f64 * 0.25, split)).collect(),
        ranges: (0..=4)
            .map(|k| RangeReading {
                t: k as f64 * 0.25,
                d: 40.0 - k as f64 * 0.1 + 1e-13,
            })
            .collect(),
    }
}

fn same_bits(a: f64, b: f64) -> bool {
    a.to_bits() == b.to_bits()
}

fn states_identical(a: &[LanderState], b: &[LanderState]) -> bool {
    let flat = |s: &LanderState| {
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
    };
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| flat(x).iter().zip(flat(y)).all(|(p, q)| same_bits(*p, q)))
}

#[test]
fn write_then_read_is_identity() {
    for split in [Split::Train, Split::Test] {
        let dir = tempfile::tempdir().unwrap();
        let seq = fixture(split);
        let truth: Vec<LanderState> = (0..=4).map(|k| state(k as f64 * 0.25, Split::Train)).collect();
        let hidden = (split == Split::Test).then_some(truth.as_slice());
        write_sequence(&seq, dir.path(), hidden).unwrap();
        let back = read_sequence(dir.path()).unwrap();
        assert_eq!(back.id, seq.id);
        assert_eq!(back.split, seq.split);
        assert_eq!(back.stream, seq.stream);
        assert!(states_identical(&back.trajectory, &seq.trajectory));
        assert_eq!(back.ranges, seq.ranges);
        let t = read_truth(dir.path()).unwrap();
        match split {
            Split::Train => assert!(t.is_none()),
            Split::Test => assert!(states_identical(&t.unwrap(), &truth)),
        }
    }
}

#[test]
fn rewriting_a_read_sequence_gives_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    write_sequence(&fixture(Split::Train), a.path(), None).unwrap();
    write_sequence(&read_sequence(a.path()).unwrap(), b.path(), None).unwrap();
    for f in [MANIFEST, EVENTS, TRAJECTORY, RANGES] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn reals_survive_text_exactly() {
    let mut x = 0.1f64;
    for _ in 0..2000 {
        x = (x * 1.618_033_988_749_895 + 0.377).fract() * 10f64.powi((x * 40.0) as i32 - 20);
        let back: f64 = fmt_real(x).parse().unwrap();
        assert!(same_bits(back, x), "{x:e}");
    }
    for v in [
        f64::NAN,
        f64::INFINITY,
        f64::NEG_INFINITY,
        -0.0,
        f64::MIN_POSITIVE,
        f64::MAX,
    ] {
        let back: f64 = fmt_real(v).parse().unwrap();
        assert!(same_bits(back, v) || (v.is_nan() && back.is_nan()));
    }
}

#[test]
fn polarity_zero_is_read_as_negative_and_written_as_minus_one() {
    let dir = tempfile::tempdir().unwrap();
    write_sequence(&fixture(Split::Train), dir.path(), None).unwrap();
    let path = dir.path().join(EVENTS);
    let text = fs::read_to_string(&path).unwrap().replace(",-1\n", ",0\n");
    fs::write(&path, text).unwrap();
    let seq = read_sequence(dir.path()).unwrap();
    assert_eq!(seq.stream, fixture(Split::Train).stream);
    let out = tempfile::tempdir().unwrap();
    write_sequence(&seq, out.path(), None).unwrap();
    let written = fs::read_to_string(out.path().join(EVENTS)).unwrap();
    assert!(written.lines().skip(1).all(|l| l.ends_with(",1") || l.ends_with(",-1")));
}

/// Corrupts one file of a valid fixture and checks the reported location.
fn corrupted(file: &str, edit: impl Fn(&str) -> String) -> (tempfile::TempDir, DataError) {
    let dir = tempfile::tempdir().unwrap();
    write_sequence(&fixture(Split::Train), dir.path(), None).unwrap();
    let path = dir.path().join(file);
    let text = fs::read_to_string(&path).unwrap();
    fs::write(&path, edit(&text)).unwrap();
    let err = read_sequence(dir.path()).unwrap_err();
    (dir, err)
}

fn replace_line(text: &str, line: usize, with: &str) -> String {
    text.lines()
        .enumerate()
        .map(|(i, l)| if i + 1 == line { with.to_string() } else { l.to_string() })
        .collect::<Vec<_>>()
        .join("\n")
        + "\n"
}

fn assert_location(err: &DataError, dir: &Path, file: &str, line: u64) {
    let msg = err.to_string();
    let expected = format!("{}:{line}", dir.join(file).display());
    assert!(msg.starts_with(&expected), "{msg:?} should start with {expected:?}");
}

#[test]
fn corrupted_fixtures_report_file_and_line() {
    let cases: Vec<(&str, usize, &str)> = vec![
        (EVENTS, 3, "250000.5,7,3,-1"),
        (EVENTS, 3, "250000,8,3,-1"),
        (EVENTS, 3, "250000,7,6,-1"),
        (EVENTS, 3, "250000,7,3,2"),
        (EVENTS, 4, "1,2,5,1"),
        (EVENTS, 4, "250000,2"),
        (EVENTS, 1, "t,x,y,p"),
        (TRAJECTORY, 4, "0.1,0,0,40,0,0,0,0,0,0,0,0,0"),
        (TRAJECTORY, 2, "0,abc,0,40,0,0,0,0,0,0,0,0,0"),
        (RANGES, 3, "0.25,-1"),
        (RANGES, 3, "0.25,0"),
        (RANGES, 4, "0.1,39"),
    ];
    for (file, line, with) in cases {
        let (dir, err) = corrupted(file, |t| replace_line(t, line, with));
        assert!(err.is_validation(), "{file}:{line} {err}");
        assert_location(&err, dir.path(), file, line as u64);
    }
}

#[test]
fn bad_columns_are_pointed_at() {
    let (_, err) = corrupted(EVENTS, |t| replace_line(t, 3, "250000,9,3,-1"));
    assert!(err.to_string().contains(":3:2:"), "{err}");
    let (_, err) = corrupted(EVENTS, |t| replace_line(t, 3, "250000,1,9,-1"));
    assert!(err.to_string().contains(":3:3:"), "{err}");
    let (_, err) = corrupted(TRAJECTORY, |t| replace_line(t, 2, "0,0,0,40,0,0,0,0,0,x,0,0,0"));
    assert!(err.to_string().contains(":2:10:"), "{err}");
}

#[test]
fn manifest_problems_are_located() {
    let (dir, err) = corrupted(MANIFEST, |t| t.replace("\"train\"", "\"validation\""));
    assert!(err
        .to_string()
        .starts_with(&dir.path().join(MANIFEST).display().to_string()));
    let (_, err) = corrupted(MANIFEST, |t| t.replace("\"id\"", "\"name\""));
    assert!(
        matches!(err, DataError::Malformed { ref loc, .. } if loc.line.is_some()),
        "{err}"
    );
}

#[test]
fn missing_files_are_named() {
    for f in [MANIFEST, EVENTS, TRAJECTORY, RANGES] {
        let dir = tempfile::tempdir().unwrap();
        write_sequence(&fixture(Split::Train), dir.path(), None).unwrap();
        fs::remove_file(dir.path().join(f)).unwrap();
        let err = read_sequence(dir.path()).unwrap_err();
        assert!(
            matches!(err, DataError::Missing(ref loc) if loc.file == dir.path().join(f)),
            "{err}"
        );
    }
}

#[test]
fn timestamps_in_seconds_fail_validation() {
    let (_, err) = corrupted(EVENTS, |t| {
        let mut out = String::from("t_us,x,y,p\n");
        for l in t.lines().skip(1) {
            let mut f: Vec<String> = l.split(',').map(String::from).collect();
            f[0] = (f[0].parse::<u64>().unwrap() * 1_000_000).to_string();
            out.push_str(&f.join(","));
            out.push('\n');
        }
        out
    });
    assert!(matches!(err, DataError::Invalid { .. }), "{err}");
    assert!(err.to_string().contains("microseconds"), "{err}");
}

fn sample(t_us: u64, v: [f64; 3]) -> VelocitySample {
    VelocitySample {
        t_us,
        v: Vector3::from(v),
        v_cam: Vector3::zeros(),
        ecc_value: 1.0,
        scale: 1.0,
        flags: SampleFlags::default(),
    }
}

#[test]
fn submission_interpolates_and_round_trips() {
    let est = SequenceEstimate {
        id: "s".into(),
        state_times: vec![0.0, 0.15, 0.3],
        samples: vec![sample(100_000, [1.0, 2.0, 3.0]), sample(200_000, [3.0, 2.0, 1.0])],
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("submission.csv");
    let rows = write_submission(&[est], &path).unwrap();
    assert_eq!(rows[0].v, Vector3::new(1.0, 2.0, 3.0));
    assert!((rows[1].v - Vector3::new(2.0, 2.0, 2.0)).norm() < 1e-12);
    assert_eq!(rows[2].v, Vector3::new(3.0, 2.0, 1.0));
    assert_eq!(read_submission(&path).unwrap(), rows);
    let header = fs::read_to_string(&path).unwrap();
    assert!(header.starts_with("sequence_id,t,vx,vy,vz\n"));
}

#[test]
fn states_far_outside_the_estimates_are_a_coverage_gap() {
    let est = SequenceEstimate {
        id: "s".into(),
        state_times: vec![0.0, 0.5, 2.0],
        samples: vec![
            sample(400_000, [0.0; 3]),
            sample(500_000, [0.0; 3]),
            sample(600_000, [0.0; 3]),
        ],
    };
    match submission_rows(&est) {
        Err(DataError::CoverageGap { id, times }) => {
            assert_eq!(id, "s");
            assert_eq!(times, vec![0.0, 2.0]);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn summary_counts() {
    let seq = Sequence {
        id: "two".into(),
        split: Split::Train,
        stream: EventStream::new(
            4,
            4,
            vec![
                Event::new(0, 0, 0, Polarity::Positive),
                Event::new(1_000_000, 1, 1, Polarity::Negative),
            ],
        )
        .unwrap(),
        trajectory: vec![state(0.0, Split::Train), state(1.0, Split::Train)],
        ranges: vec![RangeReading { t: 0.0, d: 10.0 }, RangeReading { t: 1.0, d: 9.0 }],
    };
    let s = summarize(&seq, &PipelineConfig::default()).unwrap();
    assert_eq!(s.event_count, 2);
    assert_eq!(s.events_per_second, 2.0);
    assert_eq!((s.range_min, s.range_max), (Some(9.0), Some(10.0)));
    assert!(s.mean_speed.is_some());

    let test = Sequence {
        split: Split::Test,
        trajectory: seq.trajectory.iter().map(LanderState::redacted).collect(),
        ..seq
    };
    let s = summarize(&test, &PipelineConfig::default()).unwrap();
    assert_eq!((s.mean_speed, s.mean_velocity), (None, None));
}
