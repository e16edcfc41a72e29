use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use evlander::commands;
use evlander::config::{ConventionDoc, Settings};
use evlander::error::CliResult;
use evlander_core::Split;

/// Estimate lander velocities from event-camera recordings.
#[derive(Debug, Parser)]
#[command(name = "evlander", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// JSON config file; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Random seed for simulation
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Fixed-time window length in microseconds.
    #[arg(long, global = true, value_name = "N", conflicts_with = "window_count")]
    dt_us: Option<u64>,
    /// Fixed-count window length in events.
    #[arg(long, global = true, value_name = "N")]
    window_count: Option<usize>,
    /// Accumulate positive and negative events into separate channels.
    #[arg(long, global = true)]
    polarity_split: bool,
    /// Gaussian pre-smoothing of frames before alignment, pixels.
    #[arg(long, global = true, value_name = "F")]
    sigma: Option<f64>,
    /// Maximum alignment iterations per frame pair
    #[arg(long, global = true, value_name = "N")]
    max_iter: Option<usize>,
    /// Alignment convergence threshold on the parameter update
    #[arg(long, global = true, value_name = "F")]
    eps: Option<f64>,
    /// Euler angle order of attitude columns
    #[arg(long, global = true, value_enum)]
    euler_convention: Option<Convention>,
    /// Worker threads for per-sequence work
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Calibration JSON written by `calibrate`.
    #[arg(long, global = true, value_name = "PATH")]
    calibration: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Convention {
    Zyx,
    Xyz,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print statistics of a sequence.
    Summarize { seq_dir: PathBuf },
    /// Write every accumulated frame as a PNG.
    ViewEvents { seq_dir: PathBuf },
    /// Write warp/difference triptychs for each frame pair.
    VizWarp { seq_dir: PathBuf },
    /// Compare estimated and true velocities.
    CompareVel { seq_dir: PathBuf },
    /// Fit per-axis scale factors on training sequences.
    Calibrate {
        #[arg(required = true)]
        train_dirs: Vec<PathBuf>,
    },
    /// Estimate velocities and write a submission CSV.
    Estimate {
        #[arg(required = true)]
        test_dirs: Vec<PathBuf>,
    },
    /// Score a submission against ground truth.
    Score {
        submission: PathBuf,
        /// Sequence directories or submission-format truth CSVs.
        #[arg(long, required = true, num_args = 1..)]
        truth: Vec<PathBuf>,
    },
    /// Simulate a descent sequence.
    Simulate {
        /// Profile JSON; fields left out take the seeded defaults.
        #[arg(long, value_name = "PATH")]
        profile: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "train")]
        split: SplitArg,
    },
}

fn run(cli: Cli) -> CliResult<String> {
    let g = cli.global;
    let flags = Settings {
        dt_us: g.dt_us,
        window_count: g.window_count,
        polarity_split: g.polarity_split.then_some(true),
        sigma: g.sigma,
        max_iter: g.max_iter,
        eps: g.eps,
        euler_convention: g.euler_convention.map(|c| match c {
            Convention::Zyx => ConventionDoc::Zyx,
            Convention::Xyz => ConventionDoc::Xyz,
        }),
        calibration: g.calibration,
        seed: g.seed,
        jobs: g.jobs,
        ..Settings::default()
    };
    let cfg = Settings::resolve(g.config.as_deref(), flags)?;
    let out = g.out.as_deref();
    match cli.command {
        Command::Summarize { seq_dir } => commands::summarize(&seq_dir, out, &cfg),
        Command::ViewEvents { seq_dir } => commands::view_events(&seq_dir, out, &cfg),
        Command::VizWarp { seq_dir } => commands::viz_warp(&seq_dir, out, &cfg),
        Command::CompareVel { seq_dir } => commands::compare_vel(&seq_dir, out, &cfg),
        Command::Calibrate { train_dirs } => commands::calibrate(&train_dirs, out, &cfg),
        Command::Estimate { test_dirs } => commands::estimate(&test_dirs, out, &cfg),
        Command::Score { submission, truth } => commands::score(&submission, &truth, out, &cfg),
        Command::Simulate { profile, split } => {
            let split = match split {
                SplitArg::Train => Split::Train,
                SplitArg::Test => Split::Test,
            };
            commands::simulate(profile.as_deref(), split, out, &cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
