use alloc::string::String;

/// Errors raised by the estimation pipeline and the simulator.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("event {index} at ({x}, {y}) lies outside the {width}x{height} sensor")]
    EventOutOfBounds {
        index: usize,
        x: u16,
        y: u16,
        width: u16,
        height: u16,
    },
    #[error("event {index} has timestamp {t_us} us, earlier than the event before it")]
    UnsortedEvents { index: usize, t_us: u64 },
    #[error("invalid windowing policy: {0}")]
    InvalidPolicy(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("projection denominator vanishes at ({x}, {y})")]
    SingularProjection { x: f64, y: f64 },
    #[error("matrix is singular or not normalizable")]
    Singular,
    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("alignment diverged at iteration {iteration}")]
    Divergence { iteration: usize },
    #[error("homography Jacobian determinant {det} is not positive")]
    Reflection { det: f64 },
    #[error("need at least {needed} items, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("missing input: {0}")]
    MissingInput(&'static str),
    #[error("estimated velocities on axis {axis} are all zero")]
    DegenerateAxis { axis: usize },
    #[error("series lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("correlation is undefined for a constant series")]
    UndefinedCorrelation,
    #[error("series is empty")]
    EmptySeries,
    #[error("ground plane is not in view: {0}")]
    PlaneNotVisible(&'static str),
    #[error("invalid descent profile: {0}")]
    InvalidProfile(String),
    #[error("invalid sequence: {0}")]
    InvalidSequence(String),
}

pub type Result<T> = core::result::Result<T, Error>;
