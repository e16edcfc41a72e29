//! Event streams and their accumulation into binary frames.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::image::Image;

/// Sign of the brightness change that triggered an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    Negative,
    Positive,
}

impl Polarity {
    pub fn from_sign(sign: f64) -> Self {
        if sign < 0.0 {
            Polarity::Negative
        } else {
            Polarity::Positive
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Polarity::Negative => -1,
            Polarity::Positive => 1,
        }
    }
}

/// A single sensor event. Timestamps are microseconds since sequence start.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub t_us: u64,
    pub x: u16,
    pub y: u16,
    pub polarity: Polarity,
}

impl Event {
    pub fn new(t_us: u64, x: u16, y: u16, polarity: Polarity) -> Self {
        Self { t_us, x, y, polarity }
    }
}

/// Time-ordered events of one sensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    pub width: u16,
    pub height: u16,
    pub events: Vec<Event>,
}

impl EventStream {
    /// Builds a stream, rejecting out-of-bounds or unsorted events.
    pub fn new(width: u16, height: u16, events: Vec<Event>) -> Result<Self> {
        let stream = Self { width, height, events };
        stream.validate()?;
        Ok(stream)
    }

    pub fn empty(width: u16, height: u16) -> Self {
        Self {
            width,
            height,
            events: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut last = 0u64;
        for (index, e) in self.events.iter().enumerate() {
            if e.x >= self.width || e.y >= self.height {
                return Err(Error::EventOutOfBounds {
                    index,
                    x: e.x,
                    y: e.y,
                    width: self.width,
                    height: self.height,
                });
            }
            if e.t_us < last {
                return Err(Error::UnsortedEvents { index, t_us: e.t_us });
            }
            last = e.t_us;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Time of the last event, if any.
    pub fn last_t_us(&self) -> Option<u64> {
        self.events.last().map(|e| e.t_us)
    }
}

/// How events are grouped into frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowMode {
    /// Windows `[k*dt_us, (k+1)*dt_us)` anchored at t = 0.
    FixedTime { dt_us: u64 },
    /// Windows of `count` consecutive events.
    FixedCount { count: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowingPolicy {
    pub mode: WindowMode,
    /// Keep positive and negative events in separate channels.
    pub polarity_split: bool,
}

impl WindowingPolicy {
    pub fn fixed_time(dt_us: u64) -> Self {
        Self {
            mode: WindowMode::FixedTime { dt_us },
            polarity_split: false,
        }
    }

    pub fn fixed_count(count: usize) -> Self {
        Self {
            mode: WindowMode::FixedCount { count },
            polarity_split: false,
        }
    }

    pub fn with_polarity_split(mut self, split: bool) -> Self {
        self.polarity_split = split;
        self
    }

    pub fn channels(&self) -> usize {
        if self.polarity_split {
            2
        } else {
            1
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            WindowMode::FixedTime { dt_us: 0 } => Err(Error::InvalidPolicy("dt_us must be positive")),
            WindowMode::FixedCount { count: 0 } => Err(Error::InvalidPolicy("count must be positive")),
            _ => Ok(()),
        }
    }
}

impl Default for WindowingPolicy {
    fn default() -> Self {
        Self::fixed_time(100_000)
    }
}

/// Binary occupancy image accumulated over one window.
///
/// Pixels are stored channel-major, then row-major. With two channels,
/// channel 0 holds positive and channel 1 negative events.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub t_start_us: u64,
    /// Exclusive end of the window.
    pub t_end_us: u64,
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub pixels: Vec<u8>,
    pub event_count: usize,
    /// The stream ended before this window was complete.
    pub partial: bool,
}

impl Frame {
    pub fn new(t_start_us: u64, t_end_us: u64, width: usize, height: usize, channels: usize) -> Self {
        Self {
            t_start_us,
            t_end_us,
            width,
            height,
            channels,
            pixels: vec![0; width * height * channels],
            event_count: 0,
            partial: false,
        }
    }

    #[inline]
    fn index(&self, channel: usize, x: usize, y: usize) -> usize {
        (channel * self.height + y) * self.width + x
    }

    pub fn get(&self, channel: usize, x: usize, y: usize) -> bool {
        self.pixels[self.index(channel, x, y)] != 0
    }

    pub fn set(&mut self, channel: usize, x: usize, y: usize) {
        let i = self.index(channel, x, y);
        self.pixels[i] = 1;
    }

    pub fn set_pixel_count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p != 0).count()
    }

    /// Midpoint of the window in microseconds.
    pub fn t_mid_us(&self) -> u64 {
        self.t_start_us + (self.t_end_us - self.t_start_us) / 2
    }

    /// Single-channel frame holding the union of all channels.
    pub fn merged(&self) -> Frame {
        if self.channels == 1 {
            return self.clone();
        }
        let plane = self.width * self.height;
        let mut pixels = vec![0u8; plane];
        for c in 0..self.channels {
            for (dst, &src) in pixels.iter_mut().zip(&self.pixels[c * plane..(c + 1) * plane]) {
                *dst |= src;
            }
        }
        Frame {
            channels: 1,
            pixels,
            ..self.clone()
        }
    }

    /// One channel as a real-valued image with values 0 and 1.
    pub fn channel_image(&self, channel: usize) -> Image {
        let plane = self.width * self.height;
        let data = self.pixels[channel * plane..(channel + 1) * plane]
            .iter()
            .map(|&p| f64::from(p))
            .collect();
        Image::from_vec(self.width, self.height, data)
    }

    /// Union of all channels as a real-valued image.
    pub fn to_image(&self) -> Image {
        self.merged().channel_image(0)
    }
}

/// Fraction of set pixels over all channels.
pub fn frame_density(frame: &Frame) -> f64 {
    let total = frame.width * frame.height * frame.channels;
    if total == 0 {
        return 0.0;
    }
    frame.set_pixel_count() as f64 / total as f64
}

/// Accumulates a stream into frames. The last window is flagged partial
/// because the stream carries no explicit end time.
pub fn accumulate(stream: &EventStream, policy: &WindowingPolicy) -> Result<Vec<Frame>> {
    accumulate_until(stream, policy, None)
}

/// Like [`accumulate`], with a known end of recording.
///
/// With `end_us` set, fixed-time windows that end at or before `end_us` are
/// complete (empty ones included) and only a window straddling `end_us` is
/// partial, so an empty stream still gives its empty windows. Fixed-count
/// windows ignore `end_us`.
pub fn accumulate_until(stream: &EventStream, policy: &WindowingPolicy, end_us: Option<u64>) -> Result<Vec<Frame>> {
    policy.validate()?;
    stream.validate()?;
    let fixed_time = matches!(policy.mode, WindowMode::FixedTime { .. });
    if stream.events.is_empty() && !(fixed_time && end_us.is_some()) {
        return Ok(Vec::new());
    }
    let width = usize::from(stream.width);
    let height = usize::from(stream.height);
    let channels = policy.channels();
    let channel_of = |e: &Event| -> usize {
        if channels == 2 && e.polarity == Polarity::Negative {
            1
        } else {
            0
        }
    };

    let mut frames = Vec::new();
    match policy.mode {
        WindowMode::FixedTime { dt_us } => {
            let last_window = stream.last_t_us().map(|t| t / dt_us);
            let (n_windows, last_is_partial) = match (end_us, last_window) {
                (Some(end), None) => (end / dt_us, false),
                (Some(end), Some(last_window)) => {
                    let full = end / dt_us;
                    if last_window < full {
                        (full, false)
                    } else {
                        (last_window + 1, true)
                    }
                }
                (None, Some(last_window)) => (last_window + 1, true),
                (None, None) => unreachable!("empty stream without an end returned early"),
            };
            let mut events = stream.events.iter().peekable();
            for k in 0..n_windows {
                let start = k * dt_us;
                let mut frame = Frame::new(start, start + dt_us, width, height, channels);
                while let Some(e) = events.next_if(|e| e.t_us < start + dt_us) {
                    frame.set(channel_of(e), usize::from(e.x), usize::from(e.y));
                    frame.event_count += 1;
                }
                frame.partial = last_is_partial && k + 1 == n_windows;
                frames.push(frame);
            }
        }
        WindowMode::FixedCount { count } => {
            for chunk in stream.events.chunks(count) {
                let first = chunk[0].t_us;
                let last = chunk[chunk.len() - 1].t_us;
                let mut frame = Frame::new(first, last + 1, width, height, channels);
                for e in chunk {
                    frame.set(channel_of(e), usize::from(e.x), usize::from(e.y));
                }
                frame.event_count = chunk.len();
                frame.partial = chunk.len() < count;
                frames.push(frame);
            }
        }
    }
    Ok(frames)
}
