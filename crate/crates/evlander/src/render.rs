//! PNG export of frames, warp triptychs and velocity plots.

use std::io::Cursor;
use std::path::Path;

use evlander_core::{Frame, Image};
use image::{ImageFormat, Rgb, RgbImage};
use imageproc::drawing::{draw_filled_rect_mut, draw_line_segment_mut};
use imageproc::rect::Rect;

use crate::dataio::write_atomic;
use crate::error::DataError;

const WHITE: Rgb<u8> = Rgb([255, 255, 255]);
const BLACK: Rgb<u8> = Rgb([0, 0, 0]);

/// Set pixels in white; with a polarity split, positive events in green and
/// negative in red (yellow where both fired).
pub fn frame_image(frame: &Frame) -> RgbImage {
    RgbImage::from_fn(frame.width as u32, frame.height as u32, |x, y| {
        let (x, y) = (x as usize, y as usize);
        if frame.channels == 2 {
            let pos = frame.get(0, x, y);
            let neg = frame.get(1, x, y);
            Rgb([if neg { 255 } else { 0 }, if pos { 255 } else { 0 }, 0])
        } else if frame.get(0, x, y) {
            WHITE
        } else {
            BLACK
        }
    })
}

/// Grayscale view of a real image, clamped to `[0, 1]`.
pub fn gray_image(img: &Image) -> RgbImage {
    RgbImage::from_fn(img.width as u32, img.height as u32, |x, y| {
        let v = (img.get(x as usize, y as usize).clamp(0.0, 1.0) * 255.0).round() as u8;
        Rgb([v, v, v])
    })
}

/// Panels placed left to right with a 2 px gray separator.
pub fn side_by_side(panels: &[RgbImage]) -> RgbImage {
    const GAP: u32 = 2;
    let h = panels.iter().map(|p| p.height()).max().unwrap_or(0);
    let w = panels.iter().map(|p| p.width()).sum::<u32>() + GAP * panels.len().saturating_sub(1) as u32;
    let mut out = RgbImage::from_pixel(w, h, Rgb([96, 96, 96]));
    let mut x0 = 0;
    for p in panels {
        image::imageops::replace(&mut out, p, i64::from(x0), 0);
        x0 += p.width() + GAP;
    }
    out
}

pub fn png_bytes(img: &RgbImage) -> Vec<u8> {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)
        .expect("PNG encoding to memory");
    buf.into_inner()
}

pub fn write_png(path: &Path, img: &RgbImage) -> Result<(), DataError> {
    write_atomic(path, &png_bytes(img))
}

/// One plotted line.
pub struct Series<'a> {
    pub t: &'a [f64],
    pub y: &'a [f64],
    pub color: Rgb<u8>,
}

pub const EST_COLOR: Rgb<u8> = Rgb([220, 60, 40]);
pub const TRUTH_COLOR: Rgb<u8> = Rgb([40, 90, 220]);

/// Stacked panels sharing the time axis, one per entry of `panels`. Each
/// panel is scaled to its own data range and gets a zero line when zero is
/// inside it.
pub fn line_plot(panels: &[Vec<Series<'_>>], width: u32, panel_height: u32) -> RgbImage {
    const PAD: f32 = 8.0;
    let mut img = RgbImage::from_pixel(width, panel_height * panels.len().max(1) as u32, WHITE);
    let finite = |v: &&f64| v.is_finite();
    let (t0, t1) = bounds(panels.iter().flatten().flat_map(|s| s.t.iter()).filter(finite));
    for (k, panel) in panels.iter().enumerate() {
        let top = (k as u32 * panel_height) as f32;
        let (y0, y1) = bounds(panel.iter().flat_map(|s| s.y.iter()).filter(finite));
        let sx = |t: f64| PAD + ((t - t0) / (t1 - t0)) as f32 * (width as f32 - 2.0 * PAD);
        let sy = |v: f64| top + PAD + ((y1 - v) / (y1 - y0)) as f32 * (panel_height as f32 - 2.0 * PAD);
        if k > 0 {
            draw_filled_rect_mut(
                &mut img,
                Rect::at(0, top as i32).of_size(width, 1),
                Rgb([160, 160, 160]),
            );
        }
        if y0 < 0.0 && y1 > 0.0 {
            draw_line_segment_mut(
                &mut img,
                (PAD, sy(0.0)),
                (width as f32 - PAD, sy(0.0)),
                Rgb([200, 200, 200]),
            );
        }
        for s in panel {
            let pts: Vec<(f32, f32)> =
                s.t.iter()
                    .zip(s.y)
                    .filter(|(t, y)| t.is_finite() && y.is_finite())
                    .map(|(&t, &y)| (sx(t), sy(y)))
                    .collect();
            for w in pts.windows(2) {
                draw_line_segment_mut(&mut img, w[0], w[1], s.color);
            }
        }
    }
    img
}

fn bounds<'a>(values: impl Iterator<Item = &'a f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 1.0, hi + 1.0)
    } else {
        let m = 0.05 * (hi - lo);
        (lo - m, hi + m)
    }
}
