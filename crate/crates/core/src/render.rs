//! Accumulation frames: events in a time window summed per pixel on a
//! mid-gray base.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::event::LabeledStream;

pub const GRAY_BASE: u8 = 128;
/// Brightness change per net event.
pub const GRAY_STEP: i32 = 32;

fn shade(net: i32) -> u8 {
    (i32::from(GRAY_BASE) + GRAY_STEP.saturating_mul(net)).clamp(0, 255) as u8
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl GrayImage {
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    /// Binary portable graymap, maxval 255.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.data[y * self.width + x]
    }

    /// Binary portable pixmap, maxval 255.
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        for px in &self.data {
            out.extend_from_slice(px);
        }
        out
    }
}

/// Per-pixel (net polarity over all events, net over background, snow count)
/// for events with `t0 ≤ t < t0 + window_us`.
fn accumulate(
    stream: &LabeledStream,
    window_us: u64,
    t0: u64,
) -> (usize, usize, Vec<(i32, i32, i32)>) {
    let w = usize::from(stream.geometry.width_px);
    let h = usize::from(stream.geometry.height_px);
    let mut acc = vec![(0i32, 0i32, 0i32); w * h];
    let end = t0.saturating_add(window_us);
    let start = stream.events.partition_point(|e| e.t < t0);
    for e in stream.events[start..].iter().take_while(|e| e.t < end) {
        let k = usize::from(e.y) * w + usize::from(e.x);
        let s = if e.polarity.is_positive() { 1 } else { -1 };
        let a = &mut acc[k];
        a.0 = a.0.saturating_add(s);
        if e.snow {
            a.2 = a.2.saturating_add(1);
        } else {
            a.1 = a.1.saturating_add(s);
        }
    }
    (w, h, acc)
}

/// Gray frame of the window starting at `t0`. A zero window gives a blank
/// frame.
pub fn render_accumulation(stream: &LabeledStream, window_us: u64, t0: u64) -> GrayImage {
    let (width, height, acc) = accumulate(stream, window_us, t0);
    GrayImage {
        width,
        height,
        data: acc.iter().map(|a| shade(a.0)).collect(),
    }
}

/// Color frame: background events in gray, pixels with snow-flagged events
/// in red.
pub fn render_accumulation_color(stream: &LabeledStream, window_us: u64, t0: u64) -> RgbImage {
    let (width, height, acc) = accumulate(stream, window_us, t0);
    let data = acc
        .iter()
        .map(|&(_, bg, snow)| {
            let g = shade(bg);
            if snow > 0 {
                [shade(snow), g / 2, g / 2]
            } else {
                [g, g, g]
            }
        })
        .collect();
    RgbImage {
        width,
        height,
        data,
    }
}

/// Pixels differing from the base.
pub fn lit_pixels(img: &GrayImage) -> usize {
    img.data.iter().filter(|&&v| v != GRAY_BASE).count()
}
