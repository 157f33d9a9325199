//! Per-frame and frame-pair scoring: LAB brightness, Laplacian-variance
//! sharpness, HSV content change, neighborhood-relative change ratio,
//! moving-average smoothing and z-score normalization.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame_io::Frame;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("frames differ in size: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),
    #[error("index {index} out of range for a series of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("smoothing window must be odd, got {0}")]
    EvenWindow(usize),
    #[error("window half-width must be at least 1")]
    ZeroWindow,
    #[error("input is empty")]
    EmptyInput,
}

/// Returned by [`adaptive_score`] when a nonzero change sits in a perfectly
/// static neighborhood.
pub const ADAPTIVE_SENTINEL: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameScores {
    pub brightness: f64,
    pub sharpness: f64,
}

impl FrameScores {
    pub fn of(frame: &Frame) -> Self {
        FrameScores {
            brightness: brightness(frame),
            sharpness: sharpness(frame),
        }
    }
}

fn srgb_linear_lut() -> &'static [f64; 256] {
    static LUT: OnceLock<[f64; 256]> = OnceLock::new();
    LUT.get_or_init(|| {
        let mut lut = [0.0; 256];
        for (i, v) in lut.iter_mut().enumerate() {
            let c = i as f64 / 255.0;
            *v = if c <= 0.04045 {
                c / 12.92
            } else {
                ((c + 0.055) / 1.055).powf(2.4)
            };
        }
        lut
    })
}

/// CIE L* of one sRGB pixel (D65), on the 0..=100 scale.
fn lightness(rgb: [u8; 3]) -> f64 {
    let lut = srgb_linear_lut();
    let y = 0.212671 * lut[rgb[0] as usize]
        + 0.715160 * lut[rgb[1] as usize]
        + 0.072169 * lut[rgb[2] as usize];
    if y > 0.008856 {
        116.0 * y.cbrt() - 16.0
    } else {
        903.3 * y
    }
}

/// Mean LAB lightness, scaled to `[0, 255]`.
pub fn brightness(frame: &Frame) -> f64 {
    if frame.pixel_count() == 0 {
        return 0.0;
    }
    let sum: f64 = frame.rgb().map(lightness).sum();
    (sum / frame.pixel_count() as f64 * 255.0 / 100.0).clamp(0.0, 255.0)
}

/// BT.601 luma as floats, row-major.
pub fn grayscale(frame: &Frame) -> Vec<f64> {
    frame
        .rgb()
        .map(|[r, g, b]| 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64)
        .collect()
}

/// Variance of the 4-neighbor Laplacian of the grayscale image, with
/// replicated borders.
pub fn sharpness(frame: &Frame) -> f64 {
    let (w, h) = (frame.width as usize, frame.height as usize);
    if w == 0 || h == 0 {
        return 0.0;
    }
    let gray = grayscale(frame);
    let at = |x: usize, y: usize| gray[y * w + x];
    let mut response = Vec::with_capacity(w * h);
    for y in 0..h {
        let up = y.saturating_sub(1);
        let down = (y + 1).min(h - 1);
        for x in 0..w {
            let left = x.saturating_sub(1);
            let right = (x + 1).min(w - 1);
            response.push(at(x, up) + at(x, down) + at(left, y) + at(right, y) - 4.0 * at(x, y));
        }
    }
    population_variance(&response)
}

fn population_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// 8-bit HSV planes of a frame, hue scaled to `[0, 255]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HsvImage {
    pub width: u32,
    pub height: u32,
    /// Interleaved H, S, V.
    pub data: Vec<u8>,
}

pub fn rgb_to_hsv([r, g, b]: [u8; 3]) -> [u8; 3] {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = (max - min) as f64;
    let s = if max == 0 {
        0.0
    } else {
        255.0 * delta / max as f64
    };
    let h = if delta == 0.0 {
        0.0
    } else {
        let (r, g, b) = (r as f64, g as f64, b as f64);
        let deg = if max as f64 == r {
            60.0 * (g - b) / delta
        } else if max as f64 == g {
            120.0 + 60.0 * (b - r) / delta
        } else {
            240.0 + 60.0 * (r - g) / delta
        };
        let deg = if deg < 0.0 { deg + 360.0 } else { deg };
        deg * 255.0 / 360.0
    };
    [h.round() as u8, s.round() as u8, max]
}

impl HsvImage {
    pub fn from_frame(frame: &Frame) -> Self {
        let mut data = Vec::with_capacity(frame.pixels.len());
        for px in frame.rgb() {
            data.extend_from_slice(&rgb_to_hsv(px));
        }
        HsvImage {
            width: frame.width,
            height: frame.height,
            data,
        }
    }

    /// Mean over H, S and V of the mean absolute per-pixel difference.
    pub fn distance(&self, other: &HsvImage) -> Result<f64, MetricError> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(MetricError::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        if self.data.is_empty() {
            return Ok(0.0);
        }
        let total: u64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a.abs_diff(b) as u64)
            .sum();
        Ok(total as f64 / self.data.len() as f64)
    }
}

/// HSV content change between two frames, in `[0, 255]`.
pub fn content_score(a: &Frame, b: &Frame) -> Result<f64, MetricError> {
    if (a.width, a.height) != (b.width, b.height) {
        return Err(MetricError::DimensionMismatch(
            a.width, a.height, b.width, b.height,
        ));
    }
    HsvImage::from_frame(a).distance(&HsvImage::from_frame(b))
}

/// Pairwise change scores of one video, raw and smoothed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreSeries {
    pub raw: Vec<f64>,
    pub smoothed: Vec<f64>,
    pub sampling_fps: f64,
}

impl ScoreSeries {
    pub fn new(raw: Vec<f64>, smoothing_window: usize, sampling_fps: f64) -> Result<Self, MetricError> {
        let smoothed = smooth(&raw, smoothing_window)?;
        Ok(ScoreSeries {
            raw,
            smoothed,
            sampling_fps,
        })
    }

    /// Series with `smoothed == raw`.
    pub fn unsmoothed(raw: Vec<f64>, sampling_fps: f64) -> Self {
        ScoreSeries {
            smoothed: raw.clone(),
            raw,
            sampling_fps,
        }
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    /// Sampled frames covered by the series (one more than the pair count).
    pub fn frame_count(&self) -> usize {
        self.raw.len() + 1
    }

    pub fn resmoothed(&self, window: usize) -> Result<Self, MetricError> {
        ScoreSeries::new(self.raw.clone(), window, self.sampling_fps)
    }
}

/// `raw[t]` over the mean of its neighbors within `window`, edges clamped.
pub fn adaptive_score(series: &ScoreSeries, t: usize, window: usize) -> Result<f64, MetricError> {
    ratio_at(&series.raw, t, window)
}

fn ratio_at(raw: &[f64], t: usize, window: usize) -> Result<f64, MetricError> {
    if window == 0 {
        return Err(MetricError::ZeroWindow);
    }
    if t >= raw.len() {
        return Err(MetricError::IndexOutOfRange {
            index: t,
            len: raw.len(),
        });
    }
    let lo = t.saturating_sub(window);
    let hi = (t + window).min(raw.len() - 1);
    let count = hi - lo;
    let sum: f64 = (lo..=hi).filter(|&i| i != t).map(|i| raw[i]).sum();
    let mean = if count == 0 { 0.0 } else { sum / count as f64 };
    Ok(if mean > 0.0 {
        raw[t] / mean
    } else if raw[t] == 0.0 {
        0.0
    } else {
        ADAPTIVE_SENTINEL
    })
}

/// [`adaptive_score`] at every index.
pub fn adaptive_series(series: &ScoreSeries, window: usize) -> Result<Vec<f64>, MetricError> {
    (0..series.raw.len())
        .map(|t| ratio_at(&series.raw, t, window))
        .collect()
}

/// Centered moving average; windows shrink at the edges.
pub fn smooth(raw: &[f64], window: usize) -> Result<Vec<f64>, MetricError> {
    if window % 2 == 0 {
        return Err(MetricError::EvenWindow(window));
    }
    let half = window / 2;
    if half == 0 {
        return Ok(raw.to_vec());
    }
    Ok((0..raw.len())
        .map(|t| {
            let slice = &raw[t.saturating_sub(half)..(t + half + 1).min(raw.len())];
            let mean = slice.iter().sum::<f64>() / slice.len() as f64;
            let lo = slice.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = slice.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            mean.clamp(lo, hi)
        })
        .collect())
}

/// Population z-scores; a zero-spread input comes back unchanged.
pub fn zscore(values: &[f64]) -> Result<Vec<f64>, MetricError> {
    if values.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if std == 0.0 {
        return Ok(values.to_vec());
    }
    Ok(values.iter().map(|v| (v - mean) / std).collect())
}
