//! Arc conditioning (gap filling, smoothing, resampling, normalization) and
//! nearest-template story-shape classification.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sentiment::SentimentArc;

pub const DEFAULT_RESAMPLE_LEN: usize = 100;
pub const DEFAULT_SMOOTH_WINDOW: usize = 5;
pub const DEFAULT_LOWPASS_TERMS: usize = 5;
/// Shorter arcs cannot separate the six templates.
pub const MIN_CLASSIFY_LEN: usize = 4;

#[derive(Debug, Error, PartialEq)]
pub enum ShapeError {
    #[error("input arc is empty")]
    Empty,
    #[error("resample length must be at least 2, got {0}")]
    ResampleLength(usize),
    #[error("smoothing window must be odd and at most {len}, got {window}")]
    SmoothWindow { window: usize, len: usize },
    #[error("low-pass term count must be in 1..={max}, got {m}")]
    LowpassTerms { m: usize, max: usize },
    #[error("arc of length {0} is too short to classify (need at least 4 points)")]
    TooShort(usize),
    #[error("arc has no defined scores")]
    NoSignal,
}

/// Linear interpolation at `len` equally spaced positions over `[0, n-1]`.
pub fn resample(values: &[f64], len: usize) -> Result<Vec<f64>, ShapeError> {
    if len < 2 {
        return Err(ShapeError::ResampleLength(len));
    }
    let n = values.len();
    match n {
        0 => return Err(ShapeError::Empty),
        1 => return Ok(vec![values[0]; len]),
        _ => {}
    }
    if n == len {
        return Ok(values.to_vec());
    }
    let span = (n - 1) as f64;
    let step = span / (len - 1) as f64;
    Ok((0..len)
        .map(|j| {
            let x = if j == len - 1 { span } else { j as f64 * step };
            let lo = (x.floor() as usize).min(n - 2);
            let f = x - lo as f64;
            values[lo] + (values[lo + 1] - values[lo]) * f
        })
        .collect())
}

/// `(x - mean) / std` with the population standard deviation. Constant
/// inputs map to zeros.
pub fn znormalize(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    if values.is_empty() {
        return Vec::new();
    }
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    // Rounding noise on a constant input leaves a std many orders of
    // magnitude below the values themselves.
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if std == 0.0 || std <= scale * 1e-13 {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - mean) / std).collect()
}

/// Centered moving average over an odd window. Near the edges the window is
/// truncated to the positions that exist.
pub fn smooth_ma(values: &[f64], window: usize) -> Result<Vec<f64>, ShapeError> {
    let n = values.len();
    if window == 0 || window.is_multiple_of(2) || window > n {
        return Err(ShapeError::SmoothWindow { window, len: n });
    }
    if window == 1 {
        return Ok(values.to_vec());
    }
    let half = window / 2;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for v in values {
        prefix.push(prefix.last().unwrap() + v);
    }
    Ok((0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            (prefix[hi + 1] - prefix[lo]) / (hi + 1 - lo) as f64
        })
        .collect())
}

/// Keeps the mean and the `m - 1` lowest non-zero frequencies of the
/// discrete Fourier spectrum and transforms back.
pub fn lowpass(values: &[f64], m: usize) -> Result<Vec<f64>, ShapeError> {
    let len = values.len();
    if len == 0 {
        return Err(ShapeError::Empty);
    }
    let max = len / 2 + 1;
    if m == 0 || m > max {
        return Err(ShapeError::LowpassTerms { m, max });
    }
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
    planner.plan_fft_forward(len).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let freq = k.min(len - k);
        if freq >= m {
            *c = Complex::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    let scale = 1.0 / len as f64;
    Ok(buf.iter().map(|c| c.re * scale).collect())
}

/// The six canonical story shapes, in tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ArcShape {
    RagsToRiches,
    RichesToRags,
    ManInAHole,
    Icarus,
    Cinderella,
    Oedipus,
}

impl ArcShape {
    pub const ALL: [ArcShape; 6] = [
        ArcShape::RagsToRiches,
        ArcShape::RichesToRags,
        ArcShape::ManInAHole,
        ArcShape::Icarus,
        ArcShape::Cinderella,
        ArcShape::Oedipus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ArcShape::RagsToRiches => "RagsToRiches",
            ArcShape::RichesToRags => "RichesToRags",
            ArcShape::ManInAHole => "ManInAHole",
            ArcShape::Icarus => "Icarus",
            ArcShape::Cinderella => "Cinderella",
            ArcShape::Oedipus => "Oedipus",
        }
    }

    /// The shape of the negated arc.
    pub fn mirror(self) -> ArcShape {
        match self {
            ArcShape::RagsToRiches => ArcShape::RichesToRags,
            ArcShape::RichesToRags => ArcShape::RagsToRiches,
            ArcShape::ManInAHole => ArcShape::Icarus,
            ArcShape::Icarus => ArcShape::ManInAHole,
            ArcShape::Cinderella => ArcShape::Oedipus,
            ArcShape::Oedipus => ArcShape::Cinderella,
        }
    }

    /// Raw (un-normalized) template value at `t` in `[0, 1]`.
    pub fn value_at(self, t: f64) -> f64 {
        match self {
            ArcShape::RagsToRiches => t,
            ArcShape::RichesToRags => -t,
            ArcShape::ManInAHole => (2.0 * PI * t).cos(),
            ArcShape::Icarus => -(2.0 * PI * t).cos(),
            ArcShape::Cinderella => (2.0 * PI * t).sin(),
            ArcShape::Oedipus => -(2.0 * PI * t).sin(),
        }
    }

    /// Template sampled at `len` evenly spaced points of `[0, 1]`,
    /// z-normalized.
    pub fn template(self, len: usize) -> Vec<f64> {
        let denom = (len.max(2) - 1) as f64;
        let raw: Vec<f64> = (0..len).map(|i| self.value_at(i as f64 / denom)).collect();
        znormalize(&raw)
    }
}

impl fmt::Display for ArcShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ArcShape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ArcShape::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown arc shape `{s}`"))
    }
}

/// A fixed-length, z-normalized arc.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedArc {
    pub doc: String,
    pub values: Vec<f64>,
}

impl NormalizedArc {
    /// Z-normalizes `values` as given.
    pub fn new(doc: impl Into<String>, values: &[f64]) -> Self {
        NormalizedArc {
            doc: doc.into(),
            values: znormalize(values),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl AsRef<[f64]> for NormalizedArc {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcLabel {
    pub label: ArcShape,
    /// Euclidean distance to each template, indexed like [`ArcShape::ALL`].
    pub distances: [f64; 6],
}

impl ArcLabel {
    pub fn distance(&self, shape: ArcShape) -> f64 {
        self.distances[shape as usize]
    }
}

/// Nearest template by Euclidean distance; exact ties go to the shape that
/// comes first in [`ArcShape::ALL`].
///
/// The input is z-normalized again before matching, so any positive affine
/// transform of an arc gets the same label.
pub fn classify_arc(arc: &NormalizedArc) -> Result<ArcLabel, ShapeError> {
    let len = arc.len();
    if len < MIN_CLASSIFY_LEN {
        return Err(ShapeError::TooShort(len));
    }
    let values = znormalize(&arc.values);
    let mut distances = [0.0; 6];
    for (slot, shape) in distances.iter_mut().zip(ArcShape::ALL) {
        *slot = shape
            .template(len)
            .iter()
            .zip(&values)
            .map(|(t, v)| (t - v).powi(2))
            .sum::<f64>()
            .sqrt();
    }
    // Distances equal up to rounding count as ties and go to the earlier shape.
    let tol = 1e-9 * (len as f64).sqrt();
    let mut best = 0;
    for i in 1..6 {
        if distances[i] < distances[best] - tol {
            best = i;
        }
    }
    Ok(ArcLabel {
        label: ArcShape::ALL[best],
        distances,
    })
}

/// Conditioning parameters applied before classification and clustering.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeConfig {
    pub smooth_w: usize,
    pub lowpass_m: usize,
    pub resample_len: usize,
}

impl Default for ShapeConfig {
    fn default() -> Self {
        ShapeConfig {
            smooth_w: DEFAULT_SMOOTH_WINDOW,
            lowpass_m: DEFAULT_LOWPASS_TERMS,
            resample_len: DEFAULT_RESAMPLE_LEN,
        }
    }
}

impl ShapeConfig {
    pub fn validate(&self) -> Result<(), ShapeError> {
        if self.resample_len < 2 {
            return Err(ShapeError::ResampleLength(self.resample_len));
        }
        if self.smooth_w == 0 || self.smooth_w.is_multiple_of(2) {
            return Err(ShapeError::SmoothWindow {
                window: self.smooth_w,
                len: self.resample_len,
            });
        }
        let max = self.resample_len / 2 + 1;
        if self.lowpass_m == 0 || self.lowpass_m > max {
            return Err(ShapeError::LowpassTerms {
                m: self.lowpass_m,
                max,
            });
        }
        Ok(())
    }
}

/// Fills gaps and resamples to the configured length, without smoothing or
/// normalization.
pub fn aligned_raw(arc: &SentimentArc, cfg: &ShapeConfig) -> Result<Vec<f64>, ShapeError> {
    let values = arc.filled_values().ok_or(ShapeError::NoSignal)?;
    resample(&values, cfg.resample_len)
}

/// Full conditioning chain: fill gaps, moving average, resample, low-pass,
/// z-normalize. The moving-average window shrinks to the largest odd size
/// that fits arcs shorter than `smooth_w`.
pub fn prepare_arc(arc: &SentimentArc, cfg: &ShapeConfig) -> Result<NormalizedArc, ShapeError> {
    cfg.validate()?;
    let values = arc.filled_values().ok_or(ShapeError::NoSignal)?;
    let mut w = cfg.smooth_w.min(values.len());
    if w % 2 == 0 {
        w -= 1;
    }
    let smoothed = smooth_ma(&values, w)?;
    let resampled = resample(&smoothed, cfg.resample_len)?;
    let filtered = lowpass(&resampled, cfg.lowpass_m)?;
    Ok(NormalizedArc::new(arc.doc.clone(), &filtered))
}
