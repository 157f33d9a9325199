//! One representative frame per scene: a handful of evenly spaced
//! candidates scored on sharpness and brightness, each z-scored across the
//! candidate set and combined with fixed weights.

use std::borrow::Cow;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::Scene;
use crate::frame_io::{Frame, FrameError, RawSequence};
use crate::metrics::{zscore, FrameScores};

#[derive(Debug, Error)]
pub enum KeyframeError {
    #[error("score arrays differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("no candidates to choose from")]
    EmptyInput,
    #[error("invalid keyframe weights: {0}")]
    InvalidWeights(String),
    #[error("cannot fetch candidate frame: {0}")]
    CandidateFetchFailure(#[from] FrameError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeyframeWeights {
    pub w_sharp: f64,
    pub w_bright: f64,
    pub n_candidates: usize,
}

impl Default for KeyframeWeights {
    fn default() -> Self {
        KeyframeWeights {
            w_sharp: 0.7,
            w_bright: 0.3,
            n_candidates: 5,
        }
    }
}

impl KeyframeWeights {
    pub fn validate(&self) -> Result<(), KeyframeError> {
        if !(self.w_sharp >= 0.0 && self.w_bright >= 0.0) {
            return Err(KeyframeError::InvalidWeights(
                "weights must be non-negative".into(),
            ));
        }
        if !(self.w_sharp + self.w_bright > 0.0) {
            return Err(KeyframeError::InvalidWeights(
                "at least one weight must be positive".into(),
            ));
        }
        if self.n_candidates == 0 {
            return Err(KeyframeError::InvalidWeights(
                "need at least one candidate".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeyframeRecord {
    pub scene_index: usize,
    pub frame_index: usize,
    pub time_sec: f64,
    /// Raw (not normalized) scores of the winner.
    pub brightness: f64,
    pub sharpness: f64,
    pub combined_score: f64,
    pub candidate_count: usize,
}

/// `n` evenly spaced frames from `start_frame` to `end_frame - 1`, rounded
/// and de-duplicated. Short scenes return every frame; `n == 1` returns the
/// middle frame.
pub fn sample_indices(scene: &Scene, n: usize) -> Vec<usize> {
    let (start, end) = (scene.start_frame, scene.end_frame);
    if end <= start {
        return Vec::new();
    }
    let len = end - start;
    if n == 1 {
        return vec![start + (len - 1) / 2];
    }
    if len <= n {
        return (start..end).collect();
    }
    let step = (len - 1) as f64 / (n - 1) as f64;
    let mut out: Vec<usize> = (0..n)
        .map(|i| start + (i as f64 * step).round() as usize)
        .collect();
    out.dedup();
    out
}

/// Weighted sum of z-scored sharpness and brightness per candidate.
pub fn combined_scores(
    brightness: &[f64],
    sharpness: &[f64],
    weights: &KeyframeWeights,
) -> Result<Vec<f64>, KeyframeError> {
    if brightness.len() != sharpness.len() {
        return Err(KeyframeError::LengthMismatch(
            brightness.len(),
            sharpness.len(),
        ));
    }
    if brightness.is_empty() {
        return Err(KeyframeError::EmptyInput);
    }
    let zb = zscore(brightness).map_err(|_| KeyframeError::EmptyInput)?;
    let zs = zscore(sharpness).map_err(|_| KeyframeError::EmptyInput)?;
    Ok(zs
        .iter()
        .zip(&zb)
        .map(|(s, b)| weights.w_sharp * s + weights.w_bright * b)
        .collect())
}

/// Index of the best candidate; ties go to the lowest index.
pub fn choose_best_frame(
    brightness: &[f64],
    sharpness: &[f64],
    weights: &KeyframeWeights,
) -> Result<usize, KeyframeError> {
    let combined = combined_scores(brightness, sharpness, weights)?;
    Ok(argmax(&combined))
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Random access to decoded frames by sampled index.
pub trait CandidateFetch {
    fn frame(&self, index: usize) -> Result<Cow<'_, Frame>, FrameError>;
}

impl CandidateFetch for BTreeMap<usize, Frame> {
    fn frame(&self, index: usize) -> Result<Cow<'_, Frame>, FrameError> {
        self.get(&index).map(Cow::Borrowed).ok_or(FrameError::MissingFrame {
            index,
            reason: "not prefetched".into(),
        })
    }
}

impl CandidateFetch for [Frame] {
    fn frame(&self, index: usize) -> Result<Cow<'_, Frame>, FrameError> {
        self.iter()
            .find(|f| f.index == index)
            .map(Cow::Borrowed)
            .ok_or(FrameError::MissingFrame {
                index,
                reason: "not in the frame list".into(),
            })
    }
}

impl CandidateFetch for RawSequence {
    fn frame(&self, index: usize) -> Result<Cow<'_, Frame>, FrameError> {
        self.read_frame(index).map(Cow::Owned)
    }
}

pub fn extract_keyframe<F: CandidateFetch + ?Sized>(
    scene: &Scene,
    frames: &F,
    weights: &KeyframeWeights,
) -> Result<KeyframeRecord, KeyframeError> {
    weights.validate()?;
    let indices = sample_indices(scene, weights.n_candidates);
    if indices.is_empty() {
        return Err(KeyframeError::EmptyInput);
    }
    let mut scores = Vec::with_capacity(indices.len());
    let mut times = Vec::with_capacity(indices.len());
    for &i in &indices {
        let frame = frames.frame(i)?;
        scores.push(FrameScores::of(&frame));
        times.push(frame.time_sec);
    }
    let brightness: Vec<f64> = scores.iter().map(|s| s.brightness).collect();
    let sharpness: Vec<f64> = scores.iter().map(|s| s.sharpness).collect();
    let combined = combined_scores(&brightness, &sharpness, weights)?;
    let best = argmax(&combined);
    Ok(KeyframeRecord {
        scene_index: scene.index,
        frame_index: indices[best],
        time_sec: times[best],
        brightness: brightness[best],
        sharpness: sharpness[best],
        combined_score: combined[best],
        candidate_count: indices.len(),
    })
}
