//! Scene boundary detection over a change-score series.
//!
//! Four strategies share one boundary rule: a candidate is a local maximum
//! of a score series above a threshold, and candidates are accepted
//! left-to-right only when they sit at least `minlen` sampled frames after
//! the previously accepted one. Boundary `b` cuts between frames `b` and
//! `b + 1`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame_io::{FrameSpec, VideoMeta};
use crate::metrics::{adaptive_series, smooth, MetricError, ScoreSeries};

#[derive(Debug, Error, PartialEq)]
pub enum DetectError {
    #[error("invalid detector parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Half-open run of sampled frames `[start_frame, end_frame)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub index: usize,
    pub start_frame: usize,
    pub end_frame: usize,
    pub start_sec: f64,
    pub end_sec: f64,
}

impl Scene {
    pub fn len(&self) -> usize {
        self.end_frame - self.start_frame
    }

    pub fn is_empty(&self) -> bool {
        self.end_frame <= self.start_frame
    }

    pub fn duration_sec(&self) -> f64 {
        self.end_sec - self.start_sec
    }

    pub fn contains(&self, frame: usize) -> bool {
        (self.start_frame..self.end_frame).contains(&frame)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorParams {
    pub threshold: f64,
    pub minlen_sec: f64,
    /// Odd moving-average length applied before peak picking (content only).
    pub smoothing_window: usize,
    /// Neighborhood half-width of the adaptive ratio.
    pub adaptive_window: usize,
    /// Raw content score an adaptive candidate must also exceed.
    pub adaptive_floor: f64,
    pub interval_sec: f64,
    pub fallback_min_scenes: usize,
}

impl Default for DetectorParams {
    fn default() -> Self {
        DetectorParams {
            threshold: 15.0,
            minlen_sec: 12.0,
            smoothing_window: 3,
            adaptive_window: 2,
            adaptive_floor: 3.0,
            interval_sec: 30.0,
            fallback_min_scenes: 3,
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<(), DetectError> {
        let bad = |msg: String| Err(DetectError::InvalidParams(msg));
        if !(self.threshold >= 0.0) {
            return bad(format!("threshold {} < 0", self.threshold));
        }
        if !(self.minlen_sec >= 0.0) {
            return bad(format!("minlen {} < 0", self.minlen_sec));
        }
        if !(self.interval_sec > 0.0) || !self.interval_sec.is_finite() {
            return bad(format!("interval {} must be positive", self.interval_sec));
        }
        if self.fallback_min_scenes < 1 {
            return bad("fallback_min_scenes must be at least 1".into());
        }
        if self.smoothing_window % 2 == 0 {
            return bad(format!(
                "smoothing window {} must be odd",
                self.smoothing_window
            ));
        }
        if self.adaptive_window == 0 {
            return bad("adaptive window must be at least 1".into());
        }
        if !(self.adaptive_floor >= 0.0) {
            return bad(format!("adaptive floor {} < 0", self.adaptive_floor));
        }
        Ok(())
    }

    pub fn minlen_frames(&self, sampling_fps: f64) -> usize {
        (self.minlen_sec * sampling_fps).round() as usize
    }
}

/// Which strategy produced a segmentation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UsedStrategy {
    #[serde(rename = "adaptive")]
    Adaptive,
    #[serde(rename = "content")]
    Content,
    #[serde(rename = "regular_split")]
    RegularSplit,
    #[serde(rename = "fallback:adaptive")]
    FallbackAdaptive,
    #[serde(rename = "fallback:content")]
    FallbackContent,
}

impl UsedStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            UsedStrategy::Adaptive => "adaptive",
            UsedStrategy::Content => "content",
            UsedStrategy::RegularSplit => "regular_split",
            UsedStrategy::FallbackAdaptive => "fallback:adaptive",
            UsedStrategy::FallbackContent => "fallback:content",
        }
    }
}

impl fmt::Display for UsedStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Score series a boundary search runs on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScoreKind {
    Content,
    Adaptive,
}

/// Left edges of plateaus that are strictly higher than both neighbors.
/// Positions outside the series count as lower; a plateau spanning the
/// whole series is not a peak.
pub fn local_maxima(scores: &[f64]) -> Vec<usize> {
    let n = scores.len();
    let mut peaks = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[j + 1] == scores[i] {
            j += 1;
        }
        let rises = i == 0 || scores[i - 1] < scores[i];
        let falls = j == n - 1 || scores[j + 1] < scores[j];
        if rises && falls && !(i == 0 && j == n - 1) {
            peaks.push(i);
        }
        i = j + 1;
    }
    peaks
}

/// Greedy spacing filter: keep a candidate when it is at least
/// `minlen_frames` past the last kept one (the first is measured from 0).
pub fn enforce_minlen(candidates: &[usize], minlen_frames: usize) -> Vec<usize> {
    let mut kept = Vec::new();
    let mut prev = 0usize;
    for &c in candidates {
        if kept.last() == Some(&c) {
            continue;
        }
        if c >= prev + minlen_frames {
            kept.push(c);
            prev = c;
        }
    }
    kept
}

/// Local maxima of `scores` above `threshold`, spaced by `minlen_frames`.
pub fn detect_boundaries(scores: &[f64], threshold: f64, minlen_frames: usize) -> Vec<usize> {
    let candidates: Vec<usize> = local_maxima(scores)
        .into_iter()
        .filter(|&t| scores[t] > threshold)
        .collect();
    enforce_minlen(&candidates, minlen_frames)
}

/// Boundary indices for `kind` under `params`.
pub fn boundaries(
    series: &ScoreSeries,
    kind: ScoreKind,
    params: &DetectorParams,
) -> Result<Vec<usize>, DetectError> {
    params.validate()?;
    let minlen = params.minlen_frames(series.sampling_fps);
    match kind {
        ScoreKind::Content => {
            let raw = &series.raw;
            let smoothed = smooth(raw, params.smoothing_window)?;
            let half = params.smoothing_window / 2;
            // Peaks are located on the smoothed series, then snapped to the
            // strongest raw pair under the smoothing window; that raw score
            // is what the threshold sees, so a lone hard cut is not diluted
            // by the averaging.
            let mut candidates: Vec<usize> = local_maxima(&smoothed)
                .into_iter()
                .map(|p| {
                    let lo = p.saturating_sub(half);
                    let hi = (p + half).min(raw.len() - 1);
                    (lo..=hi).fold(lo, |best, i| if raw[i] > raw[best] { i } else { best })
                })
                .filter(|&t| raw[t] > params.threshold)
                .collect();
            candidates.sort_unstable();
            candidates.dedup();
            Ok(enforce_minlen(&candidates, minlen))
        }
        ScoreKind::Adaptive => {
            let ratios = adaptive_series(series, params.adaptive_window)?;
            let candidates: Vec<usize> = local_maxima(&ratios)
                .into_iter()
                .filter(|&t| ratios[t] > params.threshold && series.raw[t] > params.adaptive_floor)
                .collect();
            Ok(enforce_minlen(&candidates, minlen))
        }
    }
}

/// Tiles `[0, frame_count)` with scenes split after each boundary.
pub fn scenes_from_boundaries(boundaries: &[usize], frame_count: usize, sampling_fps: f64) -> Vec<Scene> {
    let mut starts = vec![0usize];
    starts.extend(
        boundaries
            .iter()
            .map(|b| b + 1)
            .filter(|&s| s > 0 && s < frame_count),
    );
    starts.dedup();
    let mut scenes = Vec::with_capacity(starts.len());
    for (index, &start) in starts.iter().enumerate() {
        let end = starts.get(index + 1).copied().unwrap_or(frame_count.max(1));
        scenes.push(Scene {
            index,
            start_frame: start,
            end_frame: end,
            start_sec: start as f64 / sampling_fps,
            end_sec: end as f64 / sampling_fps,
        });
    }
    scenes
}

/// Clamps the last scene's end time to the true video duration.
pub fn clamp_to_duration(scenes: &mut [Scene], duration_sec: f64) {
    if let Some(last) = scenes.last_mut() {
        if last.end_sec > duration_sec && duration_sec > last.start_sec {
            last.end_sec = duration_sec;
        }
    }
}

/// True when `scenes` are sorted, gap-free, non-empty and cover exactly
/// `[0, frame_count)`.
pub fn tiles(scenes: &[Scene], frame_count: usize) -> bool {
    let mut expected_start = 0;
    for (i, scene) in scenes.iter().enumerate() {
        if scene.index != i || scene.start_frame != expected_start || scene.is_empty() {
            return false;
        }
        expected_start = scene.end_frame;
    }
    !scenes.is_empty() && expected_start == frame_count
}

pub fn detect_content(series: &ScoreSeries, params: &DetectorParams) -> Result<Vec<Scene>, DetectError> {
    let cuts = boundaries(series, ScoreKind::Content, params)?;
    Ok(scenes_from_boundaries(
        &cuts,
        series.frame_count(),
        series.sampling_fps,
    ))
}

pub fn detect_adaptive(series: &ScoreSeries, params: &DetectorParams) -> Result<Vec<Scene>, DetectError> {
    let cuts = boundaries(series, ScoreKind::Adaptive, params)?;
    Ok(scenes_from_boundaries(
        &cuts,
        series.frame_count(),
        series.sampling_fps,
    ))
}

/// Adaptive pass first; if it yields fewer than
/// `adaptive.fallback_min_scenes` scenes, the content pass wins regardless
/// of how many it finds.
pub fn detect_fallback(
    series: &ScoreSeries,
    adaptive: &DetectorParams,
    content: &DetectorParams,
) -> Result<(Vec<Scene>, UsedStrategy), DetectError> {
    content.validate()?;
    let first = detect_adaptive(series, adaptive)?;
    if first.len() >= adaptive.fallback_min_scenes {
        return Ok((first, UsedStrategy::FallbackAdaptive));
    }
    Ok((detect_content(series, content)?, UsedStrategy::FallbackContent))
}

/// A trailing piece shorter than this is merged into the previous scene.
pub const MIN_TRAILING_SEC: f64 = 1.0;

/// Fixed-interval split of a video of `meta.duration_sec`.
pub fn detect_regular(meta: &VideoMeta, spec: &FrameSpec, interval_sec: f64) -> Result<Vec<Scene>, DetectError> {
    regular_scenes(
        meta.duration_sec,
        spec.sampling_fps,
        spec.frame_count(meta.duration_sec),
        interval_sec,
    )
}

/// Fixed-interval split over an explicit sampled-frame count. Scene times are
/// exact multiples of the interval; frame bounds are the first sampled frame
/// at or after each time.
pub fn regular_scenes(
    duration_sec: f64,
    sampling_fps: f64,
    frame_count: usize,
    interval_sec: f64,
) -> Result<Vec<Scene>, DetectError> {
    if !(interval_sec > 0.0) || !interval_sec.is_finite() {
        return Err(DetectError::InvalidParams(format!(
            "interval {interval_sec} must be positive"
        )));
    }
    let frame_count = frame_count.max(1);
    let mut cut_times = Vec::new();
    let mut k = 1u64;
    loop {
        let t = k as f64 * interval_sec;
        if t >= duration_sec {
            break;
        }
        cut_times.push(t);
        k += 1;
    }
    if let Some(&last) = cut_times.last() {
        if duration_sec - last < MIN_TRAILING_SEC {
            cut_times.pop();
        }
    }

    let mut starts = vec![(0usize, 0.0f64)];
    for t in cut_times {
        let exact = t * sampling_fps;
        let frame = (exact - 1e-9 * exact.max(1.0)).ceil() as usize;
        if frame >= frame_count || frame <= starts.last().map_or(0, |s| s.0) {
            continue;
        }
        starts.push((frame, t));
    }
    Ok(starts
        .iter()
        .enumerate()
        .map(|(index, &(start_frame, start_sec))| {
            let (end_frame, end_sec) = starts
                .get(index + 1)
                .copied()
                .unwrap_or((frame_count, duration_sec));
            Scene {
                index,
                start_frame,
                end_frame,
                start_sec,
                end_sec,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(threshold: f64, minlen_sec: f64) -> DetectorParams {
        DetectorParams {
            threshold,
            minlen_sec,
            ..DetectorParams::default()
        }
    }

    fn bounds(scenes: &[Scene]) -> Vec<(f64, f64)> {
        scenes.iter().map(|s| (s.start_sec, s.end_sec)).collect()
    }

    #[test]
    fn boundary_rule_examples() {
        assert!(detect_boundaries(&[4.0; 10], 1.0, 0).is_empty());
        let s = [0.0, 0.0, 50.0, 0.0, 0.0, 0.0, 60.0, 0.0];
        assert_eq!(detect_boundaries(&s, 15.0, 0), vec![2, 6]);
        // Spacing is measured from frame 0, so the early peak at 2 is too
        // close to the start and the one at 6 survives.
        assert_eq!(detect_boundaries(&s, 15.0, 5), vec![6]);
        assert_eq!(detect_boundaries(&s, 15.0, 2), vec![2, 6]);
        assert_eq!(detect_boundaries(&s, 15.0, 3), vec![6]);
        assert_eq!(detect_boundaries(&s, 55.0, 0), vec![6]);
    }

    #[test]
    fn plateau_resolves_left() {
        assert_eq!(local_maxima(&[0.0, 3.0, 3.0, 3.0, 1.0]), vec![1]);
        assert_eq!(local_maxima(&[5.0, 1.0, 2.0]), vec![0, 2]);
        assert!(local_maxima(&[2.0, 2.0, 2.0]).is_empty());
        // Rising into a higher shoulder is not a peak.
        assert!(local_maxima(&[1.0, 2.0, 2.0, 3.0]) == vec![3]);
    }

    #[test]
    fn minlen_is_measured_from_zero_and_last_kept() {
        assert_eq!(enforce_minlen(&[2, 3, 7, 8, 12], 4), vec![7, 12]);
        assert_eq!(enforce_minlen(&[0, 0, 1], 0), vec![0, 1]);
    }

    fn black_white_series() -> ScoreSeries {
        let mut raw = vec![0.0; 19];
        raw[9] = 85.0;
        ScoreSeries::new(raw, 3, 2.0).unwrap()
    }

    #[test]
    fn content_detects_hard_cut() {
        let scenes = detect_content(&black_white_series(), &params(15.0, 0.0)).unwrap();
        assert_eq!(scenes.len(), 2);
        assert_eq!(scenes[1].start_frame, 10);
        assert_eq!(bounds(&scenes), vec![(0.0, 5.0), (5.0, 10.0)]);
    }

    #[test]
    fn content_unreachable_threshold_gives_one_scene() {
        let scenes = detect_content(&black_white_series(), &params(255.0, 0.0)).unwrap();
        assert_eq!(scenes.len(), 1);
        let flat = ScoreSeries::new(vec![0.0; 11], 3, 2.0).unwrap();
        assert_eq!(detect_content(&flat, &params(15.0, 0.0)).unwrap().len(), 1);
    }

    #[test]
    fn single_frame_video_is_one_scene() {
        let series = ScoreSeries::new(vec![], 3, 2.0).unwrap();
        let scenes = detect_content(&series, &params(15.0, 0.0)).unwrap();
        assert_eq!(scenes.len(), 1);
        assert_eq!((scenes[0].start_frame, scenes[0].end_frame), (0, 1));
        assert_eq!(detect_adaptive(&series, &params(1.0, 0.0)).unwrap().len(), 1);
    }

    #[test]
    fn adaptive_examples() {
        let constant = ScoreSeries::unsmoothed(vec![7.0; 12], 2.0);
        assert_eq!(detect_adaptive(&constant, &params(1.2, 0.0)).unwrap().len(), 1);

        let spike = ScoreSeries::unsmoothed(vec![1.0, 1.0, 1.0, 40.0, 1.0, 1.0, 1.0], 2.0);
        assert_eq!(
            boundaries(&spike, ScoreKind::Adaptive, &params(1.4, 0.0)).unwrap(),
            vec![3]
        );
        let scenes = detect_adaptive(&spike, &params(1.4, 0.0)).unwrap();
        assert_eq!(scenes.len(), 2);
        assert_eq!(scenes[1].start_frame, 4);

        let zeros = ScoreSeries::unsmoothed(vec![0.0; 9], 2.0);
        assert_eq!(detect_adaptive(&zeros, &params(1.0, 0.0)).unwrap().len(), 1);
    }

    #[test]
    fn adaptive_floor_suppresses_static_flicker() {
        let flicker = ScoreSeries::unsmoothed(vec![0.1, 0.1, 2.5, 0.1, 0.1], 2.0);
        assert_eq!(detect_adaptive(&flicker, &params(1.4, 0.0)).unwrap().len(), 1);
        let lowered = DetectorParams {
            adaptive_floor: 1.0,
            ..params(1.4, 0.0)
        };
        assert_eq!(detect_adaptive(&flicker, &lowered).unwrap().len(), 2);
    }

    #[test]
    fn fallback_keeps_adaptive_when_reliable() {
        let mut raw = vec![1.0; 40];
        for &i in &[5, 12, 20, 28, 35] {
            raw[i] = 50.0;
        }
        let series = ScoreSeries::new(raw, 3, 2.0).unwrap();
        let (scenes, used) =
            detect_fallback(&series, &params(1.4, 0.0), &params(15.0, 0.0)).unwrap();
        assert_eq!(used, UsedStrategy::FallbackAdaptive);
        assert_eq!(scenes.len(), 6);
    }

    #[test]
    fn fallback_switches_to_content() {
        // Steady large change everywhere: ratios hover at 1, content peaks
        // still clear the absolute threshold.
        let raw: Vec<f64> = (0..40).map(|i| 40.0 + ((i * 7) % 5) as f64).collect();
        let series = ScoreSeries::new(raw, 1, 2.0).unwrap();
        let (scenes, used) =
            detect_fallback(&series, &params(1.4, 0.0), &params(15.0, 2.0)).unwrap();
        assert_eq!(used, UsedStrategy::FallbackContent);
        assert!(scenes.len() >= 3);
        assert_eq!(
            detect_adaptive(&series, &params(1.4, 0.0)).unwrap().len(),
            1
        );
    }

    #[test]
    fn fallback_does_not_loop_when_both_undersegment() {
        let series = ScoreSeries::new(vec![0.0; 30], 3, 2.0).unwrap();
        let (scenes, used) =
            detect_fallback(&series, &params(1.4, 0.0), &params(15.0, 0.0)).unwrap();
        assert_eq!(used, UsedStrategy::FallbackContent);
        assert_eq!(scenes.len(), 1);
    }

    fn regular(duration: f64) -> Vec<Scene> {
        let meta = VideoMeta {
            duration_sec: duration,
            source_path: "x".into(),
            source_fps: None,
        };
        detect_regular(&meta, &FrameSpec::default(), 30.0).unwrap()
    }

    #[test]
    fn regular_split_examples() {
        assert_eq!(
            bounds(&regular(100.0)),
            vec![(0.0, 30.0), (30.0, 60.0), (60.0, 90.0), (90.0, 100.0)]
        );
        assert_eq!(
            bounds(&regular(90.5)),
            vec![(0.0, 30.0), (30.0, 60.0), (60.0, 90.5)]
        );
        assert_eq!(bounds(&regular(20.0)), vec![(0.0, 20.0)]);
        let long = regular(14400.0);
        assert_eq!(long.len(), 480);
        assert!(tiles(&long, 28800));
        assert!(long.iter().all(|s| s.duration_sec() == 30.0));
        assert_eq!(long[1].start_frame, 60);
    }

    #[test]
    fn invalid_params_rejected() {
        let series = ScoreSeries::new(vec![0.0; 3], 3, 2.0).unwrap();
        let even = DetectorParams {
            smoothing_window: 2,
            ..DetectorParams::default()
        };
        assert!(detect_content(&series, &even).is_err());
        assert!(detect_content(&series, &params(-1.0, 0.0)).is_err());
        assert!(regular_scenes(10.0, 2.0, 20, 0.0).is_err());
    }

    fn series_strategy() -> impl Strategy<Value = ScoreSeries> {
        (
            proptest::collection::vec(prop_oneof![Just(0.0), 0.0f64..100.0], 0..120),
            prop_oneof![Just(0.5), Just(1.0), Just(2.0), Just(3.0)],
        )
            .prop_map(|(raw, fps)| ScoreSeries::unsmoothed(raw, fps))
    }

    fn params_strategy() -> impl Strategy<Value = DetectorParams> {
        (0.0f64..60.0, 0.0f64..20.0, 0usize..4, 1usize..4, 0.0f64..5.0, 1usize..5).prop_map(
            |(threshold, minlen_sec, half, aw, floor, fms)| DetectorParams {
                threshold,
                minlen_sec,
                smoothing_window: 2 * half + 1,
                adaptive_window: aw,
                adaptive_floor: floor,
                interval_sec: 30.0,
                fallback_min_scenes: fms,
            },
        )
    }

    proptest! {
        #[test]
        fn detectors_always_tile(series in series_strategy(), p in params_strategy()) {
            let n = series.frame_count();
            let content = detect_content(&series, &p).unwrap();
            prop_assert!(tiles(&content, n));
            let adaptive = detect_adaptive(&series, &p).unwrap();
            prop_assert!(tiles(&adaptive, n));
            let (fallback, _) = detect_fallback(&series, &p, &p).unwrap();
            prop_assert!(tiles(&fallback, n));
        }

        #[test]
        fn minlen_spacing_holds(series in series_strategy(), p in params_strategy()) {
            let scenes = detect_content(&series, &p).unwrap();
            let floor = p.minlen_sec - 1.0 / series.sampling_fps;
            for s in &scenes[..scenes.len() - 1] {
                prop_assert!(s.duration_sec() >= floor - 1e-9);
            }
        }

        #[test]
        fn content_count_monotone_in_threshold(series in series_strategy(), p in params_strategy(), bump in 0.0f64..40.0) {
            let low = detect_content(&series, &p).unwrap().len();
            let high = detect_content(&series, &DetectorParams { threshold: p.threshold + bump, ..p }).unwrap().len();
            prop_assert!(high <= low);
        }

        #[test]
        fn content_count_monotone_in_minlen(series in series_strategy(), p in params_strategy(), bump in 0.0f64..20.0) {
            let low = detect_content(&series, &p).unwrap().len();
            let high = detect_content(&series, &DetectorParams { minlen_sec: p.minlen_sec + bump, ..p }).unwrap().len();
            prop_assert!(high <= low);
        }

        #[test]
        fn detection_is_deterministic(series in series_strategy(), p in params_strategy()) {
            prop_assert_eq!(detect_content(&series, &p).unwrap(), detect_content(&series, &p).unwrap());
            prop_assert_eq!(detect_adaptive(&series, &p).unwrap(), detect_adaptive(&series, &p).unwrap());
        }

        #[test]
        fn regular_split_is_exact(duration in 0.5f64..2000.0, interval in 1.0f64..120.0) {
            let fps = 2.0;
            let n = FrameSpec::default().frame_count(duration);
            let scenes = regular_scenes(duration, fps, n, interval).unwrap();
            prop_assert!(tiles(&scenes, n));
            for s in &scenes[..scenes.len() - 1] {
                prop_assert!((s.duration_sec() - interval).abs() < 1e-9);
            }
            prop_assert_eq!(scenes.last().unwrap().end_sec, duration);
        }
    }
}
