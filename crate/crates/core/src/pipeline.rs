//! End-to-end run over one video or a batch: probe, pick a policy, score
//! every adjacent frame pair in one streaming pass, detect scenes, then
//! revisit only the keyframe candidates.

use std::collections::BTreeMap;
use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::{
    clamp_to_duration, detect_adaptive, detect_content, detect_fallback, regular_scenes, DetectError, DetectorParams,
    Scene, UsedStrategy,
};
use crate::exec::Execution;
use crate::frame_io::{DecoderConfig, Frame, FrameError, FrameSpec, VideoMeta, VideoSource};
use crate::keyframes::{extract_keyframe, sample_indices, CandidateFetch, KeyframeError, KeyframeRecord, KeyframeWeights};
use crate::metrics::{HsvImage, ScoreSeries};
use crate::policy::{resolve, PolicySpec, PolicyTable, Strategy, StrategyKind};

pub const MANIFEST_FILE: &str = "scenes.json";

/// Frames converted to HSV together in the scoring pass.
const SCORE_CHUNK: usize = 64;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error("invalid options: {0}")]
    InvalidOptions(String),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot encode output: {0}")]
    Encode(String),
}

impl PipelineError {
    pub fn is_unreadable_source(&self) -> bool {
        matches!(self, PipelineError::Frame(FrameError::UnreadableSource { .. }))
    }
}

/// Explicit parameter overrides applied on top of the resolved policy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamOverrides {
    pub threshold: Option<f64>,
    pub minlen_sec: Option<f64>,
    pub interval_sec: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub frame_spec: FrameSpec,
    pub policy: PolicyTable,
    /// `None` picks by duration.
    pub strategy: Option<StrategyKind>,
    pub overrides: ParamOverrides,
    pub weights: KeyframeWeights,
    pub thumbnails: bool,
    pub decoder: DecoderConfig,
    pub execution: Execution,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            frame_spec: FrameSpec::default(),
            policy: PolicyTable::default(),
            strategy: None,
            overrides: ParamOverrides::default(),
            weights: KeyframeWeights::default(),
            thumbnails: true,
            decoder: DecoderConfig::default(),
            execution: Execution::default(),
        }
    }
}

impl RunOptions {
    pub fn validate(&self) -> Result<(), PipelineError> {
        self.frame_spec.validate()?;
        self.policy
            .validate()
            .map_err(|e| PipelineError::InvalidOptions(e.to_string()))?;
        self.weights
            .validate()
            .map_err(|e| PipelineError::InvalidOptions(e.to_string()))?;
        Ok(())
    }

    /// Policy for a video of `duration_sec` after forcing and overrides.
    pub fn policy_for(&self, duration_sec: f64) -> Result<PolicySpec, PipelineError> {
        let mut spec = match self.strategy {
            None => resolve(duration_sec, &self.policy),
            Some(kind) => {
                let rule = self
                    .policy
                    .first_of(kind)
                    .cloned()
                    .or_else(|| PolicyTable::default().first_of(kind).cloned())
                    .ok_or_else(|| PipelineError::InvalidOptions(format!("no rule for {kind}")))?;
                PolicySpec {
                    strategy: rule.strategy,
                    matched_rule: "forced".into(),
                }
            }
        };
        let o = self.overrides;
        if let Some(minlen) = o.minlen_sec {
            spec.strategy.map_params(|p| p.minlen_sec = minlen);
        }
        match &mut spec.strategy {
            Strategy::Adaptive(p) | Strategy::Content(p) => {
                if let Some(t) = o.threshold {
                    p.threshold = t;
                }
            }
            Strategy::Fallback { content, .. } => {
                if let Some(t) = o.threshold {
                    content.threshold = t;
                }
            }
            Strategy::RegularSplit(p) => {
                if let Some(i) = o.interval_sec {
                    p.interval_sec = i;
                }
            }
        }
        spec.strategy.validate()?;
        Ok(spec)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub frames_read: usize,
    pub pairs_scored: usize,
    pub candidates_scored: usize,
    pub fallback_triggered: bool,
    /// Fraction of scenes with a keyframe, in `[0, 1]`.
    pub keyframe_coverage: f64,
    pub warnings: Vec<String>,
}

/// Wall-clock seconds per stage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub probe: f64,
    pub score: f64,
    pub detect: f64,
    pub keyframes: f64,
}

impl StageTiming {
    pub fn total(&self) -> f64 {
        self.probe + self.score + self.detect + self.keyframes
    }
}

#[derive(Clone, Debug)]
pub struct SegmentationResult {
    pub video: VideoMeta,
    pub spec: FrameSpec,
    pub policy: PolicySpec,
    pub used_strategy: UsedStrategy,
    pub scenes: Vec<Scene>,
    /// At most one per scene, ordered by scene.
    pub keyframes: Vec<KeyframeRecord>,
    pub diagnostics: Diagnostics,
    pub timing: StageTiming,
    /// PNG-encoded winners keyed by scene index.
    pub thumbnails: BTreeMap<usize, Vec<u8>>,
}

impl SegmentationResult {
    pub fn keyframe_for(&self, scene_index: usize) -> Option<&KeyframeRecord> {
        self.keyframes.iter().find(|k| k.scene_index == scene_index)
    }

    pub fn scene_count(&self) -> usize {
        self.scenes.len()
    }
}

fn since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

/// Streams every frame once and scores each adjacent pair.
fn score_pass(source: &VideoSource, exec: Execution, warnings: &mut Vec<String>) -> Result<(Vec<f64>, usize), PipelineError> {
    let mut stream = source.stream()?;
    let mut raw = Vec::with_capacity(source.expected_frames().saturating_sub(1));
    let mut frames_read = 0usize;
    let mut previous: Option<HsvImage> = None;
    let mut chunk: Vec<Frame> = Vec::with_capacity(SCORE_CHUNK);
    loop {
        chunk.clear();
        chunk.extend(stream.by_ref().take(SCORE_CHUNK));
        if chunk.is_empty() {
            break;
        }
        frames_read += chunk.len();
        let hsv = exec.map(&chunk, HsvImage::from_frame);
        let head = previous.take();
        let pairs = exec.map_range(hsv.len(), |i| match i {
            0 => head.as_ref().map(|prev| prev.distance(&hsv[0])),
            _ => Some(hsv[i - 1].distance(&hsv[i])),
        });
        for score in pairs.into_iter().flatten() {
            raw.push(score.map_err(|e| PipelineError::InvalidOptions(e.to_string()))?);
        }
        previous = hsv.into_iter().last();
    }
    if let Some(err) = stream.take_error() {
        log::warn!("{}: {err}", source.meta().source_path);
        warnings.push(err.to_string());
    }
    if frames_read == 0 {
        return Err(FrameError::UnreadableSource {
            path: source.meta().source_path.clone(),
            reason: "no frames could be decoded".into(),
        }
        .into());
    }
    Ok((raw, frames_read))
}

fn detect(
    policy: &PolicySpec,
    series: &ScoreSeries,
    video: &VideoMeta,
) -> Result<(Vec<Scene>, UsedStrategy), PipelineError> {
    let (mut scenes, used) = match &policy.strategy {
        Strategy::Adaptive(p) => (detect_adaptive(series, p)?, UsedStrategy::Adaptive),
        Strategy::Content(p) => (detect_content(series, p)?, UsedStrategy::Content),
        Strategy::Fallback { adaptive, content } => detect_fallback(series, adaptive, content)?,
        Strategy::RegularSplit(p) => (
            regular_scenes(
                video.duration_sec,
                series.sampling_fps,
                series.frame_count(),
                p.interval_sec,
            )?,
            UsedStrategy::RegularSplit,
        ),
    };
    clamp_to_duration(&mut scenes, video.duration_sec);
    Ok((scenes, used))
}

fn encode_png(frame: &Frame) -> Result<Vec<u8>, PipelineError> {
    let img = image::RgbImage::from_raw(frame.width, frame.height, frame.pixels.clone())
        .ok_or_else(|| PipelineError::Encode("frame buffer does not match its size".into()))?;
    let mut bytes = Vec::new();
    img.write_to(&mut Cursor::new(&mut bytes), image::ImageFormat::Png)
        .map_err(|e| PipelineError::Encode(e.to_string()))?;
    Ok(bytes)
}

type SceneKeyframe = Result<(KeyframeRecord, Option<Vec<u8>>), String>;

fn keyframe_from<F: CandidateFetch + ?Sized>(scene: &Scene, frames: &F, options: &RunOptions) -> SceneKeyframe {
    let record = extract_keyframe(scene, frames, &options.weights).map_err(|e| e.to_string())?;
    let thumb = if options.thumbnails {
        let winner = frames
            .frame(record.frame_index)
            .map_err(|e| KeyframeError::from(e).to_string())?;
        Some(encode_png(&winner).map_err(|e| e.to_string())?)
    } else {
        None
    };
    Ok((record, thumb))
}

/// Second pass: only the sampled candidates of each scene are touched.
fn keyframe_pass(source: &VideoSource, scenes: &[Scene], options: &RunOptions) -> Vec<SceneKeyframe> {
    match source {
        VideoSource::Raw(seq) => options.execution.map(scenes, |scene| keyframe_from(scene, seq, options)),
        VideoSource::Decoded(_) => {
            let mut stream = match source.stream() {
                Ok(s) => s,
                Err(e) => return scenes.iter().map(|_| Err(e.to_string())).collect(),
            };
            let mut out = Vec::with_capacity(scenes.len());
            let mut buffer: Vec<Frame> = Vec::new();
            let mut current = 0;
            let mut wanted = scenes
                .first()
                .map(|s| sample_indices(s, options.weights.n_candidates))
                .unwrap_or_default();
            for frame in stream.by_ref() {
                while current < scenes.len() && frame.index >= scenes[current].end_frame {
                    out.push(keyframe_from(&scenes[current], buffer.as_slice(), options));
                    buffer.clear();
                    current += 1;
                    wanted = scenes
                        .get(current)
                        .map(|s| sample_indices(s, options.weights.n_candidates))
                        .unwrap_or_default();
                }
                if current >= scenes.len() {
                    break;
                }
                if wanted.binary_search(&frame.index).is_ok() {
                    buffer.push(frame);
                }
            }
            while current < scenes.len() {
                out.push(keyframe_from(&scenes[current], buffer.as_slice(), options));
                buffer.clear();
                current += 1;
            }
            out
        }
    }
}

/// Segments one video.
pub fn run(source: &Path, options: &RunOptions) -> Result<SegmentationResult, PipelineError> {
    options.validate()?;
    let mut timing = StageTiming::default();
    let mut warnings = Vec::new();

    let t = Instant::now();
    let video_source = VideoSource::open(source, &options.frame_spec, &options.decoder)?;
    let video = video_source.meta().clone();
    let spec = video_source.spec();
    let policy = options.policy_for(video.duration_sec)?;
    timing.probe = since(t);

    let t = Instant::now();
    let (raw, frames_read) = score_pass(&video_source, options.execution, &mut warnings)?;
    let pairs_scored = raw.len();
    timing.score = since(t);

    let t = Instant::now();
    let series = ScoreSeries::new(raw, DetectorParams::default().smoothing_window, spec.sampling_fps)
        .map_err(DetectError::from)?;
    let (scenes, used_strategy) = detect(&policy, &series, &video)?;
    timing.detect = since(t);

    let t = Instant::now();
    let mut keyframes = Vec::with_capacity(scenes.len());
    let mut thumbnails = BTreeMap::new();
    for (scene, outcome) in scenes.iter().zip(keyframe_pass(&video_source, &scenes, options)) {
        match outcome {
            Ok((record, thumb)) => {
                if let Some(bytes) = thumb {
                    thumbnails.insert(scene.index, bytes);
                }
                keyframes.push(record);
            }
            Err(reason) => {
                log::warn!("{}: scene {}: {reason}", video.source_path, scene.index);
                warnings.push(format!("scene {}: {reason}", scene.index));
            }
        }
    }
    timing.keyframes = since(t);

    let diagnostics = Diagnostics {
        frames_read,
        pairs_scored,
        candidates_scored: keyframes.iter().map(|k| k.candidate_count).sum(),
        fallback_triggered: used_strategy == UsedStrategy::FallbackContent,
        keyframe_coverage: keyframes.len() as f64 / scenes.len() as f64,
        warnings,
    };
    Ok(SegmentationResult {
        video,
        spec,
        policy,
        used_strategy,
        scenes,
        keyframes,
        diagnostics,
        timing,
        thumbnails,
    })
}

/// Runs every source with at most `parallelism` videos in flight. One
/// failure never stops the others; results keep input order.
pub fn run_batch(
    sources: &[PathBuf],
    parallelism: usize,
    options: &RunOptions,
) -> Result<Vec<Result<SegmentationResult, PipelineError>>, PipelineError> {
    if parallelism == 0 {
        return Err(PipelineError::InvalidOptions(
            "parallelism must be at least 1".into(),
        ));
    }
    if !options.execution.is_parallel() || parallelism == 1 || sources.len() <= 1 {
        return Ok(sources.iter().map(|s| run(s, options)).collect());
    }
    // Workers pull the next source from a shared cursor; each run still
    // fans its frame work out over the global pool.
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<SegmentationResult, PipelineError>>>> =
        sources.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..parallelism.min(sources.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(source) = sources.get(i) else { break };
                let outcome = run(source, options);
                *slots[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(outcome);
            });
        }
    });
    Ok(slots
        .into_iter()
        .map(|slot| {
            slot.into_inner()
                .unwrap_or_else(|e| e.into_inner())
                .unwrap_or_else(|| Err(PipelineError::InvalidOptions("worker exited early".into())))
        })
        .collect())
}

/// Unique, filesystem-safe output directory names for `sources`.
pub fn output_names(sources: &[PathBuf]) -> Vec<String> {
    let mut seen = std::collections::HashMap::<String, usize>::new();
    sources
        .iter()
        .map(|p| {
            let stem = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .filter(|s| !s.is_empty())
                .unwrap_or_else(|| "video".into());
            let n = seen.entry(stem.clone()).or_insert(0);
            *n += 1;
            if *n == 1 {
                stem
            } else {
                format!("{stem}-{n}")
            }
        })
        .collect()
}

// ----- scenes.json -----

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoBlock {
    pub path: String,
    pub duration_sec: f64,
    pub sampling_fps: f64,
    pub frame_width: u32,
    pub frame_height: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyBlock {
    pub strategy: StrategyKind,
    pub used_strategy: UsedStrategy,
    pub matched_rule: String,
    pub params: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeyframeBlock {
    pub frame_index: usize,
    pub time_sec: f64,
    pub brightness: f64,
    pub sharpness: f64,
    pub combined_score: f64,
    pub candidate_count: usize,
    pub thumbnail: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneBlock {
    pub index: usize,
    pub start_frame: usize,
    pub end_frame: usize,
    pub start_sec: f64,
    pub end_sec: f64,
    pub keyframe: Option<KeyframeBlock>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsBlock {
    pub frames_read: usize,
    pub pairs_scored: usize,
    pub candidates_scored: usize,
    pub fallback_triggered: bool,
    pub keyframe_coverage: f64,
    pub warnings: Vec<String>,
}

/// The `scenes.json` document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenesDocument {
    pub video: VideoBlock,
    pub policy: PolicyBlock,
    pub scenes: Vec<SceneBlock>,
    pub diagnostics: DiagnosticsBlock,
}

impl ScenesDocument {
    pub fn to_scenes(&self) -> Vec<Scene> {
        self.scenes
            .iter()
            .map(|s| Scene {
                index: s.index,
                start_frame: s.start_frame,
                end_frame: s.end_frame,
                start_sec: s.start_sec,
                end_sec: s.end_sec,
            })
            .collect()
    }

    pub fn read(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| PipelineError::Encode(e.to_string()))
    }
}

pub fn thumbnail_name(scene_index: usize) -> String {
    format!("scene_{scene_index:04}.png")
}

fn strategy_params(strategy: &Strategy) -> serde_json::Value {
    let mut value = serde_json::to_value(strategy).unwrap_or(serde_json::Value::Null);
    if let Some(map) = value.as_object_mut() {
        map.remove("strategy");
    }
    value
}

/// Builds the document for `result`; `thumbnails_written` decides whether
/// keyframes reference a thumbnail file.
pub fn document(result: &SegmentationResult, thumbnails_written: bool) -> ScenesDocument {
    ScenesDocument {
        video: VideoBlock {
            path: result.video.source_path.clone(),
            duration_sec: result.video.duration_sec,
            sampling_fps: result.spec.sampling_fps,
            frame_width: result.spec.width,
            frame_height: result.spec.height,
        },
        policy: PolicyBlock {
            strategy: result.policy.kind(),
            used_strategy: result.used_strategy,
            matched_rule: result.policy.matched_rule.clone(),
            params: strategy_params(&result.policy.strategy),
        },
        scenes: result
            .scenes
            .iter()
            .map(|s| SceneBlock {
                index: s.index,
                start_frame: s.start_frame,
                end_frame: s.end_frame,
                start_sec: s.start_sec,
                end_sec: s.end_sec,
                keyframe: result.keyframe_for(s.index).map(|k| KeyframeBlock {
                    frame_index: k.frame_index,
                    time_sec: k.time_sec,
                    brightness: k.brightness,
                    sharpness: k.sharpness,
                    combined_score: k.combined_score,
                    candidate_count: k.candidate_count,
                    thumbnail: (thumbnails_written && result.thumbnails.contains_key(&s.index))
                        .then(|| thumbnail_name(s.index)),
                }),
            })
            .collect(),
        diagnostics: DiagnosticsBlock {
            frames_read: result.diagnostics.frames_read,
            pairs_scored: result.diagnostics.pairs_scored,
            candidates_scored: result.diagnostics.candidates_scored,
            fallback_triggered: result.diagnostics.fallback_triggered,
            keyframe_coverage: result.diagnostics.keyframe_coverage,
            warnings: result.diagnostics.warnings.clone(),
        },
    }
}

/// Writes `scenes.json` and one PNG per available thumbnail into `out_dir`.
pub fn write_metadata(result: &SegmentationResult, out_dir: &Path) -> Result<PathBuf, PipelineError> {
    std::fs::create_dir_all(out_dir)?;
    for (scene, bytes) in &result.thumbnails {
        std::fs::write(out_dir.join(thumbnail_name(*scene)), bytes)?;
    }
    let doc = document(result, true);
    let mut json = serde_json::to_string_pretty(&doc).map_err(|e| PipelineError::Encode(e.to_string()))?;
    json.push('\n');
    let path = out_dir.join(MANIFEST_FILE);
    std::fs::write(&path, json)?;
    Ok(path)
}
