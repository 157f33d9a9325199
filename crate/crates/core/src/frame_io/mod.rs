//! Frame ingestion: a uniform stream of fixed-size RGB frames sampled at a
//! capped rate, read either from an external decoder subprocess or from an
//! on-disk raw-frame sequence.

mod decoder;
mod raw;
mod synthetic;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;

pub use decoder::{DecodedVideo, DecoderConfig};
pub use raw::{RawMeta, RawSequence, META_FILE};
pub use synthetic::{generate_synthetic, Block, Fill, SyntheticSequence};

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("cannot read source {path}: {reason}")]
    UnreadableSource { path: String, reason: String },
    #[error("decoder stream ended after {got} of {expected} frames")]
    TruncatedStream { expected: usize, got: usize },
    #[error("invalid frame spec: {0}")]
    InvalidSpec(String),
    #[error("frame {index} is not available: {reason}")]
    MissingFrame { index: usize, reason: String },
    #[error("synthetic sequence needs at least one block with positive duration")]
    InvalidBlocks,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = FrameError> = std::result::Result<T, E>;

/// Target geometry and sampling rate of the frame stream.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameSpec {
    pub width: u32,
    pub height: u32,
    pub sampling_fps: f64,
}

impl Default for FrameSpec {
    fn default() -> Self {
        FrameSpec {
            width: 256,
            height: 144,
            sampling_fps: 2.0,
        }
    }
}

impl FrameSpec {
    pub const MIN_SIDE: u32 = 16;

    pub fn validate(&self) -> Result<()> {
        if self.width < Self::MIN_SIDE || self.height < Self::MIN_SIDE {
            return Err(FrameError::InvalidSpec(format!(
                "frame size {}x{} is below the {min}x{min} minimum",
                self.width,
                self.height,
                min = Self::MIN_SIDE
            )));
        }
        if !(self.sampling_fps.is_finite() && self.sampling_fps > 0.0) {
            return Err(FrameError::InvalidSpec(format!(
                "sampling fps must be positive, got {}",
                self.sampling_fps
            )));
        }
        Ok(())
    }

    /// Bytes in one interleaved RGB frame.
    pub fn frame_len(&self) -> usize {
        self.width as usize * self.height as usize * 3
    }

    /// Number of sampled frames for a video of `duration_sec`:
    /// `ceil(duration * fps)`, never less than one.
    pub fn frame_count(&self, duration_sec: f64) -> usize {
        let exact = duration_sec * self.sampling_fps;
        // Absorb representation noise such as 3 * 0.1 * 10 = 3.0000000000000004.
        let count = (exact - 1e-9 * exact.abs().max(1.0)).ceil();
        (count.max(1.0)) as usize
    }

    pub fn time_of(&self, index: usize) -> f64 {
        index as f64 / self.sampling_fps
    }
}

/// One decoded, resized sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub index: usize,
    pub time_sec: f64,
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl Frame {
    pub fn new(index: usize, time_sec: f64, width: u32, height: u32, pixels: Vec<u8>) -> Self {
        debug_assert_eq!(pixels.len(), width as usize * height as usize * 3);
        Frame {
            index,
            time_sec,
            width,
            height,
            pixels,
        }
    }

    /// A frame filled with one color.
    pub fn solid(index: usize, time_sec: f64, width: u32, height: u32, rgb: [u8; 3]) -> Self {
        let pixels = rgb
            .iter()
            .copied()
            .cycle()
            .take(width as usize * height as usize * 3)
            .collect();
        Frame::new(index, time_sec, width, height, pixels)
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn rgb(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.pixels.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub duration_sec: f64,
    pub source_path: String,
    pub source_fps: Option<f64>,
}

/// A probed video, ready to be streamed (possibly several times).
#[derive(Debug)]
pub enum VideoSource {
    Raw(RawSequence),
    Decoded(DecodedVideo),
}

impl VideoSource {
    /// Probes `path`. A directory holding [`META_FILE`] is read as a raw-frame
    /// sequence and defines its own geometry; anything else is handed to the
    /// external decoder, which scales to `spec`.
    pub fn open(path: &Path, spec: &FrameSpec, decoder: &DecoderConfig) -> Result<Self> {
        if path.is_dir() {
            return RawSequence::open(path).map(VideoSource::Raw);
        }
        if !path.is_file() {
            return Err(FrameError::UnreadableSource {
                path: path.display().to_string(),
                reason: "no such file or directory".into(),
            });
        }
        spec.validate()?;
        DecodedVideo::probe(path, spec, decoder).map(VideoSource::Decoded)
    }

    pub fn meta(&self) -> &VideoMeta {
        match self {
            VideoSource::Raw(raw) => raw.video_meta(),
            VideoSource::Decoded(dec) => dec.meta(),
        }
    }

    /// The geometry and rate frames will actually arrive with.
    pub fn spec(&self) -> FrameSpec {
        match self {
            VideoSource::Raw(raw) => raw.spec(),
            VideoSource::Decoded(dec) => dec.spec(),
        }
    }

    pub fn expected_frames(&self) -> usize {
        match self {
            VideoSource::Raw(raw) => raw.meta().frame_count,
            VideoSource::Decoded(dec) => dec.expected_frames(),
        }
    }

    pub fn stream(&self) -> Result<FrameStream> {
        match self {
            VideoSource::Raw(raw) => Ok(FrameStream::raw(raw.clone())),
            VideoSource::Decoded(dec) => dec.stream().map(FrameStream::decoded),
        }
    }

    /// Fetches a sparse set of frames. Raw sequences are random access; decoded
    /// sources are re-streamed once, keeping only the requested indices.
    pub fn fetch(&self, indices: &[usize], exec: Execution) -> Result<BTreeMap<usize, Frame>> {
        match self {
            VideoSource::Raw(raw) => exec
                .map(indices, |&i| raw.read_frame(i).map(|f| (i, f)))
                .into_iter()
                .collect(),
            VideoSource::Decoded(_) => {
                let wanted: std::collections::BTreeSet<usize> = indices.iter().copied().collect();
                let last = match wanted.iter().next_back() {
                    Some(&last) => last,
                    None => return Ok(BTreeMap::new()),
                };
                let mut stream = self.stream()?;
                let mut out = BTreeMap::new();
                for frame in stream.by_ref() {
                    let index = frame.index;
                    if wanted.contains(&index) {
                        out.insert(index, frame);
                    }
                    if index >= last {
                        break;
                    }
                }
                for &i in &wanted {
                    if !out.contains_key(&i) {
                        return Err(FrameError::MissingFrame {
                            index: i,
                            reason: "decoder stopped before reaching it".into(),
                        });
                    }
                }
                Ok(out)
            }
        }
    }
}

/// Probes `source` and starts streaming it.
pub fn open_stream(source: &Path, spec: &FrameSpec) -> Result<(FrameStream, VideoMeta)> {
    let video = VideoSource::open(source, spec, &DecoderConfig::default())?;
    let meta = video.meta().clone();
    Ok((video.stream()?, meta))
}

enum StreamInner {
    Raw { seq: RawSequence, next: usize },
    Decoded(decoder::DecoderStream),
}

/// Single-consumer iterator over sampled frames.
///
/// A stream that ends early records a [`FrameError::TruncatedStream`];
/// frames already yielded stay valid.
pub struct FrameStream {
    inner: StreamInner,
    error: Option<FrameError>,
    done: bool,
}

impl FrameStream {
    fn raw(seq: RawSequence) -> Self {
        FrameStream {
            inner: StreamInner::Raw { seq, next: 0 },
            error: None,
            done: false,
        }
    }

    fn decoded(stream: decoder::DecoderStream) -> Self {
        FrameStream {
            inner: StreamInner::Decoded(stream),
            error: None,
            done: false,
        }
    }

    /// Error that terminated the stream early, if any.
    pub fn error(&self) -> Option<&FrameError> {
        self.error.as_ref()
    }

    pub fn take_error(&mut self) -> Option<FrameError> {
        self.error.take()
    }
}

impl Iterator for FrameStream {
    type Item = Frame;

    fn next(&mut self) -> Option<Frame> {
        if self.done {
            return None;
        }
        let item = match &mut self.inner {
            StreamInner::Raw { seq, next } => {
                if *next >= seq.meta().frame_count {
                    Ok(None)
                } else {
                    match seq.read_frame(*next) {
                        Ok(frame) => {
                            *next += 1;
                            Ok(Some(frame))
                        }
                        Err(err) => {
                            log::warn!("raw sequence ends early: {err}");
                            Err(FrameError::TruncatedStream {
                                expected: seq.meta().frame_count,
                                got: *next,
                            })
                        }
                    }
                }
            }
            StreamInner::Decoded(stream) => stream.next_frame(),
        };
        match item {
            Ok(Some(frame)) => Some(frame),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(err) => {
                self.done = true;
                self.error = Some(err);
                None
            }
        }
    }
}

pub(crate) fn source_label(path: &Path) -> String {
    path.display().to_string()
}

pub(crate) fn unreadable(path: &Path, reason: impl std::fmt::Display) -> FrameError {
    FrameError::UnreadableSource {
        path: source_label(path),
        reason: reason.to_string(),
    }
}

pub(crate) fn frame_file(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("frame_{index:06}.rgb"))
}
