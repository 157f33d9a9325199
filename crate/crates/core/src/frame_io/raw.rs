use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{frame_file, source_label, unreadable, Frame, FrameError, FrameSpec, Result, VideoMeta};

pub const META_FILE: &str = "meta.json";

/// Contents of `meta.json` in a raw-frame directory.
///
/// `duration_sec` is optional; without it the duration is
/// `frame_count / sampling_fps`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawMeta {
    pub width: u32,
    pub height: u32,
    pub sampling_fps: f64,
    pub frame_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_sec: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_fps: Option<f64>,
}

impl RawMeta {
    pub fn spec(&self) -> FrameSpec {
        FrameSpec {
            width: self.width,
            height: self.height,
            sampling_fps: self.sampling_fps,
        }
    }

    pub fn duration(&self) -> f64 {
        self.duration_sec
            .unwrap_or(self.frame_count as f64 / self.sampling_fps)
    }
}

/// A directory of `frame_%06d.rgb` files plus `meta.json`.
#[derive(Clone, Debug)]
pub struct RawSequence {
    dir: PathBuf,
    meta: RawMeta,
    video: VideoMeta,
}

impl RawSequence {
    pub fn open(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join(META_FILE)).map_err(|e| unreadable(dir, e))?;
        let meta: RawMeta = serde_json::from_str(&text).map_err(|e| unreadable(dir, e))?;
        meta.spec().validate().map_err(|e| unreadable(dir, e))?;
        if meta.frame_count == 0 {
            return Err(unreadable(dir, "sequence has no frames"));
        }
        let duration = meta.duration();
        if !(duration.is_finite() && duration > 0.0) {
            return Err(unreadable(dir, format!("bad duration {duration}")));
        }
        let video = VideoMeta {
            duration_sec: duration,
            source_path: source_label(dir),
            source_fps: meta.source_fps,
        };
        Ok(RawSequence {
            dir: dir.to_path_buf(),
            meta,
            video,
        })
    }

    /// Creates `dir` (if needed) and writes `meta.json`. Frames are written
    /// separately with [`RawSequence::write_frame`].
    pub fn create(dir: &Path, meta: RawMeta) -> Result<Self> {
        meta.spec().validate()?;
        fs::create_dir_all(dir)?;
        let json = serde_json::to_string_pretty(&meta).map_err(std::io::Error::other)?;
        fs::write(dir.join(META_FILE), json)?;
        Self::open(dir)
    }

    pub fn write_frame(&self, index: usize, pixels: &[u8]) -> Result<()> {
        if pixels.len() != self.meta.spec().frame_len() {
            return Err(FrameError::InvalidSpec(format!(
                "frame buffer has {} bytes, expected {}",
                pixels.len(),
                self.meta.spec().frame_len()
            )));
        }
        fs::write(frame_file(&self.dir, index), pixels)?;
        Ok(())
    }

    pub fn read_frame(&self, index: usize) -> Result<Frame> {
        if index >= self.meta.frame_count {
            return Err(FrameError::MissingFrame {
                index,
                reason: format!("sequence has {} frames", self.meta.frame_count),
            });
        }
        let path = frame_file(&self.dir, index);
        let pixels = fs::read(&path).map_err(|e| FrameError::MissingFrame {
            index,
            reason: format!("{}: {e}", path.display()),
        })?;
        let spec = self.meta.spec();
        if pixels.len() != spec.frame_len() {
            return Err(FrameError::MissingFrame {
                index,
                reason: format!(
                    "{} has {} bytes, expected {}",
                    path.display(),
                    pixels.len(),
                    spec.frame_len()
                ),
            });
        }
        Ok(Frame::new(
            index,
            spec.time_of(index),
            spec.width,
            spec.height,
            pixels,
        ))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn meta(&self) -> &RawMeta {
        &self.meta
    }

    pub fn spec(&self) -> FrameSpec {
        self.meta.spec()
    }

    pub fn video_meta(&self) -> &VideoMeta {
        &self.video
    }
}
