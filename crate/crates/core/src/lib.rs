//! Duration-aware scene segmentation with perceptual keyframe selection.
//!
//! A video is sampled at a low fixed rate, every adjacent frame pair gets a
//! color-change score, a strategy picked from the video's duration turns
//! scores into scenes, and each scene gets the sharpest, best-exposed of a
//! few evenly spaced candidate frames.

pub mod detect;
pub mod eval;
pub mod exec;
pub mod frame_io;
pub mod keyframes;
pub mod metrics;
pub mod pipeline;
pub mod policy;

pub use detect::{DetectorParams, Scene, UsedStrategy};
pub use exec::Execution;
pub use frame_io::{DecoderConfig, FrameSpec, VideoMeta};
pub use keyframes::{KeyframeRecord, KeyframeWeights};
pub use pipeline::{run, run_batch, write_metadata, RunOptions, SegmentationResult};
pub use policy::{PolicySpec, PolicyTable, Strategy, StrategyKind};
