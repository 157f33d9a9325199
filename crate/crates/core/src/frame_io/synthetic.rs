use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{FrameError, FrameSpec, RawMeta, RawSequence, Result};
use crate::exec::Execution;

/// How the frames of one block are painted.
#[derive(Clone, Debug, PartialEq)]
pub enum Fill {
    Solid([u8; 3]),
    /// A static uniform-noise image drawn from the seed.
    Noise(u64),
    /// Linear blend from one color to another across the block.
    Fade { from: [u8; 3], to: [u8; 3] },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub duration_sec: f64,
    pub fill: Fill,
}

impl Block {
    pub fn new(duration_sec: f64, fill: Fill) -> Self {
        Block { duration_sec, fill }
    }

    pub fn solid(duration_sec: f64, rgb: [u8; 3]) -> Self {
        Block::new(duration_sec, Fill::Solid(rgb))
    }
}

/// A generated sequence plus its ground-truth cuts (the first sampled frame
/// of every block after the first).
#[derive(Clone, Debug)]
pub struct SyntheticSequence {
    pub sequence: RawSequence,
    pub cuts: Vec<usize>,
}

/// Writes `blocks` back to back as a raw-frame sequence in `dir`.
pub fn generate_synthetic(dir: &Path, blocks: &[Block], spec: &FrameSpec) -> Result<SyntheticSequence> {
    spec.validate()?;
    if blocks.is_empty() || blocks.iter().any(|b| !(b.duration_sec > 0.0)) {
        return Err(FrameError::InvalidBlocks);
    }
    let total_duration: f64 = blocks.iter().map(|b| b.duration_sec).sum();
    let frame_count = spec.frame_count(total_duration);

    // First sampled frame of each block.
    let mut starts = Vec::with_capacity(blocks.len());
    let mut elapsed = 0.0;
    for block in blocks {
        starts.push(((elapsed * spec.sampling_fps).round() as usize).min(frame_count));
        elapsed += block.duration_sec;
    }
    let mut cuts: Vec<usize> = starts[1..]
        .iter()
        .copied()
        .filter(|&s| s > 0 && s < frame_count)
        .collect();
    cuts.dedup();

    let sequence = RawSequence::create(
        dir,
        RawMeta {
            width: spec.width,
            height: spec.height,
            sampling_fps: spec.sampling_fps,
            frame_count,
            duration_sec: Some(total_duration),
            source_fps: None,
        },
    )?;

    let block_of = |index: usize| starts.iter().rposition(|&s| s <= index).unwrap_or(0);
    let block_len = |k: usize| {
        let end = starts.get(k + 1).copied().unwrap_or(frame_count);
        end.saturating_sub(starts[k]).max(1)
    };

    let written = Execution::Parallel.map_range(frame_count, |index| {
        let k = block_of(index);
        let pixels = paint(&blocks[k].fill, index - starts[k], block_len(k), spec);
        sequence.write_frame(index, &pixels)
    });
    written.into_iter().collect::<Result<Vec<()>>>()?;

    Ok(SyntheticSequence { sequence, cuts })
}

fn paint(fill: &Fill, offset: usize, len: usize, spec: &FrameSpec) -> Vec<u8> {
    let n = spec.frame_len();
    match fill {
        Fill::Solid(rgb) => rgb.iter().copied().cycle().take(n).collect(),
        Fill::Noise(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..n).map(|_| rng.gen::<u8>()).collect()
        }
        Fill::Fade { from, to } => {
            let t = if len > 1 {
                offset as f64 / (len - 1) as f64
            } else {
                0.0
            };
            let rgb: Vec<u8> = from
                .iter()
                .zip(to)
                .map(|(&a, &b)| (a as f64 + (b as f64 - a as f64) * t).round() as u8)
                .collect();
            rgb.iter().copied().cycle().take(n).collect()
        }
    }
}
