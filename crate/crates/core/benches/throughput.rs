use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use scenekit::eval::{ablate, synthetic_corpus, ManifestEntry, SweepParam, SynthRecipe};
use scenekit::frame_io::{generate_synthetic, open_stream, Block, Fill, Frame, FrameSpec};
use scenekit::keyframes::{extract_keyframe, KeyframeWeights};
use scenekit::metrics::HsvImage;
use scenekit::pipeline::{run, RunOptions};
use scenekit::policy::StrategyKind;
use scenekit::{Execution, Scene};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn fixture(dir: &std::path::Path) -> Vec<Frame> {
    let blocks = [
        Block::new(30.0, Fill::Noise(1)),
        Block::new(30.0, Fill::Fade { from: [10, 10, 10], to: [240, 180, 40] }),
        Block::new(40.0, Fill::Noise(2)),
    ];
    generate_synthetic(dir, &blocks, &FrameSpec::default()).unwrap();
    open_stream(dir, &FrameSpec::default()).unwrap().0.collect()
}

fn scoring(c: &mut Criterion) {
    let dir = tempfile::tempdir().unwrap();
    let frames = fixture(dir.path());
    let mut group = c.benchmark_group("pair_scores");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                let hsv = exec.map(&frames, HsvImage::from_frame);
                exec.map_range(hsv.len() - 1, |i| hsv[i].distance(&hsv[i + 1]).unwrap())
            })
        });
    }
    group.finish();
}

fn keyframes(c: &mut Criterion) {
    let dir = tempfile::tempdir().unwrap();
    let frames = fixture(dir.path());
    let scenes: Vec<Scene> = (0..20)
        .map(|k| Scene {
            index: k,
            start_frame: k * 10,
            end_frame: k * 10 + 10,
            start_sec: k as f64 * 5.0,
            end_sec: k as f64 * 5.0 + 5.0,
        })
        .collect();
    let weights = KeyframeWeights::default();
    let mut group = c.benchmark_group("keyframes");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| exec.map(&scenes, |s| extract_keyframe(s, frames.as_slice(), &weights).unwrap()))
        });
    }
    group.finish();
}

fn end_to_end(c: &mut Criterion) {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let mut group = c.benchmark_group("pipeline_run");
    group.sample_size(10).measurement_time(Duration::from_secs(10));
    for (name, execution) in MODES {
        let options = RunOptions {
            execution,
            thumbnails: false,
            ..RunOptions::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| run(dir.path(), &options).unwrap()));
    }
    group.finish();
}

fn sweep(c: &mut Criterion) {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synthetic_corpus(dir.path(), 8, 1, &SynthRecipe::default(), "bench").unwrap();
    let manifest: Vec<ManifestEntry> = corpus.into_iter().map(|v| v.entry).collect();
    let values = [3.0, 8.0, 15.0, 30.0];
    let mut group = c.benchmark_group("minlen_sweep");
    group.sample_size(10);
    for (name, execution) in MODES {
        let fixed = RunOptions {
            execution,
            strategy: Some(StrategyKind::Content),
            ..RunOptions::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| ablate(SweepParam::Minlen, &values, &manifest, &fixed, 4).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, scoring, keyframes, end_to_end, sweep);
criterion_main!(benches);
