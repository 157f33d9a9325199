//! Corpus evaluation, parameter sweeps and boundary precision/recall
//! against planted cuts.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::Scene;
use crate::frame_io::{generate_synthetic, Block, Fill, FrameError, FrameSpec};
use crate::metrics::rgb_to_hsv;
use crate::pipeline::{run_batch, PipelineError, RunOptions, SegmentationResult};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },
    #[error("sweep needs at least one value")]
    EmptySweep,
    #[error("unknown sweep parameter `{0}` (expected minlen or threshold)")]
    UnknownParam(String),
    #[error("no video in the corpus could be processed")]
    NothingProcessed,
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("cannot write report: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot write csv: {0}")]
    Csv(#[from] csv::Error),
}

// ----- boundary matching -----

/// Planted cut indices (first sampled frame of each new scene); sorted and
/// unique by construction.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth(Vec<usize>);

impl GroundTruth {
    pub fn new(mut cuts: Vec<usize>) -> Self {
        cuts.sort_unstable();
        cuts.dedup();
        GroundTruth(cuts)
    }

    pub fn cuts(&self) -> &[usize] {
        &self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Internal boundaries of a tiling: every scene start except frame 0.
pub fn scene_cuts(scenes: &[Scene]) -> Vec<usize> {
    scenes.iter().map(|s| s.start_frame).filter(|&s| s > 0).collect()
}

pub fn boundary_prf(detected: &[Scene], truth: &GroundTruth, tolerance: usize) -> Prf {
    prf_of_cuts(&scene_cuts(detected), truth.cuts(), tolerance)
}

/// One-to-one matching within `±tolerance` frames. Sweeping both sorted
/// lists and always dropping the lagging unmatched item yields a maximum
/// matching for interval windows.
pub fn prf_of_cuts(detected: &[usize], truth: &[usize], tolerance: usize) -> Prf {
    let mut d: Vec<usize> = detected.to_vec();
    let mut t: Vec<usize> = truth.to_vec();
    d.sort_unstable();
    t.sort_unstable();
    let (mut i, mut j, mut matched) = (0, 0, 0usize);
    while i < d.len() && j < t.len() {
        if d[i].abs_diff(t[j]) <= tolerance {
            matched += 1;
            i += 1;
            j += 1;
        } else if d[i] < t[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    let precision = if d.is_empty() { 1.0 } else { matched as f64 / d.len() as f64 };
    let recall = if t.is_empty() { 1.0 } else { matched as f64 / t.len() as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Prf { precision, recall, f1 }
}

// ----- manifest -----

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub category: String,
}

impl ManifestEntry {
    pub fn new(path: impl Into<PathBuf>, category: impl Into<String>) -> Self {
        ManifestEntry {
            path: path.into(),
            category: category.into(),
        }
    }
}

pub const DEFAULT_CATEGORY: &str = "uncategorized";

/// Parses `path<TAB>category` lines. Blank lines and `#` comments are
/// skipped; relative paths resolve against `base`.
pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<ManifestEntry>, EvalError> {
    let mut entries = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let (path, category) = match line.split_once('\t') {
            Some((p, c)) => (p.trim(), c.trim()),
            None => (line.trim(), DEFAULT_CATEGORY),
        };
        if path.is_empty() {
            return Err(EvalError::Manifest {
                line: n + 1,
                reason: "empty path".into(),
            });
        }
        let path = Path::new(path);
        let path = if path.is_relative() { base.join(path) } else { path.to_path_buf() };
        let category = if category.is_empty() { DEFAULT_CATEGORY } else { category };
        entries.push(ManifestEntry::new(path, category));
    }
    Ok(entries)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, EvalError> {
    let text = std::fs::read_to_string(path)?;
    parse_manifest(&text, path.parent().unwrap_or(Path::new(".")))
}

pub fn manifest_text(entries: &[ManifestEntry]) -> String {
    entries
        .iter()
        .map(|e| format!("{}\t{}\n", e.path.display(), e.category))
        .collect()
}

// ----- corpus report -----

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VideoRow {
    pub path: String,
    pub category: String,
    pub duration_sec: f64,
    pub scene_count: usize,
    pub keyframe_count: usize,
    pub avg_scene_len_sec: f64,
    pub scenes_per_minute: f64,
    pub keyframe_coverage_pct: f64,
    #[serde(skip)]
    pub scene_durations: Vec<f64>,
}

impl VideoRow {
    pub fn from_result(entry: &ManifestEntry, result: &SegmentationResult) -> Self {
        let duration_sec = result.video.duration_sec;
        let scene_count = result.scenes.len();
        let keyframe_count = result.keyframes.len();
        VideoRow {
            path: entry.path.display().to_string(),
            category: entry.category.clone(),
            duration_sec,
            scene_count,
            keyframe_count,
            avg_scene_len_sec: duration_sec / scene_count as f64,
            scenes_per_minute: scene_count as f64 / (duration_sec / 60.0),
            keyframe_coverage_pct: 100.0 * keyframe_count as f64 / scene_count as f64,
            scene_durations: result.scenes.iter().map(Scene::duration_sec).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CategoryRow {
    pub category: String,
    pub videos: usize,
    pub avg_duration_min: f64,
    pub avg_scene_len_sec: f64,
    pub scenes_per_minute: f64,
    pub keyframe_coverage_pct: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VideoFailure {
    pub path: String,
    pub category: String,
    pub error: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CorpusReport {
    pub rows: Vec<VideoRow>,
    /// Means per category, in first-seen manifest order.
    pub categories: Vec<CategoryRow>,
    pub failures: Vec<VideoFailure>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Median with the two-middle mean for even counts; 0 when empty.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    }
}

impl CorpusReport {
    pub fn from_rows(rows: Vec<VideoRow>, failures: Vec<VideoFailure>) -> Self {
        let mut order: Vec<&str> = Vec::new();
        for r in &rows {
            if !order.contains(&r.category.as_str()) {
                order.push(&r.category);
            }
        }
        let categories = order
            .iter()
            .map(|&c| {
                let members: Vec<&VideoRow> = rows.iter().filter(|r| r.category == c).collect();
                CategoryRow {
                    category: c.to_string(),
                    videos: members.len(),
                    avg_duration_min: mean(members.iter().map(|r| r.duration_sec / 60.0)),
                    avg_scene_len_sec: mean(members.iter().map(|r| r.avg_scene_len_sec)),
                    scenes_per_minute: mean(members.iter().map(|r| r.scenes_per_minute)),
                    keyframe_coverage_pct: mean(members.iter().map(|r| r.keyframe_coverage_pct)),
                }
            })
            .collect();
        CorpusReport {
            rows,
            categories,
            failures,
        }
    }

    pub fn failed(&self) -> usize {
        self.failures.len()
    }

    pub fn mean_scene_count(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.scene_count as f64))
    }

    pub fn mean_coverage_pct(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.keyframe_coverage_pct))
    }

    /// Median over every scene of every processed video.
    pub fn pooled_median_duration(&self) -> f64 {
        let pooled: Vec<f64> = self.rows.iter().flat_map(|r| r.scene_durations.iter().copied()).collect();
        median(&pooled)
    }

    pub fn videos_csv(&self) -> Result<String, EvalError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "Video",
            "Category",
            "Duration (sec)",
            "Scenes",
            "Avg. Scene Length (sec)",
            "Scenes per Minute",
            "Keyframe Coverage (%)",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.path.clone(),
                r.category.clone(),
                fmt2(r.duration_sec),
                r.scene_count.to_string(),
                fmt2(r.avg_scene_len_sec),
                fmt2(r.scenes_per_minute),
                fmt2(r.keyframe_coverage_pct),
            ])?;
        }
        finish(w)
    }

    pub fn categories_csv(&self) -> Result<String, EvalError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "Category",
            "Avg. Duration (min)",
            "Avg. Scene Length (sec)",
            "Scenes per Minute",
            "Keyframe Coverage (%)",
        ])?;
        for c in &self.categories {
            w.write_record([
                c.category.clone(),
                fmt2(c.avg_duration_min),
                fmt2(c.avg_scene_len_sec),
                fmt2(c.scenes_per_minute),
                fmt2(c.keyframe_coverage_pct),
            ])?;
        }
        finish(w)
    }
}

fn fmt2(v: f64) -> String {
    format!("{v:.2}")
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, EvalError> {
    let bytes = w.into_inner().map_err(|e| EvalError::Io(e.into_error()))?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

/// Runs the pipeline over every manifest entry, `jobs` videos at a time.
pub fn evaluate_corpus(manifest: &[ManifestEntry], options: &RunOptions, jobs: usize) -> Result<CorpusReport, EvalError> {
    let sources: Vec<PathBuf> = manifest.iter().map(|e| e.path.clone()).collect();
    let results = run_batch(&sources, jobs, options)?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (entry, result) in manifest.iter().zip(results) {
        match result {
            Ok(r) => rows.push(VideoRow::from_result(entry, &r)),
            Err(e) => {
                log::warn!("{}: {e}", entry.path.display());
                failures.push(VideoFailure {
                    path: entry.path.display().to_string(),
                    category: entry.category.clone(),
                    error: e.to_string(),
                });
            }
        }
    }
    Ok(CorpusReport::from_rows(rows, failures))
}

// ----- ablation -----

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Minlen,
    Threshold,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::Minlen => "minlen",
            SweepParam::Threshold => "threshold",
        }
    }

    fn apply(self, options: &mut RunOptions, value: f64) {
        match self {
            SweepParam::Minlen => options.overrides.minlen_sec = Some(value),
            SweepParam::Threshold => options.overrides.threshold = Some(value),
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepParam {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "minlen" => Ok(SweepParam::Minlen),
            "threshold" => Ok(SweepParam::Threshold),
            other => Err(EvalError::UnknownParam(other.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationRow {
    pub param_value: f64,
    /// Mean of per-video scene counts.
    pub segments_per_video: f64,
    /// Median of all scene durations pooled across videos.
    pub median_duration_sec: f64,
    /// Mean per-video keyframe coverage.
    pub keyframe_coverage_pct: f64,
    pub videos: usize,
    pub failed: usize,
}

impl AblationRow {
    pub fn from_report(param_value: f64, report: &CorpusReport) -> Self {
        AblationRow {
            param_value,
            segments_per_video: report.mean_scene_count(),
            median_duration_sec: report.pooled_median_duration(),
            keyframe_coverage_pct: report.mean_coverage_pct(),
            videos: report.rows.len(),
            failed: report.failed(),
        }
    }
}

/// One full corpus run per value with everything else held at `fixed`.
pub fn ablate(
    param: SweepParam,
    values: &[f64],
    manifest: &[ManifestEntry],
    fixed: &RunOptions,
    jobs: usize,
) -> Result<Vec<AblationRow>, EvalError> {
    if values.is_empty() {
        return Err(EvalError::EmptySweep);
    }
    values
        .iter()
        .map(|&value| {
            let mut options = fixed.clone();
            options.thumbnails = false;
            param.apply(&mut options, value);
            let report = evaluate_corpus(manifest, &options, jobs)?;
            if report.rows.is_empty() && !manifest.is_empty() {
                return Err(EvalError::NothingProcessed);
            }
            Ok(AblationRow::from_report(value, &report))
        })
        .collect()
}

/// The sweep as a table with the published column names.
pub fn ablation_csv(param: SweepParam, rows: &[AblationRow]) -> Result<String, EvalError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    match param {
        SweepParam::Minlen => w.write_record([
            "minlen (sec)",
            "Segments per Video",
            "Median Duration (sec)",
            "Keyframe Coverage (%)",
        ])?,
        SweepParam::Threshold => w.write_record([
            "Threshold Value",
            "Avg. Scenes / Video",
            "Median Duration (s)",
            "Keyframe Coverage (%)",
        ])?,
    }
    for r in rows {
        w.write_record([
            format!("{}", r.param_value),
            format!("{:.1}", r.segments_per_video),
            format!("{:.1}", r.median_duration_sec),
            format!("{:.1}", r.keyframe_coverage_pct),
        ])?;
    }
    finish(w)
}

/// Full-precision series for external plotting.
pub fn plot_series_csv(param: SweepParam, rows: &[AblationRow]) -> Result<String, EvalError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        param.as_str(),
        "segments_per_video",
        "median_duration_sec",
        "keyframe_coverage_pct",
        "videos",
        "failed",
    ])?;
    for r in rows {
        w.write_record([
            r.param_value.to_string(),
            r.segments_per_video.to_string(),
            r.median_duration_sec.to_string(),
            r.keyframe_coverage_pct.to_string(),
            r.videos.to_string(),
            r.failed.to_string(),
        ])?;
    }
    finish(w)
}

/// Writes `ablation_<param>.csv` and `ablation_<param>_series.csv` into
/// `dir`, returning both paths.
pub fn write_ablation(dir: &Path, param: SweepParam, rows: &[AblationRow]) -> Result<(PathBuf, PathBuf), EvalError> {
    std::fs::create_dir_all(dir)?;
    let table = dir.join(format!("ablation_{param}.csv"));
    let series = dir.join(format!("ablation_{param}_series.csv"));
    std::fs::write(&table, ablation_csv(param, rows)?)?;
    std::fs::write(&series, plot_series_csv(param, rows)?)?;
    Ok((table, series))
}

// ----- synthetic corpora -----

/// Shape of randomly generated sequences.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthRecipe {
    pub spec: FrameSpec,
    pub blocks: (usize, usize),
    pub block_sec: (f64, f64),
    /// Minimum HSV mean difference between adjacent solid blocks.
    pub min_step: f64,
    /// Probability that a block is a static noise image or a fade.
    pub texture_prob: f64,
}

impl Default for SynthRecipe {
    fn default() -> Self {
        SynthRecipe {
            spec: FrameSpec {
                width: 32,
                height: 32,
                sampling_fps: 2.0,
            },
            blocks: (3, 8),
            block_sec: (3.0, 12.0),
            min_step: 30.0,
            texture_prob: 0.0,
        }
    }
}

/// HSV mean absolute difference between two uniform colors.
pub fn color_step(a: [u8; 3], b: [u8; 3]) -> f64 {
    let (ha, hb) = (rgb_to_hsv(a), rgb_to_hsv(b));
    ha.iter().zip(&hb).map(|(&x, &y)| (x as f64 - y as f64).abs()).sum::<f64>() / 3.0
}

fn random_color(rng: &mut ChaCha8Rng) -> [u8; 3] {
    [rng.gen(), rng.gen(), rng.gen()]
}

pub fn random_blocks(rng: &mut ChaCha8Rng, recipe: &SynthRecipe) -> Vec<Block> {
    let n = rng.gen_range(recipe.blocks.0..=recipe.blocks.1);
    let mut blocks: Vec<Block> = Vec::with_capacity(n);
    let mut last: Option<[u8; 3]> = None;
    for _ in 0..n {
        // Half-second grid keeps planted cuts on sampled frames.
        let duration = (rng.gen_range(recipe.block_sec.0..=recipe.block_sec.1) * 2.0).round() / 2.0;
        let duration = duration.max(0.5);
        let color = loop {
            let c = random_color(rng);
            if last.is_none_or(|l| color_step(l, c) > recipe.min_step) {
                break c;
            }
        };
        let fill = if recipe.texture_prob > 0.0 && rng.gen_bool(recipe.texture_prob) {
            if rng.gen_bool(0.5) {
                Fill::Noise(rng.gen())
            } else {
                Fill::Fade {
                    from: last.unwrap_or(color),
                    to: color,
                }
            }
        } else {
            Fill::Solid(color)
        };
        last = Some(color);
        blocks.push(Block::new(duration, fill));
    }
    blocks
}

/// A generated video with its planted cuts.
#[derive(Clone, Debug)]
pub struct SynthVideo {
    pub entry: ManifestEntry,
    pub truth: GroundTruth,
    pub blocks: Vec<Block>,
}

/// Writes `count` sequences under `dir` (`video_000`, …), reproducibly from
/// `seed`.
pub fn synthetic_corpus(
    dir: &Path,
    count: usize,
    seed: u64,
    recipe: &SynthRecipe,
    category: &str,
) -> Result<Vec<SynthVideo>, EvalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let blocks = random_blocks(&mut rng, recipe);
            let path = dir.join(format!("video_{i:03}"));
            let synth = generate_synthetic(&path, &blocks, &recipe.spec)?;
            Ok(SynthVideo {
                entry: ManifestEntry::new(path, category),
                truth: GroundTruth::new(synth.cuts),
                blocks,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::scenes_from_boundaries;
    use crate::policy::StrategyKind;
    use proptest::prelude::*;

    /// Exhaustive maximum matching for tiny inputs.
    fn brute_matches(d: &[usize], t: &[usize], tol: usize) -> usize {
        fn go(d: &[usize], t: &[usize], used: &mut Vec<bool>, tol: usize) -> usize {
            let Some((&first, rest)) = d.split_first() else { return 0 };
            let mut best = go(rest, t, used, tol);
            for j in 0..t.len() {
                if !used[j] && first.abs_diff(t[j]) <= tol {
                    used[j] = true;
                    best = best.max(1 + go(rest, t, used, tol));
                    used[j] = false;
                }
            }
            best
        }
        go(d, t, &mut vec![false; t.len()], tol)
    }

    #[test]
    fn prf_examples() {
        assert_eq!(
            prf_of_cuts(&[10], &[10], 1),
            Prf {
                precision: 1.0,
                recall: 1.0,
                f1: 1.0
            }
        );
        let p = prf_of_cuts(&[9, 40], &[10], 1);
        assert_eq!((p.precision, p.recall), (0.5, 1.0));
        assert!((p.f1 - 2.0 / 3.0).abs() < 1e-12);
        let p = prf_of_cuts(&[], &[10], 1);
        assert_eq!((p.precision, p.recall, p.f1), (1.0, 0.0, 0.0));
        let p = prf_of_cuts(&[], &[], 0);
        assert_eq!((p.precision, p.recall, p.f1), (1.0, 1.0, 1.0));
        let p = prf_of_cuts(&[12], &[10], 1);
        assert_eq!((p.precision, p.recall), (0.0, 0.0));
    }

    #[test]
    fn prf_from_scenes() {
        let scenes = scenes_from_boundaries(&[9, 19], 30, 2.0);
        let p = boundary_prf(&scenes, &GroundTruth::new(vec![20, 10, 10]), 0);
        assert_eq!((p.precision, p.recall), (1.0, 1.0));
    }

    proptest! {
        #[test]
        fn matching_is_maximum_and_symmetric(
            d in proptest::collection::btree_set(0usize..30, 0..7),
            t in proptest::collection::btree_set(0usize..30, 0..7),
            tol in 0usize..4,
        ) {
            let d: Vec<usize> = d.into_iter().collect();
            let t: Vec<usize> = t.into_iter().collect();
            let p = prf_of_cuts(&d, &t, tol);
            let q = prf_of_cuts(&t, &d, tol);
            prop_assert_eq!(p.precision, q.recall);
            prop_assert_eq!(p.recall, q.precision);
            prop_assert_eq!(p.f1, q.f1);
            let m = brute_matches(&d, &t, tol);
            if !d.is_empty() {
                prop_assert_eq!(p.precision, m as f64 / d.len() as f64);
            }
        }
    }

    #[test]
    fn manifest_parsing() {
        let text = "# corpus\n/abs/a.mp4\tsports\n\nrel/b.mp4\tnews\nc.mp4\n";
        let entries = parse_manifest(text, Path::new("/base")).unwrap();
        assert_eq!(
            entries,
            vec![
                ManifestEntry::new("/abs/a.mp4", "sports"),
                ManifestEntry::new("/base/rel/b.mp4", "news"),
                ManifestEntry::new("/base/c.mp4", DEFAULT_CATEGORY),
            ]
        );
        let round = parse_manifest(&manifest_text(&entries), Path::new("/x")).unwrap();
        assert_eq!(round, entries);
        assert!(parse_manifest("\tnews\n", Path::new("/")).is_err());
    }

    #[test]
    fn median_cases() {
        assert_eq!(median(&[]), 0.0);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn report_identities() {
        let row = |category: &str, duration: f64, scenes: usize, keyframes: usize| VideoRow {
            path: "v".into(),
            category: category.into(),
            duration_sec: duration,
            scene_count: scenes,
            keyframe_count: keyframes,
            avg_scene_len_sec: duration / scenes as f64,
            scenes_per_minute: scenes as f64 / (duration / 60.0),
            keyframe_coverage_pct: 100.0 * keyframes as f64 / scenes as f64,
            scene_durations: vec![duration / scenes as f64; scenes],
        };
        let a = row("news", 60.0, 4, 4);
        assert_eq!(a.scenes_per_minute, 4.0);
        assert_eq!(a.avg_scene_len_sec, 15.0);
        let b = row("news", 120.0, 10, 9);
        assert_eq!(b.keyframe_coverage_pct, 90.0);
        let report = CorpusReport::from_rows(vec![a, b, row("sports", 30.0, 3, 3)], vec![]);
        assert_eq!(report.categories.len(), 2);
        assert_eq!(report.categories[0].category, "news");
        assert_eq!(report.categories[0].avg_duration_min, 1.5);
        assert_eq!(report.categories[0].keyframe_coverage_pct, 95.0);
        let csv = report.categories_csv().unwrap();
        assert!(csv.starts_with("Category,Avg. Duration (min),Avg. Scene Length (sec),Scenes per Minute,Keyframe Coverage (%)\n"));
        assert!(csv.contains("news,1.50,"));
    }

    #[test]
    fn color_step_extremes() {
        assert_eq!(color_step([0, 0, 0], [0, 0, 0]), 0.0);
        assert_eq!(color_step([0, 0, 0], [255, 255, 255]), 85.0);
    }

    #[test]
    fn corpus_is_reproducible() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let recipe = SynthRecipe::default();
        let x = synthetic_corpus(a.path(), 3, 7, &recipe, "synthetic").unwrap();
        let y = synthetic_corpus(b.path(), 3, 7, &recipe, "synthetic").unwrap();
        for (p, q) in x.iter().zip(&y) {
            assert_eq!(p.truth, q.truth);
            assert_eq!(p.blocks, q.blocks);
            assert_eq!(p.truth.cuts().len() + 1, p.blocks.len());
        }
    }

    #[test]
    fn evaluate_and_single_value_sweep_agree() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = synthetic_corpus(dir.path(), 4, 3, &SynthRecipe::default(), "synthetic").unwrap();
        let mut manifest: Vec<ManifestEntry> = corpus.iter().map(|v| v.entry.clone()).collect();
        manifest.push(ManifestEntry::new(dir.path().join("missing"), "synthetic"));
        let options = RunOptions {
            strategy: Some(StrategyKind::Content),
            thumbnails: false,
            ..RunOptions::default()
        };
        let mut with_minlen = options.clone();
        with_minlen.overrides.minlen_sec = Some(1.0);
        let report = evaluate_corpus(&manifest, &with_minlen, 2).unwrap();
        assert_eq!(report.rows.len(), 4);
        assert_eq!(report.failed(), 1);
        for (row, video) in report.rows.iter().zip(&corpus) {
            assert_eq!(row.scene_count, video.blocks.len());
            assert!((row.scenes_per_minute - row.scene_count as f64 / (row.duration_sec / 60.0)).abs() < 1e-9);
        }
        let rows = ablate(SweepParam::Minlen, &[1.0], &manifest, &options, 2).unwrap();
        assert_eq!(rows, vec![AblationRow::from_report(1.0, &report)]);
        assert!(ablate(SweepParam::Minlen, &[], &manifest, &options, 2).is_err());
        let out = tempfile::tempdir().unwrap();
        let (table, series) = write_ablation(out.path(), SweepParam::Minlen, &rows).unwrap();
        let table = std::fs::read_to_string(table).unwrap();
        assert!(table.starts_with("minlen (sec),Segments per Video,Median Duration (sec),Keyframe Coverage (%)\n"));
        assert!(std::fs::read_to_string(series).unwrap().starts_with("minlen,segments_per_video"));
    }

    #[test]
    fn sweep_param_parsing() {
        assert_eq!("minlen".parse::<SweepParam>().unwrap(), SweepParam::Minlen);
        assert_eq!("threshold".parse::<SweepParam>().unwrap(), SweepParam::Threshold);
        assert!("window".parse::<SweepParam>().is_err());
    }
}
