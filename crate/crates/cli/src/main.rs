use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use scenekit::eval::{
    ablate, evaluate_corpus, manifest_text, read_manifest, synthetic_corpus, write_ablation, EvalError, SweepParam,
    SynthRecipe,
};
use scenekit::frame_io::FrameSpec;
use scenekit::pipeline::{output_names, run_batch, write_metadata, ParamOverrides, RunOptions};
use scenekit::policy::{load_table_file, PolicyTable, StrategyKind};
use scenekit::{Execution, KeyframeWeights};

const EXIT_PARTIAL: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "scenekit", version, about = "Duration-aware scene segmentation and keyframe extraction")]
struct Cli {
    /// Log verbosity (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment videos and write scenes.json plus thumbnails per video.
    Segment {
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run a manifest corpus and report per-video and per-category metrics.
    Evaluate {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Sweep minlen or threshold over a manifest corpus.
    Ablate {
        manifest: PathBuf,
        #[arg(long, value_enum)]
        param: ParamArg,
        /// Comma-separated values; defaults to the standard grid.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Generate a synthetic raw-frame corpus with a manifest.
    Synth {
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "synthetic")]
        category: String,
        #[arg(long, default_value = "32x32", value_parser = parse_size)]
        size: (u32, u32),
        #[arg(long, default_value_t = 3)]
        min_blocks: usize,
        #[arg(long, default_value_t = 8)]
        max_blocks: usize,
        #[arg(long, default_value_t = 3.0)]
        min_block_sec: f64,
        #[arg(long, default_value_t = 12.0)]
        max_block_sec: f64,
        /// Share of blocks drawn as static noise or fades.
        #[arg(long, default_value_t = 0.0)]
        texture: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Auto,
    Adaptive,
    Content,
    Fallback,
    Regular,
}

#[derive(Clone, Copy, ValueEnum)]
enum ParamArg {
    Minlen,
    Threshold,
}

#[derive(Args)]
struct RunArgs {
    /// Sampling rate for decoded inputs.
    #[arg(long)]
    fps: Option<f64>,
    /// Decoded frame size, WxH.
    #[arg(long, value_parser = parse_size)]
    size: Option<(u32, u32)>,
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Minimum scene length in seconds.
    #[arg(long)]
    minlen: Option<f64>,
    /// Regular-split interval in seconds.
    #[arg(long)]
    interval: Option<f64>,
    /// Keyframe weights as SHARP,BRIGHT.
    #[arg(long, value_parser = parse_weights)]
    weights: Option<(f64, f64)>,
    /// Keyframe candidates per scene.
    #[arg(long)]
    candidates: Option<usize>,
    /// Policy table in TOML.
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Videos processed concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    no_thumbs: bool,
    /// Disable data-parallel frame work.
    #[arg(long)]
    sequential: bool,
}

fn parse_size(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got `{s}`"))?;
    let w = w.trim().parse().map_err(|e| format!("width: {e}"))?;
    let h = h.trim().parse().map_err(|e| format!("height: {e}"))?;
    Ok((w, h))
}

fn parse_weights(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected SHARP,BRIGHT, got `{s}`"))?;
    let a = a.trim().parse().map_err(|e| format!("sharpness weight: {e}"))?;
    let b = b.trim().parse().map_err(|e| format!("brightness weight: {e}"))?;
    Ok((a, b))
}

impl RunArgs {
    fn options(&self, default_strategy: Option<StrategyKind>) -> Result<RunOptions, String> {
        let mut frame_spec = FrameSpec::default();
        if let Some(fps) = self.fps {
            frame_spec.sampling_fps = fps;
        }
        if let Some((w, h)) = self.size {
            frame_spec.width = w;
            frame_spec.height = h;
        }
        let policy = match &self.policy {
            Some(path) => load_table_file(path).map_err(|e| format!("{}: {e}", path.display()))?,
            None => PolicyTable::default(),
        };
        let strategy = match self.strategy {
            None => default_strategy,
            Some(StrategyArg::Auto) => None,
            Some(StrategyArg::Adaptive) => Some(StrategyKind::Adaptive),
            Some(StrategyArg::Content) => Some(StrategyKind::Content),
            Some(StrategyArg::Fallback) => Some(StrategyKind::Fallback),
            Some(StrategyArg::Regular) => Some(StrategyKind::RegularSplit),
        };
        let mut weights = KeyframeWeights::default();
        if let Some((s, b)) = self.weights {
            weights.w_sharp = s;
            weights.w_bright = b;
        }
        if let Some(n) = self.candidates {
            weights.n_candidates = n;
        }
        if self.jobs == 0 {
            return Err("--jobs must be at least 1".into());
        }
        let options = RunOptions {
            frame_spec,
            policy,
            strategy,
            overrides: ParamOverrides {
                threshold: self.threshold,
                minlen_sec: self.minlen,
                interval_sec: self.interval,
            },
            weights,
            thumbnails: !self.no_thumbs,
            execution: if self.sequential {
                Execution::Sequential
            } else {
                Execution::Parallel
            },
            ..RunOptions::default()
        };
        options.validate().map_err(|e| e.to_string())?;
        // Surface bad overrides before touching any input.
        options.policy_for(0.0).map_err(|e| e.to_string())?;
        Ok(options)
    }
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_USAGE)
}

fn write_file(path: &Path, text: &str) -> Result<(), String> {
    std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn segment(inputs: &[PathBuf], out: &Path, args: &RunArgs) -> ExitCode {
    let options = match args.options(None) {
        Ok(o) => o,
        Err(e) => return usage(e),
    };
    let results = match run_batch(inputs, args.jobs, &options) {
        Ok(r) => r,
        Err(e) => return usage(e),
    };
    let mut failed = 0;
    for ((input, name), result) in inputs.iter().zip(output_names(inputs)).zip(results) {
        let written = result
            .map_err(|e| e.to_string())
            .and_then(|r| write_metadata(&r, &out.join(&name)).map(|p| (r, p)).map_err(|e| e.to_string()));
        match written {
            Ok((r, path)) => println!(
                "{}: {} scenes via {} ({:.2}s) -> {}",
                input.display(),
                r.scenes.len(),
                r.used_strategy,
                r.timing.total(),
                path.display()
            ),
            Err(e) => {
                failed += 1;
                eprintln!("{}: {e}", input.display());
            }
        }
    }
    if failed > 0 {
        ExitCode::from(EXIT_PARTIAL)
    } else {
        ExitCode::SUCCESS
    }
}

fn evaluate(manifest: &Path, out: &Path, args: &RunArgs) -> ExitCode {
    let options = match args.options(None) {
        Ok(o) => o,
        Err(e) => return usage(e),
    };
    let entries = match read_manifest(manifest) {
        Ok(e) => e,
        Err(e) => return usage(e),
    };
    let report = match evaluate_corpus(&entries, &options, args.jobs) {
        Ok(r) => r,
        Err(e) => return usage(e),
    };
    let outcome = (|| -> Result<(), EvalError> {
        std::fs::create_dir_all(out)?;
        std::fs::write(out.join("videos.csv"), report.videos_csv()?)?;
        std::fs::write(out.join("categories.csv"), report.categories_csv()?)?;
        Ok(())
    })();
    if let Err(e) = outcome {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_PARTIAL);
    }
    match report.categories_csv() {
        Ok(table) => print!("{table}"),
        Err(e) => eprintln!("error: {e}"),
    }
    for f in &report.failures {
        eprintln!("{}: {}", f.path, f.error);
    }
    if report.failed() > 0 {
        ExitCode::from(EXIT_PARTIAL)
    } else {
        ExitCode::SUCCESS
    }
}

fn default_values(param: SweepParam) -> Vec<f64> {
    match param {
        SweepParam::Minlen => vec![3.0, 5.0, 8.0, 10.0, 12.0, 15.0, 20.0, 25.0, 30.0],
        SweepParam::Threshold => vec![5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
    }
}

fn run_ablation(manifest: &Path, param: ParamArg, values: &[f64], out: &Path, args: &RunArgs) -> ExitCode {
    // Sweep thresholds live on the content-score scale.
    let options = match args.options(Some(StrategyKind::Content)) {
        Ok(o) => o,
        Err(e) => return usage(e),
    };
    let param = match param {
        ParamArg::Minlen => SweepParam::Minlen,
        ParamArg::Threshold => SweepParam::Threshold,
    };
    let values = if values.is_empty() {
        default_values(param)
    } else {
        values.to_vec()
    };
    let entries = match read_manifest(manifest) {
        Ok(e) => e,
        Err(e) => return usage(e),
    };
    let rows = match ablate(param, &values, &entries, &options, args.jobs) {
        Ok(r) => r,
        Err(e @ (EvalError::EmptySweep | EvalError::UnknownParam(_))) => return usage(e),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_PARTIAL);
        }
    };
    match write_ablation(out, param, &rows) {
        Ok((table, _)) => {
            if let Ok(text) = std::fs::read_to_string(&table) {
                print!("{text}");
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_PARTIAL);
        }
    }
    if rows.iter().any(|r| r.failed > 0) {
        ExitCode::from(EXIT_PARTIAL)
    } else {
        ExitCode::SUCCESS
    }
}

#[allow(clippy::too_many_arguments)]
fn synth(
    out: &Path,
    count: usize,
    seed: u64,
    category: &str,
    size: (u32, u32),
    blocks: (usize, usize),
    block_sec: (f64, f64),
    texture: f64,
) -> ExitCode {
    if blocks.0 == 0 || blocks.0 > blocks.1 || !(block_sec.0 > 0.0 && block_sec.0 <= block_sec.1) {
        return usage("block ranges must be positive and ordered");
    }
    if !(0.0..=1.0).contains(&texture) {
        return usage("--texture must be within [0, 1]");
    }
    let recipe = SynthRecipe {
        spec: FrameSpec {
            width: size.0,
            height: size.1,
            sampling_fps: 2.0,
        },
        blocks,
        block_sec,
        texture_prob: texture,
        ..SynthRecipe::default()
    };
    if let Err(e) = recipe.spec.validate() {
        return usage(e);
    }
    let corpus = match synthetic_corpus(out, count, seed, &recipe, category) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_PARTIAL);
        }
    };
    let entries: Vec<_> = corpus.iter().map(|v| v.entry.clone()).collect();
    let truth: String = corpus
        .iter()
        .map(|v| {
            let cuts: Vec<String> = v.truth.cuts().iter().map(usize::to_string).collect();
            format!("{}\t{}\n", v.entry.path.display(), cuts.join(","))
        })
        .collect();
    let written = write_file(&out.join("manifest.tsv"), &manifest_text(&entries))
        .and_then(|_| write_file(&out.join("truth.tsv"), &truth));
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_PARTIAL);
    }
    println!("{} videos -> {}", corpus.len(), out.join("manifest.tsv").display());
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.log).init();
    match &cli.command {
        Command::Segment { inputs, out, run } => segment(inputs, out, run),
        Command::Evaluate { manifest, out, run } => evaluate(manifest, out, run),
        Command::Ablate {
            manifest,
            param,
            values,
            out,
            run,
        } => run_ablation(manifest, *param, values, out, run),
        Command::Synth {
            out,
            count,
            seed,
            category,
            size,
            min_blocks,
            max_blocks,
            min_block_sec,
            max_block_sec,
            texture,
        } => synth(
            out,
            *count,
            *seed,
            category,
            *size,
            (*min_blocks, *max_blocks),
            (*min_block_sec, *max_block_sec),
            *texture,
        ),
    }
}
