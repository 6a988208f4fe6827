use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use densetrack::ablate::{arms, run_arms, to_csv, Sweep};
use densetrack::associate::track_sequence;
use densetrack::iomodel::{
    read_bundle, read_tracks, write_bundle, write_tracks, DiffusionParams, Matcher, PipelineConfig,
    RetrievalBackend,
};
use densetrack::metrics::evaluate;
use densetrack::synth::{generate_scenario, render_overlay, ScenarioConfig};
use densetrack::{par, Error};

/// Dense-crowd tracking from density maps, motion fields and appearance
/// features.
#[derive(Parser, Debug)]
#[command(name = "denseassoc", version)]
struct Cli {
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, env = "DENSEASSOC_JOBS", default_value_t = 0)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic scenario bundle and its ground truth.
    Synth(SynthArgs),
    /// Link detections into trajectories.
    Track(TrackArgs),
    /// Score trajectories against ground truth.
    Eval(EvalArgs),
    /// Run tracking and evaluation over a sweep of settings.
    Ablate(AblateArgs),
    /// Draw trajectories over the density maps.
    Render(RenderArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 50)]
    agents: usize,
    #[arg(long, default_value_t = 100)]
    frames: usize,
    #[arg(long, default_value_t = 512)]
    width: usize,
    #[arg(long, default_value_t = 512)]
    height: usize,
    #[arg(long, default_value_t = 2.0)]
    speed_mean: f64,
    #[arg(long, default_value_t = 1.0)]
    speed_jitter: f64,
    #[arg(long, default_value_t = 3.0)]
    blob_sigma: f64,
    #[arg(long, default_value_t = 12.0)]
    min_spacing: f64,
    #[arg(long, default_value_t = 64)]
    feature_dim: usize,
    #[arg(long, default_value_t = 0.15)]
    feature_noise: f64,
    #[arg(long, default_value_t = 0.3)]
    distractor_correlation: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output bundle directory; ground truth goes to `gt_tracks.csv` inside.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct PipelineArgs {
    /// Weight of motion distance against appearance similarity, in [0, 1].
    #[arg(long, default_value_t = 0.9)]
    lambda: f64,
    /// Appearance backend: diffusion, cosine or euclidean.
    #[arg(long, default_value_t = RetrievalBackend::Diffusion)]
    retrieval: RetrievalBackend,
    /// hungarian or greedy.
    #[arg(long, default_value_t = Matcher::Hungarian)]
    matcher: Matcher,
    /// Matched pairs scoring below this are split.
    #[arg(long, default_value_t = -0.45, allow_negative_numbers = true)]
    gate_score: f64,
    #[arg(long, default_value_t = 3)]
    peak_window: usize,
    #[arg(long, default_value_t = 0.3)]
    peak_rel_threshold: f64,
    #[arg(long, default_value_t = 0.02)]
    peak_abs_threshold: f64,
    #[arg(long, default_value_t = 20)]
    patch_size: usize,
    /// Diffusion restart weight.
    #[arg(long, default_value_t = 0.9)]
    alpha: f64,
    /// Neighbours per node in the diffusion graph.
    #[arg(long, default_value_t = 10)]
    knn_k: usize,
    /// Affinity exponent in the diffusion graph.
    #[arg(long, default_value_t = 3.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl PipelineArgs {
    fn config(&self) -> PipelineConfig {
        PipelineConfig {
            lambda: self.lambda,
            retrieval: self.retrieval,
            matcher: self.matcher,
            gate_score: self.gate_score,
            peak_window: self.peak_window,
            peak_rel_threshold: self.peak_rel_threshold,
            peak_abs_threshold: self.peak_abs_threshold,
            patch_size: self.patch_size,
            diffusion: DiffusionParams {
                alpha: self.alpha,
                knn_k: self.knn_k,
                gamma: self.gamma,
            },
            seed: self.seed,
        }
    }
}

#[derive(Args, Debug)]
struct TrackArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Defaults to `tracks.csv` inside the bundle.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    tracks: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Bundle whose frame count bounds the evaluation.
    #[arg(long)]
    bundle: Option<PathBuf>,
    /// Also write the report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AblateArgs {
    #[arg(long)]
    bundle: PathBuf,
    /// Defaults to `gt_tracks.csv` inside the bundle.
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Comma-separated: lambda, backend, mode.
    #[arg(long, value_delimiter = ',', default_value = "lambda")]
    sweep: Vec<String>,
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RenderArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long)]
    tracks: PathBuf,
    /// Half-open range `a..b`.
    #[arg(long)]
    frames: String,
    #[arg(long)]
    out: PathBuf,
}

/// Failure with the exit status it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config(_) | Error::Infeasible(_) => 1,
            Error::Io { .. }
            | Error::Format { .. }
            | Error::Validation(_)
            | Error::OutOfRange(_) => 2,
            Error::Shape(_) | Error::NoConvergence { .. } => 3,
        };
        let message = match &e {
            Error::Validation(vs) => {
                let mut m = format!("invalid bundle ({} violations)", vs.len());
                for v in vs {
                    m.push_str(&format!("\n  {v}"));
                }
                m
            }
            _ => e.to_string(),
        };
        Failure { code, message }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure {
        code: 2,
        message: format!("{}: {e}", path.display()),
    })
}

fn log_config(config: &PipelineConfig) {
    for line in config.describe().lines() {
        eprintln!("config {line}");
    }
}

fn synth(a: &SynthArgs) -> Result<(), Failure> {
    let cfg = ScenarioConfig {
        n_agents: a.agents,
        n_frames: a.frames,
        width: a.width,
        height: a.height,
        speed_mean: a.speed_mean,
        speed_jitter: a.speed_jitter,
        blob_sigma: a.blob_sigma,
        min_spacing: a.min_spacing,
        feature_dim: a.feature_dim,
        feature_noise: a.feature_noise,
        distractor_correlation: a.distractor_correlation,
        seed: a.seed,
    };
    let s = generate_scenario(&cfg)?;
    write_bundle(&s.bundle, &a.out)?;
    write_tracks(&a.out.join("gt_tracks.csv"), &s.ground_truth)?;
    let files = fs::read_dir(&a.out).map(|d| d.count()).unwrap_or(0);
    println!(
        "agents={} frames={} files={} out={}",
        cfg.n_agents,
        cfg.n_frames,
        files,
        a.out.display()
    );
    Ok(())
}

fn track(a: &TrackArgs) -> Result<(), Failure> {
    let config = a.pipeline.config();
    config.validate()?;
    log_config(&config);
    let bundle = read_bundle(&a.bundle)?;
    let start = Instant::now();
    let tracks = track_sequence(&bundle, &config)?;
    let out = a.out.clone().unwrap_or_else(|| a.bundle.join("tracks.csv"));
    write_tracks(&out, &tracks)?;
    eprintln!(
        "tracked {} frames into {} trajectories in {:.2?}",
        bundle.frame_count(),
        tracks.len(),
        start.elapsed()
    );
    println!("{}", out.display());
    Ok(())
}

fn eval(a: &EvalArgs) -> Result<(), Failure> {
    let pred = read_tracks(&a.tracks)?;
    let gt = read_tracks(&a.gt)?;
    let frames = match &a.bundle {
        Some(dir) => read_bundle(dir)?.frame_count(),
        None => 0,
    };
    let report = evaluate(&pred, &gt, frames).to_key_value();
    print!("{report}");
    if let Some(out) = &a.out {
        write_text(out, &report)?;
    }
    Ok(())
}

fn ablate(a: &AblateArgs) -> Result<(), Failure> {
    let sweeps = a
        .sweep
        .iter()
        .map(|s| s.trim().parse::<Sweep>())
        .collect::<Result<Vec<_>, _>>()?;
    let base = a.pipeline.config();
    base.validate()?;
    log_config(&base);
    let bundle = read_bundle(&a.bundle)?;
    let gt = read_tracks(
        &a.gt
            .clone()
            .unwrap_or_else(|| a.bundle.join("gt_tracks.csv")),
    )?;
    let all: Vec<_> = sweeps.iter().flat_map(|&s| arms(s, &base)).collect();
    let results = run_arms(&bundle, &gt, &all)?;
    let csv = to_csv(&results);
    match &a.out {
        Some(out) => write_text(out, &csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn parse_range(s: &str) -> Result<std::ops::Range<usize>, Failure> {
    let bad = || usage(format!("frame range must look like a..b, got {s:?}"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    Ok(a.trim().parse().map_err(|_| bad())?..b.trim().parse().map_err(|_| bad())?)
}

fn render(a: &RenderArgs) -> Result<(), Failure> {
    let range = parse_range(&a.frames)?;
    let bundle = read_bundle(&a.bundle)?;
    let tracks = read_tracks(&a.tracks)?;
    if !range.is_empty() && range.end > bundle.frame_count() {
        return Err(Error::OutOfRange(format!(
            "frames {s}..{e} (bundle has {n})",
            s = range.start,
            e = range.end,
            n = bundle.frame_count()
        ))
        .into());
    }
    fs::create_dir_all(&a.out).map_err(|e| Failure {
        code: 2,
        message: format!("{}: {e}", a.out.display()),
    })?;
    for f in range {
        let img = render_overlay(&bundle, &tracks, f)?;
        img.write_ppm(&a.out.join(format!("overlay_{f:06}.ppm")))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = par::with_jobs(cli.jobs, || match &cli.command {
        Command::Synth(a) => synth(a),
        Command::Track(a) => track(a),
        Command::Eval(a) => eval(a),
        Command::Ablate(a) => ablate(a),
        Command::Render(a) => render(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
