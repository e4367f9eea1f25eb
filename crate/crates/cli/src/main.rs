use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::Parser;
use stopshop::pipeline::{run_pipeline, PipelineConfig, RunMode};

/// Compute 3D-printable replacement libraries and shooting instructions
/// for a mesh animation.
#[derive(Parser, Debug)]
#[command(name = "stopshop", version)]
struct Args {
    /// Directory of per-frame OBJ files with shared connectivity.
    #[arg(long)]
    input: PathBuf,
    /// Part seeds: one line of triangle indices per part.
    #[arg(long)]
    seeds: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    parts: usize,
    /// Library size per part, comma separated; one value applies to all.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = stopshop::library::DEFAULT_LAMBDA)]
    lambda: f64,
    #[arg(long, default_value_t = stopshop::segmentation::DEFAULT_GAMMA)]
    gamma: f64,
    /// Per-vertex saliency weights, one per line.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Frame indices that start a new shot.
    #[arg(long)]
    cuts: Option<PathBuf>,
    #[arg(long, default_value_t = stopshop::library::DEFAULT_RESTARTS)]
    restarts: usize,
    #[arg(long, default_value_t = stopshop::library::DEFAULT_MAX_ITERS)]
    max_iters: usize,
    #[arg(long, default_value_t = stopshop::library::DEFAULT_REL_TOL)]
    rel_tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Fit every library size in `MIN:MAX`.
    #[arg(long, value_name = "MIN:MAX", conflicts_with_all = ["error_cap", "segment_only"])]
    sweep: Option<String>,
    /// Smallest library whose worst frame error stays below `E`.
    #[arg(long, value_name = "E", conflicts_with = "segment_only")]
    error_cap: Option<f64>,
    /// Directory with a `manifest.json` of predefined pieces per part.
    #[arg(long)]
    fixed_library: Option<PathBuf>,
    /// Stop after segmentation and seam homogenization.
    #[arg(long)]
    segment_only: bool,
    #[arg(long, default_value_t = stopshop::boundary::DEFAULT_SMOOTHING_ITERATIONS)]
    smoothing_iterations: usize,
    #[arg(long, default_value_t = stopshop::boundary::DEFAULT_SMOOTHING_STEP)]
    smoothing_step: f64,
    /// Drop boundary islands with fewer triangles than this.
    #[arg(long, default_value_t = 0)]
    min_island: usize,
}

fn parse_range(s: &str) -> anyhow::Result<(usize, usize)> {
    let (a, b) = s.split_once(':').context("expected MIN:MAX")?;
    Ok((a.trim().parse()?, b.trim().parse()?))
}

fn config(args: Args) -> anyhow::Result<PipelineConfig> {
    let mode = match (args.sweep.as_deref(), args.error_cap, args.segment_only) {
        (Some(r), None, false) => {
            let (min, max) = parse_range(r).with_context(|| format!("invalid --sweep {r}"))?;
            RunMode::Sweep { min, max }
        }
        (None, Some(cap), false) => RunMode::ErrorCap { cap },
        (None, None, true) => RunMode::SegmentOnly,
        (None, None, false) => RunMode::Optimize,
        _ => bail!("--sweep, --error-cap and --segment-only are exclusive"),
    };
    Ok(PipelineConfig {
        input: args.input,
        cuts: args.cuts,
        seeds: args.seeds,
        parts: args.parts,
        sizes: args.sizes,
        lambda: args.lambda,
        gamma: args.gamma,
        weights: args.weights,
        smoothing_iterations: args.smoothing_iterations,
        smoothing_step: args.smoothing_step,
        min_island: args.min_island,
        restarts: args.restarts,
        max_iters: args.max_iters,
        rel_tol: args.rel_tol,
        seed: args.seed,
        out: args.out,
        mode,
        fixed_library: args.fixed_library,
    })
}

fn main() -> ExitCode {
    let run = || -> anyhow::Result<()> {
        let config = config(Args::parse())?;
        let out = run_pipeline(&config)?;
        let m = &out.manifest;
        println!("{} frames, {} parts", m.n_frames, m.parts.len());
        for p in &m.parts {
            println!("part{}: {} pieces, energy {:.6e}, {:.2} frames per piece", p.part, p.pieces, p.energy, p.compression);
        }
        if !m.parts.is_empty() {
            println!(
                "{} printed pieces for {} frame-parts ({:.2}x saving), output in {}",
                m.printed_pieces,
                m.naive_pieces,
                m.combined_saving,
                config.out.display()
            );
        }
        Ok(())
    };
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
