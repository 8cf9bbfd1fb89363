use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use hybridsci_core::flow::{estimate_flow, flow_to_color, FlowParams, MaxMagnitude};
use hybridsci_core::fusion::FusionParams;
use hybridsci_core::io::{export_ppm, import_pgm, load_tensor, save_tensor, Tensor};
use hybridsci_core::recon::GapTvParams;
use hybridsci_core::synth::{moving_square, translating_texture};
use hybridsci_core::{Frame, VideoCube};

use crate::config::PipelineConfig;
use crate::error::{AtStage, CliError, CliResult, Failure, Stage};
use crate::measurement::{load_measurement, save_measurement, write_json, write_text, CaptureSeeds};
use crate::pipeline::{
    create_dir, dump_fusion_diagnostics, export_sequence, fuse, reconstruct, run_pipeline, simulate,
    ReconSummary, RunOptions,
};
use crate::scene::load_scene;
use crate::sweep::sweep_frame_gap;

/// Hybrid compressive video: simulate, reconstruct, fuse and score.
#[derive(Debug, Parser)]
#[command(name = "hybridsci", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic scene (KHCV video cube).
    Synth(SynthArgs),
    /// Simulate masks, the compressive frame and both key frames.
    Simulate(RunArgs),
    /// Reconstruct the intermediate video from a saved measurement.
    Reconstruct(ReconstructArgs),
    /// Fuse key frames into a reconstructed intermediate video.
    Fuse(FuseArgs),
    /// Simulate, reconstruct, fuse and score in one run.
    Pipeline(RunArgs),
    /// Run the pipeline over several frame gaps.
    Sweep(SweepArgs),
    /// PSNR / SSIM / L1 between two KHCV frames or video cubes.
    Metrics(MetricsArgs),
    /// Estimate optical flow between two frames, or colour-code a saved flow.
    Flowviz(FlowvizArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SceneKind {
    /// Band-limited texture translating at a constant velocity.
    Texture,
    /// Bright square moving over a shaded background.
    Square,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "texture")]
    pub kind: SceneKind,
    #[arg(long, default_value_t = 128)]
    pub width: usize,
    #[arg(long, default_value_t = 128)]
    pub height: usize,
    #[arg(long, default_value_t = 26)]
    pub frames: usize,
    /// Horizontal velocity in pixels per frame.
    #[arg(long, default_value_t = 0.16, allow_negative_numbers = true)]
    pub vx: f64,
    /// Vertical velocity in pixels per frame.
    #[arg(long, default_value_t = 0.12, allow_negative_numbers = true)]
    pub vy: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Output KHCV file.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the frames as a PGM sequence into this directory.
    #[arg(long)]
    pub pgm_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides the config's `output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub mask_seed: Option<u64>,
    #[arg(long)]
    pub noise_seed: Option<u64>,
    /// Write PGM sequences and per-frame fusion diagnostics.
    #[arg(long)]
    pub dump_intermediates: bool,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Measurement manifest written by `simulate`.
    #[arg(long)]
    pub measurement: PathBuf,
    /// Pipeline config supplying solver settings (defaults otherwise).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub dump_intermediates: bool,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    #[arg(long)]
    pub measurement: PathBuf,
    /// Intermediate video written by `reconstruct`.
    #[arg(long)]
    pub intermediate: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub dump_intermediates: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated frame gaps.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    pub gaps: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Estimate (KHCV frame or video cube).
    pub estimate: PathBuf,
    /// Reference of the same kind and shape.
    pub reference: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub peak: f64,
    /// Write the JSON report here and a CSV alongside it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FlowvizArgs {
    /// Target frame (KHCV or PGM); flow maps its pixels into the source.
    #[arg(long, requires = "source", conflicts_with = "flow")]
    pub target: Option<PathBuf>,
    #[arg(long, requires = "target")]
    pub source: Option<PathBuf>,
    /// Saved KHCV flow field to colour-code instead of estimating one.
    #[arg(long, required_unless_present = "target")]
    pub flow: Option<PathBuf>,
    /// Saturation scale in pixels, or `auto` for the 99th-percentile magnitude.
    #[arg(long, default_value = "auto")]
    pub max: String,
    /// Pipeline config supplying flow settings (defaults otherwise).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output PPM image.
    #[arg(long)]
    pub out: PathBuf,
    /// Also save the estimated flow as KHCV.
    #[arg(long)]
    pub save_flow: Option<PathBuf>,
}

/// Executes a parsed command, printing a short summary to stdout.
pub fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Reconstruct(a) => cmd_reconstruct(&a),
        Command::Fuse(a) => cmd_fuse(&a),
        Command::Pipeline(a) => cmd_pipeline(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Metrics(a) => cmd_metrics(&a),
        Command::Flowviz(a) => cmd_flowviz(&a),
    }
}

fn cmd_synth(a: &SynthArgs) -> CliResult<()> {
    if a.width == 0 || a.height == 0 || a.frames == 0 {
        return Err(CliError::new(Stage::Config, Failure::Config("scene dimensions must be > 0".into())));
    }
    let video = match a.kind {
        SceneKind::Texture => translating_texture(a.width, a.height, a.frames, (a.vx, a.vy), a.seed),
        SceneKind::Square => {
            let side = (a.width.min(a.height) / 4).max(1) as f64;
            moving_square(a.width, a.height, a.frames, side, (side, side), (a.vx, a.vy))
        }
    };
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    save_tensor(&Tensor::from(video.clone()), &a.out).at(Stage::Output)?;
    if let Some(dir) = &a.pgm_dir {
        export_sequence(&video, dir)?;
    }
    println!("wrote {} ({}x{}x{})", a.out.display(), a.width, a.height, a.frames);
    Ok(())
}

/// Loads the config and applies command-line overrides.
fn run_config(a: &RunArgs) -> CliResult<PipelineConfig> {
    let mut config = PipelineConfig::load(&a.config)?;
    if let Some(out) = &a.out {
        config.output_dir = out.clone();
    }
    if let Some(seed) = a.mask_seed {
        config.mask_seed = seed;
    }
    if let Some(seed) = a.noise_seed {
        config.noise_seed = seed;
    }
    Ok(config)
}

fn options(dump_intermediates: bool) -> RunOptions {
    RunOptions { dump_intermediates }
}

fn cmd_simulate(a: &RunArgs) -> CliResult<()> {
    let config = run_config(a)?;
    let scene = load_scene(&config.scene)?;
    let m = simulate(&config, &scene)?;
    let seeds = CaptureSeeds {
        mask_seed: config.mask_seed,
        noise_sigma: config.noise_sigma,
        noise_seed: config.noise_seed,
    };
    let manifest = save_measurement(&m, seeds, &config.output_dir)?;
    println!("wrote {}", manifest.display());
    Ok(())
}

fn optional_config(path: Option<&Path>) -> CliResult<Option<PipelineConfig>> {
    path.map(PipelineConfig::load).transpose()
}

fn cmd_reconstruct(a: &ReconstructArgs) -> CliResult<()> {
    let params = optional_config(a.config.as_deref())?
        .map(|c| c.gap_tv)
        .unwrap_or_else(GapTvParams::default);
    let (m, _) = load_measurement(&a.measurement)?;
    let (x_mid, report) = reconstruct(&m, &params)?;
    create_dir(&a.out)?;
    let path = a.out.join("intermediate.khcv");
    save_tensor(&Tensor::from(x_mid.clone()), &path).at(Stage::Output)?;
    write_json(&a.out.join("reconstruction.json"), &ReconSummary::from(&report))?;
    if a.dump_intermediates {
        export_sequence(&x_mid, &a.out.join("intermediate_frames"))?;
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_fuse(a: &FuseArgs) -> CliResult<()> {
    let params = optional_config(a.config.as_deref())?
        .map(|c| c.fusion)
        .unwrap_or_else(FusionParams::default);
    let (m, _) = load_measurement(&a.measurement)?;
    let x_mid = load_tensor(&a.intermediate)
        .and_then(Tensor::into_video)
        .at(Stage::Scene)?;
    let frames = fuse(&m, &x_mid, &params)?;
    let fused = VideoCube::from_frames(&frames.iter().map(|f| f.frame.clone()).collect::<Vec<_>>())
        .at(Stage::Fuse)?;
    create_dir(&a.out)?;
    let path = a.out.join("fused.khcv");
    save_tensor(&Tensor::from(fused.clone()), &path).at(Stage::Output)?;
    if a.dump_intermediates {
        export_sequence(&fused, &a.out.join("fused_frames"))?;
        dump_fusion_diagnostics(&frames, &a.out.join("diagnostics"))?;
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_pipeline(a: &RunArgs) -> CliResult<()> {
    let config = run_config(a)?;
    let report = run_pipeline(&config, options(a.dump_intermediates))?;
    println!(
        "intermediate: {} dB / SSIM {:.4}; fused: {} dB / SSIM {:.4}",
        hybridsci_core::metrics::format_psnr(report.intermediate_mean.psnr_db),
        report.intermediate_mean.ssim,
        hybridsci_core::metrics::format_psnr(report.mean.psnr_db),
        report.mean.ssim
    );
    println!("wrote {}", config.output_dir.join(crate::pipeline::REPORT_NAME).display());
    Ok(())
}

fn cmd_sweep(a: &SweepArgs) -> CliResult<()> {
    let config = run_config(&a.run)?;
    let result = sweep_frame_gap(&config, &a.gaps, options(a.run.dump_intermediates))?;
    print!("{}", result.to_csv());
    Ok(())
}

fn cmd_metrics(a: &MetricsArgs) -> CliResult<()> {
    if !(a.peak > 0.0 && a.peak.is_finite()) {
        return Err(CliError::new(Stage::Config, Failure::Config("peak must be > 0".into())));
    }
    let estimate = load_tensor(&a.estimate).at(Stage::Scene)?;
    let reference = load_tensor(&a.reference).at(Stage::Scene)?;
    let report = crate::pipeline::compare(&estimate, &reference, a.peak)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    // A closed pipe (e.g. `| head`) is not an error for a report printer.
    let _ = writeln!(std::io::stdout(), "{json}");
    if let Some(out) = &a.out {
        if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
            create_dir(parent)?;
        }
        write_json(out, &report)?;
        write_text(&out.with_extension("csv"), &report.to_csv())?;
    }
    Ok(())
}

fn load_frame(path: &Path) -> CliResult<Frame> {
    let is_pgm = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm"));
    if is_pgm {
        import_pgm(path).at(Stage::Scene)
    } else {
        load_tensor(path).and_then(Tensor::into_frame).at(Stage::Scene)
    }
}

fn parse_max(s: &str) -> CliResult<MaxMagnitude> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(MaxMagnitude::Auto);
    }
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(MaxMagnitude::Fixed(v)),
        _ => Err(CliError::new(
            Stage::Config,
            Failure::Config(format!("--max must be `auto` or a positive number, got `{s}`")),
        )),
    }
}

fn cmd_flowviz(a: &FlowvizArgs) -> CliResult<()> {
    let max = parse_max(&a.max)?;
    let flow = match (&a.flow, &a.target, &a.source) {
        (Some(path), _, _) => load_tensor(path).and_then(Tensor::into_flow).at(Stage::Scene)?,
        (None, Some(target), Some(source)) => {
            let params = optional_config(a.config.as_deref())?
                .map(|c| c.fusion.flow_params)
                .unwrap_or_else(FlowParams::default);
            let target = load_frame(target)?;
            let source = load_frame(source)?;
            estimate_flow(&target, &source, &params).at(Stage::Fuse)?
        }
        _ => {
            return Err(CliError::new(
                Stage::Config,
                Failure::Config("give --flow or both --target and --source".into()),
            ))
        }
    };
    if let Some(path) = &a.save_flow {
        save_tensor(&Tensor::from(flow.clone()), path).at(Stage::Output)?;
    }
    export_ppm(&flow_to_color(&flow, max), &a.out).at(Stage::Output)?;
    println!("mean flow magnitude {:.4} px; wrote {}", flow.mean_magnitude(), a.out.display());
    Ok(())
}
