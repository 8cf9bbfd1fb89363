use std::path::{Path, PathBuf};

use hybridsci_core::capture::{
    compressed_block, generate_masks, required_scene_len, simulate_capture, HybridMeasurement,
};
use hybridsci_core::flow::{flow_to_color, MaxMagnitude};
use hybridsci_core::fusion::{fuse_video_detailed, FusedFrame, FusionParams};
use hybridsci_core::io::{export_pgm, export_ppm, save_tensor, Tensor};
use hybridsci_core::metrics::{score_video, FrameScores, MeanScores, QualityReport};
use hybridsci_core::recon::{gap_tv_reconstruct_with_report, GapTvParams, ReconReport};
use hybridsci_core::{Error as CoreError, Frame, VideoCube};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{AtStage, CliResult, Failure, Stage};
use crate::measurement::{save_measurement, write_json, write_text, CaptureSeeds};
use crate::scene::load_scene;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Also write PGM frame sequences and per-frame fusion diagnostics.
    pub dump_intermediates: bool,
}

/// Summary of the solver run, kept in the pipeline report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconSummary {
    pub iterations: usize,
    pub final_residual: f64,
    pub uncovered_pixels: usize,
}

impl From<&ReconReport> for ReconSummary {
    fn from(r: &ReconReport) -> Self {
        Self {
            iterations: r.residual_history.len(),
            final_residual: r.residual_history.last().copied().unwrap_or(0.0),
            uncovered_pixels: r.uncovered_pixels,
        }
    }
}

/// JSON report of one pipeline run. `per_frame`/`mean` score the fused
/// block; the `intermediate_*` fields score the GAP-TV reconstruction.
/// Only the `B` reconstructed frames are scored, never the key frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub config: PipelineConfig,
    pub per_frame: Vec<FrameScores>,
    pub mean: MeanScores,
    pub intermediate_mean: MeanScores,
    pub intermediate_per_frame: Vec<FrameScores>,
    pub lpips: String,
    pub reconstruction: ReconSummary,
    /// Fused pixels that fell back to the intermediate frame, over the block.
    pub fallback_pixels: usize,
}

pub const REPORT_NAME: &str = "report.json";

/// Runs the whole chain on the configured scene.
pub fn run_pipeline(config: &PipelineConfig, options: RunOptions) -> CliResult<PipelineReport> {
    config.validate()?;
    let scene = load_scene(&config.scene)?;
    run_pipeline_on(config, &scene, options)
}

/// Runs the whole chain on an already-loaded scene and writes all outputs
/// below `config.output_dir`.
pub fn run_pipeline_on(
    config: &PipelineConfig,
    scene: &VideoCube,
    options: RunOptions,
) -> CliResult<PipelineReport> {
    config.validate()?;
    let out = &config.output_dir;
    create_dir(out)?;

    let measurement = simulate(config, scene)?;
    save_measurement(&measurement, seeds(config), &out.join("measurement"))?;

    let (x_mid, recon) = reconstruct(&measurement, &config.gap_tv)?;
    save_tensor(&Tensor::from(x_mid.clone()), out.join("intermediate.khcv")).at(Stage::Output)?;

    let fused_frames = fuse(&measurement, &x_mid, &config.fusion)?;
    let fused = VideoCube::from_frames(&fused_frames.iter().map(|f| f.frame.clone()).collect::<Vec<_>>())
        .at(Stage::Fuse)?;
    save_tensor(&Tensor::from(fused.clone()), out.join("fused.khcv")).at(Stage::Output)?;

    let truth = compressed_block(scene, config.b, config.gap_frames).at(Stage::Score)?;
    let fused_scores = score_video(&fused, &truth, 1.0).at(Stage::Score)?;
    let mid_scores = score_video(&x_mid, &truth, 1.0).at(Stage::Score)?;
    write_text(&out.join("fused_metrics.csv"), &fused_scores.to_csv())?;
    write_text(&out.join("intermediate_metrics.csv"), &mid_scores.to_csv())?;

    if options.dump_intermediates {
        export_sequence(&x_mid, &out.join("intermediate_frames"))?;
        export_sequence(&fused, &out.join("fused_frames"))?;
        dump_fusion_diagnostics(&fused_frames, &out.join("diagnostics"))?;
    }

    let report = PipelineReport {
        config: config.clone(),
        per_frame: fused_scores.per_frame,
        mean: fused_scores.mean,
        intermediate_mean: mid_scores.mean,
        intermediate_per_frame: mid_scores.per_frame,
        lpips: fused_scores.lpips,
        reconstruction: ReconSummary::from(&recon),
        fallback_pixels: fused_frames.iter().map(|f| f.fallback_pixels).sum(),
    };
    write_json(&out.join(REPORT_NAME), &report)?;
    Ok(report)
}

fn seeds(config: &PipelineConfig) -> CaptureSeeds {
    CaptureSeeds {
        mask_seed: config.mask_seed,
        noise_sigma: config.noise_sigma,
        noise_seed: config.noise_seed,
    }
}

/// Simulates masks and the hybrid capture of the configured block.
pub fn simulate(config: &PipelineConfig, scene: &VideoCube) -> CliResult<HybridMeasurement> {
    let needed = required_scene_len(config.b, config.gap_frames);
    if scene.frames() < needed {
        return Err(CoreError::SceneTooShort {
            needed,
            available: scene.frames(),
        })
        .at(Stage::Scene);
    }
    let masks = generate_masks(
        config.mask_seed,
        scene.height(),
        scene.width(),
        config.b,
        config.mask_density,
    )
    .at(Stage::Simulate)?;
    let schedule = config.schedule()?;
    let noise = config.noise()?;
    simulate_capture(scene, &masks, &schedule, config.gap_frames, &noise).at(Stage::Simulate)
}

pub fn reconstruct(m: &HybridMeasurement, params: &GapTvParams) -> CliResult<(VideoCube, ReconReport)> {
    gap_tv_reconstruct_with_report(&m.y, &m.masks, params).at(Stage::Reconstruct)
}

pub fn fuse(m: &HybridMeasurement, x_mid: &VideoCube, params: &FusionParams) -> CliResult<Vec<FusedFrame>> {
    fuse_video_detailed(m, x_mid, params).at(Stage::Fuse)
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Failure::Data(format!("cannot create {}: {e}", dir.display())))
        .at(Stage::Output)
}

/// Writes `frame_001.pgm`, `frame_002.pgm`, … into `dir`.
pub fn export_sequence(video: &VideoCube, dir: &Path) -> CliResult<()> {
    create_dir(dir)?;
    for k in 0..video.frames() {
        export_pgm(&video.frame(k), dir.join(frame_name("frame", k + 1, "pgm"))).at(Stage::Output)?;
    }
    Ok(())
}

fn frame_name(stem: &str, k: usize, ext: &str) -> PathBuf {
    PathBuf::from(format!("{stem}_{k:03}.{ext}"))
}

/// Flows (KHCV + colour-coded PPM), warped keys and visibility maps per frame.
pub fn dump_fusion_diagnostics(frames: &[FusedFrame], dir: &Path) -> CliResult<()> {
    create_dir(dir)?;
    for (idx, f) in frames.iter().enumerate() {
        let k = idx + 1;
        for (side, flow) in [("flow_left", &f.flow_left), ("flow_right", &f.flow_right)] {
            save_tensor(&Tensor::from(flow.clone()), dir.join(frame_name(side, k, "khcv")))
                .at(Stage::Output)?;
            export_ppm(&flow_to_color(flow, MaxMagnitude::Auto), dir.join(frame_name(side, k, "ppm")))
                .at(Stage::Output)?;
        }
        let images: [(&str, &Frame); 2] = [("warped_left", &f.warped_left), ("warped_right", &f.warped_right)];
        for (name, image) in images {
            export_pgm(&image.clamp(0.0, 1.0), dir.join(frame_name(name, k, "pgm"))).at(Stage::Output)?;
        }
        export_pgm(&f.visibility.to_frame(), dir.join(frame_name("visibility", k, "pgm"))).at(Stage::Output)?;
    }
    Ok(())
}

/// Scores `estimate` against `reference` for the `metrics` subcommand.
pub fn compare(estimate: &Tensor, reference: &Tensor, peak: f64) -> CliResult<QualityReport> {
    let report = match (estimate, reference) {
        (Tensor::Video(a), Tensor::Video(b)) => score_video(a, b, peak),
        (Tensor::Frame(a), Tensor::Frame(b)) => {
            hybridsci_core::metrics::score_frames(std::slice::from_ref(a), std::slice::from_ref(b), peak)
        }
        (a, b) => Err(CoreError::Shape(format!("cannot compare a {} with a {}", a.kind(), b.kind()))),
    };
    report.at(Stage::Score)
}
