use hybridsci_core::capture::{normalized_frame_gap, required_scene_len};
use hybridsci_core::metrics::format_psnr;
use hybridsci_core::{Error as CoreError, VideoCube};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{AtStage, CliError, CliResult, Failure, Stage};
use crate::measurement::{write_json, write_text};
use crate::pipeline::{create_dir, run_pipeline_on, RunOptions};
use crate::scene::load_scene;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub gap_frames: usize,
    /// Normalized frame gap `gap_frames / B`.
    pub ratio: f64,
    #[serde(with = "hybridsci_core::metrics::psnr_serde")]
    pub psnr_db: f64,
    pub ssim: f64,
    #[serde(with = "hybridsci_core::metrics::psnr_serde")]
    pub intermediate_psnr_db: f64,
    pub intermediate_ssim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: PipelineConfig,
    /// Sorted by `gap_frames`.
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("gap_frames,ratio,psnr_db,ssim,intermediate_psnr_db,intermediate_ssim\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.6},{},{:.6},{},{:.6}\n",
                r.gap_frames,
                r.ratio,
                format_psnr(r.psnr_db),
                r.ssim,
                format_psnr(r.intermediate_psnr_db),
                r.intermediate_ssim
            ));
        }
        out
    }
}

/// Loads the configured scene and runs [`sweep_frame_gap_on`].
pub fn sweep_frame_gap(config: &PipelineConfig, gaps: &[usize], options: RunOptions) -> CliResult<SweepResult> {
    config.validate()?;
    let scene = load_scene(&config.scene)?;
    sweep_frame_gap_on(config, &scene, gaps, options)
}

/// Runs the full pipeline once per frame gap with identical seeds. Each row
/// is exactly a standalone run with `gap_frames` overridden, written to
/// `<output_dir>/gap_<g>`. Rows run concurrently; the first failing row
/// aborts the sweep.
pub fn sweep_frame_gap_on(
    config: &PipelineConfig,
    scene: &VideoCube,
    gaps: &[usize],
    options: RunOptions,
) -> CliResult<SweepResult> {
    let mut gaps = gaps.to_vec();
    gaps.sort_unstable();
    gaps.dedup();
    let Some(&largest) = gaps.last() else {
        return Err(CliError::new(Stage::Config, Failure::Config("no frame gaps to sweep".into())));
    };
    let needed = required_scene_len(config.b, largest);
    if scene.frames() < needed {
        return Err(CoreError::SceneTooShort {
            needed,
            available: scene.frames(),
        })
        .at(Stage::Scene);
    }
    create_dir(&config.output_dir)?;
    let rows = gaps
        .par_iter()
        .map(|&gap| {
            let mut row_config = config.clone();
            row_config.gap_frames = gap;
            row_config.output_dir = config.output_dir.join(format!("gap_{gap}"));
            let report = run_pipeline_on(&row_config, scene, options)?;
            Ok(SweepRow {
                gap_frames: gap,
                ratio: normalized_frame_gap(gap, config.b),
                psnr_db: report.mean.psnr_db,
                ssim: report.mean.ssim,
                intermediate_psnr_db: report.intermediate_mean.psnr_db,
                intermediate_ssim: report.intermediate_mean.ssim,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let result = SweepResult {
        config: config.clone(),
        rows,
    };
    write_json(&config.output_dir.join("sweep.json"), &result)?;
    write_text(&config.output_dir.join("sweep.csv"), &result.to_csv())?;
    Ok(result)
}
