use std::path::{Path, PathBuf};

use hybridsci_core::capture::{build_schedule, NoiseModel, TimingSchedule};
use hybridsci_core::fusion::FusionParams;
use hybridsci_core::recon::GapTvParams;
use serde::{Deserialize, Serialize};

use crate::error::{AtStage, CliError, CliResult, Failure, Stage};

/// One end-to-end run: scene, capture timing, coding, noise and solver settings.
///
/// Time values are integer microseconds. Relative `scene` and `output_dir`
/// paths are resolved against the directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// KHCV video cube, or a directory of numbered PGM frames.
    pub scene: PathBuf,
    /// Frames per compressive measurement.
    #[serde(rename = "B")]
    pub b: usize,
    /// Short (key-frame) exposure and modulation period.
    #[serde(default = "default_t_x")]
    pub t_x_us: u64,
    /// Sensor readout gap; recorded in the schedule.
    #[serde(default)]
    pub t_g_us: u64,
    /// Scene frames skipped on each side between key frames and the block.
    #[serde(default)]
    pub gap_frames: usize,
    #[serde(default)]
    pub mask_seed: u64,
    #[serde(default = "default_density")]
    pub mask_density: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub noise_seed: u64,
    #[serde(default)]
    pub gap_tv: GapTvParams,
    /// Fusion settings, including the optical-flow parameters under `flow`.
    #[serde(default)]
    pub fusion: FusionParams,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

fn default_t_x() -> u64 {
    2083
}

fn default_density() -> f64 {
    0.5
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl PipelineConfig {
    /// A config with every optional field at its default.
    pub fn new(scene: impl Into<PathBuf>, b: usize) -> Self {
        Self {
            scene: scene.into(),
            b,
            t_x_us: default_t_x(),
            t_g_us: 0,
            gap_frames: 0,
            mask_seed: 0,
            mask_density: default_density(),
            noise_sigma: 0.0,
            noise_seed: 0,
            gap_tv: GapTvParams::default(),
            fusion: FusionParams::default(),
            output_dir: default_output(),
        }
    }

    /// Reads, path-resolves and validates a JSON config file.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))
            .at(Stage::Config)?;
        let mut config: PipelineConfig = serde_json::from_str(&text)
            .map_err(|source| Failure::Json {
                path: path.to_path_buf(),
                source,
            })
            .at(Stage::Config)?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.scene = base.join(&config.scene);
        config.output_dir = base.join(&config.output_dir);
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> CliResult<()> {
        let fail = |msg: String| Err(CliError::new(Stage::Config, Failure::Config(msg)));
        if self.b < 1 {
            return fail("B must be >= 1".into());
        }
        if self.t_x_us == 0 {
            return fail("t_x_us must be > 0".into());
        }
        if !(self.mask_density > 0.0 && self.mask_density <= 1.0) {
            return fail(format!("mask_density {} outside (0, 1]", self.mask_density));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return fail(format!("noise_sigma {} must be finite and >= 0", self.noise_sigma));
        }
        self.gap_tv.validate().at(Stage::Config)?;
        self.fusion.validate().at(Stage::Config)?;
        Ok(())
    }

    pub fn schedule(&self) -> CliResult<TimingSchedule> {
        build_schedule(self.t_x_us, self.b, self.t_g_us).at(Stage::Config)
    }

    pub fn noise(&self) -> CliResult<NoiseModel> {
        NoiseModel::gaussian(self.noise_sigma, self.noise_seed).at(Stage::Config)
    }
}
