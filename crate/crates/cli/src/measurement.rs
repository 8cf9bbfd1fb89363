use std::path::{Path, PathBuf};

use hybridsci_core::capture::{HybridMeasurement, TimingSchedule};
use hybridsci_core::io::{load_tensor, save_tensor, Tensor};
use serde::{Deserialize, Serialize};

use crate::error::{AtStage, CliResult, Failure, Stage};

pub const MANIFEST_NAME: &str = "manifest.json";

/// JSON index of a saved measurement. File paths are relative to the
/// manifest's directory; times are integer microseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementManifest {
    pub y: PathBuf,
    pub z_left: PathBuf,
    pub z_right: PathBuf,
    pub masks: PathBuf,
    pub t_x: u64,
    pub t_y: u64,
    pub t_z: u64,
    pub t_g: u64,
    #[serde(rename = "B")]
    pub b: usize,
    pub gap_frames: usize,
    /// Mask seed.
    pub seed: u64,
    pub noise_sigma: f64,
    pub noise_seed: u64,
}

/// Seeds and noise level recorded alongside a measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaptureSeeds {
    pub mask_seed: u64,
    pub noise_sigma: f64,
    pub noise_seed: u64,
}

/// Writes the four measurement tensors and their manifest into `dir`;
/// returns the manifest path.
pub fn save_measurement(m: &HybridMeasurement, seeds: CaptureSeeds, dir: &Path) -> CliResult<PathBuf> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Failure::Data(format!("cannot create {}: {e}", dir.display())))
        .at(Stage::Output)?;
    let manifest = MeasurementManifest {
        y: "y.khcv".into(),
        z_left: "z_left.khcv".into(),
        z_right: "z_right.khcv".into(),
        masks: "masks.khcv".into(),
        t_x: m.schedule.t_x,
        t_y: m.schedule.t_y,
        t_z: m.schedule.t_z,
        t_g: m.schedule.t_g,
        b: m.schedule.b,
        gap_frames: m.gap_frames,
        seed: seeds.mask_seed,
        noise_sigma: seeds.noise_sigma,
        noise_seed: seeds.noise_seed,
    };
    let outputs: [(&PathBuf, Tensor); 4] = [
        (&manifest.y, m.y.clone().into()),
        (&manifest.z_left, m.z_left.clone().into()),
        (&manifest.z_right, m.z_right.clone().into()),
        (&manifest.masks, m.masks.clone().into()),
    ];
    for (name, tensor) in outputs {
        save_tensor(&tensor, dir.join(name)).at(Stage::Output)?;
    }
    let path = dir.join(MANIFEST_NAME);
    write_json(&path, &manifest)?;
    Ok(path)
}

/// Loads a measurement from its manifest.
pub fn load_measurement(manifest_path: &Path) -> CliResult<(HybridMeasurement, MeasurementManifest)> {
    let manifest: MeasurementManifest = read_json(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new(""));
    let load = |p: &Path| load_tensor(base.join(p)).at(Stage::Scene);
    let y = load(&manifest.y)?.into_frame().at(Stage::Scene)?;
    let z_left = load(&manifest.z_left)?.into_frame().at(Stage::Scene)?;
    let z_right = load(&manifest.z_right)?.into_frame().at(Stage::Scene)?;
    let masks = load(&manifest.masks)?.into_coding().at(Stage::Scene)?;
    let schedule = TimingSchedule {
        t_x: manifest.t_x,
        t_y: manifest.t_y,
        t_z: manifest.t_z,
        t_g: manifest.t_g,
        b: manifest.b,
    };
    let m = HybridMeasurement::new(y, z_left, z_right, masks, schedule, manifest.gap_frames)
        .at(Stage::Scene)?;
    Ok((m, manifest))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|source| Failure::Json {
            path: path.to_path_buf(),
            source,
        })
        .at(Stage::Output)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text)
        .map_err(|e| Failure::Data(format!("cannot write {}: {e}", path.display())))
        .at(Stage::Output)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Data(format!("cannot read {}: {e}", path.display())))
        .at(Stage::Scene)?;
    serde_json::from_str(&text)
        .map_err(|source| Failure::Json {
            path: path.to_path_buf(),
            source,
        })
        .at(Stage::Config)
}
