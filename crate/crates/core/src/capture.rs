//! Simulation of the hybrid coded-exposure encoder.
//!
//! A capture cycle is one uncoded short-exposure key frame followed by a long
//! exposure during which `B` binary masks are shown in turn, integrating `B`
//! scene frames into a single compressive frame. The next key frame closes the
//! block and opens the following one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, CounterRng};
use crate::tensor::{CodingCube, Frame, VideoCube};

/// Exposure and trigger timing, all durations in integer microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimingSchedule {
    /// Mask refresh period, also the equivalent per-frame exposure.
    pub t_x: u64,
    /// Long (compressive) exposure, `b * t_x`.
    pub t_y: u64,
    /// Key-frame exposure, equal to `t_x`.
    pub t_z: u64,
    /// Sensor readout gap between exposures.
    pub t_g: u64,
    /// Masks per compressive frame.
    #[serde(rename = "B")]
    pub b: usize,
}

impl TimingSchedule {
    /// Readout gap relative to the long exposure.
    pub fn gap_ratio(&self) -> f64 {
        self.t_g as f64 / self.t_y as f64
    }

    /// Equivalent frame rate of the reconstructed video in frames per second.
    pub fn equivalent_fps(&self) -> f64 {
        1e6 / self.t_x as f64
    }
}

pub fn build_schedule(t_x: u64, b: usize, t_g: u64) -> Result<TimingSchedule> {
    if t_x == 0 {
        return Err(Error::InvalidParam("t_x must be positive".into()));
    }
    if b == 0 {
        return Err(Error::InvalidParam("B must be at least 1".into()));
    }
    let t_y = t_x
        .checked_mul(b as u64)
        .ok_or_else(|| Error::InvalidParam("t_x * B overflows".into()))?;
    Ok(TimingSchedule {
        t_x,
        t_y,
        t_z: t_x,
        t_g,
        b,
    })
}

/// Frame gap expressed as a fraction of the long exposure when `gap_frames`
/// whole frames are skipped on each side of a `b`-frame block.
pub fn normalized_frame_gap(gap_frames: usize, b: usize) -> f64 {
    gap_frames as f64 / b as f64
}

/// Captured frames per delivered frame: two captures (one key, one
/// compressive) yield `b` reconstructed frames plus the key frame itself.
pub fn compressive_ratio(b: usize) -> f64 {
    2.0 / (b as f64 + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum NoiseModel {
    None,
    AdditiveGaussian { sigma: f64, seed: u64 },
}

impl NoiseModel {
    pub fn gaussian(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParam(format!(
                "noise sigma must be finite and >= 0, got {sigma}"
            )));
        }
        Ok(if sigma == 0.0 {
            NoiseModel::None
        } else {
            NoiseModel::AdditiveGaussian { sigma, seed }
        })
    }

    pub fn sigma(&self) -> f64 {
        match self {
            NoiseModel::None => 0.0,
            NoiseModel::AdditiveGaussian { sigma, .. } => *sigma,
        }
    }

    fn apply(&self, data: &mut [f32], stream_id: u64) {
        if let NoiseModel::AdditiveGaussian { sigma, seed } = *self {
            let rng = CounterRng::new(seed, stream_id);
            for (n, v) in data.iter_mut().enumerate() {
                *v = (*v as f64 + sigma * rng.gaussian(n as u64)) as f32;
            }
        }
    }
}

/// Bernoulli(`density`) masks; sample at flat index `n` (frame-major,
/// row-major) is `uniform(n) < density` from the mask stream of `seed`.
pub fn generate_masks(
    seed: u64,
    height: usize,
    width: usize,
    b: usize,
    density: f64,
) -> Result<CodingCube> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidParam(format!(
            "mask density must be in (0, 1], got {density}"
        )));
    }
    if height == 0 || width == 0 || b == 0 {
        return Err(Error::Shape(format!(
            "mask cube needs non-zero dims, got {height}x{width}x{b}"
        )));
    }
    let rng = CounterRng::new(seed, stream::MASKS);
    let data = (0..(height * width * b) as u64)
        .map(|n| rng.bernoulli(n, density) as u8)
        .collect();
    CodingCube::new(width, height, b, data)
}

fn ensure_cube_matches(x: &VideoCube, c: &CodingCube) -> Result<()> {
    if x.width() != c.width() || x.height() != c.height() || x.frames() != c.frames() {
        return Err(Error::Shape(format!(
            "video {}x{}x{} vs masks {}x{}x{}",
            x.width(),
            x.height(),
            x.frames(),
            c.width(),
            c.height(),
            c.frames()
        )));
    }
    Ok(())
}

/// Noiseless forward operator: `Σ_k c_k ⊙ x_k`.
pub fn forward(x: &VideoCube, c: &CodingCube) -> Result<Frame> {
    ensure_cube_matches(x, c)?;
    let n = x.frame_len();
    let mut y = vec![0.0f32; n];
    for k in 0..x.frames() {
        for ((acc, &xv), &cv) in y.iter_mut().zip(x.frame_slice(k)).zip(c.mask_slice(k)) {
            if cv != 0 {
                *acc += xv;
            }
        }
    }
    Frame::new(x.width(), x.height(), y)
}

/// Coded long-exposure measurement `y = Σ_k c_k ⊙ x_k + g`.
pub fn encode(x: &VideoCube, c: &CodingCube, noise: &NoiseModel) -> Result<Frame> {
    let mut y = forward(x, c)?;
    noise.apply(y.data_mut(), stream::COMPRESSIVE_NOISE);
    Ok(y)
}

/// Number of scene frames a capture cycle consumes.
pub fn required_scene_len(b: usize, gap_frames: usize) -> usize {
    b + 2 + 2 * gap_frames
}

fn ensure_scene_len(scene: &VideoCube, b: usize, gap_frames: usize) -> Result<()> {
    let needed = required_scene_len(b, gap_frames);
    if b == 0 {
        return Err(Error::InvalidParam("B must be at least 1".into()));
    }
    if scene.frames() < needed {
        return Err(Error::SceneTooShort {
            needed,
            available: scene.frames(),
        });
    }
    Ok(())
}

/// Scene index of the first compressed frame. The window starts at scene
/// frame 0 with the left key frame, then `gap_frames` skipped frames.
pub fn block_start(gap_frames: usize) -> usize {
    gap_frames + 1
}

/// The `b` ground-truth frames that a capture integrates.
pub fn compressed_block(scene: &VideoCube, b: usize, gap_frames: usize) -> Result<VideoCube> {
    ensure_scene_len(scene, b, gap_frames)?;
    scene.sub_block(block_start(gap_frames), b)
}

/// Short-exposure key frames on either side of the block, each `gap_frames + 1`
/// positions away from the nearest compressed frame.
pub fn sample_keyframes(
    scene: &VideoCube,
    b: usize,
    gap_frames: usize,
    noise: &NoiseModel,
) -> Result<(Frame, Frame)> {
    ensure_scene_len(scene, b, gap_frames)?;
    let mut left = scene.frame(0);
    let mut right = scene.frame(b + 1 + 2 * gap_frames);
    noise.apply(left.data_mut(), stream::KEY_LEFT_NOISE);
    noise.apply(right.data_mut(), stream::KEY_RIGHT_NOISE);
    Ok((left, right))
}

/// One compressive frame with its two neighbouring key frames.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridMeasurement {
    pub y: Frame,
    pub z_left: Frame,
    pub z_right: Frame,
    pub masks: CodingCube,
    pub schedule: TimingSchedule,
    pub gap_frames: usize,
}

impl HybridMeasurement {
    pub fn new(
        y: Frame,
        z_left: Frame,
        z_right: Frame,
        masks: CodingCube,
        schedule: TimingSchedule,
        gap_frames: usize,
    ) -> Result<Self> {
        y.ensure_same_shape(&z_left, "measurement key frame (left)")?;
        y.ensure_same_shape(&z_right, "measurement key frame (right)")?;
        if masks.width() != y.width() || masks.height() != y.height() {
            return Err(Error::Shape(format!(
                "masks {}x{} vs measurement {}x{}",
                masks.width(),
                masks.height(),
                y.width(),
                y.height()
            )));
        }
        if masks.frames() != schedule.b {
            return Err(Error::Shape(format!(
                "{} masks for a schedule with B = {}",
                masks.frames(),
                schedule.b
            )));
        }
        Ok(Self {
            y,
            z_left,
            z_right,
            masks,
            schedule,
            gap_frames,
        })
    }

    pub fn b(&self) -> usize {
        self.schedule.b
    }

    pub fn width(&self) -> usize {
        self.y.width()
    }

    pub fn height(&self) -> usize {
        self.y.height()
    }
}

pub fn simulate_capture(
    scene: &VideoCube,
    masks: &CodingCube,
    schedule: &TimingSchedule,
    gap_frames: usize,
    noise: &NoiseModel,
) -> Result<HybridMeasurement> {
    if masks.frames() != schedule.b {
        return Err(Error::Shape(format!(
            "{} masks for a schedule with B = {}",
            masks.frames(),
            schedule.b
        )));
    }
    let block = compressed_block(scene, schedule.b, gap_frames)?;
    let y = encode(&block, masks, noise)?;
    let (z_left, z_right) = sample_keyframes(scene, schedule.b, gap_frames, noise)?;
    HybridMeasurement::new(y, z_left, z_right, masks.clone(), *schedule, gap_frames)
}
