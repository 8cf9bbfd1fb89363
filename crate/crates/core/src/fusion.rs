//! Key-frame fusion: aligns the two uncoded key frames to each intermediate
//! reconstructed frame and blends them with a visibility-weighted, time-weighted
//! average.
//!
//! Per frame `k` of a `B`-frame block:
//!
//! 1. optionally rescale both key frames to the intermediate frame's mean,
//! 2. estimate flows from the intermediate frame to each key (directly, by
//!    chaining through the intermediate video, or by interpolating the
//!    key-to-key flows under a linear-motion model),
//! 3. optionally refine each flow by re-estimating the residual against the
//!    warped key,
//! 4. backward-warp the keys, derive a visibility map from photometric errors,
//! 5. blend with time factor `τ = k / (B + 2)`,
//! 6. fall back to the intermediate frame where neither warp fits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capture::HybridMeasurement;
use crate::error::{Error, Result};
use crate::filter::box_filter;
use crate::flow::{compose_flows, estimate_flow, FlowParams};
pub use crate::interp::warp;
use crate::tensor::{FlowField, Frame, VideoCube};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionParams {
    /// Sharpness of the logistic visibility map.
    pub beta: f64,
    /// Box-filter radius applied to photometric errors.
    pub error_smooth_radius: usize,
    pub epsilon_blend: f64,
    /// Per-pixel fallback to the intermediate frame; `None` disables it.
    pub fallback_threshold: Option<f64>,
    /// Rescale key frames to the intermediate frame's mean before fusing.
    pub normalize_keys: bool,
    /// How the flows from each intermediate frame to the keys are obtained.
    pub flow_init: FlowInit,
    /// Re-estimate the residual flow against the intermediate frame.
    pub refine_flows: bool,
    #[serde(rename = "flow")]
    pub flow_params: FlowParams,
}

/// Source of the initial intermediate-to-key flows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowInit {
    /// Estimate each flow between the intermediate frame and the key.
    #[default]
    Direct,
    /// Compose per-step flows through the neighbouring intermediate frames.
    Chained,
    /// Estimate the two key-to-key flows once and interpolate them to each
    /// frame's temporal position assuming linear motion. The intermediate
    /// frames of a long block are temporally blurred towards its middle, so
    /// flows measured against them are biased; the sharp key pair is not.
    KeyInterpolated,
}

impl Default for FusionParams {
    fn default() -> Self {
        Self {
            beta: 20.0,
            error_smooth_radius: 1,
            epsilon_blend: 1e-6,
            fallback_threshold: Some(0.15),
            normalize_keys: true,
            flow_init: FlowInit::Direct,
            refine_flows: true,
            flow_params: FlowParams::default(),
        }
    }
}

impl FusionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParam("beta must be > 0".into()));
        }
        if !(self.epsilon_blend > 0.0) {
            return Err(Error::InvalidParam("epsilon_blend must be > 0".into()));
        }
        if let Some(t) = self.fallback_threshold {
            if !(t >= 0.0) {
                return Err(Error::InvalidParam("fallback_threshold must be >= 0".into()));
            }
        }
        self.flow_params.validate()
    }
}

/// Per-pixel weight of the left warped key frame; the right one gets `1 - v`.
#[derive(Debug, Clone, PartialEq)]
pub struct VisibleMap {
    width: usize,
    height: usize,
    values: Vec<f32>,
}

impl VisibleMap {
    pub fn new(width: usize, height: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::Shape(format!(
                "visible map: {} values for {width}x{height}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParam(format!("visible map value {v} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn uniform(width: usize, height: usize, v: f32) -> Result<Self> {
        Self::new(width, height, vec![v; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn to_frame(&self) -> Frame {
        Frame::new(self.width, self.height, self.values.clone())
            .expect("visible map values are finite")
    }
}

/// `τ = k / (B + 2)`, the relative temporal position of frame `k`.
pub fn time_factor(k: usize, b: usize) -> f64 {
    k as f64 / (b as f64 + 2.0)
}

/// Position of block frame `k` on the capture timeline between the two keys,
/// which sit `gap_frames + 1` frames outside the block on either side.
pub fn key_position(k: usize, b: usize, gap_frames: usize) -> f64 {
    (gap_frames + k) as f64 / (b + 1 + 2 * gap_frames) as f64
}

/// Flows from a frame at timeline position `t` to the left and right keys,
/// interpolated from the key-to-key flows under linear motion:
///
/// `F_{t→l} = −(1−t)·t·F_{l→r} + t²·F_{r→l}` and
/// `F_{t→r} = (1−t)²·F_{l→r} − t·(1−t)·F_{r→l}`,
///
/// where `f_lr` maps left-key coordinates into the right key and `f_rl` the
/// reverse. Exact for constant translations.
pub fn interpolate_key_flows(
    f_lr: &FlowField,
    f_rl: &FlowField,
    t: f64,
) -> Result<(FlowField, FlowField)> {
    f_rl.ensure_shape(f_lr.width(), f_lr.height(), "interpolate_key_flows")?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParam(format!("timeline position {t} outside [0, 1]")));
    }
    let t = t as f32;
    let left = f_lr.scaled(-(1.0 - t) * t).add(&f_rl.scaled(t * t))?;
    let right = f_lr
        .scaled((1.0 - t) * (1.0 - t))
        .add(&f_rl.scaled(-t * (1.0 - t)))?;
    Ok((left, right))
}

/// Key-to-key flows `(F_{l→r}, F_{r→l})`, estimated concurrently.
fn key_pair_flows(
    z_left: &Frame,
    z_right: &Frame,
    params: &FlowParams,
) -> Result<(FlowField, FlowField)> {
    let (lr, rl) = rayon::join(
        || estimate_flow(z_left, z_right, params),
        || estimate_flow(z_right, z_left, params),
    );
    Ok((lr?, rl?))
}

/// Logistic function with `σ(-x) == 1 - σ(x)` holding bit-exactly.
#[inline]
fn logistic(x: f32) -> f32 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        1.0 - 1.0 / (1.0 + x.exp())
    }
}

fn smoothed_error(warped: &Frame, target: &Frame, radius: usize) -> Vec<f32> {
    let diff: Vec<f32> = warped
        .data()
        .iter()
        .zip(target.data())
        .map(|(a, b)| (a - b).abs())
        .collect();
    box_filter(&diff, target.width(), target.height(), radius)
}

fn mean_abs_error(a: &Frame, b: &Frame) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (x as f64 - y as f64).abs())
        .sum::<f64>()
        / a.len() as f64
}

/// Re-estimates the residual flow between `target` and `key` warped by `f0`
/// at the finest level and returns `f0 + ΔF`. If the correction would raise
/// the mean photometric error, `f0` is returned unchanged.
pub fn refine_flow(
    target: &Frame,
    key: &Frame,
    f0: &FlowField,
    params: &FlowParams,
) -> Result<FlowField> {
    target.ensure_same_shape(key, "refine_flow")?;
    f0.ensure_shape(target.width(), target.height(), "refine_flow")?;
    let w0 = warp(key, f0)?;
    let delta = estimate_flow(target, &w0, &params.single_level())?;
    let refined = f0.add(&delta)?;
    let before = mean_abs_error(&w0, target);
    let after = mean_abs_error(&warp(key, &refined)?, target);
    if after > before {
        return Ok(f0.clone());
    }
    Ok(refined)
}

/// `v = σ(β·(e_right − e_left))` on box-filtered absolute errors; `v → 1`
/// where the left warp fits the target better.
pub fn visibility_map(
    w_left: &Frame,
    w_right: &Frame,
    target: &Frame,
    params: &FusionParams,
) -> Result<VisibleMap> {
    target.ensure_same_shape(w_left, "visibility_map (left)")?;
    target.ensure_same_shape(w_right, "visibility_map (right)")?;
    let e_left = smoothed_error(w_left, target, params.error_smooth_radius);
    let e_right = smoothed_error(w_right, target, params.error_smooth_radius);
    visibility_from_errors(&e_left, &e_right, target.width(), target.height(), params.beta)
}

fn visibility_from_errors(
    e_left: &[f32],
    e_right: &[f32],
    width: usize,
    height: usize,
    beta: f64,
) -> Result<VisibleMap> {
    let beta = beta as f32;
    let values = e_left
        .iter()
        .zip(e_right)
        .map(|(&el, &er)| logistic(beta * (er - el)))
        .collect();
    VisibleMap::new(width, height, values)
}

/// Time-weighted visibility blend of the two warped key frames.
pub fn blend(
    w_left: &Frame,
    w_right: &Frame,
    v: &VisibleMap,
    tau: f64,
    params: &FusionParams,
) -> Result<Frame> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidParam(format!("time factor must be in (0, 1), got {tau}")));
    }
    w_left.ensure_same_shape(w_right, "blend")?;
    if v.width() != w_left.width() || v.height() != w_left.height() {
        return Err(Error::Shape("blend: visible map shape differs".into()));
    }
    let (a, b, eps) = (1.0 - tau, tau, params.epsilon_blend);
    let data = w_left
        .data()
        .iter()
        .zip(w_right.data())
        .zip(v.values())
        .map(|((&l, &r), &vis)| {
            let (l, r, vis) = (l as f64, r as f64, vis as f64);
            let wl = a * vis;
            let wr = b * (1.0 - vis);
            ((wl * l + wr * r) / (wl + wr + eps)) as f32
        })
        .collect();
    Frame::new(w_left.width(), w_left.height(), data)
}

const BRIGHTNESS_EPS: f64 = 1e-8;
const BRIGHTNESS_HEADROOM: f32 = 4.0;

/// Scales `image` so its mean matches `reference`; near-black images are
/// returned unchanged. Output is clamped to [0, 4].
pub fn normalize_brightness(image: &Frame, reference: &Frame) -> Frame {
    let m = image.mean();
    let r = reference.mean();
    if m <= BRIGHTNESS_EPS || r <= 0.0 {
        return image.clone();
    }
    let scale = r / m;
    image.map(|v| ((v as f64 * scale) as f32).clamp(0.0, BRIGHTNESS_HEADROOM))
}

/// Per-step flows for one frame: `left` runs from frame `k` towards the left
/// key (`[F_{k→k−1}, …, F_{1→l}]`), `right` towards the right key.
#[derive(Debug, Clone)]
pub struct FlowChains {
    pub left: Vec<FlowField>,
    pub right: Vec<FlowField>,
}

/// Fused frame together with the quantities that produced it.
#[derive(Debug, Clone)]
pub struct FusedFrame {
    pub frame: Frame,
    pub flow_left: FlowField,
    pub flow_right: FlowField,
    pub warped_left: Frame,
    pub warped_right: Frame,
    pub visibility: VisibleMap,
    /// Pixels replaced by the intermediate frame.
    pub fallback_pixels: usize,
}

pub fn fuse_frame(
    z_left: &Frame,
    z_right: &Frame,
    x_mid_k: &Frame,
    k: usize,
    b: usize,
    params: &FusionParams,
    step_flows: Option<&FlowChains>,
) -> Result<Frame> {
    fuse_frame_detailed(z_left, z_right, x_mid_k, k, b, params, step_flows).map(|f| f.frame)
}

pub fn fuse_frame_detailed(
    z_left: &Frame,
    z_right: &Frame,
    x_mid_k: &Frame,
    k: usize,
    b: usize,
    params: &FusionParams,
    step_flows: Option<&FlowChains>,
) -> Result<FusedFrame> {
    params.validate()?;
    if k < 1 || k > b {
        return Err(Error::InvalidParam(format!("frame index {k} outside 1..={b}")));
    }
    x_mid_k.ensure_same_shape(z_left, "fuse_frame (left key)")?;
    x_mid_k.ensure_same_shape(z_right, "fuse_frame (right key)")?;

    let (zl, zr) = if params.normalize_keys {
        (
            normalize_brightness(z_left, x_mid_k),
            normalize_brightness(z_right, x_mid_k),
        )
    } else {
        (z_left.clone(), z_right.clone())
    };

    let flow = &params.flow_params;
    let (fl, fr) = match step_flows {
        Some(chains) => (compose_flows(&chains.left)?, compose_flows(&chains.right)?),
        None if params.flow_init == FlowInit::KeyInterpolated => {
            // Both keys share one exposure, so they are matched unnormalized.
            let (lr, rl) = key_pair_flows(z_left, z_right, flow)?;
            interpolate_key_flows(&lr, &rl, key_position(k, b, 0))?
        }
        // Chaining needs the whole intermediate video; a lone frame falls
        // back to direct estimation.
        None => (
            estimate_flow(x_mid_k, &zl, flow)?,
            estimate_flow(x_mid_k, &zr, flow)?,
        ),
    };
    let (fl, fr) = if params.refine_flows {
        (
            refine_flow(x_mid_k, &zl, &fl, flow)?,
            refine_flow(x_mid_k, &zr, &fr, flow)?,
        )
    } else {
        (fl, fr)
    };
    let wl = warp(&zl, &fl)?;
    let wr = warp(&zr, &fr)?;

    let (w, h) = (x_mid_k.width(), x_mid_k.height());
    let e_left = smoothed_error(&wl, x_mid_k, params.error_smooth_radius);
    let e_right = smoothed_error(&wr, x_mid_k, params.error_smooth_radius);
    let visibility = visibility_from_errors(&e_left, &e_right, w, h, params.beta)?;
    let mut out = blend(&wl, &wr, &visibility, time_factor(k, b), params)?;

    let mut fallback_pixels = 0;
    if let Some(threshold) = params.fallback_threshold {
        let threshold = threshold as f32;
        for (idx, px) in out.data_mut().iter_mut().enumerate() {
            if e_left[idx].min(e_right[idx]) > threshold {
                *px = x_mid_k.data()[idx];
                fallback_pixels += 1;
            }
        }
    }
    let frame = out.clamp(0.0, 1.0);
    if !frame.is_finite() {
        return Err(Error::Numerical("fused frame is not finite".into()));
    }
    Ok(FusedFrame {
        frame,
        flow_left: fl,
        flow_right: fr,
        warped_left: wl,
        warped_right: wr,
        visibility,
        fallback_pixels,
    })
}

/// Per-step flows through the intermediate video, computed once per block.
fn step_flow_chains(
    z_left: &Frame,
    z_right: &Frame,
    frames: &[Frame],
    params: &FlowParams,
) -> Result<Vec<FlowChains>> {
    let b = frames.len();
    // back[j] = F_{j→j−1} (index 0 is F_{1→l}); fwd[j] = F_{j→j+1} (last is F_{B→r}).
    let back: Vec<FlowField> = (0..b)
        .into_par_iter()
        .map(|j| {
            let prev = if j == 0 { z_left } else { &frames[j - 1] };
            estimate_flow(&frames[j], prev, params)
        })
        .collect::<Result<_>>()?;
    let fwd: Vec<FlowField> = (0..b)
        .into_par_iter()
        .map(|j| {
            let next = if j + 1 == b { z_right } else { &frames[j + 1] };
            estimate_flow(&frames[j], next, params)
        })
        .collect::<Result<_>>()?;
    Ok((0..b)
        .map(|j| FlowChains {
            left: back[..=j].iter().rev().cloned().collect(),
            right: fwd[j..].to_vec(),
        })
        .collect())
}

pub fn fuse_video_detailed(
    measurement: &HybridMeasurement,
    x_mid: &VideoCube,
    params: &FusionParams,
) -> Result<Vec<FusedFrame>> {
    params.validate()?;
    let b = measurement.b();
    if x_mid.frames() != b {
        return Err(Error::Shape(format!(
            "intermediate video has {} frames, measurement B = {b}",
            x_mid.frames()
        )));
    }
    if x_mid.width() != measurement.width() || x_mid.height() != measurement.height() {
        return Err(Error::Shape("intermediate video and measurement differ in size".into()));
    }
    let frames = x_mid.to_frames();
    let (zl, zr) = (&measurement.z_left, &measurement.z_right);
    let chains = match params.flow_init {
        FlowInit::Direct => None,
        FlowInit::Chained => {
            let normalized: Vec<(Frame, Frame)>;
            // Chain endpoints use keys normalized to their adjacent frames.
            let (l, r) = if params.normalize_keys {
                normalized = vec![(
                    normalize_brightness(zl, &frames[0]),
                    normalize_brightness(zr, &frames[b - 1]),
                )];
                (&normalized[0].0, &normalized[0].1)
            } else {
                (zl, zr)
            };
            Some(step_flow_chains(l, r, &frames, &params.flow_params)?)
        }
        FlowInit::KeyInterpolated => {
            let (lr, rl) = key_pair_flows(zl, zr, &params.flow_params)?;
            Some(
                (1..=b)
                    .map(|k| {
                        let t = key_position(k, b, measurement.gap_frames);
                        interpolate_key_flows(&lr, &rl, t).map(|(l, r)| FlowChains {
                            left: vec![l],
                            right: vec![r],
                        })
                    })
                    .collect::<Result<Vec<_>>>()?,
            )
        }
    };
    (0..b)
        .into_par_iter()
        .map(|j| {
            fuse_frame_detailed(
                zl,
                zr,
                &frames[j],
                j + 1,
                b,
                params,
                chains.as_ref().map(|c| &c[j]),
            )
        })
        .collect()
}

pub fn fuse_video(
    measurement: &HybridMeasurement,
    x_mid: &VideoCube,
    params: &FusionParams,
) -> Result<VideoCube> {
    let fused = fuse_video_detailed(measurement, x_mid, params)?;
    let frames: Vec<Frame> = fused.into_iter().map(|f| f.frame).collect();
    VideoCube::from_frames(&frames)
}
