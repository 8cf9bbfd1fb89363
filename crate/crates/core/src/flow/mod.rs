//! Dense optical flow: coarse-to-fine Horn–Schunck with warping, flow
//! chaining, and colour-wheel visualisation.
//!
//! Convention: a flow `F` estimated for `(target, source)` satisfies
//! `source(p + F(p)) ≈ target(p)`, so `warp(source, F)` aligns the source with
//! the target.

mod color;
mod horn_schunck;

pub use color::{flow_to_color, wheel_position, MaxMagnitude};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::downsample2;
use crate::interp::{sample_bilinear, warp_flow};
use crate::tensor::{FlowField, Frame};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowParams {
    pub pyramid_levels: usize,
    /// Smoothness weight, relative to intensities on the [0, 1] scale.
    pub alpha: f64,
    /// Jacobi iterations after each re-warp.
    pub iters_per_level: usize,
    pub warps_per_level: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            pyramid_levels: 3,
            alpha: 0.05,
            iters_per_level: 100,
            warps_per_level: 3,
        }
    }
}

/// Side of the smallest pyramid level.
pub const MIN_LEVEL_SIZE: usize = 8;

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        if self.pyramid_levels < 1 {
            return Err(Error::InvalidParam("pyramid_levels must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParam("alpha must be > 0".into()));
        }
        if self.iters_per_level < 1 || self.warps_per_level < 1 {
            return Err(Error::InvalidParam(
                "iters_per_level and warps_per_level must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Smallest frame side the pyramid supports.
    pub fn min_frame_size(&self) -> usize {
        (1usize << (self.pyramid_levels - 1)) * MIN_LEVEL_SIZE
    }

    /// Same parameters restricted to the finest level.
    pub fn single_level(&self) -> Self {
        Self {
            pyramid_levels: 1,
            ..*self
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Plane {
    pub data: Vec<f32>,
    pub width: usize,
    pub height: usize,
}

fn build_pyramid(frame: &Frame, levels: usize) -> Vec<Plane> {
    let mut pyr = vec![Plane {
        data: frame.data().to_vec(),
        width: frame.width(),
        height: frame.height(),
    }];
    for _ in 1..levels {
        let prev = pyr.last().unwrap();
        let (data, width, height) = downsample2(&prev.data, prev.width, prev.height);
        pyr.push(Plane {
            data,
            width,
            height,
        });
    }
    pyr
}

/// Bilinear 2x upsampling of a coarse flow onto a `width × height` grid,
/// vectors scaled by 2. Fine pixel `p` corresponds to coarse position `p / 2`.
fn upsample_flow(u: &[f32], v: &[f32], cw: usize, ch: usize, width: usize, height: usize) -> (Vec<f32>, Vec<f32>) {
    let mut uu = Vec::with_capacity(width * height);
    let mut vv = Vec::with_capacity(width * height);
    for i in 0..height {
        for j in 0..width {
            let (x, y) = (j as f32 * 0.5, i as f32 * 0.5);
            uu.push(2.0 * sample_bilinear(u, cw, ch, x, y));
            vv.push(2.0 * sample_bilinear(v, cw, ch, x, y));
        }
    }
    (uu, vv)
}

fn check_inputs(target: &Frame, source: &Frame, params: &FlowParams) -> Result<()> {
    params.validate()?;
    target.ensure_same_shape(source, "estimate_flow")?;
    let min_dim = target.width().min(target.height());
    let required = params.min_frame_size();
    if min_dim < required {
        return Err(Error::PyramidTooDeep {
            levels: params.pyramid_levels,
            min_dim,
            required,
        });
    }
    Ok(())
}

/// Estimates `F` with `source(p + F(p)) ≈ target(p)`.
pub fn estimate_flow(target: &Frame, source: &Frame, params: &FlowParams) -> Result<FlowField> {
    check_inputs(target, source, params)?;
    let levels = params.pyramid_levels;
    let tp = build_pyramid(target, levels);
    let sp = build_pyramid(source, levels);

    let coarsest = &tp[levels - 1];
    let mut u = vec![0.0f32; coarsest.width * coarsest.height];
    let mut v = vec![0.0f32; coarsest.width * coarsest.height];
    let (mut cw, mut ch) = (coarsest.width, coarsest.height);

    for level in (0..levels).rev() {
        let (t, s) = (&tp[level], &sp[level]);
        if level != levels - 1 {
            let (uu, vv) = upsample_flow(&u, &v, cw, ch, t.width, t.height);
            u = uu;
            v = vv;
        }
        horn_schunck::refine_level(t, s, &mut u, &mut v, params);
        cw = t.width;
        ch = t.height;
    }

    if u.iter().chain(&v).any(|x| !x.is_finite()) {
        return Err(Error::Numerical("optical flow diverged".into()));
    }
    FlowField::new(target.width(), target.height(), u, v)
}

/// Chains per-step flows into one long-range flow:
/// `F(p) = F₁(p) + F_rest(p + F₁(p))`, applied from the last step backwards.
pub fn compose_flows(steps: &[FlowField]) -> Result<FlowField> {
    let (last, rest) = steps
        .split_last()
        .ok_or_else(|| Error::InvalidParam("compose_flows needs at least one flow".into()))?;
    for f in rest {
        f.ensure_shape(last.width(), last.height(), "compose_flows")?;
    }
    let mut acc = last.clone();
    for step in rest.iter().rev() {
        acc = step.add(&warp_flow(&acc, step)?)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texture(x: f64, y: f64) -> f32 {
        let v = 0.5
            + 0.18 * (0.31 * x + 0.17 * y).sin()
            + 0.12 * (0.23 * y - 0.41 * x + 1.0).cos()
            + 0.1 * (0.53 * x + 0.47 * y + 2.0).sin();
        v as f32
    }

    #[test]
    fn identical_frames_give_zero_flow() {
        let f = Frame::from_fn(64, 64, |i, j| texture(j as f64, i as f64));
        let flow = estimate_flow(&f, &f, &FlowParams::default()).unwrap();
        assert!(flow.mean_magnitude() < 1e-2);
    }

    #[test]
    fn too_small_for_pyramid() {
        let f = Frame::zeros(20, 40);
        let err = estimate_flow(&f, &f, &FlowParams::default()).unwrap_err();
        assert!(matches!(err, Error::PyramidTooDeep { required: 32, .. }));
        assert!(err.to_string().contains("fewer pyramid levels"));
        let ok = FlowParams {
            pyramid_levels: 2,
            ..Default::default()
        };
        assert!(estimate_flow(&f, &f, &ok).is_ok());
    }

    #[test]
    fn recovers_small_translation() {
        let (dx, dy) = (1.5, -0.5);
        let target = Frame::from_fn(64, 64, |i, j| texture(j as f64 + dx, i as f64 + dy));
        let source = Frame::from_fn(64, 64, |i, j| texture(j as f64, i as f64));
        let flow = estimate_flow(&target, &source, &FlowParams::default()).unwrap();
        let (mut eu, mut ev, mut n) = (0.0, 0.0, 0.0);
        for i in 8..56 {
            for j in 8..56 {
                let (u, v) = flow.at(i, j);
                eu += u as f64;
                ev += v as f64;
                n += 1.0;
            }
        }
        assert!((eu / n - dx).abs() < 0.1, "u {}", eu / n);
        assert!((ev / n - dy).abs() < 0.1, "v {}", ev / n);
    }

    #[test]
    fn compose_single_and_constant() {
        let f = FlowField::from_fn(10, 8, |i, j| (i as f32 * 0.1, j as f32 * 0.05));
        assert_eq!(compose_flows(std::slice::from_ref(&f)).unwrap(), f);
        let a = FlowField::constant(10, 8, 1.0, 0.0);
        let b = FlowField::constant(10, 8, 2.0, 0.0);
        assert_eq!(
            compose_flows(&[a, b]).unwrap(),
            FlowField::constant(10, 8, 3.0, 0.0)
        );
        assert!(compose_flows(&[]).is_err());
    }

    #[test]
    fn compose_is_associative_for_constants() {
        let a = FlowField::constant(6, 6, 0.5, -1.0);
        let b = FlowField::constant(6, 6, 1.25, 0.75);
        let c = FlowField::constant(6, 6, -2.0, 0.5);
        let left = compose_flows(&[compose_flows(&[a.clone(), b.clone()]).unwrap(), c.clone()]).unwrap();
        let right = compose_flows(&[a.clone(), compose_flows(&[b.clone(), c.clone()]).unwrap()]).unwrap();
        let flat = compose_flows(&[a, b, c]).unwrap();
        assert_eq!(left, right);
        assert_eq!(left, flat);
    }

    #[test]
    fn zero_field_is_left_identity() {
        let f = FlowField::from_fn(12, 10, |i, j| ((i as f32 * 0.7).sin(), (j as f32 * 0.3).cos()));
        let z = FlowField::zeros(12, 10);
        let out = compose_flows(&[z, f.clone()]).unwrap();
        for (a, b) in out.u().iter().zip(f.u()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn compose_follows_the_first_step() {
        // Second step varies with x; composition must sample it at p + F₁(p).
        let first = FlowField::constant(16, 4, 2.0, 0.0);
        let second = FlowField::from_fn(16, 4, |_, j| (j as f32 * 0.1, 0.0));
        let out = compose_flows(&[first, second]).unwrap();
        let (u, _) = out.at(1, 5);
        assert!((u - (2.0 + 0.7)).abs() < 1e-6);
    }
}
