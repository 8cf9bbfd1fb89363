//! Dense sample containers shared by every stage of the pipeline.
//!
//! All containers index samples as (row `i`, column `j`, frame `k`): row-major
//! within a frame, frames stored contiguously one after another.

use crate::error::{Error, Result};

fn check_len(what: &str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::Shape(format!(
            "{what}: expected {expected} samples, got {found}"
        )));
    }
    Ok(())
}

fn check_dims(what: &str, dims: &[usize]) -> Result<()> {
    if dims.contains(&0) {
        return Err(Error::Shape(format!("{what}: zero dimension in {dims:?}")));
    }
    Ok(())
}

fn check_finite(what: &str, data: &[f32]) -> Result<()> {
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!(
            "{what}: non-finite sample at flat index {pos}"
        )));
    }
    Ok(())
}

/// A single monochrome image with nominal intensities in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl Frame {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        check_dims("frame", &[width, height])?;
        check_len("frame", width * height, data.len())?;
        check_finite("frame", &data)?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        assert!(width > 0 && height > 0, "frame dimensions must be non-zero");
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    /// Builds a frame by evaluating `f(row, col)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        assert!(width > 0 && height > 0, "frame dimensions must be non-zero");
        let mut data = Vec::with_capacity(width * height);
        for i in 0..height {
            for j in 0..width {
                data.push(f(i, j));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f32 {
        self.data[i * self.width + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f32) {
        self.data[i * self.width + j] = value;
    }

    pub fn same_shape(&self, other: &Frame) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn ensure_same_shape(&self, other: &Frame, what: &str) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::Shape(format!(
                "{what}: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Frame {
        Frame {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Frame, f: impl Fn(f32, f32) -> f32) -> Result<Frame> {
        self.ensure_same_shape(other, "zip_map")?;
        Ok(Frame {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Arithmetic mean accumulated in f64.
    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn clamp(&self, lo: f32, hi: f32) -> Frame {
        self.map(|v| v.clamp(lo, hi))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// A block of `frames` equally sized frames.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoCube {
    width: usize,
    height: usize,
    frames: usize,
    data: Vec<f32>,
}

impl VideoCube {
    pub fn new(width: usize, height: usize, frames: usize, data: Vec<f32>) -> Result<Self> {
        check_dims("video cube", &[width, height, frames])?;
        check_len("video cube", width * height * frames, data.len())?;
        check_finite("video cube", &data)?;
        Ok(Self {
            width,
            height,
            frames,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize, frames: usize) -> Self {
        assert!(width > 0 && height > 0 && frames > 0);
        Self {
            width,
            height,
            frames,
            data: vec![0.0; width * height * frames],
        }
    }

    pub fn from_frames(frames: &[Frame]) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::Shape("video cube needs at least one frame".into()))?;
        let mut data = Vec::with_capacity(first.len() * frames.len());
        for (k, f) in frames.iter().enumerate() {
            first.ensure_same_shape(f, &format!("video cube frame {k}"))?;
            data.extend_from_slice(f.data());
        }
        Ok(Self {
            width: first.width,
            height: first.height,
            frames: frames.len(),
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn frame_len(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> f32 {
        self.data[k * self.frame_len() + i * self.width + j]
    }

    pub fn frame_slice(&self, k: usize) -> &[f32] {
        let n = self.frame_len();
        &self.data[k * n..(k + 1) * n]
    }

    pub fn frame_slice_mut(&mut self, k: usize) -> &mut [f32] {
        let n = self.frame_len();
        &mut self.data[k * n..(k + 1) * n]
    }

    pub fn frame(&self, k: usize) -> Frame {
        Frame {
            width: self.width,
            height: self.height,
            data: self.frame_slice(k).to_vec(),
        }
    }

    pub fn to_frames(&self) -> Vec<Frame> {
        (0..self.frames).map(|k| self.frame(k)).collect()
    }

    pub fn set_frame(&mut self, k: usize, frame: &Frame) -> Result<()> {
        if frame.width != self.width || frame.height != self.height {
            return Err(Error::Shape(format!(
                "set_frame: cube is {}x{}, frame is {}x{}",
                self.width, self.height, frame.width, frame.height
            )));
        }
        self.frame_slice_mut(k).copy_from_slice(frame.data());
        Ok(())
    }

    /// Frames `start..start + count` as a new cube.
    pub fn sub_block(&self, start: usize, count: usize) -> Result<VideoCube> {
        if count == 0 || start + count > self.frames {
            return Err(Error::Shape(format!(
                "sub_block {start}..{} out of range for {} frames",
                start + count,
                self.frames
            )));
        }
        let n = self.frame_len();
        Ok(VideoCube {
            width: self.width,
            height: self.height,
            frames: count,
            data: self.data[start * n..(start + count) * n].to_vec(),
        })
    }

    pub fn spatial_shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

/// A stack of binary modulation masks; samples are 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodingCube {
    width: usize,
    height: usize,
    frames: usize,
    data: Vec<u8>,
}

impl CodingCube {
    pub fn new(width: usize, height: usize, frames: usize, data: Vec<u8>) -> Result<Self> {
        check_dims("coding cube", &[width, height, frames])?;
        check_len("coding cube", width * height * frames, data.len())?;
        if let Some(pos) = data.iter().position(|&v| v > 1) {
            return Err(Error::Shape(format!(
                "coding cube: non-binary sample {} at flat index {pos}",
                data[pos]
            )));
        }
        Ok(Self {
            width,
            height,
            frames,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, frames: usize, value: bool) -> Self {
        assert!(width > 0 && height > 0 && frames > 0);
        Self {
            width,
            height,
            frames,
            data: vec![value as u8; width * height * frames],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn frame_len(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> u8 {
        self.data[k * self.frame_len() + i * self.width + j]
    }

    pub fn mask_slice(&self, k: usize) -> &[u8] {
        let n = self.frame_len();
        &self.data[k * n..(k + 1) * n]
    }

    /// Per-pixel count of open masks, Σ_k c_k (equal to Σ_k c_k² for binary masks).
    pub fn coverage(&self) -> Vec<f32> {
        let n = self.frame_len();
        let mut cov = vec![0.0f32; n];
        for k in 0..self.frames {
            for (acc, &c) in cov.iter_mut().zip(self.mask_slice(k)) {
                *acc += c as f32;
            }
        }
        cov
    }

    pub fn fraction_open(&self) -> f64 {
        self.data.iter().map(|&v| v as usize).sum::<usize>() as f64 / self.data.len() as f64
    }
}

/// Per-pixel displacement in pixels; `u` is horizontal (+ right), `v` vertical (+ down).
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    u: Vec<f32>,
    v: Vec<f32>,
}

impl FlowField {
    pub fn new(width: usize, height: usize, u: Vec<f32>, v: Vec<f32>) -> Result<Self> {
        check_dims("flow field", &[width, height])?;
        check_len("flow field u", width * height, u.len())?;
        check_len("flow field v", width * height, v.len())?;
        check_finite("flow field u", &u)?;
        check_finite("flow field v", &v)?;
        Ok(Self {
            width,
            height,
            u,
            v,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::constant(width, height, 0.0, 0.0)
    }

    pub fn constant(width: usize, height: usize, u: f32, v: f32) -> Self {
        assert!(width > 0 && height > 0);
        Self {
            width,
            height,
            u: vec![u; width * height],
            v: vec![v; width * height],
        }
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> (f32, f32),
    ) -> Self {
        assert!(width > 0 && height > 0);
        let mut u = Vec::with_capacity(width * height);
        let mut v = Vec::with_capacity(width * height);
        for i in 0..height {
            for j in 0..width {
                let (a, b) = f(i, j);
                u.push(a);
                v.push(b);
            }
        }
        Self {
            width,
            height,
            u,
            v,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn u(&self) -> &[f32] {
        &self.u
    }

    pub fn v(&self) -> &[f32] {
        &self.v
    }

    pub fn u_mut(&mut self) -> &mut [f32] {
        &mut self.u
    }

    pub fn v_mut(&mut self) -> &mut [f32] {
        &mut self.v
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> (f32, f32) {
        let idx = i * self.width + j;
        (self.u[idx], self.v[idx])
    }

    pub fn u_frame(&self) -> Frame {
        Frame {
            width: self.width,
            height: self.height,
            data: self.u.clone(),
        }
    }

    pub fn v_frame(&self) -> Frame {
        Frame {
            width: self.width,
            height: self.height,
            data: self.v.clone(),
        }
    }

    pub fn from_planes(u: Frame, v: Frame) -> Result<Self> {
        u.ensure_same_shape(&v, "flow planes")?;
        Ok(Self {
            width: u.width,
            height: u.height,
            u: u.data,
            v: v.data,
        })
    }

    pub fn ensure_shape(&self, width: usize, height: usize, what: &str) -> Result<()> {
        if self.width != width || self.height != height {
            return Err(Error::Shape(format!(
                "{what}: flow is {}x{}, expected {width}x{height}",
                self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn magnitudes(&self) -> Vec<f32> {
        self.u
            .iter()
            .zip(&self.v)
            .map(|(&a, &b)| a.hypot(b))
            .collect()
    }

    pub fn mean_magnitude(&self) -> f64 {
        self.magnitudes().iter().map(|&m| m as f64).sum::<f64>() / self.u.len() as f64
    }

    /// Elementwise sum of two flows of the same shape.
    pub fn add(&self, other: &FlowField) -> Result<FlowField> {
        other.ensure_shape(self.width, self.height, "flow add")?;
        Ok(FlowField {
            width: self.width,
            height: self.height,
            u: self.u.iter().zip(&other.u).map(|(a, b)| a + b).collect(),
            v: self.v.iter().zip(&other.v).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn scaled(&self, factor: f32) -> FlowField {
        FlowField {
            width: self.width,
            height: self.height,
            u: self.u.iter().map(|a| a * factor).collect(),
            v: self.v.iter().map(|a| a * factor).collect(),
        }
    }
}

/// 8-bit-per-channel RGB image, used only for flow visualisation output.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    /// Interleaved RGB triples in [0, 1], row-major.
    pub data: Vec<[f32; 3]>,
}

impl RgbImage {
    pub fn pixel(&self, i: usize, j: usize) -> [f32; 3] {
        self.data[i * self.width + j]
    }
}
