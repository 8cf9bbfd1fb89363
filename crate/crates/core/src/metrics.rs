//! Image and flow quality metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::gaussian_kernel;
use crate::tensor::{FlowField, Frame, VideoCube};

/// Anything exposing a flat sample buffer with a comparable shape.
pub trait Samples {
    fn samples(&self) -> &[f32];
    fn shape(&self) -> (usize, usize, usize);
}

impl Samples for Frame {
    fn samples(&self) -> &[f32] {
        self.data()
    }
    fn shape(&self) -> (usize, usize, usize) {
        (self.width(), self.height(), 1)
    }
}

impl Samples for VideoCube {
    fn samples(&self) -> &[f32] {
        self.data()
    }
    fn shape(&self) -> (usize, usize, usize) {
        (self.width(), self.height(), self.frames())
    }
}

fn ensure_same<T: Samples>(a: &T, b: &T, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!(
            "{what}: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

pub fn mse(a: &Frame, b: &Frame) -> Result<f64> {
    ensure_same(a, b, "mse")?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    Ok(sum / a.len() as f64)
}

/// `10·log10(peak² / MSE)`; identical inputs give `f64::INFINITY`.
pub fn psnr(a: &Frame, b: &Frame, peak: f64) -> Result<f64> {
    if !(peak > 0.0) {
        return Err(Error::InvalidParam(format!("PSNR peak must be > 0, got {peak}")));
    }
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / m).log10())
}

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// Valid-region separable filtering: output is `(w - n + 1) × (h - n + 1)`.
fn filter_valid(data: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let n = kernel.len();
    let (ow, oh) = (w - n + 1, h - n + 1);
    let mut tmp = vec![0.0; ow * h];
    for i in 0..h {
        for j in 0..ow {
            let row = &data[i * w + j..i * w + j + n];
            tmp[i * ow + j] = row.iter().zip(kernel).map(|(a, k)| a * k).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for i in 0..oh {
        for j in 0..ow {
            let mut acc = 0.0;
            for (t, k) in kernel.iter().enumerate() {
                acc += k * tmp[(i + t) * ow + j];
            }
            out[i * ow + j] = acc;
        }
    }
    out
}

/// Mean SSIM over all fully contained 11×11 Gaussian windows (σ = 1.5).
pub fn ssim(a: &Frame, b: &Frame, peak: f64) -> Result<f64> {
    ensure_same(a, b, "ssim")?;
    let (w, h) = (a.width(), a.height());
    if w.min(h) < SSIM_WINDOW {
        return Err(Error::Shape(format!(
            "ssim needs frames at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {w}x{h}"
        )));
    }
    if !(peak > 0.0) {
        return Err(Error::InvalidParam(format!("SSIM peak must be > 0, got {peak}")));
    }
    let kernel = gaussian_kernel(SSIM_WINDOW, SSIM_SIGMA);
    let x: Vec<f64> = a.data().iter().map(|&v| v as f64).collect();
    let y: Vec<f64> = b.data().iter().map(|&v| v as f64).collect();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();

    let mu_x = filter_valid(&x, w, h, &kernel);
    let mu_y = filter_valid(&y, w, h, &kernel);
    let e_xx = filter_valid(&xx, w, h, &kernel);
    let e_yy = filter_valid(&yy, w, h, &kernel);
    let e_xy = filter_valid(&xy, w, h, &kernel);

    let c1 = (SSIM_K1 * peak).powi(2);
    let c2 = (SSIM_K2 * peak).powi(2);
    let mut total = 0.0;
    for idx in 0..mu_x.len() {
        let (mx, my) = (mu_x[idx], mu_y[idx]);
        let vx = e_xx[idx] - mx * mx;
        let vy = e_yy[idx] - my * my;
        let cxy = e_xy[idx] - mx * my;
        total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2))
            / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
    Ok(total / mu_x.len() as f64)
}

/// Mean absolute difference over all samples.
pub fn l1_distance<T: Samples>(a: &T, b: &T) -> Result<f64> {
    ensure_same(a, b, "l1_distance")?;
    let s = a.samples();
    let sum: f64 = s
        .iter()
        .zip(b.samples())
        .map(|(&x, &y)| (x as f64 - y as f64).abs())
        .sum();
    Ok(sum / s.len() as f64)
}

/// Mean endpoint error, optionally restricted to pixels where `mask` is true.
pub fn mean_epe(f: &FlowField, g: &FlowField, mask: Option<&[bool]>) -> Result<f64> {
    g.ensure_shape(f.width(), f.height(), "mean_epe")?;
    let n = f.width() * f.height();
    if let Some(m) = mask {
        if m.len() != n {
            return Err(Error::Shape(format!(
                "mean_epe mask has {} entries for {n} pixels",
                m.len()
            )));
        }
    }
    let (mut sum, mut count) = (0.0f64, 0usize);
    for idx in 0..n {
        if mask.is_some_and(|m| !m[idx]) {
            continue;
        }
        let du = f.u()[idx] as f64 - g.u()[idx] as f64;
        let dv = f.v()[idx] as f64 - g.v()[idx] as f64;
        sum += du.hypot(dv);
        count += 1;
    }
    if count == 0 {
        return Err(Error::InvalidParam("mean_epe mask selects no pixels".into()));
    }
    Ok(sum / count as f64)
}

/// Serializes non-finite PSNR values as the string `"inf"`.
pub mod psnr_serde {
    use serde::de::{self, Deserializer, Visitor};
    use serde::Serializer;
    use std::fmt;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = f64;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
                Ok(v)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
                match v {
                    "inf" => Ok(f64::INFINITY),
                    other => Err(E::invalid_value(de::Unexpected::Str(other), &self)),
                }
            }
        }
        d.deserialize_any(V)
    }
}

pub fn format_psnr(v: f64) -> String {
    if v.is_infinite() && v > 0.0 {
        "inf".to_string()
    } else {
        format!("{v:.4}")
    }
}

/// Values of one metric over a set of frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    /// Dynamic range the metric assumed.
    pub peak: f64,
    pub per_frame: Vec<f64>,
    pub mean: f64,
}

impl MetricReport {
    pub fn new(metric: impl Into<String>, peak: f64, per_frame: Vec<f64>) -> Self {
        let mean = per_frame.iter().sum::<f64>() / per_frame.len() as f64;
        Self {
            metric: metric.into(),
            peak,
            per_frame,
            mean,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameScores {
    /// 1-based frame index within the reconstructed block.
    pub k: usize,
    #[serde(with = "psnr_serde")]
    pub psnr_db: f64,
    pub ssim: f64,
    pub l1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanScores {
    #[serde(with = "psnr_serde")]
    pub psnr_db: f64,
    pub ssim: f64,
    pub l1: f64,
}

/// PSNR, SSIM and L1 for every frame of a video plus their means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub peak: f64,
    pub per_frame: Vec<FrameScores>,
    pub mean: MeanScores,
    /// Perceptual metric slot; always "unavailable" here.
    pub lpips: String,
}

impl QualityReport {
    pub fn metric(&self, name: &str) -> Option<MetricReport> {
        let values: Vec<f64> = match name {
            "psnr" => self.per_frame.iter().map(|s| s.psnr_db).collect(),
            "ssim" => self.per_frame.iter().map(|s| s.ssim).collect(),
            "l1" => self.per_frame.iter().map(|s| s.l1).collect(),
            _ => return None,
        };
        Some(MetricReport::new(name, self.peak, values))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,psnr_db,ssim,l1\n");
        for s in &self.per_frame {
            out.push_str(&format!(
                "{},{},{:.6},{:.6}\n",
                s.k,
                format_psnr(s.psnr_db),
                s.ssim,
                s.l1
            ));
        }
        out.push_str(&format!(
            "mean,{},{:.6},{:.6}\n",
            format_psnr(self.mean.psnr_db),
            self.mean.ssim,
            self.mean.l1
        ));
        out
    }
}

pub fn score_frames(estimate: &[Frame], truth: &[Frame], peak: f64) -> Result<QualityReport> {
    if estimate.len() != truth.len() || estimate.is_empty() {
        return Err(Error::Shape(format!(
            "scoring {} frames against {} reference frames",
            estimate.len(),
            truth.len()
        )));
    }
    let mut per_frame = Vec::with_capacity(estimate.len());
    for (idx, (e, t)) in estimate.iter().zip(truth).enumerate() {
        per_frame.push(FrameScores {
            k: idx + 1,
            psnr_db: psnr(e, t, peak)?,
            ssim: ssim(e, t, peak)?,
            l1: l1_distance(e, t)?,
        });
    }
    let n = per_frame.len() as f64;
    let mean = MeanScores {
        psnr_db: per_frame.iter().map(|s| s.psnr_db).sum::<f64>() / n,
        ssim: per_frame.iter().map(|s| s.ssim).sum::<f64>() / n,
        l1: per_frame.iter().map(|s| s.l1).sum::<f64>() / n,
    };
    Ok(QualityReport {
        peak,
        per_frame,
        mean,
        lpips: "unavailable".into(),
    })
}

pub fn score_video(estimate: &VideoCube, truth: &VideoCube, peak: f64) -> Result<QualityReport> {
    ensure_same(estimate, truth, "score_video")?;
    score_frames(&estimate.to_frames(), &truth.to_frames(), peak)
}
