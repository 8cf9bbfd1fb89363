//! Bilinear sampling with replicate borders, and backward warping.

use crate::error::Result;
use crate::tensor::{FlowField, Frame};

/// Samples a row-major plane at continuous position (`x` column, `y` row).
/// Coordinates outside the plane are clamped to the border.
#[inline]
pub fn sample_bilinear(data: &[f32], width: usize, height: usize, x: f32, y: f32) -> f32 {
    let x = x.clamp(0.0, (width - 1) as f32);
    let y = y.clamp(0.0, (height - 1) as f32);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let fx = x - x0 as f32;
    let fy = y - y0 as f32;
    let top = (1.0 - fx) * data[y0 * width + x0] + fx * data[y0 * width + x1];
    let bottom = (1.0 - fx) * data[y1 * width + x0] + fx * data[y1 * width + x1];
    (1.0 - fy) * top + fy * bottom
}

/// `out(p) = image(p + f(p))`. Zero flow reproduces the input exactly.
pub fn warp(image: &Frame, flow: &FlowField) -> Result<Frame> {
    flow.ensure_shape(image.width(), image.height(), "warp")?;
    let (w, h) = (image.width(), image.height());
    let src = image.data();
    let (u, v) = (flow.u(), flow.v());
    let mut out = Vec::with_capacity(w * h);
    for i in 0..h {
        for j in 0..w {
            let idx = i * w + j;
            out.push(sample_bilinear(
                src,
                w,
                h,
                j as f32 + u[idx],
                i as f32 + v[idx],
            ));
        }
    }
    Frame::new(w, h, out)
}

/// Resamples both components of `field` at `p + by(p)`.
pub fn warp_flow(field: &FlowField, by: &FlowField) -> Result<FlowField> {
    let u = warp(&field.u_frame(), by)?;
    let v = warp(&field.v_frame(), by)?;
    FlowField::from_planes(u, v)
}
