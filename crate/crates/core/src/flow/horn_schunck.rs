use super::{FlowParams, Plane};
use crate::interp::sample_bilinear;

#[inline]
fn at(data: &[f32], w: usize, h: usize, i: isize, j: isize) -> f32 {
    let i = i.clamp(0, h as isize - 1) as usize;
    let j = j.clamp(0, w as isize - 1) as usize;
    data[i * w + j]
}

/// Horn–Schunck neighbourhood average: 1/6 on the 4-neighbours, 1/12 on the
/// diagonals, replicate borders.
fn neighbour_average(src: &[f32], w: usize, h: usize, out: &mut [f32]) {
    for i in 0..h as isize {
        for j in 0..w as isize {
            let edge = at(src, w, h, i - 1, j)
                + at(src, w, h, i + 1, j)
                + at(src, w, h, i, j - 1)
                + at(src, w, h, i, j + 1);
            let diag = at(src, w, h, i - 1, j - 1)
                + at(src, w, h, i - 1, j + 1)
                + at(src, w, h, i + 1, j - 1)
                + at(src, w, h, i + 1, j + 1);
            out[i as usize * w + j as usize] = edge / 6.0 + diag / 12.0;
        }
    }
}

/// Warp-and-solve passes at one pyramid level, updating `u`/`v` in place.
pub(super) fn refine_level(
    target: &Plane,
    source: &Plane,
    u: &mut [f32],
    v: &mut [f32],
    params: &FlowParams,
) {
    let (w, h) = (target.width, target.height);
    let n = w * h;
    let alpha2 = (params.alpha * params.alpha) as f32;
    let mut warped = vec![0.0f32; n];
    let mut ix = vec![0.0f32; n];
    let mut iy = vec![0.0f32; n];
    let mut it = vec![0.0f32; n];
    let mut ubar = vec![0.0f32; n];
    let mut vbar = vec![0.0f32; n];

    for _ in 0..params.warps_per_level {
        for i in 0..h {
            for j in 0..w {
                let idx = i * w + j;
                warped[idx] = sample_bilinear(
                    &source.data,
                    w,
                    h,
                    j as f32 + u[idx],
                    i as f32 + v[idx],
                );
            }
        }
        let avg: Vec<f32> = target
            .data
            .iter()
            .zip(&warped)
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        for i in 0..h as isize {
            for j in 0..w as isize {
                let idx = i as usize * w + j as usize;
                ix[idx] = 0.5 * (at(&avg, w, h, i, j + 1) - at(&avg, w, h, i, j - 1));
                iy[idx] = 0.5 * (at(&avg, w, h, i + 1, j) - at(&avg, w, h, i - 1, j));
                it[idx] = warped[idx] - target.data[idx];
            }
        }

        // Linearized about the current flow (u0, v0); smoothness acts on the
        // full flow u0 + du.
        let u0 = u.to_vec();
        let v0 = v.to_vec();
        for _ in 0..params.iters_per_level {
            neighbour_average(u, w, h, &mut ubar);
            neighbour_average(v, w, h, &mut vbar);
            for idx in 0..n {
                let (gx, gy) = (ix[idx], iy[idx]);
                let t = (gx * (ubar[idx] - u0[idx]) + gy * (vbar[idx] - v0[idx]) + it[idx])
                    / (alpha2 + gx * gx + gy * gy);
                u[idx] = ubar[idx] - gx * t;
                v[idx] = vbar[idx] - gy * t;
            }
        }
    }
}
