//! Middlebury-style flow colouring: hue encodes direction, saturation encodes
//! magnitude relative to a normalising maximum.

use crate::tensor::{FlowField, RgbImage};

const RY: usize = 15;
const YG: usize = 6;
const GC: usize = 4;
const CB: usize = 11;
const BM: usize = 13;
const MR: usize = 6;
const NCOLS: usize = RY + YG + GC + CB + BM + MR;

fn color_wheel() -> [[f32; 3]; NCOLS] {
    let mut wheel = [[0.0f32; 3]; NCOLS];
    let ramp = |i: usize, n: usize| (255 * i / n) as f32;
    let mut k = 0;
    for i in 0..RY {
        wheel[k] = [255.0, ramp(i, RY), 0.0];
        k += 1;
    }
    for i in 0..YG {
        wheel[k] = [255.0 - ramp(i, YG), 255.0, 0.0];
        k += 1;
    }
    for i in 0..GC {
        wheel[k] = [0.0, 255.0, ramp(i, GC)];
        k += 1;
    }
    for i in 0..CB {
        wheel[k] = [0.0, 255.0 - ramp(i, CB), 255.0];
        k += 1;
    }
    for i in 0..BM {
        wheel[k] = [ramp(i, BM), 0.0, 255.0];
        k += 1;
    }
    for i in 0..MR {
        wheel[k] = [255.0, 0.0, 255.0 - ramp(i, MR)];
        k += 1;
    }
    for c in wheel.iter_mut() {
        for ch in c.iter_mut() {
            *ch /= 255.0;
        }
    }
    wheel
}

/// Position of a direction on the colour wheel, in [0, 1].
pub fn wheel_position(u: f32, v: f32) -> f64 {
    // `+ 0.0` folds -0.0 so that (m, 0) and (-m, 0) land half a turn apart.
    let angle = ((-(v as f64)) + 0.0).atan2(-(u as f64) + 0.0);
    (angle / std::f64::consts::PI + 1.0) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaxMagnitude {
    Fixed(f64),
    /// 99th-percentile magnitude of the field.
    Auto,
}

fn percentile_99(mut mags: Vec<f32>) -> f64 {
    mags.sort_by(|a, b| a.total_cmp(b));
    let idx = ((mags.len() - 1) as f64 * 0.99).round() as usize;
    mags[idx] as f64
}

pub fn flow_to_color(flow: &FlowField, max_magnitude: MaxMagnitude) -> RgbImage {
    let wheel = color_wheel();
    let max = match max_magnitude {
        MaxMagnitude::Fixed(m) if m > 0.0 => m,
        MaxMagnitude::Fixed(_) => 1.0,
        MaxMagnitude::Auto => {
            let p = percentile_99(flow.magnitudes());
            if p > 0.0 {
                p
            } else {
                1.0
            }
        }
    };
    let data = flow
        .u()
        .iter()
        .zip(flow.v())
        .map(|(&u, &v)| {
            let sat = ((u as f64).hypot(v as f64) / max).clamp(0.0, 1.0) as f32;
            let fk = wheel_position(u, v) * (NCOLS - 1) as f64;
            let k0 = (fk.floor() as usize).min(NCOLS - 1);
            let k1 = (k0 + 1) % NCOLS;
            let f = (fk - k0 as f64) as f32;
            let mut px = [0.0f32; 3];
            for (c, out) in px.iter_mut().enumerate() {
                let col = (1.0 - f) * wheel[k0][c] + f * wheel[k1][c];
                *out = (1.0 - sat * (1.0 - col)).clamp(0.0, 1.0);
            }
            px
        })
        .collect();
    RgbImage {
        width: flow.width(),
        height: flow.height(),
        data,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hue_degrees(rgb: [f32; 3]) -> f64 {
        let [r, g, b] = rgb.map(|c| c as f64);
        let max = r.max(g).max(b);
        let min = r.min(g).min(b);
        let d = max - min;
        let h = if max == r {
            60.0 * ((g - b) / d).rem_euclid(6.0)
        } else if max == g {
            60.0 * ((b - r) / d + 2.0)
        } else {
            60.0 * ((r - g) / d + 4.0)
        };
        h.rem_euclid(360.0)
    }

    #[test]
    fn zero_flow_is_white() {
        let img = flow_to_color(&FlowField::zeros(4, 3), MaxMagnitude::Auto);
        assert!(img.data.iter().all(|p| *p == [1.0, 1.0, 1.0]));
    }

    #[test]
    fn rightward_flow_is_uniform_saturated() {
        let img = flow_to_color(&FlowField::constant(4, 3, 2.0, 0.0), MaxMagnitude::Fixed(2.0));
        let first = img.data[0];
        assert!(img.data.iter().all(|p| *p == first));
        // Fully saturated: the weakest channel drops well below 1.
        assert!(first.iter().cloned().fold(f32::INFINITY, f32::min) < 0.25);
        assert_eq!(wheel_position(2.0, 0.0), 1.0);
    }

    #[test]
    fn opposite_directions_are_half_a_turn_apart() {
        for &(u, v) in &[(3.0f32, 0.0f32), (1.0, 1.0), (0.0, -2.0), (-0.5, 2.5)] {
            let d = (wheel_position(u, v) - wheel_position(-u, -v)).abs();
            assert!((d - 0.5).abs() < 1e-12, "({u},{v}) gives {d}");
        }
        let f = FlowField::new(2, 1, vec![3.0, -3.0], vec![0.0, 0.0]).unwrap();
        let img = flow_to_color(&f, MaxMagnitude::Fixed(3.0));
        let (h1, h2) = (hue_degrees(img.data[0]), hue_degrees(img.data[1]));
        let diff = (h1 - h2).abs();
        let diff = diff.min(360.0 - diff);
        // The Middlebury wheel is not uniform in HSV hue; opposite ends sit
        // roughly opposite each other.
        assert!(diff > 150.0, "hues {h1} and {h2}");
    }

    #[test]
    fn channels_stay_in_unit_range() {
        let f = FlowField::from_fn(9, 9, |i, j| (j as f32 - 4.0, i as f32 - 4.0));
        let img = flow_to_color(&f, MaxMagnitude::Fixed(2.0));
        assert!(img.data.iter().flatten().all(|c| (0.0..=1.0).contains(c)));
    }
}
