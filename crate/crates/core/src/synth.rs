//! Analytic synthetic scenes for simulation and benchmarking.
//!
//! Scenes are evaluated from closed-form intensity functions, so sub-pixel
//! translations are exact and the true motion field is known.

use crate::rng::CounterRng;
use crate::tensor::{Frame, VideoCube};

/// Sum of random low-frequency sinusoids, centred on 0.5.
#[derive(Debug, Clone)]
pub struct BandLimitedTexture {
    waves: Vec<Wave>,
}

#[derive(Debug, Clone, Copy)]
struct Wave {
    kx: f64,
    ky: f64,
    phase: f64,
    amplitude: f64,
}

impl BandLimitedTexture {
    /// `min_period`/`max_period` bound the wavelengths in pixels.
    pub fn new(seed: u64, components: usize, min_period: f64, max_period: f64) -> Self {
        let rng = CounterRng::new(seed, 0x7e47);
        let tau = std::f64::consts::TAU;
        let waves: Vec<Wave> = (0..components as u64)
            .map(|c| {
                let period = min_period + (max_period - min_period) * rng.uniform(4 * c);
                let angle = tau * rng.uniform(4 * c + 1);
                let k = tau / period;
                Wave {
                    kx: k * angle.cos(),
                    ky: k * angle.sin(),
                    phase: tau * rng.uniform(4 * c + 2),
                    amplitude: 0.5 + rng.uniform(4 * c + 3),
                }
            })
            .collect();
        let total: f64 = waves.iter().map(|w| w.amplitude).sum();
        // Peak excursion capped at 0.4 keeps values inside [0.1, 0.9].
        let scale = 0.4 / total.max(1e-12);
        Self {
            waves: waves
                .into_iter()
                .map(|w| Wave {
                    amplitude: w.amplitude * scale,
                    ..w
                })
                .collect(),
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        0.5 + self
            .waves
            .iter()
            .map(|w| w.amplitude * (w.kx * x + w.ky * y + w.phase).sin())
            .sum::<f64>()
    }

    /// Frame whose pixel `(i, j)` is the texture at `(j + dx, i + dy)`.
    pub fn render(&self, width: usize, height: usize, dx: f64, dy: f64) -> Frame {
        Frame::from_fn(width, height, |i, j| {
            self.eval(j as f64 + dx, i as f64 + dy) as f32
        })
    }
}

/// Texture translating by `velocity` pixels per frame: frame `t` at pixel `p`
/// shows the texture at `p − t·velocity`.
pub fn translating_texture(
    width: usize,
    height: usize,
    frames: usize,
    velocity: (f64, f64),
    seed: u64,
) -> VideoCube {
    let tex = BandLimitedTexture::new(seed, 12, 6.0, 28.0);
    let fs: Vec<Frame> = (0..frames)
        .map(|t| {
            let t = t as f64;
            tex.render(width, height, -velocity.0 * t, -velocity.1 * t)
        })
        .collect();
    VideoCube::from_frames(&fs).expect("frames share one shape")
}

/// Bright square moving over a shaded background with subpixel antialiasing.
pub fn moving_square(
    width: usize,
    height: usize,
    frames: usize,
    side: f64,
    start: (f64, f64),
    velocity: (f64, f64),
) -> VideoCube {
    let fs: Vec<Frame> = (0..frames)
        .map(|t| {
            let x0 = start.0 + velocity.0 * t as f64;
            let y0 = start.1 + velocity.1 * t as f64;
            Frame::from_fn(width, height, |i, j| {
                let background = 0.15 + 0.2 * (i + j) as f64 / (width + height) as f64;
                // Coverage of the unit pixel [j, j+1) × [i, i+1) by the square.
                let cover_x = ((j as f64 + 1.0).min(x0 + side) - (j as f64).max(x0)).clamp(0.0, 1.0);
                let cover_y = ((i as f64 + 1.0).min(y0 + side) - (i as f64).max(y0)).clamp(0.0, 1.0);
                let a = cover_x * cover_y;
                (background * (1.0 - a) + 0.85 * a) as f32
            })
        })
        .collect();
    VideoCube::from_frames(&fs).expect("frames share one shape")
}

/// Smooth isotropic Gaussian blob centred at `(cx, cy)` on a dark background.
pub fn gaussian_blob(width: usize, height: usize, cx: f64, cy: f64, sigma: f64) -> Frame {
    Frame::from_fn(width, height, |i, j| {
        let (dx, dy) = (j as f64 - cx, i as f64 - cy);
        (0.1 + 0.8 * (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()) as f32
    })
}
