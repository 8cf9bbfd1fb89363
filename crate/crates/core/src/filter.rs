//! Small separable filters on row-major planes, replicate borders.

#[inline]
fn clamp_index(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Separable convolution with an odd-length symmetric kernel.
pub fn convolve_separable(data: &[f32], width: usize, height: usize, kernel: &[f32]) -> Vec<f32> {
    debug_assert!(kernel.len() % 2 == 1);
    let r = (kernel.len() / 2) as isize;
    let mut tmp = vec![0.0f32; data.len()];
    for i in 0..height {
        let row = &data[i * width..(i + 1) * width];
        for j in 0..width {
            let mut acc = 0.0;
            for (t, &kv) in kernel.iter().enumerate() {
                acc += kv * row[clamp_index(j as isize + t as isize - r, width)];
            }
            tmp[i * width + j] = acc;
        }
    }
    let mut out = vec![0.0f32; data.len()];
    for i in 0..height {
        for j in 0..width {
            let mut acc = 0.0;
            for (t, &kv) in kernel.iter().enumerate() {
                acc += kv * tmp[clamp_index(i as isize + t as isize - r, height) * width + j];
            }
            out[i * width + j] = acc;
        }
    }
    out
}

/// Mean over a `(2r+1)²` window.
pub fn box_filter(data: &[f32], width: usize, height: usize, radius: usize) -> Vec<f32> {
    if radius == 0 {
        return data.to_vec();
    }
    let n = 2 * radius + 1;
    let kernel = vec![1.0 / n as f32; n];
    convolve_separable(data, width, height, &kernel)
}

pub const BINOMIAL5: [f32; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

/// Binomial pre-filter followed by 2x decimation. Output size is `ceil(n / 2)`.
pub fn downsample2(data: &[f32], width: usize, height: usize) -> (Vec<f32>, usize, usize) {
    let smooth = convolve_separable(data, width, height, &BINOMIAL5);
    let (w2, h2) = (width.div_ceil(2), height.div_ceil(2));
    let mut out = Vec::with_capacity(w2 * h2);
    for i in 0..h2 {
        for j in 0..w2 {
            out.push(smooth[(2 * i) * width + 2 * j]);
        }
    }
    (out, w2, h2)
}

/// Normalized 1-D Gaussian kernel of the given odd size.
pub fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let r = (size / 2) as f64;
    let raw: Vec<f64> = (0..size)
        .map(|t| {
            let x = t as f64 - r;
            (-x * x / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_filter_preserves_constants() {
        let d = vec![0.3f32; 20];
        for v in box_filter(&d, 5, 4, 1) {
            assert!((v - 0.3).abs() < 1e-6);
        }
    }

    #[test]
    fn box_filter_interior_mean() {
        let d: Vec<f32> = (0..25).map(|v| v as f32).collect();
        let out = box_filter(&d, 5, 5, 1);
        // 3x3 around (2,2): mean of a linear ramp equals the centre value.
        assert!((out[12] - 12.0).abs() < 1e-5);
    }

    #[test]
    fn downsample_sizes() {
        let d = vec![1.0f32; 7 * 5];
        let (out, w, h) = downsample2(&d, 7, 5);
        assert_eq!((w, h), (4, 3));
        assert!(out.iter().all(|&v| (v - 1.0).abs() < 1e-6));
    }

    #[test]
    fn gaussian_kernel_sums_to_one() {
        let k = gaussian_kernel(11, 1.5);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(k[0], k[10]);
    }
}
