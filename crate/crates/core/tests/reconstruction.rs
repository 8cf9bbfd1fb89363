use hybridsci_core::capture::{encode, forward, generate_masks, NoiseModel};
use hybridsci_core::metrics::psnr;
use hybridsci_core::recon::{gap_tv_reconstruct, gap_tv_reconstruct_with_report, GapTvParams};
use hybridsci_core::rng::CounterRng;
use hybridsci_core::synth::{gaussian_blob, moving_square, BandLimitedTexture};
use hybridsci_core::{CodingCube, Frame, VideoCube};

/// Eq.-by-element forward model: y_ij = Σ_k c_ijk x_ijk.
fn encode_oracle(x: &VideoCube, c: &CodingCube) -> Vec<f64> {
    let mut y = vec![0.0f64; x.width() * x.height()];
    for i in 0..x.height() {
        for j in 0..x.width() {
            let mut acc = 0.0f64;
            for k in 0..x.frames() {
                acc += c.at(i, j, k) as f64 * x.at(i, j, k) as f64;
            }
            y[i * x.width() + j] = acc;
        }
    }
    y
}

fn random_cube(w: usize, h: usize, b: usize, seed: u64) -> VideoCube {
    let rng = CounterRng::new(seed, 0xc0be);
    VideoCube::new(
        w,
        h,
        b,
        (0..(w * h * b) as u64).map(|n| rng.uniform(n) as f32).collect(),
    )
    .unwrap()
}

#[test]
fn encode_matches_scalar_oracle() {
    let x = random_cube(4, 4, 3, 1);
    let c = generate_masks(2, 4, 4, 3, 0.5).unwrap();
    let y = encode(&x, &c, &NoiseModel::None).unwrap();
    for (got, want) in y.data().iter().zip(encode_oracle(&x, &c)) {
        assert!((*got as f64 - want).abs() < 1e-6);
    }
}

#[test]
fn encode_is_linear() {
    let x1 = random_cube(8, 8, 4, 10);
    let x2 = random_cube(8, 8, 4, 11);
    let c = generate_masks(12, 8, 8, 4, 0.5).unwrap();
    let (a, b) = (0.7f32, -1.3f32);
    let mix = VideoCube::new(
        8,
        8,
        4,
        x1.data()
            .iter()
            .zip(x2.data())
            .map(|(p, q)| a * p + b * q)
            .collect(),
    )
    .unwrap();
    let lhs = forward(&mix, &c).unwrap();
    let y1 = forward(&x1, &c).unwrap();
    let y2 = forward(&x2, &c).unwrap();
    for idx in 0..64 {
        let rhs = a * y1.data()[idx] + b * y2.data()[idx];
        assert!((lhs.data()[idx] - rhs).abs() < 1e-5);
    }
}

#[test]
fn closed_pixels_see_only_noise() {
    let x = random_cube(6, 6, 3, 3);
    let mut data = generate_masks(4, 6, 6, 3, 0.5).unwrap().data().to_vec();
    for k in 0..3 {
        data[k * 36 + 7] = 0;
    }
    let c = CodingCube::new(6, 6, 3, data).unwrap();
    assert_eq!(encode(&x, &c, &NoiseModel::None).unwrap().at(1, 1), 0.0);
    let noise = NoiseModel::gaussian(0.01, 9).unwrap();
    let noisy = encode(&x, &c, &noise).unwrap().at(1, 1);
    assert!(noisy != 0.0 && noisy.abs() < 0.1);
}

/// Opens mask `p mod B` at every pixel `p` that no mask covers.
fn with_full_coverage(c: &CodingCube) -> CodingCube {
    let n = c.frame_len();
    let cov = c.coverage();
    let mut data = c.data().to_vec();
    for (p, r) in cov.iter().enumerate() {
        if *r == 0.0 {
            data[(p % c.frames()) * n + p] = 1;
        }
    }
    CodingCube::new(c.width(), c.height(), c.frames(), data).unwrap()
}

#[test]
fn static_scene_matches_coverage_oracle() {
    // Per-frame TV keeps a small contrast bias at its fixed point, so the
    // exactness bound is checked on a smooth scene.
    let scene = gaussian_blob(64, 64, 31.5, 31.5, 16.0);
    let b = 8;
    let x = VideoCube::from_frames(&vec![scene; b]).unwrap();
    let c = with_full_coverage(&generate_masks(5, 64, 64, b, 0.5).unwrap());
    let cov = c.coverage();
    assert!(cov.iter().all(|&r| r > 0.0), "masks must cover every pixel");
    let y = encode(&x, &c, &NoiseModel::None).unwrap();
    let oracle = Frame::new(
        64,
        64,
        y.data().iter().zip(&cov).map(|(v, r)| v / r).collect(),
    )
    .unwrap();
    let (rec, report) = gap_tv_reconstruct_with_report(&y, &c, &GapTvParams::default()).unwrap();
    assert_eq!(report.residual_history.len(), 60);
    for pair in report.residual_history.windows(2) {
        assert!(pair[1] <= pair[0] + 1e-6, "residual rose: {pair:?}");
    }
    for k in 0..b {
        let p = psnr(&rec.frame(k), &oracle, 1.0).unwrap();
        println!("static frame {k}: {p:.2} dB");
        assert!(p >= 40.0, "frame {k}: {p:.2} dB");
    }
}

#[test]
fn moving_square_reconstruction_quality() {
    let b = 8;
    let truth = moving_square(64, 64, b, 16.0, (10.0, 20.0), (2.0, 1.0));
    let c = generate_masks(7, 64, 64, b, 0.5).unwrap();
    let y = encode(&truth, &c, &NoiseModel::None).unwrap();
    let rec = gap_tv_reconstruct(&y, &c, &GapTvParams::default()).unwrap();
    let mean: f64 = (0..b)
        .map(|k| psnr(&rec.frame(k), &truth.frame(k), 1.0).unwrap())
        .sum::<f64>()
        / b as f64;
    println!("moving square GAP-TV mean PSNR {mean:.2} dB");
    assert!(mean >= 20.0, "mean PSNR {mean:.2}");
}

#[test]
fn textured_static_scene_stays_close_to_oracle() {
    let scene = BandLimitedTexture::new(21, 8, 10.0, 32.0).render(48, 48, 0.0, 0.0);
    let b = 4;
    let x = VideoCube::from_frames(&vec![scene; b]).unwrap();
    let c = with_full_coverage(&generate_masks(3, 48, 48, b, 0.5).unwrap());
    let y = encode(&x, &c, &NoiseModel::None).unwrap();
    let cov = c.coverage();
    let oracle = Frame::new(48, 48, y.data().iter().zip(&cov).map(|(v, r)| v / r).collect()).unwrap();
    let rec = gap_tv_reconstruct(&y, &c, &GapTvParams::default()).unwrap();
    for k in 0..b {
        let p = psnr(&rec.frame(k), &oracle, 1.0).unwrap();
        assert!(p >= 25.0, "frame {k}: {p:.2} dB");
    }
}
