use hybridsci_core::capture::{build_schedule, generate_masks, simulate_capture, NoiseModel};
use hybridsci_core::fusion::{fuse_frame, fuse_video, FlowInit, FusionParams};
use hybridsci_core::metrics::psnr;
use hybridsci_core::recon::{gap_tv_reconstruct, GapTvParams};
use hybridsci_core::synth::{gaussian_blob, translating_texture};
use hybridsci_core::{Frame, HybridMeasurement, VideoCube};

struct Run {
    truth: VideoCube,
    measurement: HybridMeasurement,
    x_mid: VideoCube,
}

fn run(scene: &VideoCube, b: usize, mask_seed: u64) -> Run {
    let masks = generate_masks(mask_seed, scene.width(), scene.height(), b, 0.5).unwrap();
    let schedule = build_schedule(2083, b, 0).unwrap();
    let measurement = simulate_capture(scene, &masks, &schedule, 0, &NoiseModel::None).unwrap();
    let x_mid = gap_tv_reconstruct(&measurement.y, &masks, &GapTvParams::default()).unwrap();
    Run {
        truth: scene.sub_block(1, b).unwrap(),
        measurement,
        x_mid,
    }
}

fn mean_psnr(a: &VideoCube, b: &VideoCube) -> f64 {
    (0..a.frames())
        .map(|k| psnr(&a.frame(k), &b.frame(k), 1.0).unwrap())
        .sum::<f64>()
        / a.frames() as f64
}

#[test]
fn static_scene_fusion_does_not_lose_quality() {
    let b = 8;
    let frame = gaussian_blob(64, 64, 30.0, 34.0, 9.0);
    let scene = VideoCube::from_frames(&vec![frame; b + 2]).unwrap();
    let r = run(&scene, b, 3);
    let params = FusionParams::default();
    for k in 1..=b {
        let x_mid = r.x_mid.frame(k - 1);
        let fused = fuse_frame(
            &r.measurement.z_left,
            &r.measurement.z_right,
            &x_mid,
            k,
            b,
            &params,
            None,
        )
        .unwrap();
        let truth = r.truth.frame(k - 1);
        let (pf, pm) = (psnr(&fused, &truth, 1.0).unwrap(), psnr(&x_mid, &truth, 1.0).unwrap());
        assert!(pf >= pm, "frame {k}: fused {pf:.2} < intermediate {pm:.2}");
    }
}

#[test]
fn perfect_inputs_pass_through() {
    let frame = translating_texture(64, 64, 1, (0.0, 0.0), 8).frame(0);
    let fused = fuse_frame(&frame, &frame, &frame, 3, 8, &FusionParams::default(), None).unwrap();
    let dev = fused
        .data()
        .iter()
        .zip(frame.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f32, f32::max);
    assert!(dev < 0.02, "max deviation {dev}");
}

#[test]
fn translating_texture_middle_frame_gains_a_decibel() {
    let b = 16;
    let scene = translating_texture(128, 128, b + 2, (0.5, 0.25), 42);
    let r = run(&scene, b, 9);
    let k = 8;
    let x_mid = r.x_mid.frame(k - 1);
    let fused = fuse_frame(
        &r.measurement.z_left,
        &r.measurement.z_right,
        &x_mid,
        k,
        b,
        &FusionParams::default(),
        None,
    )
    .unwrap();
    let truth = r.truth.frame(k - 1);
    let (pf, pm) = (psnr(&fused, &truth, 1.0).unwrap(), psnr(&x_mid, &truth, 1.0).unwrap());
    println!("k = {k}: intermediate {pm:.2} dB, fused {pf:.2} dB");
    assert!(pf >= pm + 1.0, "fused {pf:.2} vs intermediate {pm:.2}");
}

#[test]
fn single_frame_video_matches_fuse_frame() {
    let scene = translating_texture(48, 48, 3, (0.5, 0.0), 2);
    let r = run(&scene, 1, 4);
    let params = FusionParams::default();
    let video = fuse_video(&r.measurement, &r.x_mid, &params).unwrap();
    assert_eq!(video.frames(), 1);
    let direct = fuse_frame(
        &r.measurement.z_left,
        &r.measurement.z_right,
        &r.x_mid.frame(0),
        1,
        1,
        &params,
        None,
    )
    .unwrap();
    assert_eq!(video.frame(0), direct);
}

#[test]
fn fused_video_keeps_shape_and_beats_intermediate() {
    let b = 8;
    let scene = translating_texture(64, 64, b + 2, (0.5, -0.25), 77);
    let r = run(&scene, b, 12);
    let fused = fuse_video(&r.measurement, &r.x_mid, &FusionParams::default()).unwrap();
    assert_eq!(
        (fused.width(), fused.height(), fused.frames()),
        (r.x_mid.width(), r.x_mid.height(), r.x_mid.frames())
    );
    let (pf, pm) = (mean_psnr(&fused, &r.truth), mean_psnr(&r.x_mid, &r.truth));
    println!("B = 8 video: intermediate {pm:.2} dB, fused {pf:.2} dB");
    assert!(pf >= pm, "fused {pf:.2} vs intermediate {pm:.2}");
}

#[test]
fn chained_flows_produce_a_valid_video() {
    let b = 4;
    let scene = translating_texture(64, 64, b + 2, (0.5, 0.5), 5);
    let r = run(&scene, b, 6);
    let params = FusionParams {
        flow_init: FlowInit::Chained,
        ..FusionParams::default()
    };
    let fused = fuse_video(&r.measurement, &r.x_mid, &params).unwrap();
    assert!(fused.data().iter().all(|v| (0.0..=1.0).contains(v)));
    let frames: Vec<Frame> = fused.to_frames();
    assert_eq!(frames.len(), b);
}

#[test]
fn key_interpolated_flows_recover_detail_on_slow_motion() {
    let b = 16;
    let scene = translating_texture(96, 96, b + 2, (0.16, 0.12), 42);
    let r = run(&scene, b, 9);
    let params = FusionParams {
        flow_init: FlowInit::KeyInterpolated,
        refine_flows: false,
        ..FusionParams::default()
    };
    let fused = fuse_video(&r.measurement, &r.x_mid, &params).unwrap();
    let (pf, pm) = (mean_psnr(&fused, &r.truth), mean_psnr(&r.x_mid, &r.truth));
    println!("key-interpolated B = 16: intermediate {pm:.2} dB, fused {pf:.2} dB");
    assert!(pf >= pm + 5.0, "fused {pf:.2} vs intermediate {pm:.2}");
}
