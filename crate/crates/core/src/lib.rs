//! Simulation, reconstruction and fusion for hybrid compressive video sensing.
//!
//! A hybrid capture interleaves uncoded short-exposure key frames with coded
//! long-exposure compressive frames. This crate simulates that capture,
//! recovers an intermediate video from each compressive frame with GAP-TV,
//! and sharpens every intermediate frame by warping and blending its two
//! neighbouring key frames.

pub mod capture;
pub mod error;
pub mod filter;
pub mod flow;
pub mod fusion;
pub mod interp;
pub mod io;
pub mod metrics;
pub mod recon;
pub mod rng;
pub mod synth;
pub mod tensor;

pub use capture::{
    build_schedule, compressive_ratio, encode, generate_masks, sample_keyframes, simulate_capture,
    HybridMeasurement, NoiseModel, TimingSchedule,
};
pub use error::{Error, Result};
pub use flow::{compose_flows, estimate_flow, flow_to_color, FlowParams, MaxMagnitude};
pub use fusion::{
    blend, fuse_frame, fuse_video, normalize_brightness, refine_flow, visibility_map, warp,
    FlowInit, FusionParams, VisibleMap,
};
pub use io::{export_pgm, export_ppm, import_pgm, load_tensor, save_tensor, Tensor};
pub use metrics::{l1_distance, mean_epe, psnr, ssim, MetricReport, QualityReport};
pub use recon::{gap_tv_reconstruct, tv_denoise, GapTvParams};
pub use tensor::{CodingCube, FlowField, Frame, RgbImage, VideoCube};
