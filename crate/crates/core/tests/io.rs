use hybridsci_core::capture::generate_masks;
use hybridsci_core::io::{export_pgm, import_pgm, load_tensor, save_tensor, Tensor};
use hybridsci_core::synth::translating_texture;
use hybridsci_core::{Error, FlowField, Frame};

#[test]
fn every_tensor_kind_round_trips_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let video = translating_texture(12, 9, 3, (0.5, 0.0), 1);
    let frame = video.frame(1);
    let masks = generate_masks(3, 12, 9, 4, 0.5).unwrap();
    let flow = FlowField::from_planes(video.frame(0), video.frame(2)).unwrap();
    let cases: Vec<(&str, Tensor)> = vec![
        ("frame.khcv", frame.into()),
        ("video.khcv", video.into()),
        ("masks.khcv", masks.into()),
        ("flow.khcv", flow.into()),
    ];
    for (name, tensor) in cases {
        let path = dir.path().join(name);
        save_tensor(&tensor, &path).unwrap();
        assert_eq!(load_tensor(&path).unwrap(), tensor, "{name}");
    }
}

#[test]
fn corrupt_files_report_the_path_and_problem() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.khcv");
    std::fs::write(&path, b"NOPE\x01\x00\x02").unwrap();
    let err = load_tensor(&path).unwrap_err();
    assert!(matches!(err, Error::BadMagic { .. }), "{err}");
    assert!(err.to_string().contains("bad.khcv"));

    let good = dir.path().join("good.khcv");
    save_tensor(&Tensor::from(Frame::filled(4, 4, 0.5)), &good).unwrap();
    let mut bytes = std::fs::read(&good).unwrap();
    bytes.truncate(bytes.len() - 3);
    std::fs::write(&good, &bytes).unwrap();
    assert!(matches!(load_tensor(&good).unwrap_err(), Error::Truncated { .. }));

    let missing = dir.path().join("missing.khcv");
    assert!(matches!(load_tensor(&missing).unwrap_err(), Error::Io { .. }));
}

#[test]
fn pgm_export_quantizes_and_reimports() {
    let dir = tempfile::tempdir().unwrap();
    let frame = Frame::from_fn(7, 5, |i, j| (i * 7 + j) as f32 / 34.0);
    let path = dir.path().join("f.pgm");
    export_pgm(&frame, &path).unwrap();
    let back = import_pgm(&path).unwrap();
    for (a, b) in frame.data().iter().zip(back.data()) {
        assert!((a - b).abs() <= 0.5 / 255.0 + 1e-6);
    }
    let bytes = std::fs::read(&path).unwrap();
    assert!(bytes.starts_with(b"P5\n7 5\n255\n"));
}
