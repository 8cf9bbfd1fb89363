//! KHCV binary tensor files and 8-bit PGM/PPM images.
//!
//! KHCV layout (all integers little-endian):
//!
//! | bytes | content                                                   |
//! |-------|-----------------------------------------------------------|
//! | 4     | ASCII `KHCV`                                              |
//! | 1     | version, currently 1                                      |
//! | 1     | dtype: 0 = f32, 1 = binary u8                             |
//! | 1     | ndim: 2 frame, 3 cube, 4 flow field                       |
//! | 4·n   | u32 dims: `height, width` (+ `frames`, or `2` for a flow) |
//! | …     | payload, frame-major then row-major                       |
//!
//! A flow field carries three dims `(height, width, 2)` and stores the `u`
//! plane followed by the `v` plane.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{CodingCube, FlowField, Frame, RgbImage, VideoCube};

pub const MAGIC: &[u8; 4] = b"KHCV";
pub const VERSION: u8 = 1;
pub const DTYPE_F32: u8 = 0;
pub const DTYPE_BINARY: u8 = 1;
pub const NDIM_FLOW: u8 = 4;

/// Any object that can be stored in a KHCV file.
#[derive(Debug, Clone, PartialEq)]
pub enum Tensor {
    Frame(Frame),
    Video(VideoCube),
    Coding(CodingCube),
    Flow(FlowField),
}

impl Tensor {
    pub fn kind(&self) -> &'static str {
        match self {
            Tensor::Frame(_) => "frame",
            Tensor::Video(_) => "video cube",
            Tensor::Coding(_) => "coding cube",
            Tensor::Flow(_) => "flow field",
        }
    }

    pub fn into_frame(self) -> Result<Frame> {
        match self {
            Tensor::Frame(f) => Ok(f),
            other => Err(Error::Shape(format!("expected a frame, found a {}", other.kind()))),
        }
    }

    pub fn into_video(self) -> Result<VideoCube> {
        match self {
            Tensor::Video(v) => Ok(v),
            other => Err(Error::Shape(format!(
                "expected a video cube, found a {}",
                other.kind()
            ))),
        }
    }

    pub fn into_coding(self) -> Result<CodingCube> {
        match self {
            Tensor::Coding(c) => Ok(c),
            other => Err(Error::Shape(format!(
                "expected a coding cube, found a {}",
                other.kind()
            ))),
        }
    }

    pub fn into_flow(self) -> Result<FlowField> {
        match self {
            Tensor::Flow(f) => Ok(f),
            other => Err(Error::Shape(format!(
                "expected a flow field, found a {}",
                other.kind()
            ))),
        }
    }
}

impl From<Frame> for Tensor {
    fn from(v: Frame) -> Self {
        Tensor::Frame(v)
    }
}

impl From<VideoCube> for Tensor {
    fn from(v: VideoCube) -> Self {
        Tensor::Video(v)
    }
}

impl From<CodingCube> for Tensor {
    fn from(v: CodingCube) -> Self {
        Tensor::Coding(v)
    }
}

impl From<FlowField> for Tensor {
    fn from(v: FlowField) -> Self {
        Tensor::Flow(v)
    }
}

fn push_f32s(out: &mut Vec<u8>, data: &[f32]) {
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Serializes a tensor into KHCV bytes.
pub fn encode_tensor(tensor: &Tensor) -> Vec<u8> {
    let (dtype, ndim, dims): (u8, u8, Vec<usize>) = match tensor {
        Tensor::Frame(f) => (DTYPE_F32, 2, vec![f.height(), f.width()]),
        Tensor::Video(v) => (DTYPE_F32, 3, vec![v.height(), v.width(), v.frames()]),
        Tensor::Coding(c) => (DTYPE_BINARY, 3, vec![c.height(), c.width(), c.frames()]),
        Tensor::Flow(f) => (DTYPE_F32, NDIM_FLOW, vec![f.height(), f.width(), 2]),
    };
    let mut out = Vec::with_capacity(7 + 4 * dims.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[VERSION, dtype, ndim]);
    for d in dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    match tensor {
        Tensor::Frame(f) => push_f32s(&mut out, f.data()),
        Tensor::Video(v) => push_f32s(&mut out, v.data()),
        Tensor::Coding(c) => out.extend_from_slice(c.data()),
        Tensor::Flow(f) => {
            push_f32s(&mut out, f.u());
            push_f32s(&mut out, f.v());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Truncated {
                path: self.path.to_path_buf(),
                expected: self.pos + n,
                found: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let b = self.take(n * 4)?;
        Ok(b.chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }
}

/// Parses KHCV bytes; `path` is only used for error context.
pub fn decode_tensor(bytes: &[u8], path: &Path) -> Result<Tensor> {
    let mut r = Reader {
        bytes,
        pos: 0,
        path,
    };
    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            found: [magic[0], magic[1], magic[2], magic[3]],
        });
    }
    let version = r.u8()?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion {
            path: path.to_path_buf(),
            version,
        });
    }
    let dtype = r.u8()?;
    let ndim = r.u8()?;
    let ndims = match ndim {
        2 => 2,
        3 | NDIM_FLOW => 3,
        _ => {
            return Err(Error::BadNdim {
                path: path.to_path_buf(),
                ndim,
            })
        }
    };
    let supported = matches!((dtype, ndim), (DTYPE_F32, 2 | 3 | NDIM_FLOW) | (DTYPE_BINARY, 3));
    if !supported {
        return Err(Error::UnsupportedDtype {
            path: path.to_path_buf(),
            dtype,
            ndim,
        });
    }
    let mut dims = Vec::with_capacity(ndims);
    for _ in 0..ndims {
        dims.push(r.u32()?);
    }
    let corrupt = |msg: String| Error::Corrupt {
        path: path.to_path_buf(),
        msg,
    };
    if dims.contains(&0) {
        return Err(corrupt(format!("zero dimension in {dims:?}")));
    }
    let (height, width) = (dims[0], dims[1]);
    let plane = height
        .checked_mul(width)
        .ok_or_else(|| corrupt(format!("dimensions {dims:?} overflow")))?;
    // Shape/finiteness failures on decode mean a damaged payload.
    let wrap = |e: Error| corrupt(e.to_string());

    let tensor = match (dtype, ndim) {
        (DTYPE_F32, 2) => Tensor::Frame(Frame::new(width, height, r.f32s(plane)?).map_err(wrap)?),
        (DTYPE_F32, 3) => {
            let n = plane * dims[2];
            Tensor::Video(VideoCube::new(width, height, dims[2], r.f32s(n)?).map_err(wrap)?)
        }
        (DTYPE_BINARY, 3) => {
            let n = plane * dims[2];
            let data = r.take(n)?.to_vec();
            Tensor::Coding(CodingCube::new(width, height, dims[2], data).map_err(wrap)?)
        }
        (DTYPE_F32, NDIM_FLOW) => {
            if dims[2] != 2 {
                return Err(corrupt(format!(
                    "flow field must have 2 planes, header says {}",
                    dims[2]
                )));
            }
            let u = r.f32s(plane)?;
            let v = r.f32s(plane)?;
            Tensor::Flow(FlowField::new(width, height, u, v).map_err(wrap)?)
        }
        _ => unreachable!("dtype/ndim validated above"),
    };
    if r.pos != bytes.len() {
        return Err(corrupt(format!(
            "{} trailing bytes after payload",
            bytes.len() - r.pos
        )));
    }
    Ok(tensor)
}

pub fn save_tensor(tensor: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_tensor(tensor)).map_err(|e| Error::io(path, e))
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_tensor(&bytes, path)
}

/// Quantizes a [0, 1] sample to a byte with round-half-up.
#[inline]
pub fn quantize_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

struct Netpbm<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Netpbm<'_> {
    fn skip_ws_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self) -> Option<usize> {
        self.skip_ws_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()?
            .parse()
            .ok()
    }
}

/// Reads a binary 8-bit grayscale PGM (`P5`, maxval 255) as a [0, 1] frame.
pub fn import_pgm(path: impl AsRef<Path>) -> Result<Frame> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let fmt_err = |msg: &str| Error::ImageFormat {
        path: path.to_path_buf(),
        msg: msg.to_string(),
    };
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(fmt_err("not a binary P5 graymap"));
    }
    let mut p = Netpbm {
        bytes: &bytes,
        pos: 2,
    };
    let width = p.number().ok_or_else(|| fmt_err("missing width"))?;
    let height = p.number().ok_or_else(|| fmt_err("missing height"))?;
    let maxval = p.number().ok_or_else(|| fmt_err("missing maxval"))?;
    if maxval != 255 {
        return Err(fmt_err(&format!("maxval {maxval} unsupported, expected 255")));
    }
    if width == 0 || height == 0 {
        return Err(fmt_err("zero image dimension"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    match bytes.get(p.pos) {
        Some(c) if c.is_ascii_whitespace() => p.pos += 1,
        _ => return Err(fmt_err("malformed header terminator")),
    }
    let raster = &bytes[p.pos..];
    if raster.len() < width * height {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected: p.pos + width * height,
            found: bytes.len(),
        });
    }
    let data = raster[..width * height]
        .iter()
        .map(|&b| b as f32 / 255.0)
        .collect();
    Frame::new(width, height, data)
}

/// Writes a frame as binary PGM, clamping to [0, 1] first.
pub fn export_pgm(frame: &Frame, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = format!("P5\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.extend(frame.data().iter().map(|&v| quantize_u8(v)));
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes an RGB image as binary PPM (`P6`).
pub fn export_ppm(image: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = format!("P6\n{} {}\n255\n", image.width, image.height).into_bytes();
    for px in &image.data {
        out.extend(px.iter().map(|&c| quantize_u8(c)));
    }
    file.write_all(&out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn zero_frame_layout() {
        let f = Frame::zeros(2, 2);
        let bytes = encode_tensor(&f.clone().into());
        // magic + version/dtype/ndim + 2 dims + 4 samples
        assert_eq!(bytes.len(), 4 + 3 + 8 + 16);
        assert_eq!(&bytes[..4], b"KHCV");
        assert_eq!(&bytes[4..7], &[1, 0, 2]);
        let dir = tmp();
        let p = dir.path().join("z.khcv");
        save_tensor(&f.clone().into(), &p).unwrap();
        assert_eq!(load_tensor(&p).unwrap(), Tensor::Frame(f));
    }

    #[test]
    fn flow_roundtrip_preserves_samples() {
        let f = FlowField::constant(5, 3, 1.5, -0.25);
        let dir = tmp();
        let p = dir.path().join("f.khcv");
        save_tensor(&f.clone().into(), &p).unwrap();
        let back = load_tensor(&p).unwrap().into_flow().unwrap();
        assert_eq!(back, f);
        assert!(back.u().iter().all(|&x| x == 1.5));
        assert!(back.v().iter().all(|&x| x == -0.25));
    }

    #[test]
    fn coding_cube_header_uses_binary_dtype() {
        let c = CodingCube::new(2, 1, 2, vec![1, 0, 0, 1]).unwrap();
        let bytes = encode_tensor(&c.into());
        assert_eq!(&bytes[4..7], &[1, DTYPE_BINARY, 3]);
        assert_eq!(&bytes[bytes.len() - 4..], &[1, 0, 0, 1]);
    }

    #[test]
    fn bad_magic_is_rejected() {
        let mut bytes = encode_tensor(&Frame::zeros(2, 2).into());
        bytes[0] = b'X';
        let err = decode_tensor(&bytes, Path::new("x")).unwrap_err();
        assert!(matches!(err, Error::BadMagic { found, .. } if &found == b"XHCV"));
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let bytes = encode_tensor(&VideoCube::zeros(4, 4, 3).into());
        let err = decode_tensor(&bytes[..bytes.len() - 5], Path::new("x")).unwrap_err();
        assert!(matches!(err, Error::Truncated { .. }));
        let err = decode_tensor(&bytes[..9], Path::new("x")).unwrap_err();
        assert!(matches!(err, Error::Truncated { .. }));
    }

    #[test]
    fn header_corruptions_have_distinct_errors() {
        let good = encode_tensor(&Frame::zeros(2, 2).into());
        let mut v = good.clone();
        v[4] = 2;
        assert!(matches!(
            decode_tensor(&v, Path::new("x")),
            Err(Error::UnsupportedVersion { version: 2, .. })
        ));
        let mut d = good.clone();
        d[5] = 7;
        assert!(matches!(
            decode_tensor(&d, Path::new("x")),
            Err(Error::UnsupportedDtype { dtype: 7, .. })
        ));
        let mut n = good.clone();
        n[6] = 5;
        assert!(matches!(
            decode_tensor(&n, Path::new("x")),
            Err(Error::BadNdim { ndim: 5, .. })
        ));
        let mut t = good;
        t.push(0);
        assert!(matches!(
            decode_tensor(&t, Path::new("x")),
            Err(Error::Corrupt { .. })
        ));
    }

    #[test]
    fn non_binary_mask_payload_is_corrupt() {
        let mut bytes = encode_tensor(&CodingCube::filled(2, 2, 1, true).into());
        let last = bytes.len() - 1;
        bytes[last] = 3;
        assert!(matches!(
            decode_tensor(&bytes, Path::new("x")),
            Err(Error::Corrupt { .. })
        ));
    }

    #[test]
    fn missing_file_reports_path() {
        let err = load_tensor("/nonexistent/dir/file.khcv").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dir/file.khcv"));
    }

    #[test]
    fn pgm_endpoints_and_rounding() {
        let dir = tmp();
        let p = dir.path().join("a.pgm");
        let f = Frame::new(3, 1, vec![0.0, 0.5, 1.0]).unwrap();
        export_pgm(&f, &p).unwrap();
        let raw = fs::read(&p).unwrap();
        assert_eq!(&raw[raw.len() - 3..], &[0, 128, 255]);
        let back = import_pgm(&p).unwrap();
        assert_eq!(back.data()[0], 0.0);
        assert_eq!(back.data()[2], 1.0);
        assert_eq!(quantize_u8(0.5), 128);
        assert_eq!(quantize_u8(-3.0), 0);
        assert_eq!(quantize_u8(7.0), 255);
    }

    #[test]
    fn pgm_header_with_comment() {
        let dir = tmp();
        let p = dir.path().join("c.pgm");
        let mut bytes = b"P5\n# made by hand\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[255, 0]);
        fs::write(&p, bytes).unwrap();
        let f = import_pgm(&p).unwrap();
        assert_eq!(f.data(), &[1.0, 0.0]);
    }

    #[test]
    fn pgm_rejects_other_formats() {
        let dir = tmp();
        let p2 = dir.path().join("p2.pgm");
        fs::write(&p2, b"P2\n1 1\n255\n0\n").unwrap();
        assert!(matches!(import_pgm(&p2), Err(Error::ImageFormat { .. })));
        let p16 = dir.path().join("p16.pgm");
        fs::write(&p16, b"P5\n1 1\n65535\n\0\0").unwrap();
        assert!(matches!(import_pgm(&p16), Err(Error::ImageFormat { .. })));
    }

    fn video_strategy() -> impl Strategy<Value = VideoCube> {
        (1usize..6, 1usize..6, 1usize..4).prop_flat_map(|(w, h, b)| {
            proptest::collection::vec(-1e6f32..1e6, w * h * b)
                .prop_map(move |d| VideoCube::new(w, h, b, d).unwrap())
        })
    }

    proptest! {
        #[test]
        fn khcv_roundtrip_is_bit_exact(cube in video_strategy()) {
            let t = Tensor::Video(cube);
            let back = decode_tensor(&encode_tensor(&t), Path::new("mem")).unwrap();
            prop_assert_eq!(encode_tensor(&back), encode_tensor(&t));
            prop_assert_eq!(back, t);
        }

        #[test]
        fn pgm_export_import_is_idempotent_on_grid(
            levels in proptest::collection::vec(0u8..=255, 12)
        ) {
            let dir = tmp();
            let p = dir.path().join("g.pgm");
            let f = Frame::new(4, 3, levels.iter().map(|&b| b as f32 / 255.0).collect()).unwrap();
            export_pgm(&f, &p).unwrap();
            let once = import_pgm(&p).unwrap();
            export_pgm(&once, &p).unwrap();
            let twice = import_pgm(&p).unwrap();
            prop_assert_eq!(&once, &f);
            prop_assert_eq!(once, twice);
        }
    }
}
