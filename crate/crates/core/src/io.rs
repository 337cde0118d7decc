//! Cube file I/O.
//!
//! The native `SCICUBE` format is a 32-byte ASCII header line
//! `SCICUBE <rows> <cols> <frames> <dtype>` (space padded, terminated by
//! `\n`) followed by the little-endian payload in vectorize order.
//! `dtype` is `f32` (the default) or `f64`.
//!
//! Frame sequences can also be read from and written to 8/16-bit grayscale
//! PNG or PGM files for visualization.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage, ImageFormat};

use crate::cube::{FrameCube, Shape, DEFAULT_PEAK};
use crate::error::{Error, Result};

pub const HEADER_LEN: usize = 32;
const MAGIC: &str = "SCICUBE";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Dtype {
    #[default]
    F32,
    F64,
}

impl Dtype {
    fn tag(self) -> &'static str {
        match self {
            Dtype::F32 => "f32",
            Dtype::F64 => "f64",
        }
    }

    fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CubeFormat {
    SciCube(Dtype),
    /// One grayscale PNG per frame.
    Png,
    /// One binary PGM (P5) per frame.
    Pgm,
}

impl CubeFormat {
    /// Guesses the format from a file extension; directories are read as PNG sequences.
    pub fn from_path(path: &Path) -> CubeFormat {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("png") => CubeFormat::Png,
            Some("pgm") => CubeFormat::Pgm,
            _ if path.is_dir() => CubeFormat::Png,
            _ => CubeFormat::SciCube(Dtype::F32),
        }
    }
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Serializes `cube` in the native format.
pub fn encode_scicube(cube: &FrameCube, dtype: Dtype) -> Result<Vec<u8>> {
    let shape = cube.shape();
    let line = format!("{MAGIC} {} {} {} {}", shape.rows, shape.cols, shape.frames, dtype.tag());
    if line.len() + 1 > HEADER_LEN {
        return Err(Error::InvalidParameter(format!(
            "shape {shape} does not fit the {HEADER_LEN}-byte header"
        )));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + shape.len() * dtype.width());
    out.extend_from_slice(line.as_bytes());
    out.resize(HEADER_LEN - 1, b' ');
    out.push(b'\n');
    match dtype {
        Dtype::F32 => {
            for &v in cube.values() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        Dtype::F64 => {
            for &v in cube.values() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    Ok(out)
}

/// Parses a native-format buffer. `path` is only used in diagnostics.
pub fn decode_scicube(bytes: &[u8], path: &Path, peak: f64) -> Result<FrameCube> {
    if bytes.len() < HEADER_LEN {
        return Err(format_err(path, "file shorter than the 32-byte header"));
    }
    let header = std::str::from_utf8(&bytes[..HEADER_LEN])
        .map_err(|_| format_err(path, "header is not ASCII"))?;
    if !header.ends_with('\n') {
        return Err(format_err(path, "header line must end at byte 32"));
    }
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 5 || tokens[0] != MAGIC {
        return Err(format_err(path, format!("bad header {:?}", header.trim_end())));
    }
    let dim = |s: &str, name: &str| -> Result<usize> {
        s.parse::<usize>()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| format_err(path, format!("bad {name} {s:?}")))
    };
    let shape = Shape::new(dim(tokens[1], "rows")?, dim(tokens[2], "cols")?, dim(tokens[3], "frames")?);
    let dtype = match tokens[4] {
        "f32" => Dtype::F32,
        "f64" => Dtype::F64,
        other => return Err(format_err(path, format!("unsupported dtype {other:?}"))),
    };

    let payload = &bytes[HEADER_LEN..];
    if payload.len() % dtype.width() != 0 || payload.len() / dtype.width() != shape.len() {
        return Err(Error::DimensionMismatch {
            path: path.to_path_buf(),
            declared: shape.len(),
            found: payload.len() / dtype.width(),
        });
    }
    let values: Vec<f64> = match dtype {
        Dtype::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
        Dtype::F64 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(format_err(path, "payload contains non-finite values"));
    }
    FrameCube::with_peak(shape, values, peak)
}

pub fn save_scicube(cube: &FrameCube, path: &Path, dtype: Dtype) -> Result<()> {
    let bytes = encode_scicube(cube, dtype)?;
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

pub fn load_scicube(path: &Path) -> Result<FrameCube> {
    load_scicube_with_peak(path, DEFAULT_PEAK)
}

pub fn load_scicube_with_peak(path: &Path, peak: f64) -> Result<FrameCube> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_scicube(&bytes, path, peak)
}

/// Loads a cube. For image formats `path` is either one image (a single
/// frame) or a directory whose matching files, sorted by name, are the frames.
pub fn load_cube(path: &Path, format: CubeFormat) -> Result<FrameCube> {
    match format {
        CubeFormat::SciCube(_) => load_scicube(path),
        CubeFormat::Png | CubeFormat::Pgm => {
            if path.is_dir() {
                let ext = if format == CubeFormat::Png { "png" } else { "pgm" };
                let mut files: Vec<PathBuf> = fs::read_dir(path)?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| {
                        p.extension()
                            .and_then(|e| e.to_str())
                            .is_some_and(|e| e.eq_ignore_ascii_case(ext))
                    })
                    .collect();
                files.sort();
                load_frame_sequence(&files)
            } else {
                load_frame_sequence(&[path.to_path_buf()])
            }
        }
    }
}

/// Saves a cube. For image formats `path` is a directory that receives
/// `frame_000.<ext>`, `frame_001.<ext>`, ...
pub fn save_cube(cube: &FrameCube, path: &Path, format: CubeFormat) -> Result<()> {
    match format {
        CubeFormat::SciCube(dtype) => save_scicube(cube, path, dtype),
        CubeFormat::Png => save_frame_sequence(cube, path, "frame", ImageFormat::Png).map(|_| ()),
        CubeFormat::Pgm => save_frame_sequence(cube, path, "frame", ImageFormat::Pnm).map(|_| ()),
    }
}

/// Reads grayscale frames (8- or 16-bit; color inputs are converted to luma).
/// The cube peak is 255 for 8-bit and 65535 for 16-bit sources.
pub fn load_frame_sequence(paths: &[PathBuf]) -> Result<FrameCube> {
    if paths.is_empty() {
        return Err(Error::InvalidParameter("empty frame sequence".into()));
    }
    let mut frames = Vec::with_capacity(paths.len());
    let mut dims: Option<(u32, u32)> = None;
    let mut peak = DEFAULT_PEAK;
    for p in paths {
        let img = image::open(p)?;
        let (w, h) = (img.width(), img.height());
        match dims {
            None => dims = Some((w, h)),
            Some(d) if d != (w, h) => {
                return Err(format_err(p, format!("frame is {w}x{h}, expected {}x{}", d.0, d.1)));
            }
            Some(_) => {}
        }
        let values: Vec<f64> = match img {
            DynamicImage::ImageLuma16(buf) => {
                peak = u16::MAX as f64;
                buf.into_raw().into_iter().map(f64::from).collect()
            }
            other => other.into_luma8().into_raw().into_iter().map(f64::from).collect(),
        };
        frames.push(values);
    }
    let (w, h) = dims.expect("at least one frame");
    FrameCube::from_frames(h as usize, w as usize, &frames, peak)
}

/// Writes each frame as an 8-bit grayscale image, mapping `[0, peak]` to
/// `[0, 255]` with clamping. Returns the written paths.
pub fn save_frame_sequence(
    cube: &FrameCube,
    dir: &Path,
    stem: &str,
    format: ImageFormat,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let shape = cube.shape();
    let ext = match format {
        ImageFormat::Pnm => "pgm",
        _ => "png",
    };
    let scale = 255.0 / cube.peak();
    let mut written = Vec::with_capacity(shape.frames);
    for (k, frame) in cube.frames().enumerate() {
        let pixels: Vec<u8> = frame
            .iter()
            .map(|v| (v * scale).round().clamp(0.0, 255.0) as u8)
            .collect();
        let img = GrayImage::from_raw(shape.cols as u32, shape.rows as u32, pixels)
            .expect("buffer matches frame size");
        let path = dir.join(format!("{stem}_{k:03}.{ext}"));
        img.save_with_format(&path, format)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cube_8x8x4() -> FrameCube {
        let shape = Shape::new(8, 8, 4);
        FrameCube::from_fn(shape, 255.0, |k, i, j| {
            // f32-representable, so the f32 payload is exact
            (((k * 64 + i * 8 + j) as f32 * 1.618_034).sin() * 100.0) as f64
        })
        .unwrap()
    }

    #[test]
    fn header_is_exactly_32_bytes() {
        let bytes = encode_scicube(&cube_8x8x4(), Dtype::F32).unwrap();
        assert_eq!(&bytes[..HEADER_LEN], b"SCICUBE 8 8 4 f32              \n");
        assert_eq!(bytes.len(), HEADER_LEN + 8 * 8 * 4 * 4);
    }

    #[test]
    fn save_then_load_is_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.scicube");
        let cube = cube_8x8x4();
        save_cube(&cube, &path, CubeFormat::SciCube(Dtype::F32)).unwrap();
        let back = load_cube(&path, CubeFormat::SciCube(Dtype::F32)).unwrap();
        assert_eq!(back, cube);
    }

    #[test]
    fn payload_shorter_than_header_declares() {
        let mut bytes = b"SCICUBE 2 2 2 f32              \n".to_vec();
        for v in 0..7 {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
        let err = decode_scicube(&bytes, Path::new("x"), 255.0).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { declared: 8, found: 7, .. }));
    }

    #[test]
    fn malformed_headers_are_rejected() {
        let p = Path::new("x");
        assert!(matches!(decode_scicube(b"SCI", p, 255.0), Err(Error::Format { .. })));
        let bad_magic = b"NOTCUBE 1 1 1 f32              \n\0\0\0\0";
        assert!(matches!(decode_scicube(bad_magic, p, 255.0), Err(Error::Format { .. })));
        let bad_dtype = b"SCICUBE 1 1 1 i16              \n\0\0";
        assert!(matches!(decode_scicube(bad_dtype, p, 255.0), Err(Error::Format { .. })));
        let mut nan = b"SCICUBE 1 1 1 f32              \n".to_vec();
        nan.extend_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode_scicube(&nan, p, 255.0), Err(Error::Format { .. })));
    }

    #[test]
    fn png_sequence_matches_pixel_dump() {
        let dir = tempfile::tempdir().unwrap();
        let mut paths = Vec::new();
        let mut expected = Vec::new();
        for k in 0..3u32 {
            let img = GrayImage::from_fn(5, 4, |x, y| image::Luma([(k * 50 + y * 10 + x) as u8]));
            let p = dir.path().join(format!("f{k}.png"));
            img.save(&p).unwrap();
            // reference dump: row-major, x fastest
            expected.extend(img.pixels().map(|px| px.0[0] as f64));
            paths.push(p);
        }
        let cube = load_frame_sequence(&paths).unwrap();
        assert_eq!(cube.shape(), Shape::new(4, 5, 3));
        assert_eq!(cube.values(), expected.as_slice());

        let from_dir = load_cube(dir.path(), CubeFormat::Png).unwrap();
        assert_eq!(from_dir, cube);
    }

    #[test]
    fn pgm_export_round_trips_8bit_values() {
        let dir = tempfile::tempdir().unwrap();
        let cube = FrameCube::from_fn(Shape::new(3, 4, 2), 255.0, |k, i, j| (k * 40 + i * 4 + j) as f64).unwrap();
        save_cube(&cube, dir.path(), CubeFormat::Pgm).unwrap();
        let back = load_cube(dir.path(), CubeFormat::Pgm).unwrap();
        assert_eq!(back, cube);
    }

    proptest! {
        #[test]
        fn f64_payload_round_trip_is_bit_exact(
            rows in 1usize..6, cols in 1usize..6, frames in 1usize..4,
            vals in proptest::collection::vec(-1e6f64..1e6, 125)
        ) {
            let shape = Shape::new(rows, cols, frames);
            let cube = FrameCube::new(shape, vals[..shape.len()].to_vec()).unwrap();
            let bytes = encode_scicube(&cube, Dtype::F64).unwrap();
            let back = decode_scicube(&bytes, Path::new("mem"), cube.peak()).unwrap();
            for (a, b) in back.values().iter().zip(cube.values()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
