//! Containers for frame cubes, mask cubes and measurements.
//!
//! Every cube is stored flat in frame-major order: all of frame 0, then all
//! of frame 1, and so on. Within a frame the scan is row-major (column index
//! fastest). Sensing, patch extraction and projection all rely on this one
//! convention, so the flat buffer *is* the vectorized signal `x`.

use std::fmt;

use crate::error::{Error, Result};

/// Default intensity peak for 8-bit sources.
pub const DEFAULT_PEAK: f64 = 255.0;

/// Cube dimensions: `rows × cols` pixels per frame, `frames` frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub rows: usize,
    pub cols: usize,
    pub frames: usize,
}

impl Shape {
    pub fn new(rows: usize, cols: usize, frames: usize) -> Self {
        Self { rows, cols, frames }
    }

    /// Pixels per frame (`n`).
    pub fn pixels(&self) -> usize {
        self.rows * self.cols
    }

    /// Total entries (`n·B`).
    pub fn len(&self) -> usize {
        self.pixels() * self.frames
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, frame: usize, row: usize, col: usize) -> usize {
        (frame * self.rows + row) * self.cols + col
    }

    /// Inverse of [`Shape::index`].
    #[inline]
    pub fn coords(&self, flat: usize) -> (usize, usize, usize) {
        let per_frame = self.pixels();
        let frame = flat / per_frame;
        let rem = flat % per_frame;
        (frame, rem / self.cols, rem % self.cols)
    }

    fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 || self.frames == 0 {
            return Err(Error::InvalidCube(format!("degenerate shape {self}")));
        }
        Ok(())
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.rows, self.cols, self.frames)
    }
}

/// The signal: `frames` frames of `rows × cols` real intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameCube {
    shape: Shape,
    values: Vec<f64>,
    peak: f64,
}

impl FrameCube {
    pub fn new(shape: Shape, values: Vec<f64>) -> Result<Self> {
        Self::with_peak(shape, values, DEFAULT_PEAK)
    }

    pub fn with_peak(shape: Shape, values: Vec<f64>, peak: f64) -> Result<Self> {
        shape.validate()?;
        if values.len() != shape.len() {
            return Err(Error::shape(
                format!("{} values for {shape}", shape.len()),
                values.len(),
            ));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (k, i, j) = shape.coords(pos);
            return Err(Error::InvalidCube(format!(
                "non-finite value at frame {k}, pixel ({i}, {j})"
            )));
        }
        if !(peak.is_finite() && peak > 0.0) {
            return Err(Error::InvalidCube(format!("peak must be positive, got {peak}")));
        }
        Ok(Self { shape, values, peak })
    }

    pub fn zeros(shape: Shape) -> Result<Self> {
        Self::new(shape, vec![0.0; shape.len()])
    }

    /// Builds a cube from a flat frame-major vector (the inverse of [`FrameCube::vectorize`]).
    pub fn devectorize(shape: Shape, flat: Vec<f64>, peak: f64) -> Result<Self> {
        Self::with_peak(shape, flat, peak)
    }

    /// Builds a cube by evaluating `f(frame, row, col)` at every voxel.
    pub fn from_fn(shape: Shape, peak: f64, f: impl Fn(usize, usize, usize) -> f64) -> Result<Self> {
        let values = (0..shape.len())
            .map(|p| {
                let (k, i, j) = shape.coords(p);
                f(k, i, j)
            })
            .collect();
        Self::with_peak(shape, values, peak)
    }

    /// Stacks equally sized frames, each given row-major.
    pub fn from_frames(rows: usize, cols: usize, frames: &[Vec<f64>], peak: f64) -> Result<Self> {
        let shape = Shape::new(rows, cols, frames.len());
        let mut values = Vec::with_capacity(shape.len());
        for (k, frame) in frames.iter().enumerate() {
            if frame.len() != rows * cols {
                return Err(Error::shape(
                    format!("frame {k} with {} pixels", rows * cols),
                    frame.len(),
                ));
            }
            values.extend_from_slice(frame);
        }
        Self::with_peak(shape, values, peak)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn peak(&self) -> f64 {
        self.peak
    }

    pub fn set_peak(&mut self, peak: f64) {
        assert!(peak.is_finite() && peak > 0.0, "peak must be positive");
        self.peak = peak;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Frame-major concatenation `[x₁ᵀ, …, x_Bᵀ]ᵀ`.
    pub fn vectorize(&self) -> Vec<f64> {
        self.values.clone()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, frame: usize, row: usize, col: usize) -> f64 {
        self.values[self.shape.index(frame, row, col)]
    }

    /// Row-major pixels of one frame.
    pub fn frame(&self, k: usize) -> &[f64] {
        let n = self.shape.pixels();
        &self.values[k * n..(k + 1) * n]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.shape.pixels())
    }

    pub fn check_same_shape(&self, other: &FrameCube) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::shape(self.shape, other.shape));
        }
        Ok(())
    }
}

/// Per-frame modulation codes `C_k`, one real code per voxel.
///
/// Every pixel must be active in at least one frame so that the diagonal of
/// `ΦΦᵀ` is strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskCube {
    shape: Shape,
    values: Vec<f64>,
}

impl MaskCube {
    pub fn new(shape: Shape, values: Vec<f64>) -> Result<Self> {
        shape.validate()?;
        if values.len() != shape.len() {
            return Err(Error::shape(
                format!("{} mask values for {shape}", shape.len()),
                values.len(),
            ));
        }
        if let Some(pos) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            let (k, i, j) = shape.coords(pos);
            return Err(Error::InvalidMask(format!(
                "code {} at frame {k}, pixel ({i}, {j}) is negative or non-finite",
                values[pos]
            )));
        }
        let n = shape.pixels();
        for p in 0..n {
            if (0..shape.frames).all(|k| values[k * n + p] == 0.0) {
                return Err(Error::InvalidMask(format!(
                    "pixel ({}, {}) is inactive in every frame",
                    p / shape.cols,
                    p % shape.cols
                )));
            }
        }
        Ok(Self { shape, values })
    }

    pub fn ones(shape: Shape) -> Result<Self> {
        Self::new(shape, vec![1.0; shape.len()])
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn frame(&self, k: usize) -> &[f64] {
        let n = self.shape.pixels();
        &self.values[k * n..(k + 1) * n]
    }

    pub fn get(&self, frame: usize, row: usize, col: usize) -> f64 {
        self.values[self.shape.index(frame, row, col)]
    }

    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// Views the codes as a cube, e.g. for saving or display.
    pub fn to_cube(&self) -> FrameCube {
        FrameCube::with_peak(self.shape, self.values.clone(), 1.0).expect("mask codes are finite")
    }

    pub fn from_cube(cube: &FrameCube) -> Result<Self> {
        Self::new(cube.shape(), cube.values().to_vec())
    }
}

/// The coded 2-D snapshot `Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    noise_sigma_hint: Option<f64>,
}

impl Measurement {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidCube(format!("degenerate measurement {rows}x{cols}")));
        }
        if values.len() != rows * cols {
            return Err(Error::shape(
                format!("{} measurement values", rows * cols),
                values.len(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidCube("non-finite measurement value".into()));
        }
        Ok(Self {
            rows,
            cols,
            values,
            noise_sigma_hint: None,
        })
    }

    pub fn with_noise_hint(mut self, sigma: Option<f64>) -> Self {
        self.noise_sigma_hint = sigma;
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn noise_sigma_hint(&self) -> Option<f64> {
        self.noise_sigma_hint
    }

    /// Single-frame cube view of the snapshot.
    pub fn to_cube(&self, peak: f64) -> FrameCube {
        FrameCube::with_peak(Shape::new(self.rows, self.cols, 1), self.values.clone(), peak)
            .expect("measurement values are finite")
    }

    pub fn from_cube(cube: &FrameCube) -> Result<Self> {
        let shape = cube.shape();
        if shape.frames != 1 {
            return Err(Error::shape("a single-frame cube", shape));
        }
        Self::new(shape.rows, shape.cols, cube.values().to_vec())
    }
}
