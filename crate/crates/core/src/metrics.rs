//! Reconstruction quality: PSNR, SSIM and spectral correlation.

use crate::cube::FrameCube;
use crate::error::{Error, Result};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// Per-frame scores and their mean.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameScores {
    pub per_frame: Vec<f64>,
    pub mean: f64,
}

impl FrameScores {
    fn from_frames(per_frame: Vec<f64>) -> Self {
        let mean = per_frame.iter().sum::<f64>() / per_frame.len() as f64;
        Self { per_frame, mean }
    }
}

/// `10·log10(peak² / MSE)` per frame. Identical frames score `+∞`.
pub fn psnr(a: &FrameCube, b: &FrameCube, peak: f64) -> Result<FrameScores> {
    a.check_same_shape(b)?;
    let per_frame = a
        .frames()
        .zip(b.frames())
        .map(|(fa, fb)| {
            let mse = fa.iter().zip(fb).map(|(p, q)| (p - q) * (p - q)).sum::<f64>() / fa.len() as f64;
            if mse == 0.0 {
                f64::INFINITY
            } else {
                10.0 * (peak * peak / mse).log10()
            }
        })
        .collect();
    Ok(FrameScores::from_frames(per_frame))
}

/// Normalized 1-D Gaussian taps, truncated to `len`.
fn gaussian_taps(len: usize, sigma: f64) -> Vec<f64> {
    let center = (len as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..len)
        .map(|i| (-((i as f64 - center).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Separable "valid" filtering of a row-major image.
fn filter_valid(img: &[f64], rows: usize, cols: usize, wr: &[f64], wc: &[f64]) -> (Vec<f64>, usize, usize) {
    let (or, oc) = (rows - wr.len() + 1, cols - wc.len() + 1);
    let mut tmp = vec![0.0; rows * oc];
    for i in 0..rows {
        for j in 0..oc {
            tmp[i * oc + j] = wc.iter().enumerate().map(|(t, w)| w * img[i * cols + j + t]).sum();
        }
    }
    let mut out = vec![0.0; or * oc];
    for i in 0..or {
        for j in 0..oc {
            out[i * oc + j] = wr.iter().enumerate().map(|(t, w)| w * tmp[(i + t) * oc + j]).sum();
        }
    }
    (out, or, oc)
}

/// Mean SSIM of one frame pair: 11×11 Gaussian window (σ = 1.5, shrunk to
/// the frame for smaller frames), `K1 = 0.01`, `K2 = 0.03`, valid region only.
pub fn ssim_frame(a: &[f64], b: &[f64], rows: usize, cols: usize, peak: f64) -> f64 {
    let wr = gaussian_taps(SSIM_WINDOW.min(rows), SSIM_SIGMA);
    let wc = gaussian_taps(SSIM_WINDOW.min(cols), SSIM_SIGMA);
    let c1 = (SSIM_K1 * peak).powi(2);
    let c2 = (SSIM_K2 * peak).powi(2);
    let prod = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).collect::<Vec<_>>();

    let (mu_a, _, _) = filter_valid(a, rows, cols, &wr, &wc);
    let (mu_b, _, _) = filter_valid(b, rows, cols, &wr, &wc);
    let (aa, _, _) = filter_valid(&prod(a, a), rows, cols, &wr, &wc);
    let (bb, _, _) = filter_valid(&prod(b, b), rows, cols, &wr, &wc);
    let (ab, _, _) = filter_valid(&prod(a, b), rows, cols, &wr, &wc);

    let total: f64 = (0..mu_a.len())
        .map(|k| {
            let (ma, mb) = (mu_a[k], mu_b[k]);
            let va = aa[k] - ma * ma;
            let vb = bb[k] - mb * mb;
            let cov = ab[k] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .sum();
    total / mu_a.len() as f64
}

pub fn ssim(a: &FrameCube, b: &FrameCube, peak: f64) -> Result<FrameScores> {
    a.check_same_shape(b)?;
    let shape = a.shape();
    let per_frame = a
        .frames()
        .zip(b.frames())
        .map(|(fa, fb)| {
            if fa == fb {
                1.0
            } else {
                ssim_frame(fa, fb, shape.rows, shape.cols, peak)
            }
        })
        .collect();
    Ok(FrameScores::from_frames(per_frame))
}

/// Rectangular pixel region `[row, row + rows) × [col, col + cols)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region {
    pub row: usize,
    pub col: usize,
    pub rows: usize,
    pub cols: usize,
}

/// Mean value of each frame (band) over `region`.
pub fn mean_spectrum(cube: &FrameCube, region: Region) -> Result<Vec<f64>> {
    let shape = cube.shape();
    if region.rows == 0 || region.cols == 0 || region.row + region.rows > shape.rows || region.col + region.cols > shape.cols {
        return Err(Error::InvalidParameter(format!("region {region:?} outside {shape}")));
    }
    let count = (region.rows * region.cols) as f64;
    Ok((0..shape.frames)
        .map(|k| {
            let mut acc = 0.0;
            for i in region.row..region.row + region.rows {
                for j in region.col..region.col + region.cols {
                    acc += cube.get(k, i, j);
                }
            }
            acc / count
        })
        .collect())
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(cov / (va * vb).sqrt())
}

/// Pearson correlation between the mean spectra of `region` in both cubes.
pub fn spectral_correlation(recon: &FrameCube, truth: &FrameCube, region: Region) -> Result<f64> {
    recon.check_same_shape(truth)?;
    pearson(&mean_spectrum(recon, region)?, &mean_spectrum(truth, region)?)
}
