//! GAP-TV baseline: the same split loop as DeSCI with a per-frame
//! anisotropic total-variation denoiser.

use rayon::prelude::*;

use crate::cube::{FrameCube, Measurement, Shape, DEFAULT_PEAK};
use crate::error::{Error, Result};
use crate::sensing::SensingOperator;
use crate::solver::{run_split_loop, Denoiser, IterReport, LoopSettings, Mode};

/// Anisotropic TV `Σ |u(i,j+1) − u(i,j)| + |u(i+1,j) − u(i,j)|` of one frame.
pub fn tv_norm(frame: &[f64], rows: usize, cols: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..rows {
        for j in 0..cols {
            let v = frame[i * cols + j];
            if j + 1 < cols {
                acc += (frame[i * cols + j + 1] - v).abs();
            }
            if i + 1 < rows {
                acc += (frame[(i + 1) * cols + j] - v).abs();
            }
        }
    }
    acc
}

/// `argmin_u ½‖u − f‖² + weight·TV(u)` for one frame, by projected gradient
/// on the dual (box-constrained) problem with a fixed iteration count.
pub fn tv_denoise_frame(f: &[f64], rows: usize, cols: usize, weight: f64, iters: usize) -> Vec<f64> {
    let n = rows * cols;
    debug_assert_eq!(f.len(), n);
    if weight <= 0.0 || iters == 0 {
        return f.to_vec();
    }
    // ‖D‖² ≤ 8 for the 2-D forward-difference operator
    let step = 1.0 / (8.0 * weight);
    let mut px = vec![0.0; n];
    let mut py = vec![0.0; n];
    let mut u = f.to_vec();
    for _ in 0..iters {
        for i in 0..rows {
            for j in 0..cols {
                let k = i * cols + j;
                if j + 1 < cols {
                    px[k] = (px[k] + step * (u[k + 1] - u[k])).clamp(-1.0, 1.0);
                }
                if i + 1 < rows {
                    py[k] = (py[k] + step * (u[k + cols] - u[k])).clamp(-1.0, 1.0);
                }
            }
        }
        // u = f − weight·Dᵀp, with Dᵀp = −div p
        for i in 0..rows {
            for j in 0..cols {
                let k = i * cols + j;
                let mut div = 0.0;
                if j + 1 < cols {
                    div += px[k];
                }
                if j > 0 {
                    div -= px[k - 1];
                }
                if i + 1 < rows {
                    div += py[k];
                }
                if i > 0 {
                    div -= py[k - cols];
                }
                u[k] = f[k] + weight * div;
            }
        }
    }
    u
}

/// Frame-by-frame TV denoising of a cube.
pub fn tv_denoise(cube: &FrameCube, weight: f64, iters: usize) -> Result<FrameCube> {
    if !(weight > 0.0 && weight.is_finite()) {
        return Err(Error::InvalidParameter(format!("tv weight must be positive, got {weight}")));
    }
    let shape = cube.shape();
    let values = tv_denoise_flat(cube.values(), shape, weight, iters);
    FrameCube::with_peak(shape, values, cube.peak())
}

fn tv_denoise_flat(v: &[f64], shape: Shape, weight: f64, iters: usize) -> Vec<f64> {
    v.par_chunks(shape.pixels())
        .flat_map_iter(|frame| tv_denoise_frame(frame, shape.rows, shape.cols, weight, iters))
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct TvDenoiser {
    pub weight: f64,
    pub iters: usize,
}

impl Denoiser for TvDenoiser {
    fn denoise(&mut self, v: &[f64], shape: Shape, _sigma_n: f64, _iteration: usize) -> Result<Vec<f64>> {
        Ok(tv_denoise_flat(v, shape, self.weight, self.iters))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapTvConfig {
    pub mode: Mode,
    pub gamma: f64,
    pub iterations: usize,
    pub tv_weight: f64,
    pub tv_iters: usize,
    pub tol: f64,
    pub peak: f64,
}

impl Default for GapTvConfig {
    fn default() -> Self {
        Self {
            mode: Mode::GapAcc,
            gamma: 0.0,
            iterations: 120,
            tv_weight: 12.0,
            tv_iters: 10,
            tol: 1e-5,
            peak: DEFAULT_PEAK,
        }
    }
}

impl GapTvConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tv_weight > 0.0 && self.tv_weight.is_finite()) || self.iterations == 0 || self.tv_iters == 0 {
            return Err(Error::InvalidParameter(format!("invalid GAP-TV config {self:?}")));
        }
        match self.mode {
            Mode::Admm if !(self.gamma > 0.0) => Err(Error::InvalidParameter("ADMM needs gamma > 0".into())),
            Mode::Gap | Mode::GapAcc if self.gamma != 0.0 => {
                Err(Error::InvalidParameter("GAP modes need gamma = 0".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn loop_settings(&self) -> LoopSettings {
        LoopSettings {
            mode: self.mode,
            gamma: self.gamma,
            freeze_dual: false,
            stages: vec![(0.0, self.iterations)],
            tol: self.tol,
            peak: self.peak,
        }
    }
}

pub fn gaptv_run(op: &SensingOperator, y: &Measurement, cfg: &GapTvConfig) -> Result<(FrameCube, Vec<IterReport>)> {
    gaptv_run_traced(op, y, cfg, None)
}

pub fn gaptv_run_traced(
    op: &SensingOperator,
    y: &Measurement,
    cfg: &GapTvConfig,
    truth: Option<&FrameCube>,
) -> Result<(FrameCube, Vec<IterReport>)> {
    cfg.validate()?;
    let mut den = TvDenoiser {
        weight: cfg.tv_weight,
        iters: cfg.tv_iters,
    };
    run_split_loop(op, y, &cfg.loop_settings(), &mut den, truth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn constant_cube_is_unchanged() {
        let cube = FrameCube::new(Shape::new(8, 9, 2), vec![42.0; 144]).unwrap();
        let out = tv_denoise(&cube, 5.0, 50).unwrap();
        for v in out.values() {
            assert!((v - 42.0).abs() < 1e-12);
        }
    }

    #[test]
    fn vanishing_weight_keeps_step_edge() {
        let shape = Shape::new(6, 6, 1);
        let cube = FrameCube::from_fn(shape, 255.0, |_, _, j| if j < 3 { 10.0 } else { 200.0 }).unwrap();
        let out = tv_denoise(&cube, 1e-12, 100).unwrap();
        for (a, b) in out.values().iter().zip(cube.values()) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!(tv_denoise(&cube, 0.0, 10).is_err());
    }

    #[test]
    fn noisy_piecewise_constant_frame_improves() {
        let (rows, cols) = (24, 24);
        let clean: Vec<f64> = (0..rows * cols)
            .map(|p| if (p / cols) < 12 && (p % cols) < 16 { 180.0 } else { 60.0 })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 20.0).unwrap();
        let noisy: Vec<f64> = clean.iter().map(|v| v + noise.sample(&mut rng)).collect();
        let out = tv_denoise_frame(&noisy, rows, cols, 20.0, 100);
        assert!(tv_norm(&out, rows, cols) < tv_norm(&noisy, rows, cols));
        let mse = |a: &[f64]| a.iter().zip(&clean).map(|(p, q)| (p - q).powi(2)).sum::<f64>() / clean.len() as f64;
        assert!(mse(&out) < mse(&noisy));
    }
}
