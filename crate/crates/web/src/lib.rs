//! Browser bindings for the snapshot compressive imaging demo.
//!
//! The page simulates a coded snapshot of a small moving scene, reconstructs
//! it with GAP-TV or DeSCI, and plots the WNNM shrinkage of a patch group's
//! singular values. Everything crossing the boundary is a plain number,
//! string or typed array.

use desci::metrics::{psnr, ssim};
use desci::scene::moving_squares;
use desci::sensing::{add_gaussian_noise, gen_shifting_binary_mask, noise_sigma_for_snr};
use desci::solver::{desci_run_traced, SigmaSchedule};
use desci::tv::gaptv_run_traced;
use desci::wnnm::{compute_weights, estimate_sigmas_from, DEFAULT_C, DEFAULT_EPS};
use desci::{FrameCube, GapTvConfig, Measurement, SensingOperator, SolverConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

fn msg(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Grayscale values in `[0, peak]` as RGBA bytes for `ImageData`.
fn to_rgba(values: &[f64], peak: f64) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 4);
    for v in values {
        let g = (v / peak * 255.0).round().clamp(0.0, 255.0) as u8;
        out.extend_from_slice(&[g, g, g, 255]);
    }
    out
}

#[wasm_bindgen]
pub struct Demo {
    truth: FrameCube,
    op: SensingOperator,
    y: Measurement,
    snr_db: Option<f64>,
    recon: Option<FrameCube>,
}

#[wasm_bindgen]
impl Demo {
    /// Simulates a moving-squares clip and its coded snapshot. A non-finite
    /// `snr_db` means a noiseless measurement.
    #[wasm_bindgen(constructor)]
    pub fn new(size: usize, frames: usize, density: f64, seed: u64, snr_db: f64) -> Result<Demo, JsError> {
        Self::simulate(size, frames, density, seed, snr_db).map_err(|e| JsError::new(&e))
    }

    /// Runs `"gap-tv"` or `"desci"` and returns `[psnr, ssim, iterations]`.
    /// `stage_iterations` shortens each DeSCI noise stage.
    pub fn reconstruct(&mut self, algorithm: &str, stage_iterations: usize) -> Result<Vec<f64>, JsError> {
        self.run(algorithm, stage_iterations).map_err(|e| JsError::new(&e))
    }

    pub fn size(&self) -> usize {
        self.truth.shape().rows
    }

    pub fn frames(&self) -> usize {
        self.truth.shape().frames
    }

    pub fn truth_rgba(&self, frame: usize) -> Vec<u8> {
        to_rgba(self.truth.frame(frame.min(self.frames() - 1)), self.truth.peak())
    }

    pub fn mask_rgba(&self, frame: usize) -> Vec<u8> {
        to_rgba(self.op.masks().frame(frame.min(self.frames() - 1)), 1.0)
    }

    /// The snapshot, scaled by its own maximum.
    pub fn measurement_rgba(&self) -> Vec<u8> {
        let peak = self.y.values().iter().fold(f64::MIN_POSITIVE, |m, v| m.max(*v));
        to_rgba(self.y.values(), peak)
    }

    /// Empty until a reconstruction has run.
    pub fn recon_rgba(&self, frame: usize) -> Vec<u8> {
        match &self.recon {
            Some(r) => to_rgba(r.frame(frame.min(self.frames() - 1)), r.peak()),
            None => Vec::new(),
        }
    }

    /// Per-frame PSNR of the last reconstruction.
    pub fn frame_psnr(&self) -> Vec<f64> {
        match &self.recon {
            Some(r) => psnr(r, &self.truth, self.truth.peak()).map(|s| s.per_frame).unwrap_or_default(),
            None => Vec::new(),
        }
    }
}

impl Demo {
    pub fn simulate(size: usize, frames: usize, density: f64, seed: u64, snr_db: f64) -> Result<Demo, String> {
        let truth = moving_squares(size, size, frames).map_err(msg)?;
        let masks = gen_shifting_binary_mask(size, size, frames, density, seed, (1, 0)).map_err(msg)?;
        let op = SensingOperator::new(masks).map_err(msg)?;
        let clean = op.forward(&truth).map_err(msg)?;
        let snr_db = snr_db.is_finite().then_some(snr_db);
        let y = match snr_db {
            Some(s) => {
                let sigma = noise_sigma_for_snr(clean.values(), s);
                add_gaussian_noise(&clean, sigma, &mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed)).map_err(msg)?
            }
            None => clean,
        };
        Ok(Demo {
            truth,
            op,
            y,
            snr_db,
            recon: None,
        })
    }

    pub fn run(&mut self, algorithm: &str, stage_iterations: usize) -> Result<Vec<f64>, String> {
        let (recon, reports) = match algorithm {
            "gap-tv" => {
                let base = SolverConfig::for_snr(self.snr_db);
                let cfg = GapTvConfig {
                    mode: base.mode,
                    gamma: base.gamma,
                    ..GapTvConfig::default()
                };
                gaptv_run_traced(&self.op, &self.y, &cfg, None).map_err(msg)?
            }
            "desci" => {
                let mut cfg = SolverConfig::for_snr(self.snr_db);
                cfg.schedule = SigmaSchedule::halving(100.0, 3, stage_iterations.max(1)).map_err(msg)?;
                desci_run_traced(&self.op, &self.y, &cfg, None).map_err(msg)?
            }
            other => return Err(format!("unknown algorithm {other:?}")),
        };
        let p = psnr(&recon, &self.truth, self.truth.peak()).map_err(msg)?.mean;
        let s = ssim(&recon, &self.truth, self.truth.peak()).map_err(msg)?.mean;
        let iterations = reports.last().map_or(0, |r| r.iteration) as f64;
        self.recon = Some(recon);
        Ok(vec![p, s, iterations])
    }
}

/// `max(σ_j − σ_n² w_j, 0)` with `w_j = c√M / (σ̂_j + ε)`.
#[wasm_bindgen]
pub fn shrink_singular_values(singular: &[f64], m: usize, c: f64, sigma_n: f64) -> Vec<f64> {
    let c = if c.is_finite() && c >= 0.0 { c } else { DEFAULT_C };
    let hat = estimate_sigmas_from(singular, m.max(1), sigma_n);
    compute_weights(&hat, m.max(1), c, DEFAULT_EPS)
        .iter()
        .zip(singular)
        .map(|(w, s)| (s - sigma_n * sigma_n * w).max(0.0))
        .collect()
}
