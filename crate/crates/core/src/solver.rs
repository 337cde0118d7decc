//! DeSCI orchestration.
//!
//! One loop serves every algorithm: a data-fidelity step (ADMM θ-update,
//! GAP projection or accelerated GAP) followed by a pluggable [`Denoiser`].
//! In GAP modes the denoiser acts on the projected point; in ADMM it acts on
//! `q = θ − b` and the dual `b` is updated afterwards. Swapping the roles of
//! `x` and `θ` makes the two share the same code path, and GAP is the
//! `γ = 0, b ≡ 0` case of ADMM.

use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::cube::{FrameCube, Measurement, Shape, DEFAULT_PEAK};
use crate::error::{Error, Result};
use crate::metrics;
use crate::patching::{aggregate_flat, extract_group, match_all, reference_grid, PatchConfig, PatchCoord};
use crate::projection::{admm_dual_update, admm_theta_update, gap_accelerated_step, gap_project, min_norm_estimate, residual_max, residual_norm};
use crate::sensing::SensingOperator;
use crate::wnnm::{denoise_group, WnnmParams, DEFAULT_C, DEFAULT_EPS};

/// `γ` per measurement-SNR bucket (dB).
pub const GAMMA_TABLE: [(f64, f64); 5] = [(40.0, 0.24), (30.0, 1.2), (20.0, 6.0), (10.0, 30.0), (0.0, 150.0)];

/// Measurement SNR above which accelerated GAP is chosen automatically.
pub const GAP_ACC_SNR_DB: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Admm,
    Gap,
    GapAcc,
}

impl Mode {
    /// Mode and `γ` for a declared measurement SNR; `None` means noiseless.
    pub fn for_snr(snr_db: Option<f64>) -> (Mode, f64) {
        match snr_db {
            Some(s) if s.is_finite() && s <= GAP_ACC_SNR_DB => (Mode::Admm, gamma_for_snr(Some(s))),
            _ => (Mode::GapAcc, 0.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Admm => "admm",
            Mode::Gap => "gap",
            Mode::GapAcc => "gap-acc",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "admm" => Ok(Mode::Admm),
            "gap" => Ok(Mode::Gap),
            "gap-acc" | "gap_acc" | "gapacc" => Ok(Mode::GapAcc),
            other => Err(Error::InvalidParameter(format!("unknown mode {other:?}"))),
        }
    }
}

/// Nearest-bucket `γ` lookup. Noiseless (or infinite SNR) gives 0.
pub fn gamma_for_snr(snr_db: Option<f64>) -> f64 {
    match snr_db {
        Some(s) if s.is_finite() => {
            GAMMA_TABLE
                .iter()
                .min_by(|a, b| (a.0 - s).abs().total_cmp(&(b.0 - s).abs()))
                .expect("table is non-empty")
                .1
        }
        _ => 0.0,
    }
}

/// Patch side and group size for a noise level.
pub fn params_for_sigma(sigma_n: f64) -> (usize, usize) {
    if sigma_n <= 20.0 {
        (6, 70)
    } else if sigma_n <= 40.0 {
        (7, 90)
    } else if sigma_n <= 60.0 {
        (8, 120)
    } else {
        (9, 140)
    }
}

/// Stage-wise noise levels for the shrinkage, each held for `stage_len` iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaSchedule {
    pub levels: Vec<f64>,
    pub stage_len: usize,
}

impl SigmaSchedule {
    pub fn new(levels: Vec<f64>, stage_len: usize) -> Result<Self> {
        let s = Self { levels, stage_len };
        s.validate()?;
        Ok(s)
    }

    /// `initial`, halved `halvings` times.
    pub fn halving(initial: f64, halvings: usize, stage_len: usize) -> Result<Self> {
        if !(initial > 0.0 && initial.is_finite()) {
            return Err(Error::InvalidParameter(format!("initial sigma must be positive, got {initial}")));
        }
        let levels = (0..=halvings).map(|h| initial / 2f64.powi(h as i32)).collect();
        Self::new(levels, stage_len)
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() || self.stage_len == 0 {
            return Err(Error::InvalidParameter("sigma schedule needs at least one non-empty stage".into()));
        }
        if self.levels.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::InvalidParameter(format!("sigma levels must be non-negative: {:?}", self.levels)));
        }
        if self.levels.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidParameter(format!(
                "sigma schedule must be strictly descending: {:?}",
                self.levels
            )));
        }
        Ok(())
    }

    pub fn total_iterations(&self) -> usize {
        self.levels.len() * self.stage_len
    }
}

/// `[100, 50, 25, 12.5]`-style schedule.
pub fn sigma_schedule_default(initial: f64, halvings: usize, stage_len: usize) -> Result<SigmaSchedule> {
    SigmaSchedule::halving(initial, halvings, stage_len)
}

impl Default for SigmaSchedule {
    fn default() -> Self {
        Self::halving(100.0, 3, 60).expect("default schedule is valid")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub mode: Mode,
    /// ADMM coupling; must be 0 in GAP modes and positive in ADMM.
    pub gamma: f64,
    pub c: f64,
    pub eps: f64,
    pub schedule: SigmaSchedule,
    /// A stage ends early once the relative change drops below `tol`.
    pub tol: f64,
    pub rematch_every: usize,
    /// Reference stride; `None` uses `patch_side − 1`.
    pub stride: Option<usize>,
    pub search_side: usize,
    pub search_depth: usize,
    /// Holds `b` at zero in ADMM mode.
    pub freeze_dual: bool,
    /// Peak used for the output cube and telemetry metrics.
    pub peak: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            mode: Mode::GapAcc,
            gamma: 0.0,
            c: DEFAULT_C,
            eps: DEFAULT_EPS,
            schedule: SigmaSchedule::default(),
            tol: 1e-4,
            rematch_every: 20,
            stride: None,
            search_side: 30,
            search_depth: 8,
            freeze_dual: false,
            peak: DEFAULT_PEAK,
        }
    }
}

impl SolverConfig {
    /// Defaults with mode and `γ` picked from the measurement SNR.
    pub fn for_snr(snr_db: Option<f64>) -> Self {
        let (mode, gamma) = Mode::for_snr(snr_db);
        Self {
            mode,
            gamma,
            ..Self::default()
        }
    }

    /// Requested mode with `γ` from the SNR table. ADMM at `γ = 0` is plain GAP.
    pub fn with_mode_for_snr(mode: Mode, snr_db: Option<f64>) -> Self {
        let gamma = match mode {
            Mode::Admm => gamma_for_snr(snr_db),
            _ => 0.0,
        };
        let mode = if mode == Mode::Admm && gamma == 0.0 { Mode::Gap } else { mode };
        Self {
            mode,
            gamma,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        match self.mode {
            Mode::Admm if !(self.gamma > 0.0 && self.gamma.is_finite()) => {
                return Err(Error::InvalidParameter(format!("ADMM needs gamma > 0, got {}", self.gamma)));
            }
            Mode::Gap | Mode::GapAcc if self.gamma != 0.0 => {
                return Err(Error::InvalidParameter(format!(
                    "{} mode needs gamma = 0, got {}",
                    self.mode.name(),
                    self.gamma
                )));
            }
            _ => {}
        }
        if !(self.c >= 0.0 && self.c.is_finite()) || !(self.eps > 0.0) {
            return Err(Error::InvalidParameter(format!("c = {}, eps = {}", self.c, self.eps)));
        }
        if self.rematch_every == 0 || self.search_side == 0 || self.search_depth == 0 || self.stride == Some(0) {
            return Err(Error::InvalidParameter("rematch_every, search window and stride must be positive".into()));
        }
        if !(self.tol >= 0.0) || !(self.peak > 0.0) {
            return Err(Error::InvalidParameter(format!("tol = {}, peak = {}", self.tol, self.peak)));
        }
        Ok(())
    }

    pub fn loop_settings(&self) -> LoopSettings {
        LoopSettings {
            mode: self.mode,
            gamma: self.gamma,
            freeze_dual: self.freeze_dual,
            stages: self.schedule.levels.iter().map(|&s| (s, self.schedule.stage_len)).collect(),
            tol: self.tol,
            peak: self.peak,
        }
    }

    /// Patch parameters in force at noise level `sigma_n`, for a cube of `shape`.
    /// The group size is capped at the search-window capacity.
    pub fn patch_config(&self, sigma_n: f64, shape: Shape) -> PatchConfig {
        let (side, group) = params_for_sigma(sigma_n);
        let side = side.min(shape.rows).min(shape.cols);
        let mut cfg = PatchConfig {
            patch_side: side,
            stride: self.stride.unwrap_or(side.saturating_sub(1).max(1)),
            search_side: self.search_side,
            search_depth: self.search_depth.min(shape.frames),
            group_size: group,
            rematch_every: self.rematch_every,
        };
        cfg.group_size = group.min(cfg.window_capacity(shape)).max(1);
        cfg
    }
}

/// Settings shared by every algorithm running on the split loop.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopSettings {
    pub mode: Mode,
    pub gamma: f64,
    pub freeze_dual: bool,
    /// `(sigma_n, iterations)` per stage.
    pub stages: Vec<(f64, usize)>,
    pub tol: f64,
    pub peak: f64,
}

/// Per-iteration telemetry. Iteration 0 describes the initialization `x = Φᵀ(y ⊘ ψ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterReport {
    pub iteration: usize,
    pub stage: usize,
    pub sigma: f64,
    /// `‖y − Φx‖₂` of the current estimate.
    pub residual: f64,
    /// `‖y − Φθ‖∞` of the data-step output.
    pub projection_residual: f64,
    pub rel_change: f64,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
}

/// The regularization half of the split.
pub trait Denoiser {
    /// Denoises the flat cube `v` at noise level `sigma_n`. `iteration` counts
    /// from 1 and lets implementations cache work between calls.
    fn denoise(&mut self, v: &[f64], shape: Shape, sigma_n: f64, iteration: usize) -> Result<Vec<f64>>;
}

/// Returns its input.
#[derive(Debug, Default, Clone, Copy)]
pub struct IdentityDenoiser;

impl Denoiser for IdentityDenoiser {
    fn denoise(&mut self, v: &[f64], _: Shape, _: f64, _: usize) -> Result<Vec<f64>> {
        Ok(v.to_vec())
    }
}

/// Nonlocal WNNM denoiser: block matching on a refresh cadence, then
/// independent group shrinkage and overlap averaging.
#[derive(Debug, Clone)]
pub struct WnnmDenoiser {
    config: SolverConfig,
    cached: Option<MatchCache>,
    rematches: usize,
}

#[derive(Debug, Clone)]
struct MatchCache {
    patch: PatchConfig,
    matched_at: usize,
    groups: Vec<Vec<PatchCoord>>,
}

impl WnnmDenoiser {
    pub fn new(config: SolverConfig) -> Self {
        Self {
            config,
            cached: None,
            rematches: 0,
        }
    }

    /// Number of block-matching passes so far.
    pub fn rematches(&self) -> usize {
        self.rematches
    }

    /// Group coordinates currently in use.
    pub fn groups(&self) -> Option<&[Vec<PatchCoord>]> {
        self.cached.as_ref().map(|c| c.groups.as_slice())
    }
}

impl Denoiser for WnnmDenoiser {
    fn denoise(&mut self, v: &[f64], shape: Shape, sigma_n: f64, iteration: usize) -> Result<Vec<f64>> {
        let patch = self.config.patch_config(sigma_n, shape);
        let stale = match &self.cached {
            None => true,
            Some(c) => c.patch != patch || iteration >= c.matched_at + patch.rematch_every,
        };
        if stale {
            let refs = reference_grid(shape, &patch)?;
            let groups = match_all(v, shape, &refs, &patch)?;
            self.cached = Some(MatchCache {
                patch,
                matched_at: iteration,
                groups,
            });
            self.rematches += 1;
        }
        let cache = self.cached.as_ref().expect("cache filled above");
        let params = WnnmParams {
            c: self.config.c,
            eps: self.config.eps,
            sigma_n,
        };
        params.validate()?;
        let estimates: Vec<_> = cache
            .groups
            .par_iter()
            .map(|coords| {
                let r = extract_group(v, shape, coords, patch.patch_side);
                denoise_group(&r, &params)
            })
            .collect::<Result<_>>()?;
        let parts: Vec<_> = cache.groups.iter().map(Vec::as_slice).zip(estimates.iter()).collect();
        aggregate_flat(&parts, shape)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

fn quality(x: &[f64], truth: Option<&FrameCube>, peak: f64) -> Result<(Option<f64>, Option<f64>)> {
    match truth {
        None => Ok((None, None)),
        Some(t) => {
            let est = FrameCube::with_peak(t.shape(), x.to_vec(), peak)?;
            Ok((
                Some(metrics::psnr(&est, t, peak)?.mean),
                Some(metrics::ssim(&est, t, peak)?.mean),
            ))
        }
    }
}

/// Runs the split loop with an arbitrary denoiser. `truth`, when given,
/// adds PSNR/SSIM to every report.
pub fn run_split_loop(
    op: &SensingOperator,
    y: &Measurement,
    settings: &LoopSettings,
    denoiser: &mut dyn Denoiser,
    truth: Option<&FrameCube>,
) -> Result<(FrameCube, Vec<IterReport>)> {
    op.check_measurement(y)?;
    if let Some(t) = truth {
        op.check_cube(t)?;
    }
    let shape = op.shape();
    let yv = y.values();
    let admm = settings.mode == Mode::Admm;
    let gamma = if admm { settings.gamma } else { 0.0 };

    let mut x = min_norm_estimate(op, yv);
    let mut b = vec![0.0; x.len()];
    let mut y_running = yv.to_vec();

    let (psnr, ssim) = quality(&x, truth, settings.peak)?;
    let mut reports = vec![IterReport {
        iteration: 0,
        stage: 0,
        sigma: settings.stages.first().map_or(0.0, |s| s.0),
        residual: residual_norm(op, &x, yv),
        projection_residual: residual_max(op, &x, yv),
        rel_change: f64::NAN,
        psnr,
        ssim,
    }];

    let mut iteration = 0;
    for (stage, &(sigma, iters)) in settings.stages.iter().enumerate() {
        for _ in 0..iters {
            iteration += 1;
            let theta = match settings.mode {
                Mode::Admm => admm_theta_update(&x, &b, gamma, op, yv)?,
                Mode::Gap => gap_project(&x, op, yv),
                Mode::GapAcc => {
                    let (theta, next) = gap_accelerated_step(&x, op, yv, &y_running);
                    y_running = next;
                    theta
                }
            };
            let projection_residual = residual_max(op, &theta, yv);
            let q: Vec<f64> = if admm {
                theta.iter().zip(&b).map(|(t, bi)| t - bi).collect()
            } else {
                theta.clone()
            };
            let next = denoiser.denoise(&q, shape, sigma, iteration)?;
            if next.len() != x.len() || next.iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged(iteration));
            }
            if admm && !settings.freeze_dual {
                b = admm_dual_update(&b, &theta, &next);
            }
            let rel_change = diff_norm(&next, &x) / norm(&x).max(f64::MIN_POSITIVE);
            x = next;

            let (psnr, ssim) = quality(&x, truth, settings.peak)?;
            reports.push(IterReport {
                iteration,
                stage,
                sigma,
                residual: residual_norm(op, &x, yv),
                projection_residual,
                rel_change,
                psnr,
                ssim,
            });
            if rel_change < settings.tol {
                break;
            }
        }
    }
    Ok((FrameCube::with_peak(shape, x, settings.peak)?, reports))
}

/// DeSCI reconstruction.
pub fn desci_run(op: &SensingOperator, y: &Measurement, cfg: &SolverConfig) -> Result<(FrameCube, Vec<IterReport>)> {
    desci_run_traced(op, y, cfg, None)
}

/// DeSCI reconstruction with per-iteration quality against `truth`.
pub fn desci_run_traced(
    op: &SensingOperator,
    y: &Measurement,
    cfg: &SolverConfig,
    truth: Option<&FrameCube>,
) -> Result<(FrameCube, Vec<IterReport>)> {
    cfg.validate()?;
    let mut denoiser = WnnmDenoiser::new(cfg.clone());
    run_split_loop(op, y, &cfg.loop_settings(), &mut denoiser, truth)
}

/// Writes `iteration,sigma,residual,rel_change[,psnr,ssim]` rows.
pub fn write_telemetry_csv<W: Write>(reports: &[IterReport], mut w: W) -> std::io::Result<()> {
    let with_quality = reports.iter().any(|r| r.psnr.is_some());
    if with_quality {
        writeln!(w, "iteration,sigma,residual,rel_change,psnr,ssim")?;
    } else {
        writeln!(w, "iteration,sigma,residual,rel_change")?;
    }
    for r in reports {
        write!(w, "{},{},{:e},{:e}", r.iteration, r.sigma, r.residual, r.rel_change)?;
        if with_quality {
            let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.6}"));
            write!(w, ",{},{}", opt(r.psnr), opt(r.ssim))?;
        }
        writeln!(w)?;
    }
    Ok(())
}
