use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use desci::solver::SigmaSchedule;
use desci::{GapTvConfig, Mode, SolverConfig};
use serde::Deserialize;

/// Bad or inconsistent configuration. Maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub scene: SceneSection,
    #[serde(default)]
    pub sensing: SensingSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub gaptv: GapTvSection,
    #[serde(default)]
    pub input: InputSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSection {
    /// `moving-squares`, `spectral-quadrants`, or `file`.
    pub kind: String,
    pub rows: usize,
    pub cols: usize,
    pub frames: usize,
    /// Source cube when `kind = "file"` (SCICUBE, PNG/PGM file or directory).
    pub path: Option<PathBuf>,
}

impl Default for SceneSection {
    fn default() -> Self {
        Self {
            kind: "moving-squares".into(),
            rows: 32,
            cols: 32,
            frames: 8,
            path: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensingSection {
    /// `shifting` (video) or `spectral` (dispersion along one axis).
    pub kind: String,
    pub density: f64,
    /// Per-frame shift in (rows, cols).
    pub shift: [isize; 2],
    pub seed: u64,
    /// Measurement SNR in dB; absent means noiseless.
    pub snr_db: Option<f64>,
}

impl Default for SensingSection {
    fn default() -> Self {
        Self {
            kind: "shifting".into(),
            density: 0.5,
            shift: [1, 0],
            seed: 1,
            snr_db: None,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub mode: Option<String>,
    pub gamma: Option<f64>,
    pub c: Option<f64>,
    pub eps: Option<f64>,
    pub sigma_schedule: Option<Vec<f64>>,
    pub stage_iterations: Option<usize>,
    pub tol: Option<f64>,
    pub rematch_every: Option<usize>,
    pub stride: Option<usize>,
    pub search_side: Option<usize>,
    pub search_depth: Option<usize>,
    pub freeze_dual: Option<bool>,
    pub peak: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GapTvSection {
    pub iterations: Option<usize>,
    pub tv_weight: Option<f64>,
    pub tv_iters: Option<usize>,
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InputSection {
    /// A manifest written by `simulate`; explicit paths below override it.
    pub manifest: Option<PathBuf>,
    pub measurement: Option<PathBuf>,
    pub mask: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub snr_db: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("run") }
    }
}

impl Config {
    /// Reads a TOML config. Relative paths inside are resolved against the
    /// config file's directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: Config = toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.output.dir);
        for p in [
            &mut cfg.scene.path,
            &mut cfg.input.manifest,
            &mut cfg.input.measurement,
            &mut cfg.input.mask,
            &mut cfg.input.truth,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        Ok(cfg)
    }

    /// DeSCI settings: mode and `γ` follow the SNR unless given explicitly.
    pub fn solver_config(&self, mode_flag: Option<Mode>, snr_db: Option<f64>) -> anyhow::Result<SolverConfig> {
        let s = &self.solver;
        let mode = match (mode_flag, &s.mode) {
            (Some(m), _) => Some(m),
            (None, Some(name)) => Some(name.parse::<Mode>().map_err(|e| config_err(e.to_string()))?),
            (None, None) => None,
        };
        let mut cfg = match mode {
            Some(m) => SolverConfig::with_mode_for_snr(m, snr_db),
            None => SolverConfig::for_snr(snr_db),
        };
        if let Some(g) = s.gamma {
            cfg.gamma = g;
        }
        if let Some(v) = s.c {
            cfg.c = v;
        }
        if let Some(v) = s.eps {
            cfg.eps = v;
        }
        if s.sigma_schedule.is_some() || s.stage_iterations.is_some() {
            let levels = s.sigma_schedule.clone().unwrap_or_else(|| cfg.schedule.levels.clone());
            let len = s.stage_iterations.unwrap_or(cfg.schedule.stage_len);
            cfg.schedule = SigmaSchedule::new(levels, len).map_err(|e| config_err(e.to_string()))?;
        }
        if let Some(v) = s.tol {
            cfg.tol = v;
        }
        if let Some(v) = s.rematch_every {
            cfg.rematch_every = v;
        }
        cfg.stride = s.stride.or(cfg.stride);
        if let Some(v) = s.search_side {
            cfg.search_side = v;
        }
        if let Some(v) = s.search_depth {
            cfg.search_depth = v;
        }
        if let Some(v) = s.freeze_dual {
            cfg.freeze_dual = v;
        }
        if let Some(v) = s.peak {
            cfg.peak = v;
        }
        cfg.validate().map_err(|e| config_err(e.to_string()))?;
        Ok(cfg)
    }

    /// GAP-TV settings. Noisy measurements at or below 30 dB use ADMM with
    /// the tabulated `γ`, as for DeSCI.
    pub fn gaptv_config(&self, mode_flag: Option<Mode>, snr_db: Option<f64>) -> anyhow::Result<GapTvConfig> {
        let base = self.solver_config(mode_flag, snr_db)?;
        let g = &self.gaptv;
        let d = GapTvConfig::default();
        let cfg = GapTvConfig {
            mode: base.mode,
            gamma: base.gamma,
            iterations: g.iterations.unwrap_or(d.iterations),
            tv_weight: g.tv_weight.unwrap_or(d.tv_weight),
            tv_iters: g.tv_iters.unwrap_or(d.tv_iters),
            tol: g.tol.unwrap_or(d.tol),
            peak: base.peak,
        };
        cfg.validate().map_err(|e| config_err(e.to_string()))?;
        Ok(cfg)
    }
}

/// `key = value` lines written next to simulated data.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub entries: BTreeMap<String, String>,
}

impl Manifest {
    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn render(&self) -> String {
        let mut out = String::from("# desci simulation manifest\n");
        for (k, v) in &self.entries {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let mut m = Manifest::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("manifest line {}: expected key = value", n + 1)))?;
            m.set(k.trim(), v.trim());
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read manifest {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// `snr_db`, where `none` means noiseless.
    pub fn snr_db(&self) -> anyhow::Result<Option<f64>> {
        match self.get("snr_db") {
            None | Some("none") => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| config_err(format!("manifest snr_db {v:?} is not a number"))),
        }
    }
}
