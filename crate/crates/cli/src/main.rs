mod config;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use desci::io::{load_cube, load_scicube, save_cube, save_scicube, CubeFormat, Dtype};
use desci::metrics::{psnr, ssim};
use desci::scene::{moving_squares, spectral_quadrants};
use desci::sensing::{
    add_gaussian_noise, gen_shifting_binary_mask, gen_spectral_shift_masks, measurement_snr_db, noise_sigma_for_snr,
};
use desci::solver::{desci_run_traced, write_telemetry_csv};
use desci::tv::gaptv_run_traced;
use desci::{Error, FrameCube, MaskCube, Measurement, Mode, SensingOperator};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{config_err, Config, ConfigError, Manifest};

#[derive(Parser)]
#[command(name = "desci", version, about = "Snapshot compressive imaging: simulate, reconstruct, score")]
struct Cli {
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate masks and a coded measurement from a scene.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `sensing.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the ground-truth frames as PNGs into this directory.
        #[arg(long)]
        dump_frames: Option<PathBuf>,
    },
    /// Reconstruct a cube from a measurement and its masks.
    Reconstruct {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = Algorithm::Desci)]
        algorithm: Algorithm,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Write the reconstructed frames as PNGs into this directory.
        #[arg(long)]
        dump_frames: Option<PathBuf>,
    },
    /// Per-frame PSNR/SSIM of a reconstruction against ground truth.
    Score {
        recon: PathBuf,
        truth: PathBuf,
        /// Metrics CSV path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Peak value; defaults to the truth cube's peak.
        #[arg(long)]
        peak: Option<f64>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Algorithm {
    Desci,
    GapTv,
}

impl Algorithm {
    fn name(self) -> &'static str {
        match self {
            Algorithm::Desci => "desci",
            Algorithm::GapTv => "gap-tv",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Admm,
    Gap,
    GapAcc,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Admm => Mode::Admm,
            ModeArg::Gap => Mode::Gap,
            ModeArg::GapAcc => Mode::GapAcc,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Simulate {
            config,
            seed,
            dump_frames,
        } => simulate(&config, seed, dump_frames.as_deref()),
        Command::Reconstruct {
            config,
            algorithm,
            mode,
            dump_frames,
        } => reconstruct(&config, algorithm, mode.map(Mode::from), dump_frames.as_deref()),
        Command::Score { recon, truth, out, peak } => score(&recon, &truth, out.as_deref(), peak),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::Diverged(_) | Error::Svd | Error::ZeroVariance) => 3,
        Some(Error::Io(_) | Error::Image(_)) | None => 1,
        Some(_) => 2,
    }
}

fn scene_cube(cfg: &Config) -> anyhow::Result<FrameCube> {
    let s = &cfg.scene;
    let cube = match s.kind.as_str() {
        "moving-squares" => moving_squares(s.rows, s.cols, s.frames)?,
        "spectral-quadrants" => spectral_quadrants(s.rows, s.cols, s.frames)?.0,
        "file" => {
            let path = s.path.as_ref().ok_or_else(|| config_err("scene.kind = \"file\" needs scene.path"))?;
            load_cube(path, CubeFormat::from_path(path))?
        }
        other => return Err(config_err(format!("unknown scene kind {other:?}"))),
    };
    Ok(cube)
}

fn simulate(config: &Path, seed: Option<u64>, dump: Option<&Path>) -> anyhow::Result<()> {
    let cfg = Config::load(config)?;
    let truth = scene_cube(&cfg)?;
    let shape = truth.shape();
    let sens = &cfg.sensing;
    let seed = seed.unwrap_or(sens.seed);
    let shift = (sens.shift[0], sens.shift[1]);
    let masks = match sens.kind.as_str() {
        "shifting" => gen_shifting_binary_mask(shape.rows, shape.cols, shape.frames, sens.density, seed, shift)?,
        "spectral" => gen_spectral_shift_masks(shape.rows, shape.cols, shape.frames, sens.density, seed, shift)?,
        other => return Err(config_err(format!("unknown sensing kind {other:?}"))),
    };
    let op = SensingOperator::new(masks)?;
    let clean = op.forward(&truth)?;
    let (y, sigma) = match sens.snr_db {
        Some(snr) => {
            let sigma = noise_sigma_for_snr(clean.values(), snr);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1);
            (add_gaussian_noise(&clean, sigma, &mut rng)?, sigma)
        }
        None => (clean.clone(), 0.0),
    };

    let dir = &cfg.output.dir;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    save_scicube(&op.masks().to_cube(), &dir.join("mask.scicube"), Dtype::F32)?;
    save_scicube(&truth, &dir.join("truth.scicube"), Dtype::F64)?;
    save_scicube(&y.to_cube(truth.peak()), &dir.join("measurement.scicube"), Dtype::F64)?;

    let mut m = Manifest::default();
    m.set("seed", seed);
    m.set("scene", &cfg.scene.kind);
    m.set("rows", shape.rows);
    m.set("cols", shape.cols);
    m.set("frames", shape.frames);
    m.set("peak", truth.peak());
    m.set("sensing", &sens.kind);
    m.set("mask_density", sens.density);
    m.set("mask_shift", format!("{},{}", shift.0, shift.1));
    m.set("snr_db", sens.snr_db.map_or("none".to_string(), |s| s.to_string()));
    m.set("noise_sigma", sigma);
    if sens.snr_db.is_some() {
        m.set("measured_snr_db", measurement_snr_db(clean.values(), y.values()));
    }
    m.set("mask", "mask.scicube");
    m.set("measurement", "measurement.scicube");
    m.set("truth", "truth.scicube");
    fs::write(dir.join("manifest.txt"), m.render())?;

    if let Some(d) = dump {
        save_cube(&truth, d, CubeFormat::Png)?;
    }
    eprintln!("simulated {shape} into {}", dir.display());
    Ok(())
}

struct Inputs {
    measurement: PathBuf,
    mask: PathBuf,
    truth: Option<PathBuf>,
    snr_db: Option<f64>,
}

fn resolve_inputs(cfg: &Config) -> anyhow::Result<Inputs> {
    let inp = &cfg.input;
    let (mut measurement, mut mask, mut truth, mut snr_db) = (None, None, None, None);
    if let Some(path) = &inp.manifest {
        let m = Manifest::load(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        measurement = m.get("measurement").map(|p| base.join(p));
        mask = m.get("mask").map(|p| base.join(p));
        truth = m.get("truth").map(|p| base.join(p));
        snr_db = m.snr_db()?;
    }
    Ok(Inputs {
        measurement: inp
            .measurement
            .clone()
            .or(measurement)
            .ok_or_else(|| config_err("no measurement given (input.measurement or input.manifest)"))?,
        mask: inp
            .mask
            .clone()
            .or(mask)
            .ok_or_else(|| config_err("no mask given (input.mask or input.manifest)"))?,
        truth: inp.truth.clone().or(truth),
        snr_db: inp.snr_db.or(snr_db),
    })
}

fn reconstruct(config: &Path, algorithm: Algorithm, mode: Option<Mode>, dump: Option<&Path>) -> anyhow::Result<()> {
    let cfg = Config::load(config)?;
    let inputs = resolve_inputs(&cfg)?;
    let masks = MaskCube::from_cube(&load_scicube(&inputs.mask)?)?;
    let y = Measurement::from_cube(&load_scicube(&inputs.measurement)?)?;
    let truth = inputs.truth.as_deref().map(load_scicube).transpose()?;
    let op = SensingOperator::new(masks)?;

    let (recon, reports) = match algorithm {
        Algorithm::Desci => {
            let sc = cfg.solver_config(mode, inputs.snr_db)?;
            desci_run_traced(&op, &y, &sc, truth.as_ref())?
        }
        Algorithm::GapTv => {
            let gc = cfg.gaptv_config(mode, inputs.snr_db)?;
            gaptv_run_traced(&op, &y, &gc, truth.as_ref())?
        }
    };

    let dir = &cfg.output.dir;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let name = algorithm.name();
    save_scicube(&recon, &dir.join(format!("recon_{name}.scicube")), Dtype::F64)?;
    let mut csv = BufWriter::new(File::create(dir.join(format!("telemetry_{name}.csv")))?);
    write_telemetry_csv(&reports, &mut csv)?;
    csv.flush()?;
    if let Some(d) = dump {
        save_cube(&recon, d, CubeFormat::Png)?;
    }

    let last = reports.last().expect("iteration 0 is always reported");
    match last.psnr {
        Some(p) => eprintln!("{name}: {} iterations, psnr {p:.2} dB", last.iteration),
        None => eprintln!("{name}: {} iterations, residual {:.3e}", last.iteration, last.residual),
    }
    Ok(())
}

fn score(recon: &Path, truth: &Path, out: Option<&Path>, peak: Option<f64>) -> anyhow::Result<()> {
    let rec = load_cube(recon, CubeFormat::from_path(recon))?;
    let tru = load_cube(truth, CubeFormat::from_path(truth))?;
    let peak = peak.unwrap_or(tru.peak());
    let p = psnr(&rec, &tru, peak)?;
    let s = ssim(&rec, &tru, peak)?;

    let mut text = String::from("frame,psnr,ssim\n");
    for (k, (pk, sk)) in p.per_frame.iter().zip(&s.per_frame).enumerate() {
        text.push_str(&format!("{k},{pk:.6},{sk:.6}\n"));
    }
    text.push_str(&format!("mean,{:.6},{:.6}\n", p.mean, s.mean));
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}
