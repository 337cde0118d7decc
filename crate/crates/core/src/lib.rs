//! Snapshot compressive imaging (SCI): simulation of coded-aperture
//! measurements and reconstruction of the frame cube.
//!
//! The forward model sums `B` mask-modulated frames into one 2-D snapshot.
//! Reconstruction alternates a closed-form data-fidelity step (ADMM, GAP or
//! accelerated GAP, all exploiting the diagonal `ΦΦᵀ`) with a denoising step.
//! Two denoisers are provided: weighted nuclear norm minimization over
//! nonlocally matched patch groups (DeSCI) and anisotropic total variation
//! (the GAP-TV baseline).

pub mod cube;
pub mod error;
pub mod io;
pub mod metrics;
pub mod patching;
pub mod projection;
pub mod scene;
pub mod sensing;
pub mod solver;
pub mod tv;
pub mod wnnm;

pub use cube::{FrameCube, MaskCube, Measurement, Shape};
pub use error::{Error, Result};
pub use sensing::SensingOperator;
pub use solver::{desci_run, IterReport, Mode, SolverConfig};
pub use tv::{gaptv_run, GapTvConfig};
