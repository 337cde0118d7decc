//! Data-fidelity half-steps.
//!
//! All three updates share one kernel,
//! `v + Φᵀ[(y − Φv) ⊘ (γ + ψ)]`, evaluated elementwise in `O(nB)`:
//!
//! * ADMM: `v = x + b`, `γ > 0` solves `min ½‖y − Φθ‖² + γ/2‖θ − x − b‖²`.
//! * GAP: `γ = 0` is the Euclidean projection onto `{x : Φx = y}`.
//! * accelerated GAP: GAP against a running measurement that accumulates
//!   the residual of each step.

use crate::error::{Error, Result};
use crate::sensing::SensingOperator;

/// Iterates of the split problem `min ½‖y − Φθ‖² + R(x)  s.t. x = θ`.
#[derive(Debug, Clone)]
pub struct SplitState {
    pub x: Vec<f64>,
    pub theta: Vec<f64>,
    pub b: Vec<f64>,
    pub y_running: Vec<f64>,
    pub gamma: f64,
}

impl SplitState {
    /// `x = θ = Φᵀ(y ⊘ ψ)`, `b = 0`, running measurement `y`.
    pub fn init(op: &SensingOperator, y: &[f64], gamma: f64) -> Self {
        let x = min_norm_estimate(op, y);
        Self {
            theta: x.clone(),
            b: vec![0.0; x.len()],
            x,
            y_running: y.to_vec(),
            gamma,
        }
    }
}

fn relax(v: &[f64], op: &SensingOperator, y: &[f64], gamma: f64) -> Vec<f64> {
    let psi = op.psi();
    let scaled: Vec<f64> = op
        .apply(v)
        .iter()
        .zip(y)
        .zip(psi)
        .map(|((pv, yi), p)| (yi - pv) / (gamma + p))
        .collect();
    let mut out = op.apply_adjoint(&scaled);
    for (o, vi) in out.iter_mut().zip(v) {
        *o += vi;
    }
    out
}

/// Closed-form ADMM θ-update:
/// `θ = (x + b) + Φᵀ[(y − Φ(x + b)) ⊘ (γ + ψ)]`.
///
/// `γ = 0` is accepted and gives the GAP projection of `x + b`.
pub fn admm_theta_update(x: &[f64], b: &[f64], gamma: f64, op: &SensingOperator, y: &[f64]) -> Result<Vec<f64>> {
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be finite and non-negative, got {gamma}")));
    }
    let v: Vec<f64> = x.iter().zip(b).map(|(a, c)| a + c).collect();
    Ok(relax(&v, op, y, gamma))
}

/// Minimum-norm solution `Φᵀ(y ⊘ ψ)` of `Φx = y`, the projection of zero.
pub fn min_norm_estimate(op: &SensingOperator, y: &[f64]) -> Vec<f64> {
    let scaled: Vec<f64> = y.iter().zip(op.psi()).map(|(yi, p)| yi / p).collect();
    op.apply_adjoint(&scaled)
}

/// Euclidean projection of `theta` onto `{x : Φx = y}`.
pub fn gap_project(theta: &[f64], op: &SensingOperator, y: &[f64]) -> Vec<f64> {
    relax(theta, op, y, 0.0)
}

/// One accelerated GAP step. Projects `theta_prev` against `y_running` and
/// returns the projection with the updated running measurement
/// `y_running + (y − Φθ_prev)`.
pub fn gap_accelerated_step(
    theta_prev: &[f64],
    op: &SensingOperator,
    y: &[f64],
    y_running: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let x = relax(theta_prev, op, y_running, 0.0);
    let next = op
        .apply(theta_prev)
        .iter()
        .zip(y)
        .zip(y_running)
        .map(|((pt, yi), yr)| yr + (yi - pt))
        .collect();
    (x, next)
}

/// `b' = b − (θ − x)`.
pub fn admm_dual_update(b: &[f64], theta: &[f64], x: &[f64]) -> Vec<f64> {
    b.iter()
        .zip(theta)
        .zip(x)
        .map(|((bi, t), xi)| bi - (t - xi))
        .collect()
}

pub fn residual_norm(op: &SensingOperator, x: &[f64], y: &[f64]) -> f64 {
    op.apply(x)
        .iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

pub fn residual_max(op: &SensingOperator, x: &[f64], y: &[f64]) -> f64 {
    op.apply(x)
        .iter()
        .zip(y)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
}
