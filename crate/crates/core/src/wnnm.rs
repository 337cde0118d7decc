//! Weighted nuclear norm minimization of a single patch group.
//!
//! For a noisy group `R` the estimate is
//! `argmin_Z ½‖R − Z‖²_F + σ_n² Σ_j w_j σ_j(Z)`, solved in closed form by
//! shrinking each singular value of `R` by its own threshold. The weights
//! `w_j = c√M / (σ̂_j + ε)` are non-descending because the estimated clean
//! singular values `σ̂_j = √max(σ_j(R)² − Mσ_n², 0)` are sorted descending,
//! which is the regime where weighted soft-thresholding is the global
//! minimizer.

use nalgebra::{DMatrix, SVD};

use crate::error::{Error, Result};

/// `ε` in the weight denominator.
pub const DEFAULT_EPS: f64 = 1e-16;

/// Weight constant `c`.
pub const DEFAULT_C: f64 = 2.8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WnnmParams {
    pub c: f64,
    pub eps: f64,
    pub sigma_n: f64,
}

impl WnnmParams {
    pub fn new(sigma_n: f64) -> Self {
        Self {
            c: DEFAULT_C,
            eps: DEFAULT_EPS,
            sigma_n,
        }
    }

    /// `λ/γ`, which the model identifies with the noise variance `σ_n²`.
    pub fn lambda_over_gamma(&self) -> f64 {
        self.sigma_n * self.sigma_n
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c >= 0.0 && self.c.is_finite()) || !(self.eps > 0.0) || !(self.sigma_n >= 0.0 && self.sigma_n.is_finite()) {
            return Err(Error::InvalidParameter(format!("invalid WNNM parameters {self:?}")));
        }
        Ok(())
    }
}

fn svd(r: &DMatrix<f64>) -> Result<SVD<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::Svd);
    }
    SVD::try_new(r.clone(), true, true, f64::EPSILON, 0).ok_or(Error::Svd)
}

/// Singular values of `r`, descending.
pub fn singular_values(r: &DMatrix<f64>) -> Result<Vec<f64>> {
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::Svd);
    }
    let mut s: Vec<f64> = r.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// `σ̂_j = √max(σ_j² − M·σ_n², 0)` from the singular values of the noisy group.
pub fn estimate_sigmas_from(singular: &[f64], m: usize, sigma_n: f64) -> Vec<f64> {
    let floor = m as f64 * sigma_n * sigma_n;
    singular.iter().map(|s| (s * s - floor).max(0.0).sqrt()).collect()
}

pub fn estimate_sigmas(r: &DMatrix<f64>, sigma_n: f64) -> Result<Vec<f64>> {
    Ok(estimate_sigmas_from(&singular_values(r)?, r.ncols(), sigma_n))
}

/// `w_j = c√M / (σ̂_j + ε)`.
pub fn compute_weights(sigma_hat: &[f64], m: usize, c: f64, eps: f64) -> Vec<f64> {
    let num = c * (m as f64).sqrt();
    sigma_hat.iter().map(|s| num / (s + eps)).collect()
}

/// `U 𝒟_w(Σ) Vᵀ` with `𝒟_w(Σ)_jj = max(Σ_jj − w_j, 0)`, singular values
/// taken in descending order. Missing trailing weights count as zero.
pub fn wnnm_shrink(r: &DMatrix<f64>, w: &[f64]) -> Result<DMatrix<f64>> {
    let svd = svd(r)?;
    Ok(recompose_shrunk(svd, w))
}

fn recompose_shrunk(svd: SVD<f64, nalgebra::Dyn, nalgebra::Dyn>, w: &[f64]) -> DMatrix<f64> {
    let u = svd.u.expect("U requested");
    let v_t = svd.v_t.expect("Vᵀ requested");
    let mut out = DMatrix::zeros(u.nrows(), v_t.ncols());
    for (j, &s) in svd.singular_values.iter().enumerate() {
        let shrunk = (s - w.get(j).copied().unwrap_or(0.0)).max(0.0);
        if shrunk > 0.0 {
            out.ger(shrunk, &u.column(j), &v_t.row(j).transpose(), 1.0);
        }
    }
    out
}

/// Objective `½‖R − Z‖²_F + Σ_j w_j σ_j(Z)` minimized by [`wnnm_shrink`].
pub fn shrink_objective(r: &DMatrix<f64>, z: &DMatrix<f64>, w: &[f64]) -> Result<f64> {
    let fit = 0.5 * (r - z).norm_squared();
    let penalty: f64 = singular_values(z)?.iter().zip(w).map(|(s, wj)| s * wj).sum();
    Ok(fit + penalty)
}

/// Denoises one group: estimate clean singular values, derive weights, and
/// shrink by the thresholds `σ_n²·w_j`.
///
/// Works on the eigendecomposition of the smaller Gram matrix, so the
/// result agrees with [`wnnm_shrink`] up to the accuracy of `σ_j² ≈ λ_j`.
pub fn denoise_group(r: &DMatrix<f64>, params: &WnnmParams) -> Result<DMatrix<f64>> {
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::Svd);
    }
    let wide = r.nrows() <= r.ncols();
    let gram = if wide { r * r.transpose() } else { r.transpose() * r };
    if gram.iter().any(|v| !v.is_finite()) {
        return Err(Error::Svd);
    }
    let k = gram.nrows();
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let singular: Vec<f64> = order.iter().map(|&j| eig.eigenvalues[j].max(0.0).sqrt()).collect();

    let m = r.ncols();
    let sigma_hat = estimate_sigmas_from(&singular, m, params.sigma_n);
    let scale = params.lambda_over_gamma();
    let weights = compute_weights(&sigma_hat, m, params.c, params.eps);

    // P = E diag(σ̃_j / σ_j) Eᵀ over the Gram eigenvectors E
    let mut p = DMatrix::zeros(k, k);
    for ((&j, &s), w) in order.iter().zip(&singular).zip(&weights) {
        let t = w * scale;
        let ratio = if t == 0.0 {
            1.0
        } else if s > t {
            (s - t) / s
        } else {
            0.0
        };
        if ratio > 0.0 {
            let e = eig.eigenvectors.column(j);
            p.ger(ratio, &e, &e, 1.0);
        }
    }
    Ok(if wide { p * r } else { r * p })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>() * 4.0 - 2.0)
    }

    #[test]
    fn sigma_estimate_branches() {
        let s = [5.0, 3.0, 0.5];
        assert_eq!(estimate_sigmas_from(&s, 4, 0.0), s.to_vec());
        assert_eq!(estimate_sigmas_from(&[1.0, 0.9], 4, 0.5), vec![0.0, 0.0]);

        let r = DMatrix::from_row_slice(2, 2, &[5.0, 0.0, 0.0, 1.0]);
        let est = estimate_sigmas(&r, 1.0).unwrap();
        assert!((est[0] - 23f64.sqrt()).abs() < 1e-12);
        assert_eq!(est[1], 0.0);
    }

    #[test]
    fn weights_follow_formula() {
        let w = compute_weights(&[10.0, 5.0], 70, 2.8, DEFAULT_EPS);
        let root = 70f64.sqrt();
        assert!((w[0] - 2.8 * root / 10.0).abs() < 1e-12);
        assert!((w[1] - 2.8 * root / 5.0).abs() < 1e-12);
        assert!(w[0] <= w[1]);

        let zero = compute_weights(&[0.0], 4, 1.0, 1e-16);
        assert_eq!(zero[0], 2.0 / 1e-16);
        let tiny = compute_weights(&[1e300, 1e300], 4, 1.0, 1e-16);
        assert!(tiny.iter().all(|&v| v < 1e-299));
    }

    #[test]
    fn shrink_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = random_matrix(&mut rng, 6, 8);
        let same = wnnm_shrink(&r, &[0.0; 6]).unwrap();
        assert!((&same - &r).amax() < 1e-10);

        let s = singular_values(&r).unwrap();
        let kill: Vec<f64> = s.iter().map(|v| v + 1.0).collect();
        assert_eq!(wnnm_shrink(&r, &kill).unwrap().amax(), 0.0);

        let mut bad = r.clone();
        bad[(0, 0)] = f64::INFINITY;
        assert!(matches!(wnnm_shrink(&bad, &[0.0]), Err(Error::Svd)));
    }

    #[test]
    fn output_singular_values_are_shrunk_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let r = random_matrix(&mut rng, 6, 8);
            let s = singular_values(&r).unwrap();
            let mut w: Vec<f64> = (0..6).map(|_| rng.random::<f64>() * 3.0).collect();
            w.sort_by(f64::total_cmp);
            let z = wnnm_shrink(&r, &w).unwrap();
            let sz = singular_values(&z).unwrap();
            for j in 0..6 {
                assert!((sz[j] - (s[j] - w[j]).max(0.0)).abs() < 1e-10);
                assert!(sz[j] <= s[j] + 1e-12);
            }
        }
    }

    #[test]
    fn shrink_beats_random_perturbations() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = random_matrix(&mut rng, 6, 8);
        let mut w: Vec<f64> = (0..6).map(|_| rng.random::<f64>() * 2.0).collect();
        w.sort_by(f64::total_cmp);
        let z = wnnm_shrink(&r, &w).unwrap();
        let best = shrink_objective(&r, &z, &w).unwrap();
        for _ in 0..200 {
            let scale = 10f64.powf(rng.random_range(-4.0..0.0));
            let p = &z + DMatrix::from_fn(6, 8, |_, _| rng.sample::<f64, _>(StandardNormal) * scale);
            assert!(shrink_objective(&r, &p, &w).unwrap() >= best - 1e-12);
        }
    }

    #[test]
    fn denoise_zero_and_identity_limits() {
        let zero = DMatrix::zeros(9, 12);
        assert_eq!(denoise_group(&zero, &WnnmParams::new(10.0)).unwrap(), zero);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let r = random_matrix(&mut rng, 9, 12);
        let p = WnnmParams { c: 1e-12, ..WnnmParams::new(0.0) };
        assert!((denoise_group(&r, &p).unwrap() - &r).amax() < 1e-10);
    }

    #[test]
    fn noisy_rank_one_group_comes_back_rank_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (d, m) = (16, 20);
        let u = DMatrix::from_fn(d, 1, |_, _| rng.random::<f64>() + 0.5);
        let v = DMatrix::from_fn(1, m, |_, _| rng.random::<f64>() + 0.5);
        let clean = &u * &v * 10.0;
        let sigma = 0.05;
        let noisy = &clean + DMatrix::from_fn(d, m, |_, _| rng.sample::<f64, _>(StandardNormal) * sigma);
        // noise singular values are below √M·σ_n for σ_n a few times σ
        let sigma_n = 4.0 * sigma;
        let s = singular_values(&noisy).unwrap();
        assert!(s[1] * s[1] < m as f64 * sigma_n * sigma_n);
        let out = denoise_group(&noisy, &WnnmParams::new(sigma_n)).unwrap();
        let so = singular_values(&out).unwrap();
        assert!(so[0] > 1.0);
        assert!(so[1..].iter().all(|&v| v < 1e-6));
    }

    #[test]
    fn overflowing_group_is_an_error() {
        let r = DMatrix::from_element(4, 5, 1e200);
        assert!(matches!(denoise_group(&r, &WnnmParams::new(1.0)), Err(Error::Svd)));
    }

    #[test]
    fn gram_path_matches_svd_shrink() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for (d, m) in [(9, 14), (14, 9), (6, 6)] {
            for sigma_n in [0.0, 0.1, 0.4] {
                let r = random_matrix(&mut rng, d, m);
                let p = WnnmParams::new(sigma_n);
                let hat = estimate_sigmas(&r, sigma_n).unwrap();
                let t: Vec<f64> = compute_weights(&hat, m, p.c, p.eps)
                    .iter()
                    .map(|w| w * p.lambda_over_gamma())
                    .collect();
                let oracle = wnnm_shrink(&r, &t).unwrap();
                let out = denoise_group(&r, &p).unwrap();
                assert!((out - oracle).amax() < 1e-7 * r.amax());
            }
        }
    }
}
