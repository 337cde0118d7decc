//! The SCI sensing operator `Φ = [D₁, …, D_B]` with `D_k = diag(vec(C_k))`,
//! and mask generators.
//!
//! `ΦΦᵀ = Σ_k D_k²` is diagonal, so its diagonal `ψ` is all the projection
//! steps need. For binary codes `ψ_i` is the number of frames in which pixel
//! `i` is open.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::cube::{FrameCube, MaskCube, Measurement, Shape};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SensingOperator {
    masks: MaskCube,
    psi: Vec<f64>,
    noise_sigma: Option<f64>,
}

impl SensingOperator {
    pub fn new(masks: MaskCube) -> Result<Self> {
        let psi = psi_diag(&masks)?;
        Ok(Self {
            masks,
            psi,
            noise_sigma: None,
        })
    }

    /// Sets the standard deviation of the i.i.d. Gaussian noise added by [`SensingOperator::measure`].
    pub fn with_noise(mut self, sigma: Option<f64>) -> Self {
        self.noise_sigma = sigma;
        self
    }

    pub fn masks(&self) -> &MaskCube {
        &self.masks
    }

    pub fn shape(&self) -> Shape {
        self.masks.shape()
    }

    /// Diagonal of `ΦΦᵀ`.
    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn noise_sigma(&self) -> Option<f64> {
        self.noise_sigma
    }

    /// `Φx` on a flat frame-major vector.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.shape().pixels();
        assert_eq!(x.len(), self.shape().len(), "signal length");
        let mut y = vec![0.0; n];
        for (frame, code) in x.chunks_exact(n).zip(self.masks.values().chunks_exact(n)) {
            for ((acc, &v), &c) in y.iter_mut().zip(frame).zip(code) {
                *acc += v * c;
            }
        }
        y
    }

    /// `Φᵀy`: frame `k` is `y ⊙ C_k`.
    pub fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        let n = self.shape().pixels();
        assert_eq!(y.len(), n, "measurement length");
        self.masks
            .values()
            .chunks_exact(n)
            .flat_map(|code| code.iter().zip(y).map(|(c, v)| c * v))
            .collect()
    }

    /// Noiseless `Y = Σ_k X_k ⊙ C_k`.
    pub fn forward(&self, cube: &FrameCube) -> Result<Measurement> {
        self.check_cube(cube)?;
        let shape = self.shape();
        Measurement::new(shape.rows, shape.cols, self.apply(cube.values()))
    }

    /// Forward model plus Gaussian noise when a noise level is set.
    pub fn measure<R: Rng + ?Sized>(&self, cube: &FrameCube, rng: &mut R) -> Result<Measurement> {
        let clean = self.forward(cube)?;
        match self.noise_sigma {
            None => Ok(clean),
            Some(sigma) => add_gaussian_noise(&clean, sigma, rng),
        }
    }

    pub fn adjoint(&self, meas: &Measurement) -> Result<FrameCube> {
        self.check_measurement(meas)?;
        FrameCube::new(self.shape(), self.apply_adjoint(meas.values()))
    }

    pub fn check_cube(&self, cube: &FrameCube) -> Result<()> {
        if cube.shape() != self.shape() {
            return Err(Error::shape(self.shape(), cube.shape()));
        }
        Ok(())
    }

    pub fn check_measurement(&self, meas: &Measurement) -> Result<()> {
        let shape = self.shape();
        if meas.rows() != shape.rows || meas.cols() != shape.cols {
            return Err(Error::shape(
                format!("{}x{} measurement", shape.rows, shape.cols),
                format!("{}x{}", meas.rows(), meas.cols()),
            ));
        }
        Ok(())
    }
}

/// Per-pixel diagonal of `ΦΦᵀ`, `ψ_i = Σ_k c²_{k,i}`.
pub fn psi_diag(masks: &MaskCube) -> Result<Vec<f64>> {
    let n = masks.shape().pixels();
    let mut psi = vec![0.0; n];
    for code in masks.values().chunks_exact(n) {
        for (acc, &c) in psi.iter_mut().zip(code) {
            *acc += c * c;
        }
    }
    if let Some(i) = psi.iter().position(|&p| !(p > 0.0)) {
        return Err(Error::InvalidMask(format!("psi is zero at pixel {i}")));
    }
    Ok(psi)
}

/// Noise standard deviation giving `10·log10(‖Φx‖² / E‖g‖²) = snr_db`.
pub fn noise_sigma_for_snr(clean: &[f64], snr_db: f64) -> f64 {
    let energy: f64 = clean.iter().map(|v| v * v).sum();
    (energy / clean.len() as f64 / 10f64.powf(snr_db / 10.0)).sqrt()
}

/// Empirical measurement SNR in dB, `10·log10(‖signal‖² / ‖noise‖²)`.
pub fn measurement_snr_db(clean: &[f64], noisy: &[f64]) -> f64 {
    let signal: f64 = clean.iter().map(|v| v * v).sum();
    let noise: f64 = clean.iter().zip(noisy).map(|(a, b)| (b - a).powi(2)).sum();
    10.0 * (signal / noise).log10()
}

pub fn add_gaussian_noise<R: Rng + ?Sized>(meas: &Measurement, sigma: f64, rng: &mut R) -> Result<Measurement> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise sigma {sigma}")));
    }
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and non-negative");
    let values = meas.values().iter().map(|v| v + normal.sample(rng)).collect();
    Ok(Measurement::new(meas.rows(), meas.cols(), values)?.with_noise_hint(Some(sigma)))
}

/// CACTI-style shifting binary mask: one Bernoulli(`density`) pattern, with
/// frame `k` the pattern cyclically shifted by `k·shift` (rows, cols).
///
/// A pixel closed in every frame would make `ψ` vanish there; such pixels
/// are opened in the seed pattern before stacking, which only opens further
/// pixels. The result is a pure function of the arguments.
pub fn gen_shifting_binary_mask(
    rows: usize,
    cols: usize,
    frames: usize,
    density: f64,
    seed: u64,
    shift: (isize, isize),
) -> Result<MaskCube> {
    let shape = Shape::new(rows, cols, frames);
    if shape.is_empty() {
        return Err(Error::InvalidParameter(format!("degenerate mask shape {shape}")));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidParameter(format!("mask density must be in (0, 1], got {density}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pattern: Vec<f64> = (0..shape.pixels())
        .map(|_| if rng.random::<f64>() < density { 1.0 } else { 0.0 })
        .collect();
    let stacked = shifted_stack(&pattern, shape, shift);
    let n = shape.pixels();
    let dead: Vec<usize> = (0..n)
        .filter(|&p| (0..frames).all(|k| stacked[k * n + p] == 0.0))
        .collect();
    if dead.is_empty() {
        return MaskCube::new(shape, stacked);
    }
    // frame 0 is the unshifted pattern, so opening the seed pixel revives p
    for p in dead {
        pattern[p] = 1.0;
    }
    MaskCube::new(shape, shifted_stack(&pattern, shape, shift))
}

/// CASSI-style simulated dispersion: band `b` sees the coded aperture shifted
/// by `b·dispersion_step`, which must lie along a single axis.
pub fn gen_spectral_shift_masks(
    rows: usize,
    cols: usize,
    bands: usize,
    density: f64,
    seed: u64,
    dispersion_step: (isize, isize),
) -> Result<MaskCube> {
    if dispersion_step.0 != 0 && dispersion_step.1 != 0 {
        return Err(Error::InvalidParameter(format!(
            "dispersion must be along one axis, got {dispersion_step:?}"
        )));
    }
    gen_shifting_binary_mask(rows, cols, bands, density, seed, dispersion_step)
}

fn shifted_stack(pattern: &[f64], shape: Shape, shift: (isize, isize)) -> Vec<f64> {
    let (rows, cols) = (shape.rows as isize, shape.cols as isize);
    let mut out = Vec::with_capacity(shape.len());
    for k in 0..shape.frames as isize {
        let (di, dj) = (k * shift.0, k * shift.1);
        for i in 0..rows {
            let src_i = (i - di).rem_euclid(rows);
            for j in 0..cols {
                let src_j = (j - dj).rem_euclid(cols);
                out.push(pattern[(src_i * cols + src_j) as usize]);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    /// Dense `Φ` (n × nB), built column block by column block from the codes.
    fn dense_phi(masks: &MaskCube) -> DMatrix<f64> {
        let shape = masks.shape();
        let n = shape.pixels();
        let mut phi = DMatrix::zeros(n, shape.len());
        for k in 0..shape.frames {
            for i in 0..n {
                phi[(i, k * n + i)] = masks.values()[k * n + i];
            }
        }
        phi
    }

    fn random_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
        (0..len).map(|_| rng.random::<f64>() * 10.0 - 5.0).collect()
    }

    #[test]
    fn all_ones_masks_sum_frames() {
        let shape = Shape::new(1, 1, 2);
        let op = SensingOperator::new(MaskCube::ones(shape).unwrap()).unwrap();
        let cube = FrameCube::new(shape, vec![3.0, 4.5]).unwrap();
        assert_eq!(op.forward(&cube).unwrap().values(), &[7.5]);
        let zero = FrameCube::zeros(shape).unwrap();
        assert_eq!(op.forward(&zero).unwrap().values(), &[0.0]);
    }

    #[test]
    fn adjoint_spreads_measurement_through_codes() {
        let shape = Shape::new(1, 2, 2);
        let op = SensingOperator::new(MaskCube::ones(shape).unwrap()).unwrap();
        let m = Measurement::new(1, 2, vec![2.0, -1.0]).unwrap();
        assert_eq!(op.adjoint(&m).unwrap().values(), &[2.0, -1.0, 2.0, -1.0]);

        let gated = MaskCube::new(shape, vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        let op = SensingOperator::new(gated).unwrap();
        assert_eq!(op.adjoint(&m).unwrap().values(), &[2.0, -1.0, 0.0, 0.0]);
    }

    #[test]
    fn forward_and_adjoint_match_dense_phi() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let masks = gen_shifting_binary_mask(3, 3, 2, 0.5, 11, (1, 0)).unwrap();
        let op = SensingOperator::new(masks.clone()).unwrap();
        let phi = dense_phi(&masks);
        let x = random_vec(&mut rng, 18);
        let y = random_vec(&mut rng, 9);
        let dense_y = &phi * nalgebra::DVector::from_vec(x.clone());
        let dense_xt = phi.transpose() * nalgebra::DVector::from_vec(y.clone());
        for (a, b) in op.apply(&x).iter().zip(dense_y.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in op.apply_adjoint(&y).iter().zip(dense_xt.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn adjoint_identity_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for seed in 0..10 {
            let masks = gen_shifting_binary_mask(5, 4, 3, 0.6, seed, (0, 1)).unwrap();
            let op = SensingOperator::new(masks).unwrap();
            let x = random_vec(&mut rng, 60);
            let y = random_vec(&mut rng, 20);
            let lhs: f64 = op.apply(&x).iter().zip(&y).map(|(a, b)| a * b).sum();
            let rhs: f64 = x.iter().zip(op.apply_adjoint(&y)).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn psi_counts_active_frames() {
        let ones = MaskCube::ones(Shape::new(2, 2, 8)).unwrap();
        assert!(psi_diag(&ones).unwrap().iter().all(|&p| p == 8.0));

        let masks = gen_shifting_binary_mask(4, 4, 3, 0.5, 1, (1, 1)).unwrap();
        let psi = psi_diag(&masks).unwrap();
        for (i, &p) in psi.iter().enumerate() {
            let count = (0..3).filter(|&k| masks.frame(k)[i] == 1.0).count();
            assert_eq!(p, count as f64);
        }
    }

    #[test]
    fn psi_is_diagonal_of_dense_gram_for_real_codes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let shape = Shape::new(3, 3, 3);
        let codes: Vec<f64> = (0..shape.len()).map(|_| rng.random::<f64>() + 0.01).collect();
        let masks = MaskCube::new(shape, codes).unwrap();
        let phi = dense_phi(&masks);
        let gram = &phi * phi.transpose();
        let psi = psi_diag(&masks).unwrap();
        for r in 0..9 {
            for c in 0..9 {
                if r == c {
                    assert!((gram[(r, c)] - psi[r]).abs() < 1e-14);
                } else {
                    assert_eq!(gram[(r, c)], 0.0);
                }
            }
        }
    }

    #[test]
    fn shifting_mask_generator_properties() {
        let same = gen_shifting_binary_mask(6, 5, 4, 0.5, 2, (0, 0)).unwrap();
        for k in 1..4 {
            assert_eq!(same.frame(k), same.frame(0));
        }
        // every pixel open in some frame, even at low density
        let sparse = gen_shifting_binary_mask(16, 16, 3, 0.1, 4, (1, 0)).unwrap();
        assert!(psi_diag(&sparse).unwrap().iter().all(|&p| p >= 1.0));
        let full = gen_shifting_binary_mask(3, 3, 2, 1.0, 2, (1, 2)).unwrap();
        assert!(full.values().iter().all(|&v| v == 1.0));
        assert!(gen_shifting_binary_mask(3, 3, 2, 0.0, 2, (1, 0)).is_err());
        assert!(gen_shifting_binary_mask(3, 3, 2, 1.5, 2, (1, 0)).is_err());

        // frame k content is frame 0 relocated by k·shift, cyclically
        let (rows, cols, shift) = (7usize, 6usize, (2isize, -1isize));
        let m = gen_shifting_binary_mask(rows, cols, 4, 0.4, 17, shift).unwrap();
        for k in 0..4 {
            for i in 0..rows {
                for j in 0..cols {
                    let ti = (i as isize + k as isize * shift.0).rem_euclid(rows as isize) as usize;
                    let tj = (j as isize + k as isize * shift.1).rem_euclid(cols as isize) as usize;
                    assert_eq!(m.get(k, ti, tj), m.get(0, i, j));
                }
            }
        }
        // deterministic per seed
        assert_eq!(m, gen_shifting_binary_mask(rows, cols, 4, 0.4, 17, shift).unwrap());
    }

    #[test]
    fn spectral_masks_shift_per_band() {
        let flat = gen_spectral_shift_masks(4, 4, 3, 0.5, 8, (0, 0)).unwrap();
        assert_eq!(flat.frame(1), flat.frame(0));
        let m = gen_spectral_shift_masks(5, 6, 3, 0.5, 8, (0, 1)).unwrap();
        for b in 0..3 {
            for i in 0..5 {
                for j in 0..6 {
                    assert_eq!(m.get(b, i, (j + b) % 6), m.get(0, i, j));
                }
            }
        }
        assert!(gen_spectral_shift_masks(4, 4, 3, 0.5, 8, (1, 1)).is_err());
    }

    #[test]
    fn noise_hits_requested_snr() {
        let shape = Shape::new(32, 32, 4);
        let masks = gen_shifting_binary_mask(32, 32, 4, 0.5, 4, (1, 0)).unwrap();
        let cube = FrameCube::from_fn(shape, 255.0, |k, i, j| ((i * 7 + j * 3 + k * 11) % 200) as f64).unwrap();
        let clean = SensingOperator::new(masks.clone()).unwrap().forward(&cube).unwrap();
        let sigma = noise_sigma_for_snr(clean.values(), 20.0);
        let op = SensingOperator::new(masks).unwrap().with_noise(Some(sigma));
        let noisy = op.measure(&cube, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let snr = measurement_snr_db(clean.values(), noisy.values());
        assert!((snr - 20.0).abs() < 0.5, "snr {snr}");
        assert_eq!(noisy.noise_sigma_hint(), Some(sigma));
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let op = SensingOperator::new(MaskCube::ones(Shape::new(2, 2, 2)).unwrap()).unwrap();
        let cube = FrameCube::zeros(Shape::new(2, 2, 3)).unwrap();
        assert!(matches!(op.forward(&cube), Err(Error::ShapeMismatch { .. })));
        let m = Measurement::new(2, 3, vec![0.0; 6]).unwrap();
        assert!(matches!(op.adjoint(&m), Err(Error::ShapeMismatch { .. })));
    }
}
