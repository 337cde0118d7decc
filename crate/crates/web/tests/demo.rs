use desci::wnnm::{compute_weights, estimate_sigmas_from};
use desci_web::{shrink_singular_values, Demo};

#[test]
fn simulate_produces_drawable_buffers() {
    let demo = Demo::simulate(16, 4, 0.5, 3, f64::NAN).unwrap();
    assert_eq!((demo.size(), demo.frames()), (16, 4));
    assert_eq!(demo.truth_rgba(0).len(), 16 * 16 * 4);
    assert_eq!(demo.mask_rgba(3).len(), 16 * 16 * 4);
    assert_eq!(demo.measurement_rgba().len(), 16 * 16 * 4);
    assert!(demo.recon_rgba(0).is_empty());
    let mask = demo.mask_rgba(1);
    assert!(mask.chunks(4).all(|p| (p[0] == 0 || p[0] == 255) && p[3] == 255));
}

#[test]
fn reconstruct_improves_over_nothing_and_reports() {
    let mut demo = Demo::simulate(16, 4, 0.5, 3, f64::NAN).unwrap();
    let tv = demo.run("gap-tv", 1).unwrap();
    assert_eq!(tv.len(), 3);
    assert!(tv[0] > 15.0 && tv[1] > 0.0 && tv[1] <= 1.0);
    assert_eq!(demo.frame_psnr().len(), 4);
    let d = demo.run("desci", 3).unwrap();
    assert!(d[2] >= 1.0 && d[0].is_finite());
    assert_eq!(demo.recon_rgba(2).len(), 16 * 16 * 4);
}

#[test]
fn noisy_simulation_and_bad_input() {
    let mut demo = Demo::simulate(16, 4, 0.5, 3, 20.0).unwrap();
    assert!(demo.run("gap-tv", 1).unwrap()[0].is_finite());
    assert!(Demo::simulate(16, 4, 0.0, 3, f64::NAN).is_err());
}

#[test]
fn shrink_matches_library_weights() {
    let s = [40.0, 12.0, 3.0, 1.0];
    let (m, c, sigma) = (20, 2.8, 1.5);
    let out = shrink_singular_values(&s, m, c, sigma);
    let w = compute_weights(&estimate_sigmas_from(&s, m, sigma), m, c, 1e-16);
    for ((o, sj), wj) in out.iter().zip(&s).zip(&w) {
        assert_eq!(*o, (sj - sigma * sigma * wj).max(0.0));
    }
    // noise-level components vanish, the dominant one survives
    assert!(out[0] > 30.0);
    assert_eq!(out[3], 0.0);
    assert_eq!(shrink_singular_values(&s, m, c, 0.0), s.to_vec());
}
