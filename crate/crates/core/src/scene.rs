//! Deterministic synthetic scenes for experiments and tests.

use crate::cube::{FrameCube, Shape, DEFAULT_PEAK};
use crate::error::Result;
use crate::metrics::Region;

/// A smooth shaded background with a periodic texture patch and two
/// squares moving in different directions (one pixel per frame vertically,
/// two horizontally). Values lie in `[0, 255]`.
pub fn moving_squares(rows: usize, cols: usize, frames: usize) -> Result<FrameCube> {
    let shape = Shape::new(rows, cols, frames);
    let (r, c) = (rows as f64, cols as f64);
    let big = (rows.min(cols) * 5 / 16).max(2);
    let small = (rows.min(cols) / 4).max(2);
    FrameCube::from_fn(shape, DEFAULT_PEAK, move |k, i, j| {
        let (fi, fj) = (i as f64, j as f64);
        let mut v = 50.0 + 60.0 * fi / r + 25.0 * (std::f64::consts::PI * fj / c).sin();
        // stationary stripes in the lower-left quadrant
        if i >= rows / 2 && j < cols / 2 {
            v = if (i + j) % 4 < 2 { 170.0 } else { 90.0 };
        }
        let (r0, c0) = (rows / 8, (1 + 2 * k) % cols);
        if (r0..r0 + big).contains(&i) && (c0..c0 + big).contains(&j) {
            v = 230.0;
        }
        let (r1, c1) = ((rows / 8 + k) % rows, cols * 5 / 8);
        if (r1..r1 + small).contains(&i) && (c1..c1 + small).contains(&j) {
            v = 20.0;
        }
        v
    })
}

/// A hyperspectral cube of four materials laid out in quadrants, each with
/// its own smooth spectrum and mild spatial shading. Returns the cube and
/// one interior region per material.
pub fn spectral_quadrants(rows: usize, cols: usize, bands: usize) -> Result<(FrameCube, Vec<Region>)> {
    let shape = Shape::new(rows, cols, bands);
    let b = bands.max(2) as f64 - 1.0;
    let spectrum = move |material: usize, band: usize| {
        let t = band as f64 / b;
        match material {
            0 => 40.0 + 180.0 * (-(t - 0.25).powi(2) / 0.02).exp(),
            1 => 60.0 + 150.0 * t,
            2 => 200.0 - 140.0 * t,
            _ => 50.0 + 120.0 * (-(t - 0.7).powi(2) / 0.03).exp() + 40.0 * (-(t - 0.2).powi(2) / 0.01).exp(),
        }
    };
    let (hr, hc) = (rows / 2, cols / 2);
    let cube = FrameCube::from_fn(shape, DEFAULT_PEAK, move |k, i, j| {
        let material = usize::from(i >= hr) * 2 + usize::from(j >= hc);
        let shade = 0.9 + 0.1 * ((i as f64) * 0.3).sin() * ((j as f64) * 0.2).cos();
        spectrum(material, k) * shade
    })?;
    let margin_r = rows / 8;
    let margin_c = cols / 8;
    let regions = [(0, 0), (0, hc), (hr, 0), (hr, hc)]
        .iter()
        .map(|&(r0, c0)| Region {
            row: r0 + margin_r,
            col: c0 + margin_c,
            rows: hr - 2 * margin_r,
            cols: hc - 2 * margin_c,
        })
        .collect();
    Ok((cube, regions))
}
