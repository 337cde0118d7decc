//! Nonlocal patch groups: reference grid, block matching inside a
//! spatio-temporal window, group extraction and overlap-averaged aggregation.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::cube::{FrameCube, Shape};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchConfig {
    /// Patch side `√d` in pixels.
    pub patch_side: usize,
    /// Distance between reference patches.
    pub stride: usize,
    /// Spatial search window side `L` (candidate positions per axis).
    pub search_side: usize,
    /// Temporal search depth `H` (frames).
    pub search_depth: usize,
    /// Patches per group `M`.
    pub group_size: usize,
    /// Iterations between block-matching refreshes.
    pub rematch_every: usize,
}

impl PatchConfig {
    /// Overlap of one pixel between neighbouring reference patches.
    pub fn new(patch_side: usize, group_size: usize) -> Self {
        Self {
            patch_side,
            stride: patch_side.saturating_sub(1).max(1),
            search_side: 30,
            search_depth: 8,
            group_size,
            rematch_every: 20,
        }
    }

    pub fn validate(&self, shape: Shape) -> Result<()> {
        if self.patch_side == 0 || self.stride == 0 || self.group_size == 0 || self.search_side == 0 {
            return Err(Error::InvalidParameter(format!("degenerate patch config {self:?}")));
        }
        if self.search_depth == 0 || self.search_depth > shape.frames {
            return Err(Error::InvalidParameter(format!(
                "search depth {} must be in 1..={}",
                self.search_depth, shape.frames
            )));
        }
        if self.patch_side > shape.rows || self.patch_side > shape.cols {
            return Err(Error::InvalidParameter(format!(
                "patch side {} exceeds frame {}x{}",
                self.patch_side, shape.rows, shape.cols
            )));
        }
        let capacity = self.window_capacity(shape);
        if capacity < self.group_size {
            return Err(Error::TooFewCandidates {
                needed: self.group_size,
                available: capacity,
            });
        }
        Ok(())
    }

    /// Number of candidate patches in every search window.
    pub fn window_capacity(&self, shape: Shape) -> usize {
        let p = self.patch_side;
        if p > shape.rows || p > shape.cols {
            return 0;
        }
        self.search_side.min(shape.rows - p + 1)
            * self.search_side.min(shape.cols - p + 1)
            * self.search_depth.min(shape.frames)
    }

    pub fn patch_len(&self) -> usize {
        self.patch_side * self.patch_side
    }
}

/// Top-left corner of a patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PatchCoord {
    pub frame: usize,
    pub row: usize,
    pub col: usize,
}

impl PatchCoord {
    pub fn new(frame: usize, row: usize, col: usize) -> Self {
        Self { frame, row, col }
    }
}

/// A reference patch and its matches, stacked as the columns of a `d × M` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGroup {
    pub ref_index: usize,
    pub coords: Vec<PatchCoord>,
    pub distances: Vec<f64>,
    pub matrix: DMatrix<f64>,
}

/// Strided offsets along one axis, with the last one snapped to `len − patch`.
pub fn axis_offsets(len: usize, patch: usize, stride: usize) -> Vec<usize> {
    assert!(patch <= len && stride > 0);
    let last = len - patch;
    let mut offsets: Vec<usize> = (0..=last).step_by(stride).collect();
    if *offsets.last().expect("offset 0 always present") != last {
        offsets.push(last);
    }
    offsets
}

/// Reference patches covering every pixel of every frame.
pub fn reference_grid(shape: Shape, cfg: &PatchConfig) -> Result<Vec<PatchCoord>> {
    if cfg.patch_side == 0 || cfg.stride == 0 {
        return Err(Error::InvalidParameter("patch side and stride must be positive".into()));
    }
    if cfg.patch_side > shape.rows || cfg.patch_side > shape.cols {
        return Err(Error::InvalidParameter(format!(
            "patch side {} exceeds frame {}x{}",
            cfg.patch_side, shape.rows, shape.cols
        )));
    }
    let rows = axis_offsets(shape.rows, cfg.patch_side, cfg.stride);
    let cols = axis_offsets(shape.cols, cfg.patch_side, cfg.stride);
    let mut grid = Vec::with_capacity(shape.frames * rows.len() * cols.len());
    for frame in 0..shape.frames {
        for &row in &rows {
            for &col in &cols {
                grid.push(PatchCoord { frame, row, col });
            }
        }
    }
    Ok(grid)
}

/// `count` consecutive positions out of `available`, centred on `center` and
/// shifted to stay in range.
fn window(center: usize, available: usize, size: usize) -> std::ops::Range<usize> {
    let count = size.min(available);
    let start = center.saturating_sub(size / 2).min(available - count);
    start..start + count
}

fn patch_into(values: &[f64], shape: Shape, at: PatchCoord, side: usize, out: &mut [f64]) {
    for r in 0..side {
        let base = shape.index(at.frame, at.row + r, at.col);
        out[r * side..(r + 1) * side].copy_from_slice(&values[base..base + side]);
    }
}

fn patch_distance(values: &[f64], shape: Shape, at: PatchCoord, side: usize, reference: &[f64]) -> f64 {
    let mut acc = 0.0;
    for r in 0..side {
        let base = shape.index(at.frame, at.row + r, at.col);
        for (a, b) in values[base..base + side].iter().zip(&reference[r * side..(r + 1) * side]) {
            let d = a - b;
            acc += d * d;
        }
    }
    acc
}

/// Matched coordinates and distances for one reference, without extracting
/// the group matrix.
pub fn match_patches(
    values: &[f64],
    shape: Shape,
    reference: PatchCoord,
    cfg: &PatchConfig,
) -> Result<(Vec<PatchCoord>, Vec<f64>)> {
    let side = cfg.patch_side;
    let capacity = cfg.window_capacity(shape);
    if capacity < cfg.group_size {
        return Err(Error::TooFewCandidates {
            needed: cfg.group_size,
            available: capacity,
        });
    }
    let mut ref_patch = vec![0.0; side * side];
    patch_into(values, shape, reference, side, &mut ref_patch);

    let rows = window(reference.row, shape.rows - side + 1, cfg.search_side);
    let cols = window(reference.col, shape.cols - side + 1, cfg.search_side);
    let depth = cfg.search_depth.min(shape.frames);
    let frames = window(reference.frame, shape.frames, depth);

    let mut candidates = Vec::with_capacity(capacity);
    for frame in frames {
        for row in rows.clone() {
            for col in cols.clone() {
                let at = PatchCoord { frame, row, col };
                if at != reference {
                    candidates.push((patch_distance(values, shape, at, side, &ref_patch), at));
                }
            }
        }
    }

    let order = |a: &(f64, PatchCoord), b: &(f64, PatchCoord)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    let keep = cfg.group_size - 1;
    if keep > 0 && keep < candidates.len() {
        candidates.select_nth_unstable_by(keep - 1, order);
        candidates.truncate(keep);
    }
    candidates.truncate(keep);
    candidates.sort_unstable_by(order);

    let mut coords = Vec::with_capacity(cfg.group_size);
    let mut distances = Vec::with_capacity(cfg.group_size);
    coords.push(reference);
    distances.push(0.0);
    for (d, at) in candidates {
        coords.push(at);
        distances.push(d);
    }
    Ok((coords, distances))
}

/// The `group_size` patches closest (squared Euclidean) to the reference in
/// its search window. The reference is column 0; the rest are sorted by
/// distance, ties broken by (frame, row, col).
pub fn block_match(cube: &FrameCube, reference: PatchCoord, cfg: &PatchConfig) -> Result<PatchGroup> {
    let (coords, distances) = match_patches(cube.values(), cube.shape(), reference, cfg)?;
    let matrix = extract_group(cube.values(), cube.shape(), &coords, cfg.patch_side);
    Ok(PatchGroup {
        ref_index: 0,
        coords,
        distances,
        matrix,
    })
}

/// Block matching for every reference, in parallel. Group `i` has `ref_index = i`.
pub fn match_all(values: &[f64], shape: Shape, refs: &[PatchCoord], cfg: &PatchConfig) -> Result<Vec<Vec<PatchCoord>>> {
    refs.par_iter()
        .map(|&r| match_patches(values, shape, r, cfg).map(|(c, _)| c))
        .collect()
}

/// Stacks the patches at `coords` as columns of a `side² × coords.len()` matrix.
pub fn extract_group(values: &[f64], shape: Shape, coords: &[PatchCoord], side: usize) -> DMatrix<f64> {
    let d = side * side;
    let mut m = DMatrix::zeros(d, coords.len());
    for (j, &at) in coords.iter().enumerate() {
        patch_into(values, shape, at, side, m.column_mut(j).as_mut_slice());
    }
    m
}

/// Averages every patch estimate back into a cube, unweighted.
pub fn aggregate(groups: &[PatchGroup], shape: Shape, peak: f64) -> Result<FrameCube> {
    let parts: Vec<(&[PatchCoord], &DMatrix<f64>)> =
        groups.iter().map(|g| (g.coords.as_slice(), &g.matrix)).collect();
    let values = aggregate_flat(&parts, shape)?;
    FrameCube::with_peak(shape, values, peak)
}

/// Flat-vector aggregation over `(coords, estimate)` pairs.
pub fn aggregate_flat(groups: &[(&[PatchCoord], &DMatrix<f64>)], shape: Shape) -> Result<Vec<f64>> {
    let len = shape.len();
    let (sum, count) = groups
        .par_iter()
        .fold(
            || (vec![0.0f64; len], vec![0u32; len]),
            |(mut sum, mut count), (coords, est)| {
                let side = (est.nrows() as f64).sqrt().round() as usize;
                debug_assert_eq!(side * side, est.nrows());
                for (j, at) in coords.iter().enumerate() {
                    let col = est.column(j);
                    for r in 0..side {
                        let base = shape.index(at.frame, at.row + r, at.col);
                        for c in 0..side {
                            sum[base + c] += col[r * side + c];
                            count[base + c] += 1;
                        }
                    }
                }
                (sum, count)
            },
        )
        .reduce(
            || (vec![0.0f64; len], vec![0u32; len]),
            |(mut s1, mut c1), (s2, c2)| {
                s1.iter_mut().zip(&s2).for_each(|(a, b)| *a += b);
                c1.iter_mut().zip(&c2).for_each(|(a, b)| *a += b);
                (s1, c1)
            },
        );
    if let Some(p) = count.iter().position(|&c| c == 0) {
        let (frame, row, col) = shape.coords(p);
        return Err(Error::Uncovered { frame, row, col });
    }
    Ok(sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cube(shape: Shape, seed: u64) -> FrameCube {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        FrameCube::new(shape, (0..shape.len()).map(|_| rng.random::<f64>() * 255.0).collect()).unwrap()
    }

    fn cfg(side: usize, stride: usize, m: usize) -> PatchConfig {
        PatchConfig {
            stride,
            ..PatchConfig::new(side, m)
        }
    }

    #[test]
    fn grid_counts_and_offsets() {
        let g = reference_grid(Shape::new(8, 8, 1), &cfg(4, 4, 1)).unwrap();
        assert_eq!(g.len(), 4);
        let rows: Vec<usize> = g.iter().map(|c| c.row).collect();
        assert_eq!(rows, vec![0, 0, 4, 4]);

        let dense = reference_grid(Shape::new(8, 7, 2), &cfg(3, 1, 1)).unwrap();
        assert_eq!(dense.len(), 2 * 6 * 5);

        assert_eq!(axis_offsets(10, 4, 3), vec![0, 3, 6]);
        assert_eq!(axis_offsets(11, 4, 3), vec![0, 3, 6, 7]);
        assert!(reference_grid(Shape::new(3, 8, 1), &cfg(4, 1, 1)).is_err());
    }

    #[test]
    fn snapped_grid_covers_every_pixel() {
        for (len, patch, stride) in [(10, 4, 3), (11, 4, 3), (32, 6, 5), (32, 9, 8), (7, 7, 6)] {
            let offsets = axis_offsets(len, patch, stride);
            let mut covered = vec![false; len];
            for o in offsets {
                covered[o..o + patch].iter_mut().for_each(|c| *c = true);
            }
            assert!(covered.iter().all(|&c| c), "{len} {patch} {stride}");
        }
    }

    #[test]
    fn constant_cube_matches_in_lexicographic_order() {
        let shape = Shape::new(6, 6, 2);
        let cube = FrameCube::new(shape, vec![7.0; shape.len()]).unwrap();
        let c = cfg(2, 1, 5);
        let reference = PatchCoord::new(1, 2, 2);
        let g = block_match(&cube, reference, &c).unwrap();
        assert_eq!(g.coords[0], reference);
        assert_eq!(
            &g.coords[1..],
            &[
                PatchCoord::new(0, 0, 0),
                PatchCoord::new(0, 0, 1),
                PatchCoord::new(0, 0, 2),
                PatchCoord::new(0, 0, 3),
            ]
        );
        assert!(g.distances.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn exact_duplicate_is_first_match() {
        let shape = Shape::new(10, 10, 2);
        let mut values = random_cube(shape, 9).into_values();
        let side = 3;
        let src = PatchCoord::new(0, 1, 1);
        let dst = PatchCoord::new(1, 6, 5);
        for r in 0..side {
            for c in 0..side {
                values[shape.index(dst.frame, dst.row + r, dst.col + c)] =
                    values[shape.index(src.frame, src.row + r, src.col + c)];
            }
        }
        let cube = FrameCube::new(shape, values).unwrap();
        let g = block_match(&cube, src, &cfg(side, 1, 4)).unwrap();
        assert_eq!(g.coords[1], dst);
        assert_eq!(g.distances[1], 0.0);
    }

    #[test]
    fn matches_equal_exhaustive_search() {
        let shape = Shape::new(12, 12, 4);
        let cube = random_cube(shape, 4);
        let c = PatchConfig {
            search_side: 7,
            search_depth: 3,
            ..cfg(3, 2, 5)
        };
        for reference in [PatchCoord::new(0, 0, 0), PatchCoord::new(2, 5, 6), PatchCoord::new(3, 9, 9)] {
            let g = block_match(&cube, reference, &c).unwrap();
            // oracle: enumerate the clamped window directly
            let avail = 12 - 3 + 1;
            let lo = |center: usize, size: usize, avail: usize| center.saturating_sub(size / 2).min(avail - size);
            let (r0, c0, f0) = (lo(reference.row, 7, avail), lo(reference.col, 7, avail), lo(reference.frame, 3, 4));
            let mut all = Vec::new();
            for f in f0..f0 + 3 {
                for r in r0..r0 + 7 {
                    for cc in c0..c0 + 7 {
                        let at = PatchCoord::new(f, r, cc);
                        if at == reference {
                            continue;
                        }
                        let mut d = 0.0;
                        for dr in 0..3 {
                            for dc in 0..3 {
                                let a = cube.get(f, r + dr, cc + dc);
                                let b = cube.get(reference.frame, reference.row + dr, reference.col + dc);
                                d += (a - b) * (a - b);
                            }
                        }
                        all.push((d, at));
                    }
                }
            }
            all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let expected: Vec<PatchCoord> = std::iter::once(reference).chain(all.iter().take(4).map(|p| p.1)).collect();
            assert_eq!(g.coords, expected);
            assert!(g.distances.windows(2).all(|w| w[0] <= w[1]));
            for (j, at) in g.coords.iter().enumerate() {
                for dr in 0..3 {
                    for dc in 0..3 {
                        assert_eq!(g.matrix[(dr * 3 + dc, j)], cube.get(at.frame, at.row + dr, at.col + dc));
                    }
                }
            }
        }
    }

    #[test]
    fn too_few_candidates() {
        let cube = random_cube(Shape::new(4, 4, 1), 1);
        let err = block_match(&cube, PatchCoord::new(0, 0, 0), &cfg(3, 1, 5)).unwrap_err();
        assert!(matches!(err, Error::TooFewCandidates { needed: 5, available: 4 }));
    }

    #[test]
    fn aggregate_averages_overlaps() {
        let shape = Shape::new(2, 3, 1);
        let g = |col: usize, v: f64| PatchGroup {
            ref_index: 0,
            coords: vec![PatchCoord::new(0, 0, col)],
            distances: vec![0.0],
            matrix: DMatrix::from_element(4, 1, v),
        };
        let out = aggregate(&[g(0, 1.0), g(1, 3.0)], shape, 255.0).unwrap();
        assert_eq!(out.values(), &[1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);

        let err = aggregate(&[g(0, 1.0)], shape, 255.0).unwrap_err();
        assert!(matches!(err, Error::Uncovered { frame: 0, row: 0, col: 2 }));
    }

    #[test]
    fn aggregate_matches_scatter_oracle() {
        let shape = Shape::new(9, 8, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let side = 3;
        let refs = reference_grid(shape, &cfg(side, 2, 1)).unwrap();
        let groups: Vec<PatchGroup> = refs
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                let extra = PatchCoord::new(rng.random_range(0..2), rng.random_range(0..7), rng.random_range(0..6));
                let coords = vec![r, extra];
                PatchGroup {
                    ref_index: i,
                    distances: vec![0.0, 1.0],
                    matrix: DMatrix::from_fn(9, 2, |_, _| rng.random::<f64>()),
                    coords,
                }
            })
            .collect();
        let out = aggregate(&groups, shape, 1.0).unwrap();

        let mut sum = vec![0.0; shape.len()];
        let mut cnt = vec![0.0; shape.len()];
        for g in &groups {
            for (j, at) in g.coords.iter().enumerate() {
                for r in 0..side {
                    for c in 0..side {
                        let p = shape.index(at.frame, at.row + r, at.col + c);
                        sum[p] += g.matrix[(r * side + c, j)];
                        cnt[p] += 1.0;
                    }
                }
            }
        }
        for p in 0..shape.len() {
            assert!((out.values()[p] - sum[p] / cnt[p]).abs() < 1e-12);
        }
    }

    #[test]
    fn extract_then_aggregate_is_identity() {
        let shape = Shape::new(11, 10, 3);
        let cube = random_cube(shape, 2);
        let c = PatchConfig {
            search_depth: 3,
            ..cfg(4, 3, 6)
        };
        let refs = reference_grid(shape, &c).unwrap();
        let groups: Vec<PatchGroup> = refs.iter().map(|&r| block_match(&cube, r, &c).unwrap()).collect();
        let out = aggregate(&groups, shape, cube.peak()).unwrap();
        for (a, b) in out.values().iter().zip(cube.values()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }
}
