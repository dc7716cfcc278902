//! Exact Euclidean distance transform over a mask.
//!
//! The zero set is the mask complement extended by a virtual out-of-grid
//! border (so the transform behaves as if the background filled all of
//! integer space outside the mask) plus any explicitly supplied points.
//! Distances are spacing-scaled and exact: the in-grid part uses the
//! separable lower-envelope scheme on squared distances, the border part has
//! a closed form, and extra points are folded in with a direct minimum.
//! Folding extra points one at a time makes the incremental seeding update
//! and a from-scratch recomputation produce identical fields.

use crate::error::{Error, Result};
use crate::grid::{round_point, to_fvec, Grid};
use crate::volume::{Mask, SeedSet};

/// Per-voxel spacing-scaled distance to the nearest zero-set voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    pub(crate) grid: Grid,
    values: Vec<f64>,
}

impl DistanceField {
    pub fn ndim(&self) -> usize {
        self.grid.ndim
    }

    pub fn dims(&self) -> Vec<usize> {
        self.grid.dims_vec()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    /// Folds one more zero point into the field (minimum with the exact
    /// distance to `point` rounded to its voxel). Equivalent to recomputing
    /// the transform with the point added to the zero set.
    pub fn add_zero_point(&mut self, point: &[f64]) -> Result<()> {
        let p = self.grid.pad_fvec(point)?;
        let r = round_point(p);
        let rp = [r[0] as f64, r[1] as f64, r[2] as f64];
        for idx in 0..self.values.len() {
            if self.values[idx] == 0.0 {
                continue;
            }
            let d = self.grid.dist2(to_fvec(self.grid.coords(idx)), rp).sqrt();
            if d < self.values[idx] {
                self.values[idx] = d;
            }
        }
        Ok(())
    }
}

/// Distance from a voxel to the nearest out-of-grid integer point along the
/// real axes.
#[inline]
fn border_distance(grid: &Grid, c: [usize; 3]) -> f64 {
    let mut best = f64::INFINITY;
    for k in 0..grid.ndim {
        let inward = grid.spacing[k] * (c[k] as f64 + 1.0);
        let outward = grid.spacing[k] * ((grid.dims[k] - c[k]) as f64);
        best = best.min(inward).min(outward);
    }
    best
}

/// One-dimensional squared-distance transform (lower envelope of parabolas)
/// with weight `w` applied to squared index differences.
fn dt_line(f: &[f64], w: f64, d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut nv = 0usize;
    for q in 0..n {
        if f[q] == f64::INFINITY {
            continue;
        }
        loop {
            if nv == 0 {
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                z[1] = f64::INFINITY;
                nv = 1;
                break;
            }
            let p = v[nv - 1];
            let qf = q as f64;
            let pf = p as f64;
            let s = ((f[q] + w * (qf * qf)) - (f[p] + w * (pf * pf))) / (2.0 * w * (qf - pf));
            if s <= z[nv - 1] {
                nv -= 1;
            } else {
                v[nv] = q;
                z[nv] = s;
                z[nv + 1] = f64::INFINITY;
                nv += 1;
                break;
            }
        }
    }
    if nv == 0 {
        d[..n].fill(f64::INFINITY);
        return;
    }
    let mut k = 0usize;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let dq = q as f64 - v[k] as f64;
        d[q] = w * (dq * dq) + f[v[k]];
    }
}

/// Squared distance to the nearest in-grid zero voxel, by separable passes.
/// Passes run over axis 2, then 1, then 0 so the accumulated sum matches the
/// canonical order of [`Grid::dist2`].
fn squared_edt(grid: &Grid, zero: &[bool]) -> Vec<f64> {
    let len = grid.len();
    let mut sq: Vec<f64> = zero
        .iter()
        .map(|&z| if z { 0.0 } else { f64::INFINITY })
        .collect();
    let weights = grid.weights();
    let [d0, d1, d2] = grid.dims;
    let max_dim = d0.max(d1).max(d2);
    let mut f = vec![0.0f64; max_dim];
    let mut d = vec![0.0f64; max_dim];
    let mut v = vec![0usize; max_dim];
    let mut z = vec![0.0f64; max_dim + 1];

    // axis 2: contiguous lines
    if d2 > 1 {
        for line in sq.chunks_mut(d2) {
            f[..d2].copy_from_slice(line);
            dt_line(&f[..d2], weights[2], &mut d[..d2], &mut v, &mut z);
            line.copy_from_slice(&d[..d2]);
        }
    }
    // axis 1: stride d2
    if d1 > 1 {
        for i0 in 0..d0 {
            for i2 in 0..d2 {
                let base = (i0 * d1) * d2 + i2;
                for i1 in 0..d1 {
                    f[i1] = sq[base + i1 * d2];
                }
                dt_line(&f[..d1], weights[1], &mut d[..d1], &mut v, &mut z);
                for i1 in 0..d1 {
                    sq[base + i1 * d2] = d[i1];
                }
            }
        }
    }
    // axis 0: stride d1*d2
    if d0 > 1 {
        let stride = d1 * d2;
        for rest in 0..stride {
            for i0 in 0..d0 {
                f[i0] = sq[rest + i0 * stride];
            }
            dt_line(&f[..d0], weights[0], &mut d[..d0], &mut v, &mut z);
            for i0 in 0..d0 {
                sq[rest + i0 * stride] = d[i0];
            }
        }
    }
    debug_assert_eq!(sq.len(), len);
    sq
}

/// Exact spacing-scaled Euclidean distance transform of `mask` relative to
/// the zero set `background ∪ virtual border ∪ extra_zero_points`.
pub fn exact_edt(
    mask: &Mask,
    extra_zero_points: &SeedSet,
    spacing: &[f64],
) -> Result<DistanceField> {
    if mask.count() == 0 {
        return Err(Error::EmptyMask);
    }
    let grid = Grid::new(&mask.dims(), spacing)?;
    let zero: Vec<bool> = mask.bits().iter().map(|b| !b).collect();
    let sq = squared_edt(&grid, &zero);
    let mut values = vec![0.0f64; grid.len()];
    for idx in 0..values.len() {
        let b = border_distance(&grid, grid.coords(idx));
        values[idx] = sq[idx].sqrt().min(b);
    }
    let mut field = DistanceField { grid, values };
    for p in extra_zero_points.iter() {
        field.add_zero_point(p)?;
    }
    debug_assert!({
        let diag = field.grid.diagonal();
        field.values.iter().all(|&v| v <= diag)
    });
    Ok(field)
}

/// The in-mask voxel maximizing the distance field. Ties break to the
/// lexicographically smallest coordinate (row-major scan order).
pub fn farthest_point(field: &DistanceField, mask: &Mask) -> Result<Vec<usize>> {
    if !field.grid.same_shape(&mask.grid) {
        return Err(Error::DimsMismatch {
            expected: field.dims(),
            got: mask.dims(),
        });
    }
    let mut best_idx = None;
    let mut best_val = f64::NEG_INFINITY;
    for (idx, &b) in mask.bits().iter().enumerate() {
        if b && field.values[idx] > best_val {
            best_val = field.values[idx];
            best_idx = Some(idx);
        }
    }
    let idx = best_idx.ok_or(Error::EmptyMask)?;
    let c = field.grid.coords(idx);
    Ok(c[..field.grid.ndim].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::FVec3;
    use crate::volume::Mask;
    use proptest::prelude::*;

    fn empty_seeds(ndim: usize) -> SeedSet {
        SeedSet::new(ndim, vec![]).unwrap()
    }

    /// O(V^2) reference: literal minimum over background voxels, the
    /// one-voxel out-of-grid shell and the extra points.
    fn brute_force_edt(mask: &Mask, extra: &[Vec<f64>], spacing: &[f64]) -> Vec<f64> {
        let grid = Grid::new(&mask.dims(), spacing).unwrap();
        let ndim = grid.ndim;
        let mut zeros: Vec<FVec3> = Vec::new();
        for (idx, &b) in mask.bits().iter().enumerate() {
            if !b {
                zeros.push(to_fvec(grid.coords(idx)));
            }
        }
        // out-of-grid shell over the real axes
        let lo: Vec<i64> = (0..ndim).map(|_| -1).collect();
        let hi: Vec<i64> = (0..ndim).map(|k| grid.dims[k] as i64).collect();
        let mut cursor: Vec<i64> = lo.clone();
        'outer: loop {
            let outside = (0..ndim).any(|k| cursor[k] == -1 || cursor[k] == hi[k]);
            if outside {
                let mut p = [0.0f64; 3];
                for k in 0..ndim {
                    p[k] = cursor[k] as f64;
                }
                zeros.push(p);
            }
            for k in (0..ndim).rev() {
                cursor[k] += 1;
                if cursor[k] <= hi[k] {
                    continue 'outer;
                }
                cursor[k] = lo[k];
            }
            break;
        }
        for e in extra {
            let p = grid.pad_fvec(e).unwrap();
            let r = round_point(p);
            zeros.push([r[0] as f64, r[1] as f64, r[2] as f64]);
        }
        (0..grid.len())
            .map(|idx| {
                let x = to_fvec(grid.coords(idx));
                zeros
                    .iter()
                    .map(|z| grid.dist2(x, *z).sqrt())
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    fn random_mask(rng: &mut impl rand::Rng, dims: &[usize]) -> Mask {
        let len: usize = dims.iter().product();
        loop {
            let bits: Vec<bool> = (0..len).map(|_| rng.random_bool(0.55)).collect();
            if bits.iter().any(|b| *b) {
                return Mask::new(dims, bits).unwrap();
            }
        }
    }

    #[test]
    fn all_foreground_3x3() {
        let m = Mask::full(&[3, 3]).unwrap();
        let f = exact_edt(&m, &empty_seeds(2), &[1.0, 1.0]).unwrap();
        assert_eq!(f.get(f.grid.index([1, 1, 0])), 2.0);
        assert_eq!(f.get(f.grid.index([0, 0, 0])), 1.0);
        assert_eq!(f.get(f.grid.index([2, 2, 0])), 1.0);
    }

    #[test]
    fn zero_at_extra_points() {
        let m = Mask::full(&[5, 5]).unwrap();
        let seeds = SeedSet::new(2, vec![vec![2.0, 3.0]]).unwrap();
        let f = exact_edt(&m, &seeds, &[1.0, 1.0]).unwrap();
        assert_eq!(f.get(f.grid.index([2, 3, 0])), 0.0);
    }

    #[test]
    fn row_mask_sees_virtual_border() {
        let m = Mask::full(&[1, 5]).unwrap();
        let f = exact_edt(&m, &empty_seeds(2), &[1.0, 1.0]).unwrap();
        assert_eq!(f.get(f.grid.index([0, 2, 0])), 1.0);
    }

    #[test]
    fn farthest_point_5x5() {
        let m = Mask::full(&[5, 5]).unwrap();
        let f = exact_edt(&m, &empty_seeds(2), &[1.0, 1.0]).unwrap();
        let p = farthest_point(&f, &m).unwrap();
        assert_eq!(p, vec![2, 2]);
        assert_eq!(f.get(f.grid.index([2, 2, 0])), 3.0);
    }

    #[test]
    fn farthest_point_tie_break() {
        let m = Mask::full(&[5, 5]).unwrap();
        let seeds = SeedSet::new(2, vec![vec![2.0, 2.0]]).unwrap();
        let f = exact_edt(&m, &seeds, &[1.0, 1.0]).unwrap();
        let p = farthest_point(&f, &m).unwrap();
        assert_eq!(p, vec![1, 1]);
        let d = f.get(f.grid.index([1, 1, 0]));
        assert!((d - 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn farthest_point_single_voxel() {
        let mut bits = vec![false; 9];
        bits[4] = true;
        let m = Mask::new(&[3, 3], bits).unwrap();
        let f = exact_edt(&m, &empty_seeds(2), &[1.0, 1.0]).unwrap();
        assert_eq!(farthest_point(&f, &m).unwrap(), vec![1, 1]);
    }

    #[test]
    fn incremental_equals_from_scratch() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        use rand::SeedableRng;
        for _ in 0..20 {
            use rand::Rng;
            let dims = [rng.random_range(3..14usize), rng.random_range(3..14usize)];
            let m = random_mask(&mut rng, &dims);
            let fg = m.foreground();
            let pick = fg[rng.random_range(0..fg.len())];
            let c = m.grid.coords(pick);
            let p = vec![c[0] as f64, c[1] as f64];

            let mut inc = exact_edt(&m, &empty_seeds(2), &[1.0, 1.0]).unwrap();
            inc.add_zero_point(&p).unwrap();
            let seeds = SeedSet::new(2, vec![p]).unwrap();
            let scratch = exact_edt(&m, &seeds, &[1.0, 1.0]).unwrap();
            assert_eq!(inc.values(), scratch.values());
        }
    }

    #[test]
    fn matches_brute_force_2d_and_3d() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for trial in 0..24 {
            let (dims, spacing): (Vec<usize>, Vec<f64>) = if trial % 2 == 0 {
                (
                    vec![rng.random_range(2..12), rng.random_range(2..12)],
                    vec![
                        [1.0, 0.5, 2.0][rng.random_range(0..3)],
                        [1.0, 0.5, 2.0][rng.random_range(0..3)],
                    ],
                )
            } else {
                (
                    vec![
                        rng.random_range(2..7),
                        rng.random_range(2..7),
                        rng.random_range(2..7),
                    ],
                    vec![1.0, 1.0, [1.0, 2.0][rng.random_range(0..2)]],
                )
            };
            let m = random_mask(&mut rng, &dims);
            let fg = m.foreground();
            let n_extra = rng.random_range(0..3.min(fg.len()));
            let extra: Vec<Vec<f64>> = (0..n_extra)
                .map(|_| {
                    let c = m.grid.coords(fg[rng.random_range(0..fg.len())]);
                    c[..dims.len()].iter().map(|&x| x as f64).collect()
                })
                .collect();
            let seeds = SeedSet::new(dims.len(), extra.clone()).unwrap();
            let f = exact_edt(&m, &seeds, &spacing).unwrap();
            let oracle = brute_force_edt(&m, &extra, &spacing);
            for idx in 0..oracle.len() {
                assert!(
                    (f.get(idx) - oracle[idx]).abs() < 1e-9,
                    "trial {trial} voxel {idx}: {} vs oracle {}",
                    f.get(idx),
                    oracle[idx]
                );
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn adding_points_never_increases(seed in 0u64..500) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let dims = [rng.random_range(2..10usize), rng.random_range(2..10usize)];
            let m = random_mask(&mut rng, &dims);
            let base = exact_edt(&m, &empty_seeds(2), &[1.0, 1.0]).unwrap();
            let fg = m.foreground();
            let c = m.grid.coords(fg[rng.random_range(0..fg.len())]);
            let seeds = SeedSet::new(2, vec![vec![c[0] as f64, c[1] as f64]]).unwrap();
            let more = exact_edt(&m, &seeds, &[1.0, 1.0]).unwrap();
            for idx in 0..base.values().len() {
                prop_assert!(more.get(idx) <= base.get(idx) + 1e-12);
            }
        }

        #[test]
        fn one_lipschitz_between_neighbors(seed in 0u64..500) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let dims = [rng.random_range(2..10usize), rng.random_range(2..10usize)];
            let sp = [[1.0, 0.5, 2.0][rng.random_range(0..3)], [1.0, 0.5, 2.0][rng.random_range(0..3)]];
            let m = random_mask(&mut rng, &dims);
            let f = exact_edt(&m, &empty_seeds(2), &sp).unwrap();
            for i0 in 0..dims[0] {
                for i1 in 0..dims[1] {
                    let here = f.get(f.grid.index([i0, i1, 0]));
                    if i0 + 1 < dims[0] {
                        let there = f.get(f.grid.index([i0 + 1, i1, 0]));
                        prop_assert!((here - there).abs() <= sp[0] + 1e-12);
                    }
                    if i1 + 1 < dims[1] {
                        let there = f.get(f.grid.index([i0, i1 + 1, 0]));
                        prop_assert!((here - there).abs() <= sp[1] + 1e-12);
                    }
                }
            }
        }

        #[test]
        fn bounded_by_grid_diagonal(seed in 0u64..200) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let dims = [rng.random_range(2..10usize), rng.random_range(2..10usize)];
            let m = random_mask(&mut rng, &dims);
            let f = exact_edt(&m, &empty_seeds(2), &[1.0, 1.0]).unwrap();
            let diag = f.grid.diagonal();
            for &v in f.values() {
                prop_assert!(v <= diag);
            }
        }
    }
}
