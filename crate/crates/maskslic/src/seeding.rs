//! Seed placement inside a mask: iterative farthest-point selection on the
//! distance transform, spatial-only relaxation of the selected points, and
//! the equidistant grid used by the whole-image baselines.
//!
//! Relaxation does all its arithmetic relative to the mask's bounding box, so
//! translating a mask translates the result exactly (down to the last bit).

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;

use crate::edt::{exact_edt, farthest_point};
use crate::error::{Error, Result};
use crate::grid::{round_point, to_fvec, FVec3, Grid, IVec3};
use crate::volume::{Mask, SeedSet};

/// Places exactly `n_regions` seeds, each at the in-mask voxel farthest from
/// the background, the virtual border and all previously placed seeds.
pub fn place_seeds(mask: &Mask, n_regions: usize, spacing: &[f64]) -> Result<SeedSet> {
    if n_regions == 0 {
        return Err(Error::InvalidInput("n_regions must be at least 1".into()));
    }
    if n_regions > mask.count() {
        return Err(Error::TooManySeeds {
            requested: n_regions,
            available: mask.count(),
        });
    }
    let ndim = mask.ndim();
    let mut field = exact_edt(mask, &SeedSet::new(ndim, vec![])?, spacing)?;
    let mut points: Vec<FVec3> = Vec::with_capacity(n_regions);
    for k in 0..n_regions {
        let p = farthest_point(&field, mask)?;
        let fp: Vec<f64> = p.iter().map(|&x| x as f64).collect();
        let mut q = [0.0f64; 3];
        q[..ndim].copy_from_slice(&fp);
        points.push(q);
        if k + 1 < n_regions {
            field.add_zero_point(&fp)?;
        }
    }
    Ok(SeedSet::from_canonical(ndim, points))
}

/// Bucket grid over seed positions for deterministic nearest-seed queries
/// (lowest seed index wins equal distances).
pub(crate) struct NearestSeedIndex {
    cells: HashMap<IVec3, Vec<u32>>,
    cell_size: f64,
    weights: FVec3,
    spacing: FVec3,
    max_rings: i64,
}

impl NearestSeedIndex {
    pub fn build(grid: &Grid, seeds: &[FVec3], cell_size: f64) -> Self {
        let cell_size = if cell_size.is_finite() && cell_size > 0.0 {
            cell_size
        } else {
            1.0
        };
        let mut cells: HashMap<IVec3, Vec<u32>> = HashMap::new();
        for (i, s) in seeds.iter().enumerate() {
            let key = Self::key(grid.spacing, cell_size, *s);
            cells.entry(key).or_default().push(i as u32);
        }
        let extent = (0..3)
            .map(|k| grid.dims[k] as f64 * grid.spacing[k])
            .fold(0.0f64, f64::max);
        let max_rings = (extent / cell_size).ceil() as i64 + 2;
        NearestSeedIndex {
            cells,
            cell_size,
            weights: grid.weights(),
            spacing: grid.spacing,
            max_rings,
        }
    }

    #[inline]
    fn key(spacing: FVec3, cell: f64, p: FVec3) -> IVec3 {
        [
            (p[0] * spacing[0] / cell).floor() as i64,
            (p[1] * spacing[1] / cell).floor() as i64,
            (p[2] * spacing[2] / cell).floor() as i64,
        ]
    }

    #[inline]
    fn dist2(&self, a: FVec3, b: FVec3) -> f64 {
        let d2 = a[2] - b[2];
        let d1 = a[1] - b[1];
        let d0 = a[0] - b[0];
        let mut acc = self.weights[2] * (d2 * d2);
        acc += self.weights[1] * (d1 * d1);
        acc += self.weights[0] * (d0 * d0);
        acc
    }

    /// Index of the seed nearest to `p` in spacing-scaled distance.
    pub fn nearest(&self, seeds: &[FVec3], p: FVec3) -> Option<(usize, f64)> {
        let center = Self::key(self.spacing, self.cell_size, p);
        let mut best: Option<(f64, u32)> = None;
        for ring in 0..=self.max_rings {
            // all candidates closer than this bound have been seen already
            let bound = (ring - 1).max(0) as f64 * self.cell_size;
            if let Some((bd2, _)) = best {
                if bound * bound > bd2 {
                    break;
                }
            }
            self.visit_ring(center, ring, |cell| {
                if let Some(ids) = self.cells.get(&cell) {
                    for &id in ids {
                        let d2 = self.dist2(p, seeds[id as usize]);
                        let better = match best {
                            None => true,
                            Some((bd2, bid)) => d2 < bd2 || (d2 == bd2 && id < bid),
                        };
                        if better {
                            best = Some((d2, id));
                        }
                    }
                }
            });
        }
        best.map(|(d2, id)| (id as usize, d2))
    }

    fn visit_ring(&self, center: IVec3, ring: i64, mut f: impl FnMut(IVec3)) {
        if ring == 0 {
            f(center);
            return;
        }
        for a in -ring..=ring {
            for b in -ring..=ring {
                for c in -ring..=ring {
                    if a.abs().max(b.abs()).max(c.abs()) == ring {
                        f([center[0] + a, center[1] + b, center[2] + c]);
                    }
                }
            }
        }
    }
}

/// Spatial-only local k-means over the seed positions: assign every in-mask
/// voxel to its nearest seed, move each seed to the centroid of its voxels,
/// repeat. Returns the relaxed seeds snapped to distinct in-mask voxels.
pub fn relax_seeds(
    mask: &Mask,
    seeds: &SeedSet,
    spacing: &[f64],
    max_iters: usize,
) -> Result<SeedSet> {
    let grid = Grid::new(&mask.dims(), spacing)?;
    let ndim = grid.ndim;
    if seeds.is_empty() {
        return Err(Error::InvalidInput("no seeds to relax".into()));
    }
    seeds.validate_for(mask)?;

    let (anchor, _) = mask.bbox();
    let anchor_f = [anchor[0] as f64, anchor[1] as f64, anchor[2] as f64];
    let fg = mask.foreground();
    let rel_voxels: Vec<FVec3> = fg
        .iter()
        .map(|&idx| {
            let c = to_fvec(grid.coords(idx));
            [c[0] - anchor_f[0], c[1] - anchor_f[1], c[2] - anchor_f[2]]
        })
        .collect();

    let mut rel_seeds: Vec<FVec3> = seeds
        .points
        .iter()
        .map(|p| [p[0] - anchor_f[0], p[1] - anchor_f[1], p[2] - anchor_f[2]])
        .collect();

    let scaled_volume: f64 = mask.count() as f64 * grid.spacing[..ndim].iter().product::<f64>();
    let cell = (scaled_volume / rel_seeds.len() as f64).powf(1.0 / ndim as f64);

    let mut assignment = vec![0u32; rel_voxels.len()];
    for _ in 0..max_iters {
        let index = NearestSeedIndex::build(&grid, &rel_seeds, cell);
        assignment
            .par_iter_mut()
            .zip(rel_voxels.par_iter())
            .for_each(|(a, v)| {
                let (id, _) = index.nearest(&rel_seeds, *v).expect("non-empty seed set");
                *a = id as u32;
            });

        // deterministic accumulation: voxels in ascending linear order
        let mut sums = vec![[0.0f64; 3]; rel_seeds.len()];
        let mut counts = vec![0usize; rel_seeds.len()];
        for (v, &a) in rel_voxels.iter().zip(assignment.iter()) {
            let s = &mut sums[a as usize];
            s[0] += v[0];
            s[1] += v[1];
            s[2] += v[2];
            counts[a as usize] += 1;
        }
        let mut max_move = 0.0f64;
        for (i, seed) in rel_seeds.iter_mut().enumerate() {
            if counts[i] == 0 {
                continue; // empty cluster keeps its position
            }
            let n = counts[i] as f64;
            let fresh = [sums[i][0] / n, sums[i][1] / n, sums[i][2] / n];
            let m = ((fresh[0] - seed[0]).powi(2)
                + (fresh[1] - seed[1]).powi(2)
                + (fresh[2] - seed[2]).powi(2))
            .sqrt();
            max_move = max_move.max(m);
            *seed = fresh;
        }
        if max_move < 0.5 {
            break;
        }
    }

    // snap to distinct in-mask voxels; collisions send the later seed to its
    // nearest unoccupied voxel
    let mut occupied: HashSet<usize> = HashSet::new();
    let mut out: Vec<FVec3> = Vec::with_capacity(rel_seeds.len());
    for seed in &rel_seeds {
        let rel = snap_to_mask(&grid, mask, anchor, *seed, &occupied)?;
        let abs_idx = grid.index([
            (rel[0] + anchor[0] as f64) as usize,
            (rel[1] + anchor[1] as f64) as usize,
            (rel[2] + anchor[2] as f64) as usize,
        ]);
        occupied.insert(abs_idx);
        out.push([
            rel[0] + anchor_f[0],
            rel[1] + anchor_f[1],
            rel[2] + anchor_f[2],
        ]);
    }
    Ok(SeedSet::from_canonical(ndim, out))
}

/// Nearest unoccupied in-mask voxel to a relative position, spacing-scaled
/// distance, lexicographic tie-break. Searches expanding voxel rings.
fn snap_to_mask(
    grid: &Grid,
    mask: &Mask,
    anchor: IVec3,
    rel: FVec3,
    occupied: &HashSet<usize>,
) -> Result<FVec3> {
    let start = round_point(rel);
    let min_spacing = grid.spacing[..grid.ndim]
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let max_extent = (0..3).map(|k| grid.dims[k] as i64).max().unwrap();
    let mut best: Option<(f64, IVec3)> = None;
    for ring in 0..=(2 * max_extent + 2) {
        if let Some((bd2, _)) = best {
            let bound = min_spacing * (ring as f64 - 0.5).max(0.0);
            if bound * bound > bd2 {
                break;
            }
        }
        visit_voxel_ring(start, ring, |v| {
            let abs = [v[0] + anchor[0], v[1] + anchor[1], v[2] + anchor[2]];
            if !mask.get_at(abs) {
                return;
            }
            let abs_idx = grid.index([abs[0] as usize, abs[1] as usize, abs[2] as usize]);
            if occupied.contains(&abs_idx) {
                return;
            }
            let vf = [v[0] as f64, v[1] as f64, v[2] as f64];
            let d2 = grid.dist2(rel, vf);
            let better = match &best {
                None => true,
                Some((bd2, bv)) => d2 < *bd2 || (d2 == *bd2 && v < *bv),
            };
            if better {
                best = Some((d2, v));
            }
        });
    }
    let (_, v) = best.ok_or(Error::EmptyMask)?;
    Ok([v[0] as f64, v[1] as f64, v[2] as f64])
}

fn visit_voxel_ring(center: IVec3, ring: i64, mut f: impl FnMut(IVec3)) {
    if ring == 0 {
        f(center);
        return;
    }
    for a in -ring..=ring {
        for b in -ring..=ring {
            for c in -ring..=ring {
                if a.abs().max(b.abs()).max(c.abs()) == ring {
                    f([center[0] + a, center[1] + b, center[2] + c]);
                }
            }
        }
    }
}

/// Equidistant grid of approximately `n_regions` points over the whole grid.
///
/// Per-axis counts are chosen so the per-axis step is equal in spacing-scaled
/// units; centers sit half a step in from the boundary. The actual count is
/// the product of per-axis counts, reported back as the length of the result.
/// Accepts 1 to 3 axes (the one-axis case is useful on its own).
pub fn seed_grid(dims: &[usize], n_regions: usize, spacing: &[f64]) -> Result<SeedSet> {
    let ndim = dims.len();
    if ndim == 0 || ndim > 3 {
        return Err(Error::InvalidInput(format!(
            "seed_grid supports 1 to 3 axes, got {ndim}"
        )));
    }
    if spacing.len() != ndim {
        return Err(Error::InvalidInput("spacing length mismatch".into()));
    }
    if n_regions == 0 {
        return Err(Error::InvalidInput("n_regions must be at least 1".into()));
    }
    if dims.contains(&0) || spacing.iter().any(|&s| s <= 0.0 || !s.is_finite()) {
        return Err(Error::InvalidInput("bad dims or spacing".into()));
    }
    let extents: Vec<f64> = (0..ndim).map(|k| dims[k] as f64 * spacing[k]).collect();
    let total: f64 = extents.iter().product();
    let step = (total / n_regions as f64).powf(1.0 / ndim as f64);
    let counts: Vec<usize> = (0..ndim)
        .map(|k| ((extents[k] / step).round() as usize).clamp(1, dims[k]))
        .collect();

    let mut points: Vec<FVec3> = Vec::new();
    let mut cursor = vec![0usize; ndim];
    loop {
        let mut p = [0.0f64; 3];
        for k in 0..ndim {
            p[k] = (cursor[k] as f64 + 0.5) * dims[k] as f64 / counts[k] as f64;
        }
        points.push(p);
        let mut k = ndim;
        loop {
            if k == 0 {
                return Ok(SeedSet::from_canonical(ndim, points));
            }
            k -= 1;
            cursor[k] += 1;
            if cursor[k] < counts[k] {
                break;
            }
            cursor[k] = 0;
        }
    }
}
