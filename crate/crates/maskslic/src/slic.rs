//! Localized k-means over in-mask voxels with the combined feature/spatial
//! distance, the two grid-seeded baselines, and connectivity enforcement.
//!
//! The clustering distance is `sqrt(d_f^2 + (d_s / r)^2)` where `d_f` is the
//! Euclidean feature distance, `d_s` the spacing-scaled spatial distance and
//! `r` the compactness weight. `d_s` is used as written, not normalized by
//! the region scale, so a given `r` means different compactness at different
//! mask sizes; callers wanting scale-free behavior can multiply `r` by
//! [`region_scale`] (the CLI exposes this as a flag).
//!
//! The engine keeps every spatial computation relative to the mask bounding
//! box, which makes masked segmentations exactly equivariant under integer
//! translations of the mask (with the in-mask content).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{round_point, to_fvec, to_ivec, FVec3, Grid, IVec3};
use crate::seeding::{place_seeds, relax_seeds, seed_grid};
use crate::volume::{
    validate_pair, Backend, FeatureVolume, Labeling, Mask, SeedSet, SlicParams, BACKGROUND,
};

/// Per-region centroid record of a finished run.
#[derive(Debug, Clone)]
pub struct RegionCenter {
    /// Spatial centroid in absolute voxel-index coordinates (length ndim).
    pub spatial: Vec<f64>,
    /// Feature centroid (length channels).
    pub feature: Vec<f64>,
}

/// Final cluster state: centroids, raw assignments (pre-connectivity) and
/// the clustering objective.
#[derive(Debug, Clone)]
pub struct ClusterState {
    pub centers: Vec<RegionCenter>,
    /// Raw assignment of every in-mask voxel, before connectivity enforcement.
    pub assignments: Labeling,
    /// Sum of squared distances of assigned voxels to their centroids.
    pub objective: f64,
}

/// Everything a segmentation run produces. `labeling` has connectivity
/// enforced when the parameters request it; `state.assignments` never does.
#[derive(Debug, Clone)]
pub struct SlicRun {
    pub labeling: Labeling,
    pub state: ClusterState,
    /// Objective after each assignment phase, for convergence checks.
    pub objectives: Vec<f64>,
}

/// Combined clustering distance between a voxel and a center.
///
/// `feature_delta` and `spatial_delta` are componentwise differences;
/// the spatial part is scaled by `spacing` before taking the norm.
pub fn slic_distance(feature_delta: &[f64], spatial_delta: &[f64], spacing: &[f64], r: f64) -> f64 {
    let df2: f64 = feature_delta.iter().map(|d| d * d).sum();
    let ds2: f64 = spatial_delta
        .iter()
        .zip(spacing.iter())
        .map(|(d, s)| (s * s) * (d * d))
        .sum();
    (df2 + ds2 / (r * r)).sqrt()
}

/// Region scale `S`: the edge length of a cube holding the mask's
/// spacing-scaled volume divided by the region count.
pub fn region_scale(mask: &Mask, n_regions: usize, spacing: &[f64]) -> Result<f64> {
    let grid = Grid::new(&mask.dims(), spacing)?;
    if n_regions == 0 {
        return Err(Error::InvalidInput("n_regions must be at least 1".into()));
    }
    let unit: f64 = grid.spacing[..grid.ndim].iter().product();
    let vol = mask.count() as f64 * unit;
    Ok((vol / n_regions as f64).powf(1.0 / grid.ndim as f64))
}

struct EngineInput<'a> {
    volume: &'a FeatureVolume,
    mask: &'a Mask,
    params: &'a SlicParams,
}

/// Core localized k-means. Seeds are absolute continuous coordinates; one
/// region per seed, labels follow seed order.
fn run_slic(input: EngineInput<'_>, seeds: &SeedSet) -> Result<SlicRun> {
    let EngineInput {
        volume,
        mask,
        params,
    } = input;
    let grid = Grid::new(&mask.dims(), &volume.spacing())?;
    let ndim = grid.ndim;
    let channels = volume.channels();
    let n = seeds.len();
    if n == 0 {
        return Err(Error::InvalidInput("no seeds".into()));
    }
    let r2 = params.compactness * params.compactness;

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

    // centers, mask-relative; feature centroid initialized from the voxel the
    // seed rounds to
    let mut centers_sp: Vec<FVec3> = Vec::with_capacity(n);
    let mut centers_ft: Vec<Vec<f64>> = Vec::with_capacity(n);
    for p in &seeds.points {
        let r = round_point(*p);
        let clamped = [
            r[0].clamp(0, grid.dims[0] as i64 - 1) as usize,
            r[1].clamp(0, grid.dims[1] as i64 - 1) as usize,
            r[2].clamp(0, grid.dims[2] as i64 - 1) as usize,
        ];
        centers_sp.push([p[0] - anchor_f[0], p[1] - anchor_f[1], p[2] - anchor_f[2]]);
        centers_ft.push(volume.features_at(grid.index(clamped)).to_vec());
    }

    let scale = region_scale(mask, n, &volume.spacing())?;
    // search window half-width, index units per axis
    let mut window = [f64::INFINITY; 3];
    for k in 0..ndim {
        window[k] = 2.0 * scale / grid.spacing[k];
    }
    for w in window.iter_mut().take(3).skip(ndim) {
        *w = 0.5;
    }

    // coarse blocks for candidate lookup; exact window checks decide
    let block = [
        (window[0].ceil() as usize).clamp(1, grid.dims[0]),
        (window[1].ceil() as usize).clamp(1, grid.dims[1]),
        (window[2].ceil() as usize).clamp(1, grid.dims[2]),
    ];
    let nblocks = [
        grid.dims[0].div_ceil(block[0]),
        grid.dims[1].div_ceil(block[1]),
        grid.dims[2].div_ceil(block[2]),
    ];
    let block_index = |c: IVec3| -> usize {
        let b0 = c[0] as usize / block[0];
        let b1 = c[1] as usize / block[1];
        let b2 = c[2] as usize / block[2];
        (b0 * nblocks[1] + b1) * nblocks[2] + b2
    };

    let weights = grid.weights();
    let dist2 = |v: FVec3, vf: &[f64], c: FVec3, cf: &[f64]| -> f64 {
        let mut df2 = 0.0;
        for ch in 0..channels {
            let d = vf[ch] - cf[ch];
            df2 += d * d;
        }
        let d2 = v[2] - c[2];
        let d1 = v[1] - c[1];
        let d0 = v[0] - c[0];
        let mut ds2 = weights[2] * (d2 * d2);
        ds2 += weights[1] * (d1 * d1);
        ds2 += weights[0] * (d0 * d0);
        df2 + ds2 / r2
    };

    let mut assignment = vec![0u32; fg.len()];
    let mut assign_d2 = vec![0.0f64; fg.len()];
    let mut objectives = Vec::with_capacity(params.max_iters);

    for _iter in 0..params.max_iters.max(1) {
        // candidate lists per block, region ids ascending
        let mut candidates: Vec<Vec<u32>> = vec![Vec::new(); nblocks[0] * nblocks[1] * nblocks[2]];
        for (rid, c) in centers_sp.iter().enumerate() {
            let mut lo = [0usize; 3];
            let mut hi = [0usize; 3];
            for k in 0..3 {
                let abs = c[k] + anchor_f[k];
                let l = (abs - window[k]).floor() as i64 - 1;
                let h = (abs + window[k]).ceil() as i64 + 1;
                lo[k] = l.clamp(0, grid.dims[k] as i64 - 1) as usize / block[k];
                hi[k] = h.clamp(0, grid.dims[k] as i64 - 1) as usize / block[k];
            }
            for b0 in lo[0]..=hi[0] {
                for b1 in lo[1]..=hi[1] {
                    for b2 in lo[2]..=hi[2] {
                        candidates[(b0 * nblocks[1] + b1) * nblocks[2] + b2].push(rid as u32);
                    }
                }
            }
        }

        // assignment: per voxel, best center among those whose window covers
        // it; global fallback when no window does
        assignment
            .par_iter_mut()
            .zip(assign_d2.par_iter_mut())
            .enumerate()
            .for_each(|(vi, (a, dout))| {
                let v = rel_voxels[vi];
                let vf = volume.features_at(fg[vi]);
                let abs = [v[0] + anchor_f[0], v[1] + anchor_f[1], v[2] + anchor_f[2]];
                let mut best: Option<(f64, u32)> = None;
                let bi = block_index([abs[0] as i64, abs[1] as i64, abs[2] as i64]);
                for &rid in &candidates[bi] {
                    let c = centers_sp[rid as usize];
                    if (v[0] - c[0]).abs() > window[0]
                        || (v[1] - c[1]).abs() > window[1]
                        || (v[2] - c[2]).abs() > window[2]
                    {
                        continue;
                    }
                    let d = dist2(v, vf, c, &centers_ft[rid as usize]);
                    let better = match best {
                        None => true,
                        Some((bd, bid)) => d < bd || (d == bd && rid < bid),
                    };
                    if better {
                        best = Some((d, rid));
                    }
                }
                if best.is_none() {
                    // globally nearest center
                    for rid in 0..n as u32 {
                        let d = dist2(v, vf, centers_sp[rid as usize], &centers_ft[rid as usize]);
                        let better = match best {
                            None => true,
                            Some((bd, bid)) => d < bd || (d == bd && rid < bid),
                        };
                        if better {
                            best = Some((d, rid));
                        }
                    }
                }
                let (d, rid) = best.expect("at least one center");
                *a = rid;
                *dout = d;
            });

        // keep every region non-empty: an empty region takes over the voxel
        // with the largest assignment distance from a region that can spare
        // one (deterministic argmax, lexicographic ties)
        let mut counts = vec![0usize; n];
        for &a in &assignment {
            counts[a as usize] += 1;
        }
        for rid in 0..n {
            if counts[rid] > 0 {
                continue;
            }
            let mut pick: Option<(f64, usize)> = None;
            for vi in 0..fg.len() {
                if counts[assignment[vi] as usize] < 2 {
                    continue;
                }
                let d = assign_d2[vi];
                let better = match pick {
                    None => true,
                    Some((bd, _)) => d > bd,
                };
                if better {
                    pick = Some((d, vi));
                }
            }
            if let Some((_, vi)) = pick {
                counts[assignment[vi] as usize] -= 1;
                assignment[vi] = rid as u32;
                counts[rid] = 1;
                centers_sp[rid] = rel_voxels[vi];
                centers_ft[rid] = volume.features_at(fg[vi]).to_vec();
                assign_d2[vi] = 0.0;
            }
        }

        objectives.push(assign_d2.iter().sum::<f64>());

        // centroid update, fixed accumulation order (ascending voxel index)
        let mut sp_sums = vec![[0.0f64; 3]; n];
        let mut ft_sums = vec![0.0f64; n * channels];
        for vi in 0..fg.len() {
            let rid = assignment[vi] as usize;
            let v = rel_voxels[vi];
            sp_sums[rid][0] += v[0];
            sp_sums[rid][1] += v[1];
            sp_sums[rid][2] += v[2];
            let vf = volume.features_at(fg[vi]);
            let fs = &mut ft_sums[rid * channels..(rid + 1) * channels];
            for ch in 0..channels {
                fs[ch] += vf[ch];
            }
        }
        let mut movement = 0.0f64;
        for rid in 0..n {
            if counts[rid] == 0 {
                continue;
            }
            let m = counts[rid] as f64;
            let fresh = [
                sp_sums[rid][0] / m,
                sp_sums[rid][1] / m,
                sp_sums[rid][2] / m,
            ];
            movement += grid.dist2(fresh, centers_sp[rid]).sqrt();
            centers_sp[rid] = fresh;
            for ch in 0..channels {
                centers_ft[rid][ch] = ft_sums[rid * channels + ch] / m;
            }
        }
        let residual = movement / n as f64;
        if residual < params.residual_tol {
            break;
        }
    }

    // materialize the labeling
    let mut labels = vec![BACKGROUND; grid.len()];
    for (vi, &idx) in fg.iter().enumerate() {
        labels[idx] = assignment[vi] as i32;
    }
    let assignments = Labeling::new(&mask.dims(), labels)?;

    // final objective against the synced centroids
    let objective: f64 = (0..fg.len())
        .map(|vi| {
            let rid = assignment[vi] as usize;
            dist2(
                rel_voxels[vi],
                volume.features_at(fg[vi]),
                centers_sp[rid],
                &centers_ft[rid],
            )
        })
        .sum();

    let centers = (0..n)
        .map(|rid| RegionCenter {
            spatial: (0..ndim)
                .map(|k| centers_sp[rid][k] + anchor_f[k])
                .collect(),
            feature: centers_ft[rid].clone(),
        })
        .collect();

    let labeling = if params.enforce_connectivity {
        enforce_connectivity(&assignments, mask)?
    } else {
        assignments.clone()
    };

    Ok(SlicRun {
        labeling,
        state: ClusterState {
            centers,
            assignments,
            objective,
        },
        objectives,
    })
}

/// Masked clustering with distance-transform seeding (the core method).
/// Produces exactly `n_regions` labels before connectivity enforcement.
pub fn mask_slic(volume: &FeatureVolume, mask: &Mask, params: &SlicParams) -> Result<Labeling> {
    Ok(mask_slic_run(volume, mask, params)?.labeling)
}

/// [`mask_slic`] variant returning the full run record.
pub fn mask_slic_run(volume: &FeatureVolume, mask: &Mask, params: &SlicParams) -> Result<SlicRun> {
    validate_pair(volume, mask)?;
    if params.n_regions > mask.count() {
        return Err(Error::TooManySeeds {
            requested: params.n_regions,
            available: mask.count(),
        });
    }
    let spacing = volume.spacing();
    let placed = place_seeds(mask, params.n_regions, &spacing)?;
    let relaxed = relax_seeds(mask, &placed, &spacing, params.max_iters)?;
    run_slic(
        EngineInput {
            volume,
            mask,
            params,
        },
        &relaxed,
    )
}

/// Baseline 1: grid-seeded clustering of the whole image, then intersection
/// with the mask. Regions left without in-mask voxels are dropped and the
/// survivors relabeled densely; the resulting region count is data-dependent.
pub fn naive_whole_image(
    volume: &FeatureVolume,
    mask: &Mask,
    params: &SlicParams,
) -> Result<Labeling> {
    Ok(naive_whole_image_run(volume, mask, params)?.labeling)
}

pub fn naive_whole_image_run(
    volume: &FeatureVolume,
    mask: &Mask,
    params: &SlicParams,
) -> Result<SlicRun> {
    validate_pair(volume, mask)?;
    let dims = volume.dims();
    let spacing = volume.spacing();
    let seeds = seed_grid(&dims, params.n_regions, &spacing)?;
    let full = Mask::full(&dims)?;
    let run = run_slic(
        EngineInput {
            volume,
            mask: &full,
            params,
        },
        &seeds,
    )?;

    // keep only the in-mask part of each region, then compact label ids
    let whole = run.labeling.labels();
    let mut remap = vec![-1i32; run.labeling.num_regions()];
    let mut next = 0i32;
    let mut labels = vec![BACKGROUND; whole.len()];
    for idx in 0..whole.len() {
        if mask.get(idx) && whole[idx] >= 0 {
            let old = whole[idx] as usize;
            if remap[old] < 0 {
                remap[old] = next;
                next += 1;
            }
            labels[idx] = remap[old];
        }
    }
    // remap in first-seen order is scan order; renumber to ascending original
    // ids for a stable, order-independent contract
    let mut pairs: Vec<(usize, i32)> = remap
        .iter()
        .enumerate()
        .filter_map(|(old, &new)| (new >= 0).then_some((old, new)))
        .collect();
    pairs.sort_unstable();
    let mut renumber = vec![0i32; next as usize];
    for (rank, (_, first_seen)) in pairs.iter().enumerate() {
        renumber[*first_seen as usize] = rank as i32;
    }
    for l in labels.iter_mut() {
        if *l >= 0 {
            *l = renumber[*l as usize];
        }
    }
    let labeling = Labeling::new(&dims, labels)?;
    Ok(SlicRun {
        labeling,
        state: run.state,
        objectives: run.objectives,
    })
}

/// Baseline 2: grid seeds filtered by the mask, masked clustering over the
/// survivors. Fails with `NoSeedsInMask` when no grid seed lands inside.
pub fn naive_grid_filtered(
    volume: &FeatureVolume,
    mask: &Mask,
    params: &SlicParams,
) -> Result<Labeling> {
    Ok(naive_grid_filtered_run(volume, mask, params)?.labeling)
}

pub fn naive_grid_filtered_run(
    volume: &FeatureVolume,
    mask: &Mask,
    params: &SlicParams,
) -> Result<SlicRun> {
    validate_pair(volume, mask)?;
    let dims = volume.dims();
    let spacing = volume.spacing();
    let grid_seeds = seed_grid(&dims, params.n_regions, &spacing)?;
    let survivors: Vec<FVec3> = grid_seeds
        .points
        .iter()
        .filter(|p| mask.get_at(round_point(**p)))
        .cloned()
        .collect();
    if survivors.is_empty() {
        return Err(Error::NoSeedsInMask);
    }
    let seeds = SeedSet::from_canonical(mask.ndim(), survivors);
    run_slic(
        EngineInput {
            volume,
            mask,
            params,
        },
        &seeds,
    )
}

/// Runs the backend selected by `params.backend`.
pub fn segment(volume: &FeatureVolume, mask: &Mask, params: &SlicParams) -> Result<Labeling> {
    match params.backend {
        Backend::MaskSlic => mask_slic(volume, mask, params),
        Backend::NaiveWholeImage => naive_whole_image(volume, mask, params),
        Backend::NaiveGridFiltered => naive_grid_filtered(volume, mask, params),
    }
}

/// Makes every label face-connected: fragments smaller than their label's
/// largest fragment are relabeled to the neighboring region sharing the
/// longest face boundary (ties to the lowest label id). Fragments with no
/// neighboring region keep their label. Runs to a fixed point.
pub fn enforce_connectivity(labeling: &Labeling, mask: &Mask) -> Result<Labeling> {
    if !labeling.grid.same_shape(&mask.grid) {
        return Err(Error::DimsMismatch {
            expected: labeling.dims(),
            got: mask.dims(),
        });
    }
    let grid = &labeling.grid;
    let ndim = grid.ndim;
    let mut labels = labeling.labels().to_vec();
    let num = labeling.num_regions();

    loop {
        // connected components of equal labels, face adjacency
        let mut comp_id = vec![usize::MAX; labels.len()];
        let mut comps: Vec<(i32, Vec<usize>)> = Vec::new();
        for start in 0..labels.len() {
            if labels[start] < 0 || comp_id[start] != usize::MAX {
                continue;
            }
            let lab = labels[start];
            let cid = comps.len();
            let mut voxels = vec![start];
            comp_id[start] = cid;
            let mut head = 0;
            while head < voxels.len() {
                let idx = voxels[head];
                head += 1;
                let c = to_ivec(grid.coords(idx));
                for k in 0..ndim {
                    for dir in [-1i64, 1] {
                        let mut p = c;
                        p[k] += dir;
                        if grid.contains(p) {
                            let j = grid.index([p[0] as usize, p[1] as usize, p[2] as usize]);
                            if labels[j] == lab && comp_id[j] == usize::MAX {
                                comp_id[j] = cid;
                                voxels.push(j);
                            }
                        }
                    }
                }
            }
            comps.push((lab, voxels));
        }

        // per label: keep the largest fragment (ties: the one containing the
        // lexicographically first voxel), reassign the rest
        let mut per_label: Vec<Vec<usize>> = vec![Vec::new(); num];
        for (cid, (lab, _)) in comps.iter().enumerate() {
            per_label[*lab as usize].push(cid);
        }
        let mut changed = false;
        for frag_ids in per_label.iter() {
            if frag_ids.len() <= 1 {
                continue;
            }
            let keep = *frag_ids
                .iter()
                .max_by_key(|&&cid| (comps[cid].1.len(), std::cmp::Reverse(comps[cid].1[0])))
                .unwrap();
            let mut orphans: Vec<usize> = frag_ids.iter().copied().filter(|&c| c != keep).collect();
            orphans.sort_by_key(|&c| comps[c].1[0]);
            for cid in orphans {
                let (lab, voxels) = &comps[cid];
                // face-boundary length to each neighboring region
                let mut boundary = std::collections::HashMap::new();
                for &idx in voxels {
                    let c = to_ivec(grid.coords(idx));
                    for k in 0..ndim {
                        for dir in [-1i64, 1] {
                            let mut p = c;
                            p[k] += dir;
                            if grid.contains(p) {
                                let j = grid.index([p[0] as usize, p[1] as usize, p[2] as usize]);
                                if labels[j] >= 0 && labels[j] != *lab {
                                    *boundary.entry(labels[j]).or_insert(0usize) += 1;
                                }
                            }
                        }
                    }
                }
                let target = boundary
                    .iter()
                    .max_by_key(|(lab, count)| (**count, std::cmp::Reverse(**lab)))
                    .map(|(lab, _)| *lab);
                if let Some(t) = target {
                    for &idx in voxels {
                        labels[idx] = t;
                    }
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    // compaction in case a label vanished entirely
    let mut present = vec![false; num];
    for &l in &labels {
        if l >= 0 {
            present[l as usize] = true;
        }
    }
    if present.iter().any(|p| !p) {
        let mut remap = vec![0i32; num];
        let mut next = 0i32;
        for (old, &p) in present.iter().enumerate() {
            if p {
                remap[old] = next;
                next += 1;
            }
        }
        for l in labels.iter_mut() {
            if *l >= 0 {
                *l = remap[*l as usize];
            }
        }
    }
    Labeling::new(&labeling.dims(), labels)
}
