//! Quantitative evaluation: Dice overlap, translation-consistency, label
//! consistency against a ground truth, and percentage error increase.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::grid::to_ivec;
use crate::volume::{Labeling, Mask};

/// Per-region best-overlap scores and their summary.
#[derive(Debug, Clone)]
pub struct OverlapReport {
    /// Best Dice overlap for each region of the first labeling, in region-id order.
    pub per_region_delta: Vec<f64>,
    /// Mean of `1 - delta` over regions: zero iff every region has an exact
    /// counterpart.
    pub c_s: f64,
    pub n_regions: usize,
}

/// How per-region label-consistency values aggregate into a scalar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LcAggregation {
    /// Mean weighted by region voxel count (the default).
    VoxelMean,
    /// Unweighted mean over regions.
    RegionMean,
    /// Median over regions (midpoint of the two central values for even counts).
    RegionMedian,
}

/// Per-region majority-label fractions and their summary.
#[derive(Debug, Clone)]
pub struct ConsistencyReport {
    pub per_region_lc: Vec<f64>,
    pub summary_lc: f64,
    /// `1 - summary_lc`.
    pub e: f64,
    pub aggregation: LcAggregation,
}

/// Dice similarity coefficient between two voxel sets given as linear-index
/// slices. Defined as 0 when both sets are empty.
pub fn dsc(a: &[usize], b: &[usize]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let small: std::collections::HashSet<usize> = a.iter().copied().collect();
    let inter = b.iter().filter(|i| small.contains(i)).count();
    2.0 * inter as f64 / (a.len() + b.len()) as f64
}

/// Best-overlap consistency between two labelings of the same grid.
///
/// Each region of `s1` is shifted by `offset` into `s2`'s frame; its score is
/// the maximum Dice overlap against any region of `s2`. The summary `c_s`
/// averages `1 - delta` over `s1`'s regions. Voxels shifted outside the grid
/// overlap nothing. The direction is asymmetric by definition.
pub fn consistency_score(s1: &Labeling, s2: &Labeling, offset: &[i64]) -> Result<OverlapReport> {
    let off = s1.grid.pad_ivec(offset)?;
    let g1 = &s1.grid;
    let g2 = &s2.grid;
    if g1.ndim != g2.ndim {
        return Err(Error::DimsMismatch {
            expected: s1.dims(),
            got: s2.dims(),
        });
    }

    let n1 = s1.num_regions();
    let size1 = s1.region_sizes();
    let size2 = s2.region_sizes();

    // joint histogram over the shifted frame
    let mut joint: HashMap<(u32, u32), usize> = HashMap::new();
    for idx in 0..s1.labels().len() {
        let p = s1.get(idx);
        if p < 0 {
            continue;
        }
        let c = to_ivec(g1.coords(idx));
        let t = [c[0] + off[0], c[1] + off[1], c[2] + off[2]];
        if !g2.contains(t) {
            continue;
        }
        let q = s2.get(g2.index([t[0] as usize, t[1] as usize, t[2] as usize]));
        if q < 0 {
            continue;
        }
        *joint.entry((p as u32, q as u32)).or_insert(0) += 1;
    }

    let mut best = vec![0.0f64; n1];
    for ((p, q), inter) in &joint {
        let d = 2.0 * *inter as f64 / (size1[*p as usize] + size2[*q as usize]) as f64;
        if d > best[*p as usize] {
            best[*p as usize] = d;
        }
    }
    // a labeling without regions is vacuously consistent
    let c_s = if n1 == 0 {
        0.0
    } else {
        best.iter().map(|d| 1.0 - d).sum::<f64>() / n1 as f64
    };
    Ok(OverlapReport {
        per_region_delta: best,
        c_s,
        n_regions: n1,
    })
}

/// [`consistency_score`] with no translation between the two labelings.
pub fn consistency_score_aligned(s1: &Labeling, s2: &Labeling) -> Result<OverlapReport> {
    let offset = vec![0i64; s1.ndim()];
    consistency_score(s1, s2, &offset)
}

/// Fraction of each region's voxels carrying the region's majority
/// ground-truth label, plus the aggregated summary and error `e = 1 - lc`.
pub fn label_consistency(
    labeling: &Labeling,
    ground_truth: &[i32],
    mask: &Mask,
    aggregation: LcAggregation,
) -> Result<ConsistencyReport> {
    if !labeling.grid.same_shape(&mask.grid) {
        return Err(Error::DimsMismatch {
            expected: labeling.dims(),
            got: mask.dims(),
        });
    }
    if ground_truth.len() != labeling.labels().len() {
        return Err(Error::DimsMismatch {
            expected: labeling.dims(),
            got: vec![ground_truth.len()],
        });
    }
    let n = labeling.num_regions();
    let mut counts: Vec<HashMap<i32, usize>> = vec![HashMap::new(); n];
    let mut sizes = vec![0usize; n];
    for idx in 0..ground_truth.len() {
        let l = labeling.get(idx);
        if l < 0 || !mask.get(idx) {
            continue;
        }
        *counts[l as usize].entry(ground_truth[idx]).or_insert(0) += 1;
        sizes[l as usize] += 1;
    }
    let per_region_lc: Vec<f64> = (0..n)
        .map(|r| {
            if sizes[r] == 0 {
                return 0.0;
            }
            let majority = counts[r].values().copied().max().unwrap_or(0);
            majority as f64 / sizes[r] as f64
        })
        .collect();

    let summary_lc = match aggregation {
        LcAggregation::VoxelMean => {
            let total: usize = sizes.iter().sum();
            if total == 0 {
                0.0
            } else {
                per_region_lc
                    .iter()
                    .zip(sizes.iter())
                    .map(|(lc, s)| lc * *s as f64)
                    .sum::<f64>()
                    / total as f64
            }
        }
        LcAggregation::RegionMean => {
            per_region_lc.iter().sum::<f64>() / per_region_lc.len().max(1) as f64
        }
        LcAggregation::RegionMedian => {
            let mut v = per_region_lc.clone();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            if v.is_empty() {
                0.0
            } else if v.len() % 2 == 1 {
                v[v.len() / 2]
            } else {
                0.5 * (v[v.len() / 2 - 1] + v[v.len() / 2])
            }
        }
    };
    Ok(ConsistencyReport {
        per_region_lc,
        summary_lc,
        e: 1.0 - summary_lc,
        aggregation,
    })
}

/// Percentage error increase of a baseline relative to a method:
/// `100 * (e_baseline - e_method) / e_method`. Fails when the method error is
/// exactly zero, which callers report as infinite improvement.
pub fn error_increase(e_baseline: f64, e_method: f64) -> Result<f64> {
    if e_method == 0.0 {
        return Err(Error::DivisionByZero);
    }
    Ok(100.0 * (e_baseline - e_method) / e_method)
}

/// Extracts the voxel-index set of every region, in region-id order.
pub fn region_voxel_sets(lab: &Labeling) -> Vec<Vec<usize>> {
    let mut sets: Vec<Vec<usize>> = vec![Vec::new(); lab.num_regions()];
    for (idx, &l) in lab.labels().iter().enumerate() {
        if l >= 0 {
            sets[l as usize].push(idx);
        }
    }
    sets
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::volume::BACKGROUND;
    use rand::{Rng, SeedableRng};

    #[test]
    fn dsc_basics() {
        assert_eq!(dsc(&[1, 2, 3], &[1, 2, 3]), 1.0);
        assert_eq!(dsc(&[1, 2], &[3, 4]), 0.0);
        assert_eq!(dsc(&[1, 2, 3, 4], &[3, 4, 5, 6]), 0.5);
        assert_eq!(dsc(&[], &[]), 0.0);
    }

    #[test]
    fn identical_labelings_have_zero_cs() {
        let labels = vec![0, 0, 1, 1, 2, 2, BACKGROUND, BACKGROUND];
        let lab = Labeling::new(&[2, 4], labels).unwrap();
        let r = consistency_score(&lab, &lab, &[0, 0]).unwrap();
        assert_eq!(r.c_s, 0.0);
        assert!(r.per_region_delta.iter().all(|&d| d == 1.0));
    }

    #[test]
    fn shifted_copy_has_zero_cs() {
        // two regions, then the same regions shifted one row down
        let l1 = vec![
            0, 0, 1, 1, //
            BACKGROUND, BACKGROUND, BACKGROUND, BACKGROUND, //
            BACKGROUND, BACKGROUND, BACKGROUND, BACKGROUND,
        ];
        let l2 = vec![
            BACKGROUND, BACKGROUND, BACKGROUND, BACKGROUND, //
            0, 0, 1, 1, //
            BACKGROUND, BACKGROUND, BACKGROUND, BACKGROUND,
        ];
        let s1 = Labeling::new(&[3, 4], l1).unwrap();
        let s2 = Labeling::new(&[3, 4], l2).unwrap();
        let r = consistency_score(&s1, &s2, &[1, 0]).unwrap();
        assert_eq!(r.c_s, 0.0);
    }

    #[test]
    fn single_covering_region_closed_form() {
        // s1: two equal halves; s2: one region over the same support
        let l1 = vec![0, 0, 1, 1];
        let l2 = vec![0, 0, 0, 0];
        let s1 = Labeling::new(&[2, 2], l1).unwrap();
        let s2 = Labeling::new(&[2, 2], l2).unwrap();
        let r = consistency_score(&s1, &s2, &[0, 0]).unwrap();
        for d in &r.per_region_delta {
            assert!((d - 2.0 / 3.0).abs() < 1e-12);
        }
        assert!((r.c_s - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn brute_force_oracle_on_random_labelings() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let dims = [rng.random_range(3..10usize), rng.random_range(3..10usize)];
            let len = dims[0] * dims[1];
            let k1 = rng.random_range(1..5usize);
            let k2 = rng.random_range(1..5usize);
            let mk = |k: usize, rng: &mut rand_chacha::ChaCha8Rng| -> Labeling {
                loop {
                    let labels: Vec<i32> = (0..len)
                        .map(|_| {
                            if rng.random_bool(0.2) {
                                BACKGROUND
                            } else {
                                rng.random_range(0..k as i32)
                            }
                        })
                        .collect();
                    if let Ok(l) = Labeling::new(&dims, labels) {
                        return l;
                    }
                }
            };
            let s1 = mk(k1, &mut rng);
            let s2 = mk(k2, &mut rng);
            let off = [rng.random_range(-2..3i64), rng.random_range(-2..3i64)];
            let fast = consistency_score(&s1, &s2, &off).unwrap();

            // oracle: explicit all-pairs DSC over shifted voxel sets
            let g = Grid::from_dims(&dims).unwrap();
            let sets1 = region_voxel_sets(&s1);
            let sets2 = region_voxel_sets(&s2);
            for (p, set) in sets1.iter().enumerate() {
                let shifted: Vec<usize> = set
                    .iter()
                    .filter_map(|&idx| {
                        let c = to_ivec(g.coords(idx));
                        let t = [c[0] + off[0], c[1] + off[1], c[2]];
                        g.contains(t)
                            .then(|| g.index([t[0] as usize, t[1] as usize, t[2] as usize]))
                    })
                    .collect();
                let mut best = 0.0f64;
                for q in sets2.iter() {
                    // dice against the full (unshifted-denominator) region size
                    let inter = shifted.iter().filter(|i| q.contains(i)).count();
                    let d = 2.0 * inter as f64 / (set.len() + q.len()) as f64;
                    best = best.max(d);
                }
                assert!(
                    (fast.per_region_delta[p] - best).abs() < 1e-12,
                    "region {p}: {} vs {best}",
                    fast.per_region_delta[p]
                );
            }
        }
    }

    #[test]
    fn label_consistency_examples() {
        // one region with truth labels [1,1,1,2]
        let lab = Labeling::new(&[2, 2], vec![0, 0, 0, 0]).unwrap();
        let m = Mask::full(&[2, 2]).unwrap();
        let truth = vec![1, 1, 1, 2];
        let r = label_consistency(&lab, &truth, &m, LcAggregation::VoxelMean).unwrap();
        assert_eq!(r.per_region_lc, vec![0.75]);
        assert_eq!(r.summary_lc, 0.75);
        assert_eq!(r.e, 0.25);

        // pure regions
        let lab = Labeling::new(&[2, 2], vec![0, 0, 1, 1]).unwrap();
        let truth = vec![7, 7, 9, 9];
        let r = label_consistency(&lab, &truth, &m, LcAggregation::VoxelMean).unwrap();
        assert_eq!(r.summary_lc, 1.0);
        assert_eq!(r.e, 0.0);

        // voxel-weighted aggregation across two 4-voxel regions
        let lab = Labeling::new(&[2, 4], vec![0, 0, 0, 0, 1, 1, 1, 1]).unwrap();
        let m = Mask::full(&[2, 4]).unwrap();
        let truth = vec![1, 1, 1, 1, 2, 2, 3, 3];
        let r = label_consistency(&lab, &truth, &m, LcAggregation::VoxelMean).unwrap();
        assert_eq!(r.per_region_lc, vec![1.0, 0.5]);
        assert_eq!(r.summary_lc, 0.75);
    }

    #[test]
    fn label_consistency_lower_bound() {
        // each region's lc is at least 1/k for k truth labels present
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for _ in 0..10 {
            let dims = [rng.random_range(2..8usize), rng.random_range(2..8usize)];
            let len = dims[0] * dims[1];
            let k = rng.random_range(1..4usize);
            let labels: Vec<i32> = (0..len).map(|i| (i % 2) as i32).collect();
            let lab = Labeling::new(&dims, labels).unwrap();
            let m = Mask::full(&dims).unwrap();
            let truth: Vec<i32> = (0..len).map(|_| rng.random_range(0..k as i32)).collect();
            let r = label_consistency(&lab, &truth, &m, LcAggregation::VoxelMean).unwrap();
            for &lc in &r.per_region_lc {
                assert!(lc >= 1.0 / k as f64 - 1e-12);
            }
        }
    }

    #[test]
    fn empty_labeling_is_vacuously_consistent() {
        let empty = Labeling::new(&[2, 2], vec![BACKGROUND; 4]).unwrap();
        let other = Labeling::new(&[2, 2], vec![0, 0, 1, 1]).unwrap();
        let r = consistency_score(&empty, &other, &[0, 0]).unwrap();
        assert_eq!(r.c_s, 0.0);
        assert!(r.per_region_delta.is_empty());
    }

    #[test]
    fn error_increase_examples() {
        let e = error_increase(0.15, 0.11).unwrap();
        assert!((e - 36.36363636363637).abs() < 1e-9);
        assert_eq!(error_increase(0.2, 0.2).unwrap(), 0.0);
        assert_eq!(error_increase(0.2, 0.1).unwrap(), 100.0);
        assert!(matches!(
            error_increase(0.2, 0.0),
            Err(Error::DivisionByZero)
        ));
    }

    #[test]
    fn cs_bounds() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let dims = [rng.random_range(2..8usize), rng.random_range(2..8usize)];
            let len = dims[0] * dims[1];
            let labels: Vec<i32> = (0..len).map(|i| (i % 3) as i32).collect();
            let s1 = Labeling::new(&dims, labels.clone()).unwrap();
            let s2 = Labeling::new(&dims, labels).unwrap();
            let r = consistency_score(&s1, &s2, &[0, 0]).unwrap();
            assert!(r.c_s >= 0.0 && r.c_s <= 1.0);
            assert_eq!(r.c_s, 0.0);
        }
    }
}
