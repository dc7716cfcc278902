//! Core data types: feature volumes, masks, seed sets, labelings and
//! clustering parameters.
//!
//! Conventions used throughout the crate:
//! - voxel coordinates are integer indices; a voxel's center is its index;
//! - seed points are continuous coordinates in the same frame;
//! - physical spacing scales per-axis differences in every spatial distance;
//! - 2D data is index-compatible with 3D data via a trailing unit axis.
//!
//! All types are immutable after construction; operations build new values.

use crate::error::{Error, Result};
use crate::grid::{round_point, to_ivec, FVec3, Grid, IVec3};

/// Background sentinel used by [`Labeling`].
pub const BACKGROUND: i32 = -1;

/// An n-dimensional grid (n in {2, 3}) of per-voxel feature vectors.
///
/// Samples are stored with the last spatial axis fastest and the channel
/// innermost, matching the on-disk layout of the volume file format.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVolume {
    pub(crate) grid: Grid,
    channels: usize,
    data: Vec<f64>,
}

impl FeatureVolume {
    /// Builds a volume, validating shape, spacing and finiteness.
    ///
    /// Non-finite feature values are rejected here so every downstream
    /// distance computation is finite by construction.
    pub fn new(dims: &[usize], channels: usize, spacing: &[f64], data: Vec<f64>) -> Result<Self> {
        let grid = Grid::new(dims, spacing)?;
        if channels == 0 {
            return Err(Error::InvalidInput("channels must be positive".into()));
        }
        let expected = grid.len() * channels;
        if data.len() != expected {
            return Err(Error::InvalidInput(format!(
                "data length {} does not match dims {:?} x {} channels = {}",
                data.len(),
                dims,
                channels,
                expected
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite feature value at sample {i}"
            )));
        }
        Ok(FeatureVolume {
            grid,
            channels,
            data,
        })
    }

    /// Unit-spacing convenience constructor.
    pub fn with_unit_spacing(dims: &[usize], channels: usize, data: Vec<f64>) -> Result<Self> {
        let spacing = vec![1.0; dims.len()];
        FeatureVolume::new(dims, channels, &spacing, data)
    }

    pub fn ndim(&self) -> usize {
        self.grid.ndim
    }

    pub fn dims(&self) -> Vec<usize> {
        self.grid.dims_vec()
    }

    pub fn spacing(&self) -> Vec<f64> {
        self.grid.spacing_vec()
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn num_voxels(&self) -> usize {
        self.grid.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Feature vector of the voxel at linear index `idx`.
    #[inline]
    pub fn features_at(&self, idx: usize) -> &[f64] {
        let start = idx * self.channels;
        &self.data[start..start + self.channels]
    }
}

/// Boolean region-of-interest congruent with a [`FeatureVolume`].
///
/// Constructors reject masks without at least one foreground voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub(crate) grid: Grid,
    bits: Vec<bool>,
    count: usize,
}

impl Mask {
    pub fn new(dims: &[usize], bits: Vec<bool>) -> Result<Self> {
        let grid = Grid::from_dims(dims)?;
        if bits.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "mask has {} bits for {:?} = {} voxels",
                bits.len(),
                dims,
                grid.len()
            )));
        }
        let count = bits.iter().filter(|b| **b).count();
        if count == 0 {
            return Err(Error::EmptyMask);
        }
        Ok(Mask { grid, bits, count })
    }

    /// Mask covering every voxel of the grid.
    pub fn full(dims: &[usize]) -> Result<Self> {
        let grid = Grid::from_dims(dims)?;
        let len = grid.len();
        Mask::new(dims, vec![true; len])
    }

    pub fn ndim(&self) -> usize {
        self.grid.ndim
    }

    pub fn dims(&self) -> Vec<usize> {
        self.grid.dims_vec()
    }

    /// Number of foreground voxels.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, idx: usize) -> bool {
        self.bits[idx]
    }

    #[inline]
    pub(crate) fn get_at(&self, p: IVec3) -> bool {
        self.grid.contains(p)
            && self.bits[self
                .grid
                .index([p[0] as usize, p[1] as usize, p[2] as usize])]
    }

    /// Linear indices of foreground voxels, ascending.
    pub fn foreground(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.then_some(i))
            .collect()
    }

    /// Inclusive bounding box of the foreground, canonical coords.
    pub(crate) fn bbox(&self) -> (IVec3, IVec3) {
        let mut lo = [i64::MAX; 3];
        let mut hi = [i64::MIN; 3];
        for (idx, b) in self.bits.iter().enumerate() {
            if *b {
                let c = to_ivec(self.grid.coords(idx));
                for k in 0..3 {
                    lo[k] = lo[k].min(c[k]);
                    hi[k] = hi[k].max(c[k]);
                }
            }
        }
        (lo, hi)
    }
}

/// Succeeds iff the volume and mask are congruent and the mask is non-empty.
pub fn validate_pair(volume: &FeatureVolume, mask: &Mask) -> Result<()> {
    if !volume.grid.same_shape(&mask.grid) {
        return Err(Error::DimsMismatch {
            expected: volume.dims(),
            got: mask.dims(),
        });
    }
    if mask.count() == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(())
}

/// Shifts a mask by an integer offset, preserving the foreground count.
///
/// Fails with `OutOfBounds` if any foreground voxel would leave the grid.
pub fn translate_mask(mask: &Mask, offset: &[i64]) -> Result<Mask> {
    let off = mask.grid.pad_ivec(offset)?;
    let mut bits = vec![false; mask.grid.len()];
    for (idx, b) in mask.bits.iter().enumerate() {
        if !*b {
            continue;
        }
        let c = to_ivec(mask.grid.coords(idx));
        let p = [c[0] + off[0], c[1] + off[1], c[2] + off[2]];
        if !mask.grid.contains(p) {
            return Err(Error::OutOfBounds);
        }
        bits[mask
            .grid
            .index([p[0] as usize, p[1] as usize, p[2] as usize])] = true;
    }
    Mask::new(&mask.dims(), bits)
}

/// Z-scores each channel using in-mask statistics, applying the transform to
/// every voxel. Channels that are constant over the mask are centered only.
pub fn standardize_volume(volume: &FeatureVolume, mask: &Mask) -> Result<FeatureVolume> {
    validate_pair(volume, mask)?;
    let c = volume.channels();
    let fg = mask.foreground();
    let n = fg.len() as f64;
    let mut mean = vec![0.0f64; c];
    for &idx in &fg {
        for (m, v) in mean.iter_mut().zip(volume.features_at(idx)) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    let mut var = vec![0.0f64; c];
    for &idx in &fg {
        for ch in 0..c {
            let d = volume.features_at(idx)[ch] - mean[ch];
            var[ch] += d * d;
        }
    }
    let std: Vec<f64> = var.iter().map(|v| (v / n).sqrt()).collect();
    let mut data = volume.data().to_vec();
    for voxel in 0..volume.num_voxels() {
        for ch in 0..c {
            let x = &mut data[voxel * c + ch];
            *x -= mean[ch];
            if std[ch] > 0.0 {
                *x /= std[ch];
            }
        }
    }
    FeatureVolume::new(&volume.dims(), c, &volume.spacing(), data)
}

/// Ordered list of seed points in continuous voxel-index coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedSet {
    ndim: usize,
    pub(crate) points: Vec<FVec3>,
}

impl SeedSet {
    pub fn new(ndim: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        let mut padded = Vec::with_capacity(points.len());
        for p in &points {
            if p.len() != ndim {
                return Err(Error::InvalidInput(format!(
                    "seed point has {} coordinates, expected {ndim}",
                    p.len()
                )));
            }
            let mut q = [0.0f64; 3];
            q[..ndim].copy_from_slice(p);
            padded.push(q);
        }
        Ok(SeedSet {
            ndim,
            points: padded,
        })
    }

    pub(crate) fn from_canonical(ndim: usize, points: Vec<FVec3>) -> Self {
        SeedSet { ndim, points }
    }

    pub fn ndim(&self) -> usize {
        self.ndim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Coordinates of seed `i` (length ndim).
    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i][..self.ndim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.points.iter().map(move |p| &p[..self.ndim])
    }

    /// Checks the seed-set invariants against a mask: every point rounds to
    /// an in-mask voxel and no two points round to the same voxel.
    pub fn validate_for(&self, mask: &Mask) -> Result<()> {
        let mut seen = vec![false; mask.grid.len()];
        for p in &self.points {
            let r = round_point(*p);
            if !mask.get_at(r) {
                return Err(Error::InvalidInput(format!(
                    "seed {:?} rounds outside the mask",
                    &p[..self.ndim]
                )));
            }
            let idx = mask
                .grid
                .index([r[0] as usize, r[1] as usize, r[2] as usize]);
            if seen[idx] {
                return Err(Error::InvalidInput(format!(
                    "two seeds round to the same voxel {:?}",
                    &p[..self.ndim]
                )));
            }
            seen[idx] = true;
        }
        Ok(())
    }
}

/// Integer grid assigning each in-mask voxel to a region id; [`BACKGROUND`]
/// elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct Labeling {
    pub(crate) grid: Grid,
    labels: Vec<i32>,
    num_regions: usize,
}

impl Labeling {
    /// Builds a labeling and validates that the non-negative labels form a
    /// dense range `0..num_regions` with every value non-empty.
    pub fn new(dims: &[usize], labels: Vec<i32>) -> Result<Self> {
        let grid = Grid::from_dims(dims)?;
        if labels.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "label grid has {} entries for {:?}",
                labels.len(),
                dims
            )));
        }
        let max = labels.iter().copied().max().unwrap_or(BACKGROUND);
        if labels.iter().any(|&l| l < BACKGROUND) {
            return Err(Error::InvalidInput("labels below -1".into()));
        }
        let num_regions = if max < 0 { 0 } else { (max + 1) as usize };
        let mut seen = vec![false; num_regions];
        for &l in &labels {
            if l >= 0 {
                seen[l as usize] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidInput(format!(
                "label {missing} is empty but {max} is present"
            )));
        }
        Ok(Labeling {
            grid,
            labels,
            num_regions,
        })
    }

    /// Builds a labeling whose values are ids into an external set of
    /// `num_regions` labels. Individual ids may be absent (used by the cohort
    /// pipeline, where a single case need not touch every cohort cluster).
    pub fn with_region_count(dims: &[usize], labels: Vec<i32>, num_regions: usize) -> Result<Self> {
        let grid = Grid::from_dims(dims)?;
        if labels.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "label grid has {} entries for {:?}",
                labels.len(),
                dims
            )));
        }
        if labels
            .iter()
            .any(|&l| l < BACKGROUND || l >= num_regions as i32)
        {
            return Err(Error::InvalidInput(format!(
                "labels must lie in -1..{num_regions}"
            )));
        }
        Ok(Labeling {
            grid,
            labels,
            num_regions,
        })
    }

    pub fn ndim(&self) -> usize {
        self.grid.ndim
    }

    pub fn dims(&self) -> Vec<usize> {
        self.grid.dims_vec()
    }

    pub fn labels(&self) -> &[i32] {
        &self.labels
    }

    pub fn num_regions(&self) -> usize {
        self.num_regions
    }

    #[inline]
    pub fn get(&self, idx: usize) -> i32 {
        self.labels[idx]
    }

    /// Voxel counts per region id.
    pub fn region_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.num_regions];
        for &l in &self.labels {
            if l >= 0 {
                sizes[l as usize] += 1;
            }
        }
        sizes
    }

    /// Checks that labels are background exactly where the mask is false.
    pub fn validate_against(&self, mask: &Mask) -> Result<()> {
        if !self.grid.same_shape(&mask.grid) {
            return Err(Error::DimsMismatch {
                expected: self.dims(),
                got: mask.dims(),
            });
        }
        for (idx, &l) in self.labels.iter().enumerate() {
            if (l == BACKGROUND) == mask.get(idx) {
                return Err(Error::InvalidInput(format!(
                    "label/mask disagreement at voxel {idx}"
                )));
            }
        }
        Ok(())
    }
}

/// Which clustering scheme [`crate::slic::segment`] runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    /// Distance-transform seeding and clustering restricted to the mask.
    MaskSlic,
    /// Grid-seeded clustering of the whole image, intersected with the mask.
    NaiveWholeImage,
    /// Grid seeds filtered by the mask, clustering restricted to the mask.
    NaiveGridFiltered,
}

/// Parameters of a segmentation run.
#[derive(Debug, Clone, PartialEq)]
pub struct SlicParams {
    pub n_regions: usize,
    /// Weight `r` between feature distance and spatial distance.
    pub compactness: f64,
    pub max_iters: usize,
    /// Mean spacing-scaled center movement below which iteration stops.
    /// Zero (the default) runs all `max_iters` iterations.
    pub residual_tol: f64,
    pub enforce_connectivity: bool,
    pub backend: Backend,
}

impl SlicParams {
    pub fn new(n_regions: usize, compactness: f64) -> Result<Self> {
        if n_regions == 0 {
            return Err(Error::InvalidInput("n_regions must be at least 1".into()));
        }
        if !compactness.is_finite() || compactness <= 0.0 {
            return Err(Error::InvalidInput("compactness must be positive".into()));
        }
        Ok(SlicParams {
            n_regions,
            compactness,
            max_iters: 10,
            residual_tol: 0.0,
            enforce_connectivity: true,
            backend: Backend::MaskSlic,
        })
    }

    pub fn with_backend(mut self, backend: Backend) -> Self {
        self.backend = backend;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters.max(1);
        self
    }

    pub fn with_residual_tol(mut self, tol: f64) -> Self {
        self.residual_tol = tol.max(0.0);
        self
    }

    pub fn with_connectivity(mut self, enforce: bool) -> Self {
        self.enforce_connectivity = enforce;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mask_from_str(rows: &[&str]) -> Mask {
        let dims = [rows.len(), rows[0].len()];
        let bits = rows
            .iter()
            .flat_map(|r| r.chars().map(|c| c == '1'))
            .collect();
        Mask::new(&dims, bits).unwrap()
    }

    #[test]
    fn validate_pair_matching_dims_ok() {
        let v = FeatureVolume::with_unit_spacing(&[4, 4], 1, vec![0.0; 16]).unwrap();
        let mut bits = vec![false; 16];
        bits[5] = true;
        let m = Mask::new(&[4, 4], bits).unwrap();
        assert!(validate_pair(&v, &m).is_ok());
    }

    #[test]
    fn validate_pair_dims_mismatch() {
        let v = FeatureVolume::with_unit_spacing(&[4, 4], 1, vec![0.0; 16]).unwrap();
        let m = Mask::full(&[4, 5]).unwrap();
        assert!(matches!(
            validate_pair(&v, &m),
            Err(Error::DimsMismatch { .. })
        ));
    }

    #[test]
    fn empty_mask_rejected_at_construction() {
        assert!(matches!(
            Mask::new(&[4, 4], vec![false; 16]),
            Err(Error::EmptyMask)
        ));
    }

    #[test]
    fn non_finite_features_rejected() {
        assert!(
            FeatureVolume::with_unit_spacing(&[2, 2], 1, vec![0.0, 1.0, f64::NAN, 2.0]).is_err()
        );
        assert!(
            FeatureVolume::with_unit_spacing(&[2, 2], 1, vec![0.0, 1.0, f64::INFINITY, 2.0])
                .is_err()
        );
    }

    #[test]
    fn translate_single_voxel() {
        let mut bits = vec![false; 16];
        bits[4 + 1] = true; // (1,1)
        let m = Mask::new(&[4, 4], bits).unwrap();
        let t = translate_mask(&m, &[2, 0]).unwrap();
        let fg = t.foreground();
        assert_eq!(fg, vec![3 * 4 + 1]); // (3,1)
        assert_eq!(t.count(), 1);
    }

    #[test]
    fn translate_identity() {
        let m = mask_from_str(&["0110", "0110", "0000", "0000"]);
        let t = translate_mask(&m, &[0, 0]).unwrap();
        assert_eq!(m, t);
    }

    #[test]
    fn translate_out_of_bounds() {
        let m = mask_from_str(&["1110", "1110", "1110", "0000"]);
        assert!(matches!(
            translate_mask(&m, &[2, 2]),
            Err(Error::OutOfBounds)
        ));
    }

    #[test]
    fn labeling_requires_dense_labels() {
        // label 1 missing
        let labels = vec![0, 0, 2, 2];
        assert!(Labeling::new(&[2, 2], labels).is_err());
        let labels = vec![0, 0, 1, BACKGROUND];
        let l = Labeling::new(&[2, 2], labels).unwrap();
        assert_eq!(l.num_regions(), 2);
        assert_eq!(l.region_sizes(), vec![2, 1]);
    }

    #[test]
    fn labeling_mask_agreement() {
        let labels = vec![0, BACKGROUND, 1, BACKGROUND];
        let l = Labeling::new(&[2, 2], labels).unwrap();
        let m = Mask::new(&[2, 2], vec![true, false, true, false]).unwrap();
        assert!(l.validate_against(&m).is_ok());
        let m2 = Mask::new(&[2, 2], vec![true, true, true, false]).unwrap();
        assert!(l.validate_against(&m2).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(SlicParams::new(0, 1.0).is_err());
        assert!(SlicParams::new(4, 0.0).is_err());
        assert!(SlicParams::new(4, -2.0).is_err());
        let p = SlicParams::new(4, 0.5).unwrap();
        assert_eq!(p.max_iters, 10);
        assert_eq!(p.residual_tol, 0.0);
        assert!(p.enforce_connectivity);
    }

    proptest! {
        #[test]
        fn translate_round_trip(
            w in 2usize..12,
            h in 2usize..12,
            seed_bits in proptest::collection::vec(any::<bool>(), 4..144),
            dx in -3i64..4,
            dy in -3i64..4,
        ) {
            let len = w * h;
            let mut bits = vec![false; len];
            let mut any_set = false;
            for (i, b) in seed_bits.iter().enumerate() {
                if i < len && *b {
                    bits[i] = true;
                    any_set = true;
                }
            }
            if !any_set {
                bits[0] = true;
            }
            let m = Mask::new(&[w, h], bits).unwrap();
            if let Ok(t) = translate_mask(&m, &[dx, dy]) {
                let back = translate_mask(&t, &[-dx, -dy]).unwrap();
                prop_assert_eq!(back, m);
            }
        }
    }
}
