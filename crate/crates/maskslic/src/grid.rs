//! Canonical grid geometry shared by every kernel.
//!
//! All public types carry user-facing dimensions of length `n` (2 or 3); the
//! kernels run on a canonical three-axis form where 2D grids get a trailing
//! unit axis. Appending a trailing axis of size 1 leaves the linear memory
//! layout (last axis fastest) unchanged, so the conversion is free.

use crate::error::{Error, Result};

pub(crate) type UVec3 = [usize; 3];
pub(crate) type IVec3 = [i64; 3];
pub(crate) type FVec3 = [f64; 3];

/// Canonical grid: three axes, trailing unit axes for 2D, per-axis physical
/// spacing. Lexicographic order of `(i0, i1, i2)` equals linear-index order.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Grid {
    pub ndim: usize,
    pub dims: UVec3,
    pub spacing: FVec3,
}

impl Grid {
    pub fn new(dims: &[usize], spacing: &[f64]) -> Result<Grid> {
        if dims.len() < 2 || dims.len() > 3 {
            return Err(Error::InvalidInput(format!(
                "grids must have 2 or 3 axes, got {}",
                dims.len()
            )));
        }
        if spacing.len() != dims.len() {
            return Err(Error::InvalidInput(format!(
                "spacing has {} entries for {} axes",
                spacing.len(),
                dims.len()
            )));
        }
        if dims.contains(&0) {
            return Err(Error::InvalidInput(format!("zero-sized axis in {dims:?}")));
        }
        if spacing.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(Error::InvalidInput(format!(
                "spacing must be finite and positive, got {spacing:?}"
            )));
        }
        let mut d = [1usize; 3];
        let mut s = [1.0f64; 3];
        d[..dims.len()].copy_from_slice(dims);
        s[..spacing.len()].copy_from_slice(spacing);
        Ok(Grid {
            ndim: dims.len(),
            dims: d,
            spacing: s,
        })
    }

    pub fn from_dims(dims: &[usize]) -> Result<Grid> {
        let spacing = vec![1.0; dims.len()];
        Grid::new(dims, &spacing)
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    /// User-facing dims (length ndim).
    pub fn dims_vec(&self) -> Vec<usize> {
        self.dims[..self.ndim].to_vec()
    }

    pub fn spacing_vec(&self) -> Vec<f64> {
        self.spacing[..self.ndim].to_vec()
    }

    #[inline]
    pub fn index(&self, p: UVec3) -> usize {
        (p[0] * self.dims[1] + p[1]) * self.dims[2] + p[2]
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> UVec3 {
        let i2 = idx % self.dims[2];
        let rest = idx / self.dims[2];
        let i1 = rest % self.dims[1];
        let i0 = rest / self.dims[1];
        [i0, i1, i2]
    }

    #[inline]
    pub fn contains(&self, p: IVec3) -> bool {
        (0..3).all(|k| p[k] >= 0 && (p[k] as usize) < self.dims[k])
    }

    /// Squared spacing-scaled distance between two continuous points.
    ///
    /// Accumulation order is fixed (axis 2, then 1, then 0) so that every
    /// code path that compares distances computes bit-identical values.
    #[inline]
    pub fn dist2(&self, a: FVec3, b: FVec3) -> f64 {
        let w = self.weights();
        let d2 = a[2] - b[2];
        let d1 = a[1] - b[1];
        let d0 = a[0] - b[0];
        let mut acc = w[2] * (d2 * d2);
        acc += w[1] * (d1 * d1);
        acc += w[0] * (d0 * d0);
        acc
    }

    /// Per-axis squared spacing, the weights of [`Grid::dist2`].
    #[inline]
    pub fn weights(&self) -> FVec3 {
        [
            self.spacing[0] * self.spacing[0],
            self.spacing[1] * self.spacing[1],
            self.spacing[2] * self.spacing[2],
        ]
    }

    /// Spacing-scaled length of the grid diagonal.
    pub fn diagonal(&self) -> f64 {
        let a = [0.0, 0.0, 0.0];
        let b = [
            self.dims[0] as f64,
            self.dims[1] as f64,
            self.dims[2] as f64,
        ];
        self.dist2(a, b).sqrt()
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.ndim == other.ndim && self.dims == other.dims
    }

    /// Pads a user-facing integer vector (length ndim) to canonical form.
    pub fn pad_ivec(&self, v: &[i64]) -> Result<IVec3> {
        if v.len() != self.ndim {
            return Err(Error::InvalidInput(format!(
                "expected a {}-vector, got {} entries",
                self.ndim,
                v.len()
            )));
        }
        let mut out = [0i64; 3];
        out[..v.len()].copy_from_slice(v);
        Ok(out)
    }

    pub fn pad_fvec(&self, v: &[f64]) -> Result<FVec3> {
        if v.len() != self.ndim {
            return Err(Error::InvalidInput(format!(
                "expected a {}-vector, got {} entries",
                self.ndim,
                v.len()
            )));
        }
        let mut out = [0.0f64; 3];
        out[..v.len()].copy_from_slice(v);
        Ok(out)
    }
}

/// Rounds a continuous coordinate to its nearest voxel (half away from zero).
#[inline]
pub(crate) fn round_point(p: FVec3) -> IVec3 {
    [
        p[0].round() as i64,
        p[1].round() as i64,
        p[2].round() as i64,
    ]
}

#[inline]
pub(crate) fn to_fvec(p: UVec3) -> FVec3 {
    [p[0] as f64, p[1] as f64, p[2] as f64]
}

#[inline]
pub(crate) fn to_ivec(p: UVec3) -> IVec3 {
    [p[0] as i64, p[1] as i64, p[2] as i64]
}
