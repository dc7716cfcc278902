//! Cohort pipeline for 4D series: temporal principal-component features,
//! per-region descriptors, cohort-wide k-means and label propagation.
//!
//! Supervoxels are extracted per case from the principal-component scores of
//! each voxel's time curve; descriptors from all cases are then pooled and
//! clustered jointly so subregion definitions are consistent across a cohort.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::volume::{FeatureVolume, Labeling, Mask, BACKGROUND};

/// A 3D (or 2D) grid of per-voxel time curves.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalSeries {
    pub(crate) grid: Grid,
    frames: usize,
    /// Frame-outer layout: `values[f * num_voxels + voxel]`.
    values: Vec<f64>,
}

impl TemporalSeries {
    pub fn new(dims: &[usize], frames: usize, spacing: &[f64], values: Vec<f64>) -> Result<Self> {
        let grid = Grid::new(dims, spacing)?;
        if frames < 2 {
            return Err(Error::InvalidInput(
                "a series needs at least 2 frames".into(),
            ));
        }
        if values.len() != grid.len() * frames {
            return Err(Error::InvalidInput(format!(
                "series has {} samples for {:?} x {frames} frames",
                values.len(),
                dims
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite sample at {i}")));
        }
        Ok(TemporalSeries {
            grid,
            frames,
            values,
        })
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

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn num_voxels(&self) -> usize {
        self.grid.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Time curve of one voxel (gathers across frames).
    pub fn curve(&self, voxel: usize) -> Vec<f64> {
        let v = self.grid.len();
        (0..self.frames)
            .map(|f| self.values[f * v + voxel])
            .collect()
    }
}

/// Mean feature vector of one labeled region of one case.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionDescriptor {
    pub case_id: String,
    pub region_id: usize,
    pub feature_means: Vec<f64>,
    pub voxel_count: usize,
}

/// Result of cohort-wide k-means over descriptors or voxels.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortClustering {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    /// Cluster id per input item.
    pub assignment: Vec<u32>,
    /// Sum of squared distances of items to their assigned centroids.
    pub inertia: f64,
    /// Inertia after each assignment phase.
    pub inertia_history: Vec<f64>,
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// (eigenvalues, eigenvectors as columns), unsorted.
fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v = vec![vec![0.0f64; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let off = |a: &Vec<Vec<f64>>| -> f64 {
        let mut s = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                s += a[p][q] * a[p][q];
            }
        }
        s
    };
    let scale: f64 = (0..n)
        .map(|i| a[i][i].abs())
        .fold(0.0, f64::max)
        .max(1e-300);
    let tol = (scale * 1e-14) * (scale * 1e-14) * n as f64;
    for _sweep in 0..100 {
        if off(&a) <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..n {
                    let aip = a[i][p];
                    let aiq = a[i][q];
                    a[i][p] = c * aip - s * aiq;
                    a[i][q] = s * aip + c * aiq;
                }
                for j in 0..n {
                    let apj = a[p][j];
                    let aqj = a[q][j];
                    a[p][j] = c * apj - s * aqj;
                    a[q][j] = s * apj + c * aqj;
                }
                for i in 0..n {
                    let vip = v[i][p];
                    let viq = v[i][q];
                    v[i][p] = c * vip - s * viq;
                    v[i][q] = s * vip + c * viq;
                }
            }
        }
    }
    let eigvals: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    (eigvals, v)
}

/// Principal directions of the in-mask time curves plus per-voxel scores.
#[derive(Debug, Clone)]
pub struct TemporalPca {
    /// Per-voxel component scores as feature channels (zero off-mask).
    pub scores: FeatureVolume,
    /// One direction per component, each of length `frames`, unit norm,
    /// signed so the largest-magnitude coordinate is positive.
    pub components: Vec<Vec<f64>>,
    /// Eigenvalue of each kept component, decreasing.
    pub explained_variance: Vec<f64>,
    /// In-mask population mean curve.
    pub mean_curve: Vec<f64>,
}

/// Principal-component scores of in-mask time curves as feature channels.
///
/// Curves are centered on the in-mask population mean per time point; the
/// top `n_components` directions (by explained variance) become channels,
/// each signed so its largest-magnitude coordinate is positive. Off-mask
/// voxels get zero scores.
pub fn temporal_pca(
    series: &TemporalSeries,
    mask: &Mask,
    n_components: usize,
) -> Result<FeatureVolume> {
    Ok(temporal_pca_full(series, mask, n_components)?.scores)
}

/// [`temporal_pca`] variant that also returns the component directions,
/// their explained variance and the mean curve.
pub fn temporal_pca_full(
    series: &TemporalSeries,
    mask: &Mask,
    n_components: usize,
) -> Result<TemporalPca> {
    if !series.grid.same_shape(&mask.grid) {
        return Err(Error::DimsMismatch {
            expected: series.dims(),
            got: mask.dims(),
        });
    }
    let t = series.frames;
    let fg = mask.foreground();
    let m = fg.len();
    if m < 2 {
        return Err(Error::InvalidInput("need at least 2 in-mask voxels".into()));
    }
    if n_components == 0 || n_components > t.min(m) {
        return Err(Error::InvalidInput(format!(
            "n_components must lie in 1..=min(frames, mask size) = {}",
            t.min(m)
        )));
    }

    let nv = series.grid.len();
    // population mean curve
    let mut mean = vec![0.0f64; t];
    for &idx in &fg {
        for (f, mu) in mean.iter_mut().enumerate() {
            *mu += series.values[f * nv + idx];
        }
    }
    for mu in mean.iter_mut() {
        *mu /= m as f64;
    }

    // all curves identical means zero variance by definition
    let first = series.curve(fg[0]);
    if fg.iter().all(|&idx| series.curve(idx) == first) {
        return Err(Error::DegenerateData);
    }

    // T x T covariance of centered curves
    let mut cov = vec![vec![0.0f64; t]; t];
    let mut centered = vec![0.0f64; t];
    for &idx in &fg {
        for (f, c) in centered.iter_mut().enumerate() {
            *c = series.values[f * nv + idx] - mean[f];
        }
        for a in 0..t {
            let ca = centered[a];
            for b in a..t {
                cov[a][b] += ca * centered[b];
            }
        }
    }
    let denom = (m - 1) as f64;
    for a in 0..t {
        for b in a..t {
            cov[a][b] /= denom;
            cov[b][a] = cov[a][b];
        }
    }
    let trace: f64 = (0..t).map(|i| cov[i][i]).sum();
    if trace == 0.0 {
        return Err(Error::DegenerateData);
    }

    let (eigvals, eigvecs) = jacobi_eigen(cov);
    let mut order: Vec<usize> = (0..t).collect();
    order.sort_by(|&a, &b| eigvals[b].partial_cmp(&eigvals[a]).unwrap().then(a.cmp(&b)));

    // component matrix W: t x n_components, sign-normalized
    let mut w = vec![vec![0.0f64; n_components]; t];
    for (j, &col) in order.iter().take(n_components).enumerate() {
        let mut best = 0usize;
        for i in 1..t {
            if eigvecs[i][col].abs() > eigvecs[best][col].abs() {
                best = i;
            }
        }
        let sign = if eigvecs[best][col] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..t {
            w[i][j] = sign * eigvecs[i][col];
        }
    }

    let mut data = vec![0.0f64; nv * n_components];
    for &idx in &fg {
        for (f, c) in centered.iter_mut().enumerate() {
            *c = series.values[f * nv + idx] - mean[f];
        }
        for j in 0..n_components {
            let mut s = 0.0;
            for f in 0..t {
                s += centered[f] * w[f][j];
            }
            data[idx * n_components + j] = s;
        }
    }
    let scores = FeatureVolume::new(&series.dims(), n_components, &series.spacing(), data)?;
    let components: Vec<Vec<f64>> = (0..n_components)
        .map(|j| (0..t).map(|f| w[f][j]).collect())
        .collect();
    let explained_variance: Vec<f64> = order
        .iter()
        .take(n_components)
        .map(|&col| eigvals[col])
        .collect();
    Ok(TemporalPca {
        scores,
        components,
        explained_variance,
        mean_curve: mean,
    })
}

/// One descriptor per non-empty label: exact mean feature vector and size.
pub fn extract_descriptors(
    volume: &FeatureVolume,
    labeling: &Labeling,
    case_id: &str,
) -> Result<Vec<RegionDescriptor>> {
    if !volume.grid.same_shape(&labeling.grid) {
        return Err(Error::DimsMismatch {
            expected: volume.dims(),
            got: labeling.dims(),
        });
    }
    let c = volume.channels();
    let n = labeling.num_regions();
    let mut sums = vec![0.0f64; n * c];
    let mut counts = vec![0usize; n];
    for (idx, &l) in labeling.labels().iter().enumerate() {
        if l < 0 {
            continue;
        }
        let r = l as usize;
        counts[r] += 1;
        let f = volume.features_at(idx);
        for ch in 0..c {
            sums[r * c + ch] += f[ch];
        }
    }
    Ok((0..n)
        .filter(|&r| counts[r] > 0)
        .map(|r| RegionDescriptor {
            case_id: case_id.to_string(),
            region_id: r,
            feature_means: (0..c)
                .map(|ch| sums[r * c + ch] / counts[r] as f64)
                .collect(),
            voxel_count: counts[r],
        })
        .collect())
}

/// Z-scores each feature over all items in place. Constant features are
/// centered only.
pub fn standardize_items(items: &mut [Vec<f64>]) {
    if items.is_empty() {
        return;
    }
    let dim = items[0].len();
    let n = items.len() as f64;
    for ch in 0..dim {
        let mean: f64 = items.iter().map(|it| it[ch]).sum::<f64>() / n;
        let var: f64 = items.iter().map(|it| (it[ch] - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        for it in items.iter_mut() {
            it[ch] -= mean;
            if std > 0.0 {
                it[ch] /= std;
            }
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's k-means over feature vectors with deterministic farthest-point
/// initialization: the first centroid is the item closest to the mean, each
/// next one the item farthest from all chosen so far.
pub fn kmeans_cohort(items: &[Vec<f64>], k: usize, max_iters: usize) -> Result<CohortClustering> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    if items.len() < k {
        return Err(Error::TooFewItems {
            requested: k,
            available: items.len(),
        });
    }
    let dim = items[0].len();
    if items.iter().any(|it| it.len() != dim) {
        return Err(Error::InvalidInput(
            "items have mixed dimensionality".into(),
        ));
    }

    // farthest-point init
    let n = items.len();
    let mut mean = vec![0.0f64; dim];
    for it in items {
        for (m, x) in mean.iter_mut().zip(it.iter()) {
            *m += x;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    let first = (0..n)
        .min_by(|&a, &b| {
            sq_dist(&items[a], &mean)
                .partial_cmp(&sq_dist(&items[b], &mean))
                .unwrap()
                .then(a.cmp(&b))
        })
        .unwrap();
    chosen.push(first);
    let mut min_d: Vec<f64> = items.iter().map(|it| sq_dist(it, &items[first])).collect();
    while chosen.len() < k {
        let next = (0..n)
            .max_by(|&a, &b| min_d[a].partial_cmp(&min_d[b]).unwrap().then(b.cmp(&a)))
            .unwrap();
        chosen.push(next);
        for (d, it) in min_d.iter_mut().zip(items.iter()) {
            let nd = sq_dist(it, &items[next]);
            if nd < *d {
                *d = nd;
            }
        }
    }
    let mut centroids: Vec<Vec<f64>> = chosen.iter().map(|&i| items[i].clone()).collect();

    let mut assignment = vec![0u32; n];
    let mut dists = vec![0.0f64; n];
    let mut history = Vec::new();
    for _ in 0..max_iters.max(1) {
        let prev = assignment.clone();
        for (i, it) in items.iter().enumerate() {
            let mut best = (f64::INFINITY, 0u32);
            for (cid, c) in centroids.iter().enumerate() {
                let d = sq_dist(it, c);
                if d < best.0 {
                    best = (d, cid as u32);
                }
            }
            assignment[i] = best.1;
            dists[i] = best.0;
        }
        // keep every cluster non-empty
        let mut counts = vec![0usize; k];
        for &a in &assignment {
            counts[a as usize] += 1;
        }
        for cid in 0..k {
            if counts[cid] > 0 {
                continue;
            }
            let mut pick: Option<(f64, usize)> = None;
            for i in 0..n {
                if counts[assignment[i] as usize] < 2 {
                    continue;
                }
                let better = match pick {
                    None => true,
                    Some((bd, _)) => dists[i] > bd,
                };
                if better {
                    pick = Some((dists[i], i));
                }
            }
            if let Some((_, i)) = pick {
                counts[assignment[i] as usize] -= 1;
                assignment[i] = cid as u32;
                counts[cid] = 1;
                centroids[cid] = items[i].clone();
                dists[i] = 0.0;
            }
        }
        history.push(dists.iter().sum::<f64>());

        // centroid update
        let mut sums = vec![vec![0.0f64; dim]; k];
        for (i, it) in items.iter().enumerate() {
            let s = &mut sums[assignment[i] as usize];
            for (acc, x) in s.iter_mut().zip(it.iter()) {
                *acc += x;
            }
        }
        for cid in 0..k {
            if counts[cid] > 0 {
                for ch in 0..dim {
                    centroids[cid][ch] = sums[cid][ch] / counts[cid] as f64;
                }
            }
        }
        if assignment == prev {
            break;
        }
    }

    let inertia: f64 = items
        .iter()
        .zip(assignment.iter())
        .map(|(it, &a)| sq_dist(it, &centroids[a as usize]))
        .sum();
    Ok(CohortClustering {
        k,
        centroids,
        assignment,
        inertia,
        inertia_history: history,
    })
}

/// Rewrites each supervoxel's voxels with its cohort cluster id, producing a
/// subregion map whose labels are cohort-wide (a single case may not touch
/// every cluster).
pub fn propagate_labels(
    clustering: &CohortClustering,
    labeling: &Labeling,
    descriptors: &[RegionDescriptor],
) -> Result<Labeling> {
    if descriptors.len() != clustering.assignment.len() {
        return Err(Error::InvalidInput(format!(
            "{} descriptors for {} cluster assignments",
            descriptors.len(),
            clustering.assignment.len()
        )));
    }
    let n = labeling.num_regions();
    let mut map = vec![-1i32; n];
    for (d, &cluster) in descriptors.iter().zip(clustering.assignment.iter()) {
        if d.region_id >= n {
            return Err(Error::InvalidInput(format!(
                "descriptor region {} outside labeling with {} regions",
                d.region_id, n
            )));
        }
        map[d.region_id] = cluster as i32;
    }
    let labels: Vec<i32> = labeling
        .labels()
        .iter()
        .map(|&l| if l < 0 { BACKGROUND } else { map[l as usize] })
        .collect();
    if labels.iter().any(|&l| l < 0 && l != BACKGROUND) {
        return Err(Error::InvalidInput(
            "labeling region without descriptor".into(),
        ));
    }
    Labeling::with_region_count(&labeling.dims(), labels, clustering.k)
}
